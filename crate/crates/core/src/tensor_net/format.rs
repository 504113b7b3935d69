//! Text format for tensor networks:
//!
//! ```text
//! # comments and blank lines are ignored
//! vertices 3
//! dim 2
//! vertex 0 edges 0 1 tensor dense 1 2 3 4
//! vertex 1 edges 1 2 tensor identity
//! vertex 2 edges 2 0 tensor dense @c.txt
//! ```
//!
//! Each edge id must be listed by exactly two vertices, which become its
//! endpoints. Tensor tags are `identity`, `diagonal v..`, `vector v..`,
//! `dense v..`, `dense @path` (whitespace-separated values in a file relative
//! to the network file) and `alternating ROWS COLS`. Dense values are row-major.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::graph::{OrderedMultigraph, TensorLabeling};
use super::tensor::{alternating_tensor, DenseTensor};
use crate::error::{Error, Result};

/// Serializable description of a tensor of a given order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TensorSpec {
    Identity { order: usize },
    Diagonal { order: usize, values: Vec<f64> },
    Dense { order: usize, values: Vec<f64> },
    Alternating { order: usize, rows: usize, cols: usize },
}

impl TensorSpec {
    pub fn build(&self, dim: usize) -> Result<DenseTensor> {
        let t = match self {
            TensorSpec::Identity { order } => DenseTensor::identity(*order, dim),
            TensorSpec::Diagonal { order, values } => DenseTensor::diagonal(*order, values.clone()),
            TensorSpec::Dense { order, values } => DenseTensor::dense(*order, dim, values.clone())?,
            TensorSpec::Alternating { order, rows, cols } => alternating_tensor(*order, *rows, *cols)?,
        };
        if t.dim != dim {
            return Err(Error::InvalidSpec(format!("tensor has dimension {}, expected {dim}", t.dim)));
        }
        Ok(t)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkFile {
    pub graph: OrderedMultigraph,
    pub labeling: TensorLabeling,
    pub dim: usize,
}

fn perr(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

fn parse_values(tokens: &[&str], line: usize) -> Result<Vec<f64>> {
    tokens.iter().map(|t| t.parse::<f64>().map_err(|e| perr(line, format!("bad number `{t}`: {e}")))).collect()
}

/// Parses the network format; `dim_override` replaces the `dim` line and
/// `base` resolves `@path` payloads.
pub fn parse_network(text: &str, dim_override: Option<usize>, base: Option<&Path>) -> Result<NetworkFile> {
    let mut n_vertices: Option<usize> = None;
    let mut dim = dim_override;
    let mut rows: Vec<(usize, usize, Vec<usize>, Vec<String>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tok: Vec<&str> = content.split_whitespace().collect();
        match tok[0] {
            "vertices" => {
                let v = tok.get(1).ok_or_else(|| perr(line, "missing vertex count"))?;
                n_vertices = Some(v.parse().map_err(|_| perr(line, format!("bad vertex count `{v}`")))?);
            }
            "dim" => {
                let v = tok.get(1).ok_or_else(|| perr(line, "missing dimension"))?;
                let d: usize = v.parse().map_err(|_| perr(line, format!("bad dimension `{v}`")))?;
                if dim_override.is_none() {
                    dim = Some(d);
                }
            }
            "vertex" => {
                let v: usize = tok.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| perr(line, "bad vertex id"))?;
                if tok.get(2) != Some(&"edges") {
                    return Err(perr(line, "expected `edges` after the vertex id"));
                }
                let tpos = tok.iter().position(|&t| t == "tensor").ok_or_else(|| perr(line, "missing `tensor`"))?;
                let edges = tok[3..tpos]
                    .iter()
                    .map(|t| t.parse::<usize>().map_err(|_| perr(line, format!("bad edge id `{t}`"))))
                    .collect::<Result<Vec<_>>>()?;
                let spec: Vec<String> = tok[tpos + 1..].iter().map(|s| s.to_string()).collect();
                if spec.is_empty() {
                    return Err(perr(line, "missing tensor tag"));
                }
                rows.push((line, v, edges, spec));
            }
            other => return Err(perr(line, format!("unknown directive `{other}`"))),
        }
    }
    let nv = n_vertices.ok_or_else(|| Error::Parse("missing `vertices` line".into()))?;
    let dim = dim.ok_or_else(|| Error::Parse("missing `dim` line".into()))?;
    let mut order: Vec<Option<Vec<usize>>> = vec![None; nv];
    let mut specs: Vec<Option<(usize, Vec<String>)>> = vec![None; nv];
    let mut ends: Vec<Vec<usize>> = Vec::new();
    for (line, v, edges, spec) in rows {
        if v >= nv {
            return Err(perr(line, format!("vertex {v} outside 0..{nv}")));
        }
        if order[v].is_some() {
            return Err(perr(line, format!("vertex {v} defined twice")));
        }
        for &e in &edges {
            if ends.len() <= e {
                ends.resize(e + 1, Vec::new());
            }
            ends[e].push(v);
        }
        order[v] = Some(edges);
        specs[v] = Some((line, spec));
    }
    let mut edge_list = Vec::with_capacity(ends.len());
    for (e, vs) in ends.iter().enumerate() {
        match vs.as_slice() {
            [a, b] => edge_list.push((*a, *b)),
            _ => return Err(Error::Parse(format!("edge {e} is listed by {} vertices, expected 2", vs.len()))),
        }
    }
    let order: Vec<Vec<usize>> = order
        .into_iter()
        .enumerate()
        .map(|(v, o)| o.ok_or_else(|| Error::Parse(format!("vertex {v} is not defined"))))
        .collect::<Result<_>>()?;
    let graph = OrderedMultigraph::new(nv, edge_list, order)?;
    let mut tensors = Vec::with_capacity(nv);
    for (v, s) in specs.into_iter().enumerate() {
        let (line, spec) = s.expect("every vertex defined");
        let k = graph.degree(v);
        let args: Vec<&str> = spec[1..].iter().map(|s| s.as_str()).collect();
        let ts = match spec[0].as_str() {
            "identity" => TensorSpec::Identity { order: k },
            "diagonal" => TensorSpec::Diagonal { order: k, values: parse_values(&args, line)? },
            "vector" => {
                if k != 1 {
                    return Err(perr(line, format!("vector label on a vertex of degree {k}")));
                }
                TensorSpec::Dense { order: 1, values: parse_values(&args, line)? }
            }
            "dense" => {
                let values = match args.first() {
                    Some(a) if a.starts_with('@') => {
                        let rel = &a[1..];
                        let path = base.map_or_else(|| Path::new(rel).to_path_buf(), |b| b.join(rel));
                        let body = std::fs::read_to_string(&path)?;
                        let toks: Vec<&str> = body.split_whitespace().collect();
                        parse_values(&toks, line)?
                    }
                    _ => parse_values(&args, line)?,
                };
                TensorSpec::Dense { order: k, values }
            }
            "alternating" => {
                let nums = parse_values(&args, line)?;
                if nums.len() != 2 {
                    return Err(perr(line, "alternating needs ROWS COLS"));
                }
                TensorSpec::Alternating { order: k, rows: nums[0] as usize, cols: nums[1] as usize }
            }
            other => return Err(perr(line, format!("unknown tensor tag `{other}`"))),
        };
        tensors.push(ts.build(dim).map_err(|e| perr(line, e))?);
    }
    let labeling = TensorLabeling::new(&graph, tensors, dim)?;
    Ok(NetworkFile { graph, labeling, dim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_net::eval_value_bruteforce;

    const TRIANGLE: &str = "
        # trace of A B C
        vertices 3
        dim 2
        vertex 0 edges 0 1 tensor dense 1 2 3 4
        vertex 1 edges 1 2 tensor identity
        vertex 2 edges 2 0 tensor diagonal 1 -1
    ";

    #[test]
    fn parses_and_evaluates() {
        let f = parse_network(TRIANGLE, None, None).unwrap();
        assert_eq!(f.graph.edges, vec![(0, 2), (0, 1), (1, 2)]);
        // tr(A · I · diag(1, −1)) = 1 − 4
        assert_eq!(eval_value_bruteforce(&f.graph, &f.labeling, f.dim).unwrap(), -3.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = TRIANGLE.replace("tensor identity", "tensor bogus");
        let e = parse_network(&bad, None, None).unwrap_err().to_string();
        assert!(e.contains("line 6"), "{e}");
        let dangling = "vertices 2\ndim 2\nvertex 0 edges 0 tensor vector 1 2\nvertex 1 edges 1 tensor vector 1 2\n";
        assert!(parse_network(dangling, None, None).is_err());
    }

    #[test]
    fn dense_payload_from_file() {
        let dir = std::env::temp_dir().join(format!("amp-lab-net-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("a.txt"), "1 2\n3 4\n").unwrap();
        let text = TRIANGLE.replace("dense 1 2 3 4", "dense @a.txt");
        let f = parse_network(&text, None, Some(&dir)).unwrap();
        assert_eq!(eval_value_bruteforce(&f.graph, &f.labeling, 2).unwrap(), -3.0);
        std::fs::remove_dir_all(dir).ok();
    }
}
