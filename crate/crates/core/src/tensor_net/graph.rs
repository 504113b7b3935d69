use serde::Serialize;

use super::tensor::{advance, checked_pow, DenseTensor};
use crate::error::{dim_err, Error, Result};

/// Brute-force enumeration is refused above `2^30` assignments.
pub const BRUTE_FORCE_LOG2_BUDGET: f64 = 30.0;
/// Largest intermediate table allowed during elimination.
pub const FACTOR_LIMIT: usize = 1 << 24;

/// A multigraph without self-loops where every vertex lists its incident
/// edges in a fixed order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrderedMultigraph {
    pub n_vertices: usize,
    /// Endpoints of edge `e`.
    pub edges: Vec<(usize, usize)>,
    /// `order[v]` lists the edge ids at `v`; slot `ℓ` of `T_v` reads edge
    /// `order[v][ℓ]`.
    pub order: Vec<Vec<usize>>,
}

impl OrderedMultigraph {
    pub fn new(n_vertices: usize, edges: Vec<(usize, usize)>, order: Vec<Vec<usize>>) -> Result<Self> {
        if order.len() != n_vertices {
            return dim_err(format!("{n_vertices} vertices but {} edge orders", order.len()));
        }
        let mut seen = vec![0usize; edges.len()];
        for (e, &(u, v)) in edges.iter().enumerate() {
            if u >= n_vertices || v >= n_vertices {
                return Err(Error::InvalidSpec(format!("edge {e} has an endpoint outside 0..{n_vertices}")));
            }
            if u == v {
                return Err(Error::InvalidSpec(format!("edge {e} is a self-loop at vertex {u}")));
            }
        }
        for (v, list) in order.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::InvalidSpec(format!("vertex {v} is isolated")));
            }
            for &e in list {
                let Some(&(a, b)) = edges.get(e) else {
                    return Err(Error::InvalidSpec(format!("vertex {v} lists unknown edge {e}")));
                };
                if a != v && b != v {
                    return Err(Error::InvalidSpec(format!("vertex {v} lists edge {e} which is not incident to it")));
                }
                seen[e] += 1;
            }
        }
        if let Some(e) = seen.iter().position(|&c| c != 2) {
            return Err(Error::InvalidSpec(format!("edge {e} must appear once at each endpoint, appears {} times", seen[e])));
        }
        Ok(Self { n_vertices, edges, order })
    }

    /// Edge orders taken by increasing edge id.
    pub fn from_edges(n_vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut order = vec![Vec::new(); n_vertices];
        for (e, &(u, v)) in edges.iter().enumerate() {
            if u < n_vertices && v < n_vertices {
                order[u].push(e);
                if v != u {
                    order[v].push(e);
                }
            }
        }
        Self::new(n_vertices, edges, order)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.order[v].len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Vertices and edges of `other` are appended with shifted ids.
    pub fn disjoint_union(&self, other: &Self) -> Self {
        let (nv, ne) = (self.n_vertices, self.edges.len());
        let mut edges = self.edges.clone();
        edges.extend(other.edges.iter().map(|&(u, v)| (u + nv, v + nv)));
        let mut order = self.order.clone();
        order.extend(other.order.iter().map(|l| l.iter().map(|e| e + ne).collect()));
        Self { n_vertices: nv + other.n_vertices, edges, order }
    }
}

/// One tensor per vertex, of order equal to the vertex degree.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TensorLabeling {
    pub tensors: Vec<DenseTensor>,
}

impl TensorLabeling {
    pub fn new(g: &OrderedMultigraph, tensors: Vec<DenseTensor>, n: usize) -> Result<Self> {
        if tensors.len() != g.n_vertices {
            return dim_err(format!("{} vertices but {} tensors", g.n_vertices, tensors.len()));
        }
        for (v, t) in tensors.iter().enumerate() {
            if t.order != g.degree(v) {
                return dim_err(format!("vertex {v} has degree {} but its tensor has order {}", g.degree(v), t.order));
            }
            if t.dim != n {
                return dim_err(format!("vertex {v} tensor has dimension {}, expected {n}", t.dim));
            }
        }
        Ok(Self { tensors })
    }

    pub fn disjoint_union(&self, other: &Self) -> Self {
        Self { tensors: self.tensors.iter().chain(&other.tensors).cloned().collect() }
    }
}

pub(crate) fn check_log2_budget(count: usize, n: usize, what: &str) -> Result<()> {
    let cost = count as f64 * (n.max(1) as f64).log2();
    if cost > BRUTE_FORCE_LOG2_BUDGET + 1e-9 {
        return Err(Error::Budget(format!("{what}: {count}·log2({n}) = {cost:.2} exceeds {BRUTE_FORCE_LOG2_BUDGET}")));
    }
    Ok(())
}

fn check_labeling(g: &OrderedMultigraph, l: &TensorLabeling, n: usize) -> Result<()> {
    TensorLabeling::new(g, l.tensors.clone(), n).map(|_| ())
}

/// `Σ_{i ∈ [n]^E} ∏_v T_v[i_{e_1(v)}, .., i_{e_deg(v)}]` by enumeration.
pub fn eval_value_bruteforce(g: &OrderedMultigraph, l: &TensorLabeling, n: usize) -> Result<f64> {
    check_labeling(g, l, n)?;
    let ne = g.n_edges();
    check_log2_budget(ne, n, "tensor network enumeration")?;
    let total = checked_pow(n, ne).ok_or_else(|| Error::Budget("assignment count overflows".into()))?;
    let mut assign = vec![0usize; ne];
    let mut slots: Vec<Vec<usize>> = g.order.iter().map(|o| vec![0; o.len()]).collect();
    let mut sum = 0.0;
    for _ in 0..total {
        let mut prod = 1.0;
        for (v, t) in l.tensors.iter().enumerate() {
            for (s, &e) in slots[v].iter_mut().zip(&g.order[v]) {
                *s = assign[e];
            }
            prod *= t.entry(&slots[v]);
            if prod == 0.0 {
                break;
            }
        }
        sum += prod;
        advance(&mut assign, n);
    }
    Ok(sum)
}

/// A table over distinct index variables, row-major in `vars` order.
#[derive(Clone, Debug)]
pub(crate) struct Factor {
    pub vars: Vec<usize>,
    pub data: Vec<f64>,
}

impl Factor {
    /// Tensor whose slot `ℓ` reads variable `slot_vars[ℓ]`; repeated
    /// variables restrict to the corresponding diagonal.
    pub fn from_tensor(t: &DenseTensor, slot_vars: &[usize], n: usize) -> Result<Self> {
        let mut vars: Vec<usize> = Vec::new();
        for &v in slot_vars {
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        let pos: Vec<usize> = slot_vars.iter().map(|v| vars.iter().position(|w| w == v).unwrap()).collect();
        let size = checked_pow(n, vars.len()).filter(|&s| s <= FACTOR_LIMIT).ok_or_else(|| {
            Error::Budget(format!("factor over {} variables at n = {n} exceeds {FACTOR_LIMIT} entries", vars.len()))
        })?;
        let mut assign = vec![0usize; vars.len()];
        let mut idx = vec![0usize; slot_vars.len()];
        let mut data = Vec::with_capacity(size);
        for _ in 0..size {
            for (i, &p) in idx.iter_mut().zip(&pos) {
                *i = assign[p];
            }
            data.push(t.entry(&idx));
            advance(&mut assign, n);
        }
        Ok(Self { vars, data })
    }
}

/// Sums the product of `factors` over every variable by greedy elimination:
/// repeatedly remove the variable whose merged factor is smallest (lowest id
/// on ties).
pub(crate) fn contract_factors(mut factors: Vec<Factor>, n: usize) -> Result<f64> {
    loop {
        let mut live: Vec<usize> = factors.iter().flat_map(|f| f.vars.iter().copied()).collect();
        live.sort_unstable();
        live.dedup();
        let Some(&first) = live.first() else { break };
        let merged_vars = |x: usize| -> Vec<usize> {
            let mut u: Vec<usize> =
                factors.iter().filter(|f| f.vars.contains(&x)).flat_map(|f| f.vars.iter().copied()).filter(|&w| w != x).collect();
            u.sort_unstable();
            u.dedup();
            u
        };
        let mut best = first;
        let mut best_len = usize::MAX;
        for &x in &live {
            let len = merged_vars(x).len();
            if len < best_len {
                best = x;
                best_len = len;
            }
        }
        let out_vars = merged_vars(best);
        let size = checked_pow(n, out_vars.len()).filter(|&s| s <= FACTOR_LIMIT).ok_or_else(|| {
            Error::Budget(format!("elimination needs a table over {} variables at n = {n}", out_vars.len()))
        })?;
        let (involved, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.vars.contains(&best));
        // Position of each factor variable in the combined assignment
        // `out_vars ++ [best]`.
        let all: Vec<usize> = out_vars.iter().copied().chain(std::iter::once(best)).collect();
        let maps: Vec<Vec<usize>> =
            involved.iter().map(|f| f.vars.iter().map(|v| all.iter().position(|w| w == v).unwrap()).collect()).collect();
        let mut assign = vec![0usize; all.len()];
        let mut data = Vec::with_capacity(size);
        for _ in 0..size {
            let mut acc = 0.0;
            for x in 0..n {
                assign[all.len() - 1] = x;
                let mut prod = 1.0;
                for (f, map) in involved.iter().zip(&maps) {
                    let idx = map.iter().fold(0, |a, &p| a * n + assign[p]);
                    prod *= f.data[idx];
                    if prod == 0.0 {
                        break;
                    }
                }
                acc += prod;
            }
            data.push(acc);
            let k = out_vars.len();
            advance(&mut assign[..k], n);
        }
        factors = rest;
        factors.push(Factor { vars: out_vars, data });
    }
    Ok(factors.iter().map(|f| f.data[0]).product())
}

/// Same value as [`eval_value_bruteforce`] by variable elimination over the
/// edges. Fails with a budget error when an intermediate table would exceed
/// [`FACTOR_LIMIT`] entries.
pub fn eval_value_contraction(g: &OrderedMultigraph, l: &TensorLabeling, n: usize) -> Result<f64> {
    check_labeling(g, l, n)?;
    let factors = l
        .tensors
        .iter()
        .zip(&g.order)
        .map(|(t, o)| Factor::from_tensor(t, o, n))
        .collect::<Result<Vec<_>>>()?;
    contract_factors(factors, n)
}
