//! Randomized check batteries with their own oracles, shared by the CLI and
//! the test suites.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::bcp::{bcp_ratio, validate_bcp_query, BcpQuery};
use super::graph::{check_log2_budget, eval_value_bruteforce, eval_value_contraction, OrderedMultigraph, TensorLabeling};
use super::lemma::{alt_cycle_component_bound_check, random_alt_cycles};
use super::tensor::DenseTensor;
use super::wick::{wick_expectation, wick_pairings};
use crate::ensembles::{gaussian_vector, RngStream};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatteryReport {
    pub name: String,
    pub instances: usize,
    pub passed: usize,
    /// Largest error statistic observed (meaning depends on the battery).
    pub worst: f64,
    pub detail: String,
}

impl BatteryReport {
    pub fn ok(&self) -> bool {
        self.passed == self.instances
    }
}

fn uniform_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, b: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-b..b)).collect()
}

/// Dense with probability 2/3, otherwise identity or diagonal.
fn random_tensor<R: Rng + ?Sized>(rng: &mut R, order: usize, n: usize) -> DenseTensor {
    match rng.random_range(0..6) {
        0 => DenseTensor::identity(order, n),
        1 => DenseTensor::diagonal(order, uniform_vec(rng, n, 1.0)),
        _ => DenseTensor::dense(order, n, uniform_vec(rng, n.pow(order as u32), 1.0)).expect("sizes match"),
    }
}

/// Random tree on `vertices` vertices: vertex `v > 0` attaches to a uniform
/// earlier vertex; edge orders are shuffled. Needs `vertices >= 2`.
pub fn random_tree<R: Rng + ?Sized>(rng: &mut R, vertices: usize) -> OrderedMultigraph {
    let edges: Vec<(usize, usize)> = (1..vertices).map(|v| (rng.random_range(0..v), v)).collect();
    shuffled(rng, vertices, edges)
}

/// A Hamiltonian cycle plus `extra` random non-loop edges. Needs
/// `vertices >= 2`.
pub fn random_cyclic<R: Rng + ?Sized>(rng: &mut R, vertices: usize, extra: usize) -> OrderedMultigraph {
    let mut edges: Vec<(usize, usize)> = (0..vertices).map(|v| (v, (v + 1) % vertices)).collect();
    for _ in 0..extra {
        let a = rng.random_range(0..vertices);
        let b = (a + rng.random_range(1..vertices)) % vertices;
        edges.push((a, b));
    }
    shuffled(rng, vertices, edges)
}

fn shuffled<R: Rng + ?Sized>(rng: &mut R, vertices: usize, edges: Vec<(usize, usize)>) -> OrderedMultigraph {
    let mut g = OrderedMultigraph::from_edges(vertices, edges).expect("generated graphs are valid");
    for o in &mut g.order {
        o.shuffle(rng);
    }
    g
}

fn random_labeling<R: Rng + ?Sized>(rng: &mut R, g: &OrderedMultigraph, n: usize) -> TensorLabeling {
    let ts = (0..g.n_vertices).map(|v| random_tensor(rng, g.degree(v), n)).collect();
    TensorLabeling::new(g, ts, n).expect("orders match degrees")
}

fn rel_err(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(b.abs())
    }
}

/// Elimination vs brute force on random trees (2..=7 vertices) and random
/// cyclic multigraphs (3..=5 vertices, up to 3 extra edges), `n ≤ max_n`.
pub fn contraction_battery(trees: usize, cyclic: usize, max_n: usize, tol: f64, stream: RngStream) -> Result<BatteryReport> {
    let mut rng = stream.rng();
    let max_n = max_n.max(2);
    let mut worst: f64 = 0.0;
    let mut passed = 0;
    for i in 0..trees + cyclic {
        let g = if i < trees {
            let v = rng.random_range(2..=7);
            random_tree(&mut rng, v)
        } else {
            let v = rng.random_range(3..=5);
            let extra = rng.random_range(0..=3);
            random_cyclic(&mut rng, v, extra)
        };
        let n = rng.random_range(2..=max_n);
        // refuse before allocating: a vertex tensor never has more entries than the index space
        check_log2_budget(g.n_edges(), n, "contraction battery instance")?;
        let l = random_labeling(&mut rng, &g, n);
        let b = eval_value_bruteforce(&g, &l, n)?;
        let c = eval_value_contraction(&g, &l, n)?;
        let e = rel_err(b, c);
        worst = worst.max(e);
        if e <= tol {
            passed += 1;
        }
    }
    Ok(BatteryReport {
        name: "contraction_vs_bruteforce".into(),
        instances: trees + cyclic,
        passed,
        worst,
        detail: format!("{trees} trees, {cyclic} cyclic graphs, n ≤ {max_n}, relative tolerance {tol:e}"),
    })
}

/// Three random `n×n` matrices on a 3-cycle against `tr(ABC)`.
pub fn triangle_trace_check(n: usize, stream: RngStream) -> Result<f64> {
    let mut rng = stream.rng();
    let mats: Vec<DMatrix<f64>> = (0..3).map(|_| DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))).collect();
    let g = OrderedMultigraph::new(3, vec![(2, 0), (0, 1), (1, 2)], vec![vec![0, 1], vec![1, 2], vec![2, 0]])?;
    let ts = mats.iter().map(DenseTensor::matrix).collect::<Result<Vec<_>>>()?;
    let l = TensorLabeling::new(&g, ts, n)?;
    let want = (&mats[0] * &mats[1] * &mats[2]).trace();
    let b = eval_value_bruteforce(&g, &l, n)?;
    let c = eval_value_contraction(&g, &l, n)?;
    Ok(rel_err(b, want).max(rel_err(c, want)))
}

/// Monte-Carlo estimate of `E Σ_r ∏_ℓ ⟨a_r^ℓ, ξ_{σ(ℓ)}⟩` and its standard
/// error; chunk `c` of 10⁴ samples draws from `stream.substream(c)`.
pub fn wick_monte_carlo(cp: &[Vec<DVector<f64>>], sigma: &[usize], samples: usize, stream: RngStream) -> (f64, f64) {
    const CHUNK: usize = 10_000;
    let n = cp[0][0].len();
    let streams = sigma.iter().max().map_or(0, |&s| s + 1);
    let chunks = samples.div_ceil(CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream.substream(c as u64).rng();
            let count = CHUNK.min(samples - c * CHUNK);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let xi: Vec<DVector<f64>> = (0..streams).map(|_| gaussian_vector(&mut rng, n)).collect();
                let v: f64 = cp.iter().map(|t| t.iter().zip(sigma).map(|(a, &s)| a.dot(&xi[s])).product::<f64>()).sum();
                s1 += v;
                s2 += v * v;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let k = samples as f64;
    let mean = s1 / k;
    let var = (s2 / k - mean * mean).max(0.0) * k / (k - 1.0).max(1.0);
    (mean, (var / k).sqrt())
}

/// Wick's rule against Monte Carlo on `instances` random rank-2 CP tensors
/// with admissible stream labels (`d ∈ {2, 4, 6}`, `n ≤ 5`), plus `odd`
/// labelings with an odd stream multiplicity that must give exactly 0.
/// `worst` is the largest `|formula − MC| / SE`.
pub fn wick_battery(instances: usize, odd: usize, samples: usize, stream: RngStream) -> Result<BatteryReport> {
    let mut rng = stream.rng();
    let mut worst: f64 = 0.0;
    let mut passed = 0;
    for i in 0..instances + odd {
        let n = rng.random_range(2..=5);
        let (d, sigma) = if i < instances {
            let d = 2 * rng.random_range(1..=3);
            let t = rng.random_range(1..=3);
            let mut sigma: Vec<usize> = (0..d / 2).flat_map(|_| {
                let s = rng.random_range(0..t);
                [s, s]
            }).collect();
            sigma.shuffle(&mut rng);
            (d, sigma)
        } else {
            let d = rng.random_range(1..=6);
            let mut sigma: Vec<usize> = (0..d).map(|_| rng.random_range(0..2)).collect();
            if !wick_pairings(&sigma).is_empty() || d % 2 == 0 && sigma.iter().filter(|&&s| s == 0).count() % 2 == 0 {
                // force an odd multiplicity
                sigma[0] = 2;
            }
            (d, sigma)
        };
        let cp: Vec<Vec<DVector<f64>>> =
            (0..2).map(|_| (0..d).map(|_| DVector::from_vec(uniform_vec(&mut rng, n, 1.0))).collect()).collect();
        let t = DenseTensor::from_cp(&cp)?;
        let w = wick_expectation(&t, &sigma, n)?;
        if i < instances {
            let (mean, se) = wick_monte_carlo(&cp, &sigma, samples, stream.substream(1000 + i as u64));
            let z = if (w - mean).abs() == 0.0 { 0.0 } else { (w - mean).abs() / se };
            worst = worst.max(z);
            if z <= 3.0 {
                passed += 1;
            }
        } else if w == 0.0 {
            passed += 1;
        }
    }
    Ok(BatteryReport {
        name: "wick_vs_monte_carlo".into(),
        instances: instances + odd,
        passed,
        worst,
        detail: format!("{instances} admissible labelings at {samples} samples (3 SE), {odd} odd labelings (exact 0)"),
    })
}

/// A random query passing [`validate_bcp_query`]: `m ≤ 4` tensors, `ℓ ≤ 4`
/// indices each used 2 or 4 times.
pub fn random_valid_query<R: Rng + ?Sized>(rng: &mut R) -> BcpQuery {
    loop {
        let ell = rng.random_range(1..=4);
        let mut slots: Vec<usize> = (0..ell).flat_map(|i| std::iter::repeat_n(i, 2 * rng.random_range(1..=2))).collect();
        slots.shuffle(rng);
        let m = rng.random_range(1..=4.min(slots.len()));
        let mut cuts: Vec<usize> = (1..slots.len()).collect();
        cuts.shuffle(rng);
        let mut cuts: Vec<usize> = cuts.into_iter().take(m - 1).collect();
        cuts.sort_unstable();
        let mut orders = Vec::with_capacity(m);
        let mut start = 0;
        for c in cuts.into_iter().chain(std::iter::once(slots.len())) {
            orders.push(c - start);
            start = c;
        }
        let q = BcpQuery::new(orders, ell, slots).expect("generated query is well formed");
        if validate_bcp_query(&q).valid() {
            return q;
        }
    }
}

/// `bcp_ratio ≤ B^m` for diagonal tensors with entries in `(−B, B)` on random
/// valid queries. `worst` is the largest `ratio / B^m`.
pub fn bcp_diagonal_battery(instances: usize, stream: RngStream) -> Result<BatteryReport> {
    let mut rng = stream.rng();
    let mut worst: f64 = 0.0;
    let mut passed = 0;
    for _ in 0..instances {
        let q = random_valid_query(&mut rng);
        let n = rng.random_range(2..=8);
        let b: f64 = rng.random_range(0.5..2.0);
        let ts: Vec<DenseTensor> = q.orders.iter().map(|&k| DenseTensor::diagonal(k, uniform_vec(&mut rng, n, b))).collect();
        let r = bcp_ratio(&q, &ts, n)?;
        let bound = b.powi(q.m() as i32);
        worst = worst.max(r / bound);
        if r <= bound {
            passed += 1;
        }
    }
    Ok(BatteryReport {
        name: "bcp_diagonal_bound".into(),
        instances,
        passed,
        worst,
        detail: "diagonal tensors with |entries| < B, ratio ≤ B^m".into(),
    })
}

/// The component inequality on random alternating-cycle inputs (≤ 8
/// vertices, ≤ 4 cycles) plus the single-vertex base case, which must be an
/// equality. `worst` is the largest `lhs − rhs`.
pub fn graph_lemma_battery(instances: usize, stream: RngStream) -> Result<BatteryReport> {
    let mut rng = stream.rng();
    let base = alt_cycle_component_bound_check(&[vec![0, 0]])?;
    let mut passed = usize::from(base.equality);
    let mut worst = (base.lhs - base.rhs) as f64;
    for _ in 0..instances {
        let c = random_alt_cycles(&mut rng, 8, 4);
        let r = alt_cycle_component_bound_check(&c)?;
        worst = worst.max((r.lhs - r.rhs) as f64);
        if r.holds {
            passed += 1;
        }
    }
    Ok(BatteryReport {
        name: "graph_lemma".into(),
        instances: instances + 1,
        passed,
        worst,
        detail: format!("{instances} random inputs plus the base case (equality required)"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_batteries_pass() {
        let s = RngStream::new(1, 0);
        assert!(contraction_battery(10, 5, 5, 1e-10, s).unwrap().ok());
        assert!(triangle_trace_check(3, s).unwrap() < 1e-12);
        assert!(bcp_diagonal_battery(20, s).unwrap().ok());
        assert!(graph_lemma_battery(50, s).unwrap().ok());
        let w = wick_battery(3, 3, 20_000, s).unwrap();
        assert_eq!(w.instances, 6);
        assert!(w.passed >= 5, "{w:?}");
    }

    #[test]
    fn zero_instances_give_empty_reports() {
        let s = RngStream::new(1, 0);
        let r = contraction_battery(0, 0, 4, 1e-10, s).unwrap();
        assert_eq!((r.instances, r.passed), (0, 0));
        assert!(r.ok());
    }

    #[test]
    fn random_queries_are_valid() {
        let mut rng = RngStream::new(2, 0).rng();
        for _ in 0..50 {
            assert!(validate_bcp_query(&random_valid_query(&mut rng)).valid());
        }
    }
}
