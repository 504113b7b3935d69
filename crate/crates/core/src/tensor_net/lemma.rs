use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Component counts for a union of closed walks whose edges alternate
/// red, blue, red, ...
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CycleReport {
    pub vertices: usize,
    pub edges: usize,
    pub cycles: usize,
    pub c_red: usize,
    pub c_blue: usize,
    pub c_all: usize,
    /// `c(G_R) + c(G_B)`.
    pub lhs: i64,
    /// `|E|/2 − m + 2c(G)` with `m` the number of cycles.
    pub rhs: i64,
    pub holds: bool,
    pub equality: bool,
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
    }
    fn count(&mut self) -> usize {
        (0..self.0.len()).filter(|&x| self.find(x) == x).count()
    }
}

/// Each cycle `[v_0, .., v_{L−1}]` has edges `(v_i, v_{i+1 mod L})`, red for
/// even `i` and blue for odd `i`; self-loops are allowed. Every cycle must be
/// nonempty of even length and every vertex must end with even red and blue
/// degree.
pub fn alt_cycle_component_bound_check(cycles: &[Vec<usize>]) -> Result<CycleReport> {
    let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
    for c in cycles {
        if c.is_empty() || c.len() % 2 == 1 {
            return Err(Error::InvalidSpec(format!("cycle {c:?} must be nonempty with even length")));
        }
        for &v in c {
            let next = ids.len();
            ids.entry(v).or_insert(next);
        }
    }
    let nv = ids.len();
    let mut red_deg = vec![0usize; nv];
    let mut blue_deg = vec![0usize; nv];
    let (mut red, mut blue, mut all) = (Dsu((0..nv).collect()), Dsu((0..nv).collect()), Dsu((0..nv).collect()));
    let mut edges = 0;
    for c in cycles {
        for i in 0..c.len() {
            let (a, b) = (ids[&c[i]], ids[&c[(i + 1) % c.len()]]);
            let (deg, dsu) = if i % 2 == 0 { (&mut red_deg, &mut red) } else { (&mut blue_deg, &mut blue) };
            deg[a] += 1;
            deg[b] += 1;
            dsu.union(a, b);
            all.union(a, b);
            edges += 1;
        }
    }
    if let Some(v) = (0..nv).find(|&v| red_deg[v] % 2 == 1 || blue_deg[v] % 2 == 1) {
        let label = ids.iter().find(|(_, &i)| i == v).map(|(&k, _)| k).unwrap_or(v);
        return Err(Error::InvalidSpec(format!(
            "vertex {label} has red degree {} and blue degree {}; both must be even",
            red_deg[v], blue_deg[v]
        )));
    }
    let (c_red, c_blue, c_all) = (red.count(), blue.count(), all.count());
    let lhs = (c_red + c_blue) as i64;
    let rhs = (edges / 2) as i64 - cycles.len() as i64 + 2 * c_all as i64;
    Ok(CycleReport { vertices: nv, edges, cycles: cycles.len(), c_red, c_blue, c_all, lhs, rhs, holds: lhs <= rhs, equality: lhs == rhs })
}

/// A random valid input: every vertex in `0..vertices` appears an even
/// number of times in total, spread over at most `max_cycles` cycles of even
/// length.
pub fn random_alt_cycles<R: Rng + ?Sized>(rng: &mut R, max_vertices: usize, max_cycles: usize) -> Vec<Vec<usize>> {
    let nv = rng.random_range(1..=max_vertices.max(1));
    let mut visits: Vec<usize> = Vec::new();
    for v in 0..nv {
        let reps = 2 * rng.random_range(1..=2);
        visits.extend(std::iter::repeat_n(v, reps));
    }
    visits.shuffle(rng);
    let pairs = visits.len() / 2;
    let k = rng.random_range(1..=max_cycles.max(1).min(pairs));
    // k − 1 distinct cut points among the pair boundaries
    let mut cuts: Vec<usize> = (1..pairs).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts.into_iter().take(k - 1).map(|c| 2 * c).collect();
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for c in cuts.into_iter().chain(std::iter::once(visits.len())) {
        out.push(visits[start..c].to_vec());
        start = c;
    }
    out
}
