use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Expectations over Gaussian surrogates using closed-form divergences.
    Analytic,
    /// Expectations over Gaussian surrogates with probe divergences.
    MonteCarlo,
    /// Divergences evaluated at realized AMP iterates.
    EstimatedFromData,
}

/// Onsager coefficients `b_{ts}` (`s < t`) and, for rectangular AMP,
/// `a_{ts}` (`s ≤ t`). Indices are 1-based as in the recursions.
#[derive(Clone, Debug, PartialEq)]
pub struct OnsagerSchedule {
    pub b: BTreeMap<(usize, usize), f64>,
    pub a: BTreeMap<(usize, usize), f64>,
    /// Monte-Carlo standard errors, zero when exact.
    pub b_se: BTreeMap<(usize, usize), f64>,
    pub a_se: BTreeMap<(usize, usize), f64>,
    pub provenance: Provenance,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoefEntry {
    pub kind: char,
    pub t: usize,
    pub s: usize,
    pub value: f64,
    pub std_err: f64,
}

impl OnsagerSchedule {
    pub fn new(provenance: Provenance) -> Self {
        Self { b: BTreeMap::new(), a: BTreeMap::new(), b_se: BTreeMap::new(), a_se: BTreeMap::new(), provenance }
    }

    pub fn b(&self, t: usize, s: usize) -> Option<f64> {
        self.b.get(&(t, s)).copied()
    }

    pub fn a(&self, t: usize, s: usize) -> Option<f64> {
        self.a.get(&(t, s)).copied()
    }

    pub fn set_b(&mut self, t: usize, s: usize, value: f64, std_err: f64) {
        debug_assert!(s < t);
        self.b.insert((t, s), value);
        self.b_se.insert((t, s), std_err);
    }

    pub fn set_a(&mut self, t: usize, s: usize, value: f64, std_err: f64) {
        debug_assert!(s <= t);
        self.a.insert((t, s), value);
        self.a_se.insert((t, s), std_err);
    }

    /// Flat list for export, `b` entries first.
    pub fn entries(&self) -> Vec<CoefEntry> {
        let b = self.b.iter().map(|(&(t, s), &v)| CoefEntry { kind: 'b', t, s, value: v, std_err: self.b_se[&(t, s)] });
        let a = self.a.iter().map(|(&(t, s), &v)| CoefEntry { kind: 'a', t, s, value: v, std_err: self.a_se[&(t, s)] });
        b.chain(a).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.b.values().chain(self.a.values()).all(|v| v.is_finite())
    }
}
