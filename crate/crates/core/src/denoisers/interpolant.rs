use crate::error::{Error, Result};

/// Piecewise-linear interpolant through `(knots[j], values[j])`, constant
/// outside the knot range.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneInterpolant {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    pub iota: f64,
}

impl MonotoneInterpolant {
    pub fn eval(&self, x: f64) -> f64 {
        let k = &self.knots;
        if x <= k[0] {
            return self.values[0];
        }
        if x >= k[k.len() - 1] {
            return self.values[k.len() - 1];
        }
        let j = k.partition_point(|&v| v <= x);
        let (x0, x1) = (k[j - 1], k[j]);
        let (y0, y1) = (self.values[j - 1], self.values[j]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Increment cap between consecutive knots, `g(s^{j−1}) + (s^j − s^{j−1})/ι`,
    /// evaluated exactly as during construction.
    pub fn cap(&self, j: usize) -> f64 {
        self.values[j - 1] + (self.knots[j] - self.knots[j - 1]) / self.iota
    }

    /// Checks monotonicity, the slope cap and knot domination against `d`.
    pub fn satisfies_constraints(&self, d: &[f64]) -> bool {
        self.values[0] == 0.0
            && (1..self.knots.len()).all(|j| {
                self.values[j] >= self.values[j - 1] && self.values[j] <= self.cap(j) && self.values[j] <= d[j - 1]
            })
    }
}

/// Greedy slope-capped fit: `g(s⁰) = 0` and
/// `g(s^j) = min(d^j, g(s^{j−1}) + (s^j − s^{j−1})/ι)` for `j = 1..M`.
///
/// `knots` holds `s⁰ < s¹ < … < s^M`; `d` holds `d¹ ≤ … ≤ d^M`, all ≥ 0.
pub fn lipschitz_monotone_approx(knots: &[f64], d: &[f64], iota: f64) -> Result<MonotoneInterpolant> {
    if !(iota > 0.0) {
        return Err(Error::InvalidParameter(format!("iota must be positive, got {iota}")));
    }
    if knots.len() != d.len() + 1 {
        return Err(Error::InvalidParameter(format!("need {} knots for {} targets, got {}", d.len() + 1, d.len(), knots.len())));
    }
    if knots.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("knots must be strictly increasing".into()));
    }
    if d.windows(2).any(|w| !(w[1] >= w[0])) || d.first().is_some_and(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidParameter("targets must be nonnegative and nondecreasing".into()));
    }
    let mut values = Vec::with_capacity(knots.len());
    values.push(0.0);
    for j in 1..knots.len() {
        let cap = values[j - 1] + (knots[j] - knots[j - 1]) / iota;
        values.push(d[j - 1].min(cap));
    }
    Ok(MonotoneInterpolant { knots: knots.to_vec(), values, iota })
}

/// Quantiles `j/count`, `j = 0..=count`, of the Marchenko–Pastur law with
/// ratio `gamma ∈ (0, 1]` (eigenvalues of `XXᵀ/N` for `X` of size
/// `γN × N` with unit-variance entries).
pub fn marchenko_pastur_quantiles(gamma: f64, count: usize) -> Result<Vec<f64>> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidParameter(format!("ratio must lie in (0, 1], got {gamma}")));
    }
    if count == 0 {
        return Err(Error::InvalidParameter("need at least one quantile".into()));
    }
    let a = (1.0 - gamma.sqrt()).powi(2);
    let b = (1.0 + gamma.sqrt()).powi(2);
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    let x_of = |th: f64| mid - half * th.cos();
    // With x = mid − half·cos θ the density element is
    // half² sin²θ / (2πγ x) dθ, which is bounded on [0, π].
    let panels = 200_000;
    let h = std::f64::consts::PI / panels as f64;
    let mut cdf = Vec::with_capacity(panels + 1);
    cdf.push(0.0);
    let mut acc = 0.0;
    for k in 0..panels {
        let th = (k as f64 + 0.5) * h;
        acc += half * half * th.sin().powi(2) / (2.0 * std::f64::consts::PI * gamma * x_of(th)) * h;
        cdf.push(acc);
    }
    let total = acc;
    let mut out = Vec::with_capacity(count + 1);
    for j in 0..=count {
        let q = j as f64 / count as f64 * total;
        let k = cdf.partition_point(|&c| c < q).clamp(1, panels);
        let (c0, c1) = (cdf[k - 1], cdf[k]);
        let frac = if c1 > c0 { (q - c0) / (c1 - c0) } else { 0.0 };
        let th = ((k - 1) as f64 + frac) * h;
        out.push(x_of(th));
    }
    out[0] = a;
    out[count] = b;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::RngStream;
    use rand::Rng;

    fn random_targets(m: usize, c0: f64, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 0).rng();
        let mut d: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..c0)).collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        d
    }

    #[test]
    fn zero_targets_give_zero() {
        let knots: Vec<f64> = (0..=10).map(|j| j as f64).collect();
        let g = lipschitz_monotone_approx(&knots, &[0.0; 10], 0.5).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
        assert_eq!(g.eval(3.7), 0.0);
    }

    #[test]
    fn single_knot_inactive_cap() {
        let g = lipschitz_monotone_approx(&[0.0, 1.0], &[0.2], 0.01).unwrap();
        assert_eq!(g.values[1], 0.2);
        assert!((g.eval(0.5) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_unsorted_inputs() {
        assert!(lipschitz_monotone_approx(&[0.0, 2.0, 1.0], &[0.1, 0.2], 1.0).is_err());
        assert!(lipschitz_monotone_approx(&[0.0, 1.0, 2.0], &[0.3, 0.2], 1.0).is_err());
        assert!(lipschitz_monotone_approx(&[0.0, 1.0, 2.0], &[-0.1, 0.2], 1.0).is_err());
        assert!(lipschitz_monotone_approx(&[0.0, 1.0], &[0.1], 0.0).is_err());
        assert!(lipschitz_monotone_approx(&[0.0, 1.0], &[0.1, 0.2], 1.0).is_err());
    }

    #[test]
    fn mp_quantiles_are_sorted_and_cover_support() {
        let q = marchenko_pastur_quantiles(0.5, 100).unwrap();
        assert!(q.windows(2).all(|w| w[1] > w[0]));
        assert!((q[0] - (1.0 - 0.5f64.sqrt()).powi(2)).abs() < 1e-12);
        assert!((q[100] - (1.0 + 0.5f64.sqrt()).powi(2)).abs() < 1e-12);
        // the law has mean 1
        let mean = q[1..].iter().sum::<f64>() / 100.0;
        assert!((mean - 1.0).abs() < 0.03, "{mean}");
    }

    #[test]
    fn mp_median_matches_sampled_spectrum() {
        let q = marchenko_pastur_quantiles(1.0, 2).unwrap();
        let n = 300;
        let mut rng = RngStream::new(5, 0).rng();
        let x = crate::ensembles::gaussian_matrix(&mut rng, n, n);
        let mut ev: Vec<f64> = (&x * x.transpose() / n as f64).symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ev[n / 2] - q[1]).abs() < 0.05, "{} vs {}", ev[n / 2], q[1]);
    }

    #[test]
    fn error_decreases_with_iota() {
        let m = 500;
        let knots = marchenko_pastur_quantiles(0.5, m).unwrap();
        for seed in 0..5 {
            let d = random_targets(m, 20.0, seed);
            let mse = |iota: f64| {
                let g = lipschitz_monotone_approx(&knots, &d, iota).unwrap();
                assert!(g.satisfies_constraints(&d));
                (1..=m).map(|j| (g.values[j] - d[j - 1]).powi(2)).sum::<f64>() / m as f64
            };
            let (e1, e2, e3) = (mse(1.0), mse(0.1), mse(0.01));
            assert!(e1 >= e2 && e2 >= e3 && e1 > e3, "seed {seed}: {e1} {e2} {e3}");
        }
    }
}
