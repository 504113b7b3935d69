//! Seeded random matrices, signals and noise.
//!
//! Wigner matrices are normalised so that off-diagonal entries have variance
//! `1/n`; rectangular (Ginibre-type) matrices have entry variance `1/m` where
//! `m` is the number of rows. Every sampler takes an [`RngStream`] so that a
//! given `(seed, stream_id)` reproduces the exact same output.

mod io;
mod rng;

pub use io::{read_matrix, read_vector, write_matrix, write_vector};
pub use rng::{gaussian_matrix, gaussian_vector, RngStream};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};

/// Amplitude cap of the synthetic smooth image: `‖θ*‖_∞ ≤ SMOOTH_IMAGE_CAP`.
pub const SMOOTH_IMAGE_CAP: f64 = 1.0;

/// Number of cosine modes per axis in the smooth image generator.
const SMOOTH_IMAGE_MODES: usize = 6;

/// Standardised entry law: mean 0, variance 1, all moments finite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryDist {
    Gaussian,
    Rademacher,
    /// Uniform on `[-√3, √3]`.
    Uniform,
}

impl EntryDist {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            EntryDist::Gaussian => StandardNormal.sample(rng),
            EntryDist::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            EntryDist::Uniform => {
                let s3 = 3f64.sqrt();
                rng.random_range(-s3..s3)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EntryDist::Gaussian => "gaussian",
            EntryDist::Rademacher => "rademacher",
            EntryDist::Uniform => "uniform",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(EntryDist::Gaussian),
            "rademacher" => Ok(EntryDist::Rademacher),
            "uniform" => Ok(EntryDist::Uniform),
            other => Err(Error::Parse(format!("unknown entry distribution `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum EnsembleKind {
    Goe,
    WignerIid(EntryDist),
    GinibreIid(EntryDist),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub rows: usize,
    pub cols: usize,
}

impl EnsembleSpec {
    pub fn goe(n: usize) -> Self {
        Self { kind: EnsembleKind::Goe, rows: n, cols: n }
    }

    pub fn wigner(n: usize, dist: EntryDist) -> Self {
        Self { kind: EnsembleKind::WignerIid(dist), rows: n, cols: n }
    }

    pub fn ginibre(rows: usize, cols: usize, dist: EntryDist) -> Self {
        Self { kind: EnsembleKind::GinibreIid(dist), rows, cols }
    }
}

/// Symmetric Wigner matrix: GOE (`N(0,1/n)` off the diagonal, `N(0,2/n)` on
/// it) or i.i.d. `entry_dist/√n` on and above the diagonal.
///
/// Entries are drawn row by row over the upper triangle and mirrored, so the
/// result is bitwise symmetric.
pub fn sample_wigner(spec: &EnsembleSpec, stream: RngStream) -> Result<DMatrix<f64>> {
    let dist = match spec.kind {
        EnsembleKind::Goe => None,
        EnsembleKind::WignerIid(d) => Some(d),
        EnsembleKind::GinibreIid(_) => {
            return Err(Error::InvalidSpec("sample_wigner needs a GOE or Wigner spec".into()))
        }
    };
    if spec.rows != spec.cols {
        return dim_err(format!("Wigner matrix must be square, got {}x{}", spec.rows, spec.cols));
    }
    let n = spec.rows;
    if n == 0 {
        return dim_err("Wigner dimension must be at least 1");
    }
    let scale = 1.0 / (n as f64).sqrt();
    let mut rng = stream.rng();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let x = match dist {
                None if i == j => 2f64.sqrt() * Distribution::<f64>::sample(&StandardNormal, &mut rng),
                None => StandardNormal.sample(&mut rng),
                Some(d) => d.sample(&mut rng),
            };
            let v = x * scale;
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    Ok(w)
}

/// Rectangular matrix with i.i.d. `entry_dist/√m` entries (`m` = rows).
pub fn sample_ginibre(spec: &EnsembleSpec, stream: RngStream) -> Result<DMatrix<f64>> {
    let EnsembleKind::GinibreIid(dist) = spec.kind else {
        return Err(Error::InvalidSpec("sample_ginibre needs a GinibreIid spec".into()));
    };
    let (m, n) = (spec.rows, spec.cols);
    if m == 0 || n == 0 {
        return dim_err(format!("Ginibre matrix must be non-empty, got {m}x{n}"));
    }
    let scale = 1.0 / (m as f64).sqrt();
    let mut rng = stream.rng();
    let data: Vec<f64> = (0..m * n).map(|_| dist.sample(&mut rng) * scale).collect();
    Ok(DMatrix::from_vec(m, n, data))
}

/// Dispatches on the spec kind.
pub fn sample_matrix(spec: &EnsembleSpec, stream: RngStream) -> Result<DMatrix<f64>> {
    match spec.kind {
        EnsembleKind::GinibreIid(_) => sample_ginibre(spec, stream),
        _ => sample_wigner(spec, stream),
    }
}

/// Haar-distributed orthogonal matrix via QR of a Gaussian matrix, with the
/// columns of `Q` multiplied by the signs of `diag(R)`.
pub fn sample_haar_orthogonal(dim: usize, stream: RngStream) -> Result<DMatrix<f64>> {
    if dim == 0 {
        return dim_err("Haar dimension must be at least 1");
    }
    let mut rng = stream.rng();
    let g = gaussian_matrix(&mut rng, dim, dim);
    Ok(haar_from_gaussian(g))
}

pub(crate) fn haar_from_gaussian(g: DMatrix<f64>) -> DMatrix<f64> {
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (k, mut col) in q.column_iter_mut().enumerate() {
        if r[(k, k)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

/// `K = O·diag(d)·Uᵀ` with `O`, `U` Haar and `d` uniform on `[lo, hi]`.
#[derive(Clone, Debug)]
pub struct ConjugatedDiagonal {
    pub o: DMatrix<f64>,
    pub d: DVector<f64>,
    pub u: DMatrix<f64>,
    pub k: DMatrix<f64>,
}

pub fn sample_conjugated_diagonal(n: usize, lo: f64, hi: f64, stream: RngStream) -> Result<ConjugatedDiagonal> {
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidParameter(format!("need 0 < lo <= hi, got [{lo}, {hi}]")));
    }
    let o = sample_haar_orthogonal(n, stream.substream(0))?;
    let u = sample_haar_orthogonal(n, stream.substream(1))?;
    let mut rng = stream.substream(2).rng();
    let d = DVector::from_fn(n, |_, _| if hi > lo { rng.random_range(lo..hi) } else { lo });
    let k = &o * DMatrix::from_diagonal(&d) * u.transpose();
    Ok(ConjugatedDiagonal { o, d, u, k })
}

/// I.i.d. Gaussian noise with the given standard deviation.
pub fn gaussian_noise(len: usize, std: f64, stream: RngStream) -> DVector<f64> {
    let mut rng = stream.rng();
    gaussian_vector(&mut rng, len) * std
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvDist {
    Uniform { low: f64, high: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Zero,
    Sparse { density: f64, amplitude: EntryDist },
    LowRank { rows: usize, cols: usize, rank: usize, sv: SvDist },
    SmoothImage { rows: usize, cols: usize, smoothness: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub kind: SignalKind,
    pub dim: usize,
}

impl SignalSpec {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SignalKind::Zero => Ok(()),
            SignalKind::Sparse { density, .. } => {
                if (0.0..=1.0).contains(&density) {
                    Ok(())
                } else {
                    Err(Error::InvalidSpec(format!("sparse density {density} outside [0,1]")))
                }
            }
            SignalKind::LowRank { rows, cols, rank, sv } => {
                if rows * cols != self.dim {
                    return Err(Error::InvalidSpec(format!("low_rank needs dim = {rows}*{cols}, got {}", self.dim)));
                }
                if rank > rows.min(cols) {
                    return Err(Error::InvalidSpec(format!("rank {rank} exceeds min({rows},{cols})")));
                }
                let SvDist::Uniform { low, high } = sv;
                if !(low >= 0.0 && high >= low) {
                    return Err(Error::InvalidSpec(format!("singular value range [{low},{high}] invalid")));
                }
                Ok(())
            }
            SignalKind::SmoothImage { rows, cols, .. } => {
                if rows * cols != self.dim {
                    return Err(Error::InvalidSpec(format!("smooth_image needs dim = {rows}*{cols}, got {}", self.dim)));
                }
                Ok(())
            }
        }
    }
}

/// `Θ* = O·D·Uᵀ` with `O` (M×M) and `U` (N×N) Haar; `d` holds the diagonal of
/// the M×N matrix `D`.
#[derive(Clone, Debug)]
pub struct LowRankFactors {
    pub o: DMatrix<f64>,
    pub d: DVector<f64>,
    pub u: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct Signal {
    pub theta: DVector<f64>,
    pub factors: Option<LowRankFactors>,
}

pub fn sample_signal(spec: &SignalSpec, stream: RngStream) -> Result<Signal> {
    spec.validate()?;
    let n = spec.dim;
    match spec.kind {
        SignalKind::Zero => Ok(Signal { theta: DVector::zeros(n), factors: None }),
        SignalKind::Sparse { density, amplitude } => {
            let mut rng = stream.rng();
            let theta = DVector::from_fn(n, |_, _| {
                // draw both so the amplitude sequence does not depend on the support
                let keep = rng.random::<f64>() < density;
                let a = amplitude.sample(&mut rng);
                if keep {
                    a
                } else {
                    0.0
                }
            });
            Ok(Signal { theta, factors: None })
        }
        SignalKind::LowRank { rows, cols, rank, sv } => {
            let o = sample_haar_orthogonal(rows, stream.substream(0))?;
            let u = sample_haar_orthogonal(cols, stream.substream(1))?;
            let mut rng = stream.substream(2).rng();
            let SvDist::Uniform { low, high } = sv;
            let k = rows.min(cols);
            let d = DVector::from_fn(k, |i, _| {
                if i < rank {
                    if high > low {
                        rng.random_range(low..high)
                    } else {
                        low
                    }
                } else {
                    0.0
                }
            });
            let theta_mat = o.columns(0, k) * DMatrix::from_diagonal(&d) * u.columns(0, k).transpose();
            Ok(Signal {
                theta: DVector::from_column_slice(theta_mat.as_slice()),
                factors: Some(LowRankFactors { o, d, u }),
            })
        }
        SignalKind::SmoothImage { rows, cols, smoothness } => {
            let mut rng = stream.rng();
            let modes = SMOOTH_IMAGE_MODES;
            let coef = DMatrix::from_fn(modes, modes, |p, q| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g / (1.0 + (p + q) as f64).powf(smoothness)
            });
            let row_basis = DMatrix::from_fn(rows, modes, |j, p| {
                (std::f64::consts::PI * p as f64 * (j as f64 + 0.5) / rows as f64).cos()
            });
            let col_basis = DMatrix::from_fn(cols, modes, |j, q| {
                (std::f64::consts::PI * q as f64 * (j as f64 + 0.5) / cols as f64).cos()
            });
            let img = &row_basis * coef * col_basis.transpose();
            let peak = img.amax();
            let img = if peak > 0.0 { img * (SMOOTH_IMAGE_CAP / peak) } else { img };
            Ok(Signal { theta: DVector::from_column_slice(img.as_slice()), factors: None })
        }
    }
}

/// Which entries `moment_check` averages over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntrySelection {
    All,
    OffDiagonal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentEntry {
    pub order: u32,
    /// Mean of `|W[i,j]|^k · m^{k/2}`.
    pub scaled_moment: f64,
    pub std_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentReport {
    pub scale_dim: usize,
    pub entries: Vec<MomentEntry>,
}

/// Empirical scaled absolute moments `mean |W[i,j]|^k · m^{k/2}`, with `m` the
/// row count. Bounded values across `m` confirm the moment assumptions.
pub fn moment_check(w: &DMatrix<f64>, orders: &[u32], selection: EntrySelection) -> Result<MomentReport> {
    let m = w.nrows();
    if let Some(k) = orders.iter().find(|&&k| k < 2) {
        return Err(Error::InvalidParameter(format!("moment order {k} must be >= 2")));
    }
    let mut entries = Vec::with_capacity(orders.len());
    for &k in orders {
        let scale = (m as f64).powf(k as f64 / 2.0);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for j in 0..w.ncols() {
            for i in 0..m {
                if selection == EntrySelection::OffDiagonal && i == j {
                    continue;
                }
                let v = w[(i, j)].abs().powi(k as i32) * scale;
                sum += v;
                sum_sq += v * v;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        let var = if count > 1 { (sum_sq / count as f64 - mean * mean).max(0.0) * count as f64 / (count - 1) as f64 } else { 0.0 };
        entries.push(MomentEntry { order: k, scaled_moment: mean, std_err: (var / count as f64).sqrt() });
    }
    Ok(MomentReport { scale_dim: m, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn goe_n1_is_single_gaussian_with_variance_two() {
        // variance of the single entry over many seeds
        let reps = 4000;
        let mut s = 0.0;
        for seed in 0..reps {
            let w = sample_wigner(&EnsembleSpec::goe(1), RngStream::new(seed, 0)).unwrap();
            s += w[(0, 0)].powi(2);
        }
        let var = s / reps as f64;
        // sd of the estimate: sqrt(2·4/reps) ≈ 0.045
        assert!((var - 2.0).abs() < 0.15, "var = {var}");
    }

    #[test]
    fn wigner_rademacher_n2() {
        let w = sample_wigner(&EnsembleSpec::wigner(2, EntryDist::Rademacher), RngStream::new(3, 1)).unwrap();
        let a = 1.0 / 2f64.sqrt();
        for v in w.iter() {
            assert!((v.abs() - a).abs() < 1e-15);
        }
        assert_eq!(w[(0, 1)].to_bits(), w[(1, 0)].to_bits());
    }

    #[test]
    fn goe_offdiag_variance() {
        let n = 500;
        let w = sample_wigner(&EnsembleSpec::goe(n), RngStream::new(5, 0)).unwrap();
        let mut vals = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                vals.push(w[(i, j)].powi(2));
            }
        }
        let k = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / k;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        let se = (var / k).sqrt();
        assert!((mean - 1.0 / n as f64).abs() <= 3.0 * se, "mean={mean}, se={se}");
    }

    #[test]
    fn wigner_is_bitwise_symmetric_and_reproducible() {
        for spec in [EnsembleSpec::goe(37), EnsembleSpec::wigner(37, EntryDist::Uniform)] {
            let w = sample_wigner(&spec, RngStream::new(9, 9)).unwrap();
            let w2 = sample_wigner(&spec, RngStream::new(9, 9)).unwrap();
            for i in 0..37 {
                for j in 0..37 {
                    assert_eq!(w[(i, j)].to_bits(), w[(j, i)].to_bits());
                    assert_eq!(w[(i, j)].to_bits(), w2[(i, j)].to_bits());
                }
            }
        }
    }

    #[test]
    fn wigner_rejects_bad_specs() {
        let bad = EnsembleSpec { kind: EnsembleKind::Goe, rows: 3, cols: 4 };
        assert!(matches!(sample_wigner(&bad, RngStream::new(0, 0)), Err(Error::Dimension(_))));
        let g = EnsembleSpec::ginibre(3, 3, EntryDist::Gaussian);
        assert!(sample_wigner(&g, RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn ginibre_scaling() {
        let w = sample_ginibre(&EnsembleSpec::ginibre(4, 6, EntryDist::Rademacher), RngStream::new(1, 0)).unwrap();
        assert!(w.iter().all(|v| (v.abs() - 0.5).abs() < 1e-15));
        assert!(sample_ginibre(&EnsembleSpec::ginibre(0, 3, EntryDist::Gaussian), RngStream::new(1, 0)).is_err());
        assert!(sample_ginibre(&EnsembleSpec::ginibre(3, 0, EntryDist::Gaussian), RngStream::new(1, 0)).is_err());
        let w1 = sample_ginibre(&EnsembleSpec::ginibre(1, 1, EntryDist::Gaussian), RngStream::new(1, 0)).unwrap();
        assert!(w1[(0, 0)].is_finite());
    }

    #[test]
    fn ginibre_column_norms() {
        let (m, n) = (400, 300);
        let w = sample_ginibre(&EnsembleSpec::ginibre(m, n, EntryDist::Gaussian), RngStream::new(2, 0)).unwrap();
        let mean_sq: f64 = w.column_iter().map(|c| c.norm_squared()).sum::<f64>() / n as f64;
        assert!((mean_sq - 1.0).abs() < 0.05, "mean col norm² = {mean_sq}");
    }

    #[test]
    fn uniform_entries_are_standardised() {
        let w = sample_ginibre(&EnsembleSpec::ginibre(1, 200_000, EntryDist::Uniform), RngStream::new(4, 0)).unwrap();
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let var = w.iter().map(|v| v * v).sum::<f64>() / n;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.01);
        assert!(w.amax() <= 3f64.sqrt());
    }

    #[test]
    fn haar_small_cases() {
        let q1 = sample_haar_orthogonal(1, RngStream::new(0, 0)).unwrap();
        assert!((q1[(0, 0)].abs() - 1.0).abs() < 1e-15);
        let q3 = sample_haar_orthogonal(3, RngStream::new(0, 1)).unwrap();
        let e = q3.transpose() * &q3 - DMatrix::identity(3, 3);
        assert!(e.amax() <= 1e-10);
        assert!((q3.determinant().abs() - 1.0).abs() <= 1e-8);
        assert!(sample_haar_orthogonal(0, RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn haar_first_column_is_centered() {
        let dim = 50;
        let draws = 10_000;
        let (mut s, mut s2) = (0.0, 0.0);
        let base = RngStream::new(77, 0);
        for r in 0..draws {
            let q = sample_haar_orthogonal(dim, base.substream(r)).unwrap();
            s += q[(0, 0)];
            s2 += q[(0, 0)].powi(2);
        }
        let mean = s / draws as f64;
        let var = s2 / draws as f64 - mean * mean;
        let se = (var / draws as f64).sqrt();
        assert!(mean.abs() <= 3.0 * se, "mean={mean} se={se}");
        // E q11² = 1/dim for a uniform point on the sphere
        assert!((s2 / draws as f64 - 1.0 / dim as f64).abs() < 0.002);
    }

    #[test]
    fn haar_left_rotation_invariance() {
        // The law of Q is invariant under Q -> R·Q. Compare the first-row
        // coordinate distribution of Q and R·Q for a fixed rotation R.
        let dim = 8;
        let draws = 4000;
        let r = sample_haar_orthogonal(dim, RngStream::new(1, 1)).unwrap();
        let base = RngStream::new(2, 0);
        let (mut a4, mut b4) = (0.0, 0.0);
        for k in 0..draws {
            let q = sample_haar_orthogonal(dim, base.substream(k)).unwrap();
            let rq = &r * &q;
            a4 += q[(0, 0)].powi(4);
            b4 += rq[(0, 0)].powi(4);
        }
        // E q11^4 = 3/(d(d+2)) for the uniform sphere
        let expect = 3.0 / (dim * (dim + 2)) as f64;
        assert!((a4 / draws as f64 - expect).abs() < 0.2 * expect);
        assert!((b4 / draws as f64 - expect).abs() < 0.2 * expect);
    }

    #[test]
    fn zero_and_sparse_signals() {
        let z = sample_signal(&SignalSpec { kind: SignalKind::Zero, dim: 10 }, RngStream::new(0, 0)).unwrap();
        assert!(z.theta.iter().all(|&v| v == 0.0));

        let n = 10_000;
        let spec = SignalSpec { kind: SignalKind::Sparse { density: 0.1, amplitude: EntryDist::Gaussian }, dim: n };
        let s = sample_signal(&spec, RngStream::new(1, 0)).unwrap();
        let nnz = s.theta.iter().filter(|&&v| v != 0.0).count() as f64;
        let tol = 3.0 * (n as f64 * 0.1 * 0.9).sqrt();
        assert!((nnz - 1000.0).abs() <= tol, "nnz = {nnz}");
    }

    #[test]
    fn low_rank_signal_has_requested_spectrum() {
        let (rows, cols, rank) = (100, 150, 20);
        let hi = (cols as f64).sqrt();
        let spec = SignalSpec {
            kind: SignalKind::LowRank { rows, cols, rank, sv: SvDist::Uniform { low: 0.0, high: hi } },
            dim: rows * cols,
        };
        let s = sample_signal(&spec, RngStream::new(3, 0)).unwrap();
        let mat = DMatrix::from_column_slice(rows, cols, s.theta.as_slice());
        let sv = mat.singular_values();
        let scale = sv.max();
        let nonzero = sv.iter().filter(|&&v| v > 1e-9 * scale).count();
        assert_eq!(nonzero, rank);
        assert!(sv.iter().all(|&v| v <= hi + 1e-9));
        let f = s.factors.unwrap();
        assert_eq!(f.d.iter().filter(|&&v| v != 0.0).count(), rank);
    }

    #[test]
    fn low_rank_rejects_excess_rank() {
        let spec = SignalSpec {
            kind: SignalKind::LowRank { rows: 3, cols: 4, rank: 4, sv: SvDist::Uniform { low: 0.0, high: 1.0 } },
            dim: 12,
        };
        assert!(matches!(sample_signal(&spec, RngStream::new(0, 0)), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn smooth_image_is_bounded() {
        let spec = SignalSpec { kind: SignalKind::SmoothImage { rows: 30, cols: 20, smoothness: 1.5 }, dim: 600 };
        let s = sample_signal(&spec, RngStream::new(4, 0)).unwrap();
        assert!(s.theta.amax() <= SMOOTH_IMAGE_CAP + 1e-12);
        assert!(s.theta.amax() > 0.5);
    }

    #[test]
    fn moment_check_rademacher_is_exact() {
        let w = sample_ginibre(&EnsembleSpec::ginibre(50, 40, EntryDist::Rademacher), RngStream::new(0, 0)).unwrap();
        let rep = moment_check(&w, &[2, 4, 6], EntrySelection::All).unwrap();
        for e in rep.entries {
            assert!((e.scaled_moment - 1.0).abs() < 1e-12, "{e:?}");
        }
        assert!(moment_check(&w, &[1], EntrySelection::All).is_err());
    }

    #[test]
    fn moment_check_gaussian_orders() {
        let w = sample_wigner(&EnsembleSpec::goe(300), RngStream::new(8, 0)).unwrap();
        let rep = moment_check(&w, &[2, 4], EntrySelection::OffDiagonal).unwrap();
        assert!((rep.entries[0].scaled_moment - 1.0).abs() <= 3.0 * rep.entries[0].std_err);
        assert!((rep.entries[1].scaled_moment - 3.0).abs() <= 3.0 * rep.entries[1].std_err);
    }

    #[test]
    fn scaled_moments_stay_bounded_in_n() {
        for dist in [EntryDist::Gaussian, EntryDist::Rademacher, EntryDist::Uniform] {
            for n in [50, 100, 200, 400] {
                let w = sample_wigner(&EnsembleSpec::wigner(n, dist), RngStream::new(n as u64, 2)).unwrap();
                let rep = moment_check(&w, &[2, 3, 4, 6], EntrySelection::All).unwrap();
                // Gaussian sixth absolute moment is 15; others are smaller
                for e in rep.entries {
                    assert!(e.scaled_moment < 20.0, "{dist:?} n={n} {e:?}");
                }
            }
        }
    }
}
