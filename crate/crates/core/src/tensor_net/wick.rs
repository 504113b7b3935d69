use super::graph::{check_log2_budget, Factor};
use super::tensor::DenseTensor;
use crate::error::{dim_err, Result};

/// Pair partitions of `0..d` whose pairs never mix streams, in lexicographic
/// order (the first free slot is paired with each admissible later slot in
/// increasing order).
pub fn wick_pairings(sigma: &[usize]) -> Vec<Vec<(usize, usize)>> {
    fn rec(sigma: &[usize], used: &mut [bool], cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        let Some(a) = used.iter().position(|&u| !u) else {
            out.push(cur.clone());
            return;
        };
        used[a] = true;
        for b in a + 1..sigma.len() {
            if !used[b] && sigma[b] == sigma[a] {
                used[b] = true;
                cur.push((a, b));
                rec(sigma, used, cur, out);
                cur.pop();
                used[b] = false;
            }
        }
        used[a] = false;
    }
    let mut out = Vec::new();
    if sigma.len().is_multiple_of(2) {
        rec(sigma, &mut vec![false; sigma.len()], &mut Vec::new(), &mut out);
    }
    out
}

/// `E Σ_i T[i] ∏_ℓ ξ_{σ(ℓ)}[i_ℓ]` for independent `ξ_s ~ N(0, I_n)`, as the
/// sum over admissible pairings `τ` of `Σ_i T[i] ∏_{{a,b}∈τ} 1{i_a = i_b}`.
pub fn wick_expectation(t: &DenseTensor, sigma: &[usize], n: usize) -> Result<f64> {
    if t.order != sigma.len() {
        return dim_err(format!("tensor of order {} with {} stream labels", t.order, sigma.len()));
    }
    if t.dim != n {
        return dim_err(format!("tensor dimension {} but n = {n}", t.dim));
    }
    let pairings = wick_pairings(sigma);
    if pairings.is_empty() {
        return Ok(0.0);
    }
    check_log2_budget(sigma.len() / 2, n, "Wick pairing sum")?;
    let mut total = 0.0;
    for tau in &pairings {
        let mut slot_vars = vec![0usize; sigma.len()];
        for (p, &(a, b)) in tau.iter().enumerate() {
            slot_vars[a] = p;
            slot_vars[b] = p;
        }
        let f = Factor::from_tensor(t, &slot_vars, n)?;
        total += f.data.iter().sum::<f64>();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use nalgebra::{DMatrix, DVector};

    use super::*;

    #[test]
    fn pairing_counts() {
        assert_eq!(wick_pairings(&[0, 0, 0, 0]).len(), 3);
        assert_eq!(wick_pairings(&[0; 6]).len(), 15);
        assert_eq!(wick_pairings(&[0, 1, 0, 1]), vec![vec![(0, 2), (1, 3)]]);
        assert!(wick_pairings(&[0, 0, 1]).is_empty());
        assert!(wick_pairings(&[0, 1, 1, 1]).is_empty());
        assert_eq!(wick_pairings(&[0, 0, 0, 0])[0], vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn odd_multiplicity_is_zero() {
        let t = DenseTensor::dense(3, 2, vec![1.0; 8]).unwrap();
        assert_eq!(wick_expectation(&t, &[0, 0, 0], 2).unwrap(), 0.0);
        let t = DenseTensor::dense(4, 2, vec![1.0; 16]).unwrap();
        assert_eq!(wick_expectation(&t, &[0, 0, 0, 1], 2).unwrap(), 0.0);
    }

    #[test]
    fn matrix_gives_trace() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 10.0]);
        let t = DenseTensor::matrix(&m).unwrap();
        assert_eq!(wick_expectation(&t, &[0, 0], 3).unwrap(), m.trace());
        assert_eq!(wick_expectation(&t, &[0, 1], 3).unwrap(), 0.0);
    }

    #[test]
    fn fourth_power() {
        let a = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let t = DenseTensor::from_cp(&[vec![a.clone(); 4]]).unwrap();
        let got = wick_expectation(&t, &[0, 0, 0, 0], 3).unwrap();
        assert!((got - 3.0 * a.norm_squared().powi(2)).abs() < 1e-12);
        // two streams: E⟨a,ξ⟩²⟨a,η⟩² = ‖a‖⁴
        let got = wick_expectation(&t, &[0, 1, 1, 0], 3).unwrap();
        assert!((got - a.norm_squared().powi(2)).abs() < 1e-12);
    }
}
