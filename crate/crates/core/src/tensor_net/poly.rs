use nalgebra::DVector;

use super::graph::check_log2_budget;
use super::tensor::{advance, checked_pow, DenseTensor, TensorStorage};
use crate::error::{dim_err, Error, Result};

/// `T^σ[z_{σ(1)}, .., z_{σ(d)}, ·]`: an order-`d+1` tensor whose first `d`
/// slots are contracted against columns `σ(ℓ)` (0-based) of the input.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyTerm {
    pub sigma: Vec<usize>,
    pub tensor: DenseTensor,
}

/// `p(z) = T⁰ + Σ_σ T^σ[z_{σ(1)}, .., z_{σ(d)}, ·]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorPoly {
    pub constant: DVector<f64>,
    pub terms: Vec<PolyTerm>,
}

pub fn poly_from_tensors(rep: &TensorPoly, z: &[DVector<f64>]) -> Result<DVector<f64>> {
    let n = rep.constant.len();
    if let Some(c) = z.iter().find(|c| c.len() != n) {
        return dim_err(format!("input column has length {}, constant term has {n}", c.len()));
    }
    let mut out = rep.constant.clone();
    for term in &rep.terms {
        let d = term.sigma.len();
        let t = &term.tensor;
        if t.order != d + 1 || t.dim != n {
            return dim_err(format!("term with {d} inputs needs an order-{} tensor of dimension {n}, got order {} dim {}", d + 1, t.order, t.dim));
        }
        if let Some(&bad) = term.sigma.iter().find(|&&s| s >= z.len()) {
            return Err(Error::InvalidParameter(format!("term reads column {bad} but only {} are given", z.len())));
        }
        let cols: Vec<&DVector<f64>> = term.sigma.iter().map(|&s| &z[s]).collect();
        match &t.storage {
            TensorStorage::Diagonal(v) => {
                for i in 0..n {
                    out[i] += v[i] * cols.iter().map(|c| c[i]).product::<f64>();
                }
            }
            TensorStorage::Identity => {
                for i in 0..n {
                    out[i] += cols.iter().map(|c| c[i]).product::<f64>();
                }
            }
            _ => {
                check_log2_budget(d + 1, n, "polynomial term contraction")?;
                let total = checked_pow(n, d).unwrap_or(0);
                let mut idx = vec![0usize; d + 1];
                for i in 0..n {
                    idx.iter_mut().for_each(|x| *x = 0);
                    idx[d] = i;
                    let mut acc = 0.0;
                    for _ in 0..total {
                        let w: f64 = cols.iter().zip(&idx).map(|(c, &j)| c[j]).product();
                        if w != 0.0 {
                            acc += w * t.entry(&idx);
                        }
                        advance(&mut idx[..d], n);
                    }
                    out[i] += acc;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;
    use crate::tensor_net::alternating_tensor;

    #[test]
    fn diagonal_square() {
        let z = vec![DVector::from_vec(vec![1.0, -2.0, 3.0])];
        let rep = TensorPoly {
            constant: DVector::zeros(3),
            terms: vec![PolyTerm { sigma: vec![0, 0], tensor: DenseTensor::diagonal(3, vec![1.0; 3]) }],
        };
        assert_eq!(poly_from_tensors(&rep, &z).unwrap(), z[0].map(|x| x * x));
        // dense copy takes the generic path
        let dense = TensorPoly {
            constant: DVector::zeros(3),
            terms: vec![PolyTerm { sigma: vec![0, 0], tensor: DenseTensor::diagonal(3, vec![1.0; 3]).to_dense().unwrap() }],
        };
        assert_eq!(poly_from_tensors(&dense, &z).unwrap(), z[0].map(|x| x * x));
    }

    #[test]
    fn constant_only() {
        let c = DVector::from_vec(vec![0.5, 1.5]);
        let rep = TensorPoly { constant: c.clone(), terms: vec![] };
        assert_eq!(poly_from_tensors(&rep, &[DVector::zeros(2)]).unwrap(), c);
    }

    #[test]
    fn alternating_cubic_is_matrix_product() {
        let (m, n_cols) = (2, 3);
        let xs: Vec<DMatrix<f64>> =
            (0..3).map(|s| DMatrix::from_fn(m, n_cols, |i, j| ((i * 7 + j * 3 + s * 11) as f64 * 0.41).sin())).collect();
        let z: Vec<DVector<f64>> = xs.iter().map(|x| DVector::from_column_slice(x.as_slice())).collect();
        let rep = TensorPoly {
            constant: DVector::zeros(m * n_cols),
            terms: vec![PolyTerm { sigma: vec![0, 1, 2], tensor: alternating_tensor(4, m, n_cols).unwrap() }],
        };
        let got = poly_from_tensors(&rep, &z).unwrap();
        let want = (&xs[0] * xs[1].transpose() * &xs[2]) / n_cols as f64;
        assert!((got - DVector::from_column_slice(want.as_slice())).amax() < 1e-12);
    }

    #[test]
    fn alternating_order_two_is_identity_action() {
        let x = DVector::from_fn(6, |i, _| i as f64 - 2.5);
        let rep = TensorPoly {
            constant: DVector::zeros(6),
            terms: vec![PolyTerm { sigma: vec![0], tensor: alternating_tensor(2, 2, 3).unwrap() }],
        };
        assert_eq!(poly_from_tensors(&rep, &[x.clone()]).unwrap(), x);
    }

    #[test]
    fn order_mismatch() {
        let rep = TensorPoly {
            constant: DVector::zeros(2),
            terms: vec![PolyTerm { sigma: vec![0], tensor: DenseTensor::identity(3, 2) }],
        };
        assert!(poly_from_tensors(&rep, &[DVector::zeros(2)]).is_err());
    }
}
