use serde::{Deserialize, Serialize};

use super::graph::{check_log2_budget, contract_factors, Factor};
use super::tensor::{advance, checked_pow, DenseTensor};
use crate::error::{dim_err, Error, Result};

/// An index pattern for `m` tensors of orders `k_1..k_m` over `ℓ` summation
/// indices. `pi` has `Σ_a k_a` entries: tensor `a`'s slots come in order,
/// each naming the index it reads.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BcpQuery {
    pub orders: Vec<usize>,
    pub ell: usize,
    pub pi: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BcpReport {
    pub surjective: bool,
    pub even_multiplicity: bool,
    pub connected: bool,
}

impl BcpReport {
    pub fn valid(&self) -> bool {
        self.surjective && self.even_multiplicity && self.connected
    }
}

impl BcpQuery {
    pub fn new(orders: Vec<usize>, ell: usize, pi: Vec<usize>) -> Result<Self> {
        let q = Self { orders, ell, pi };
        q.check_shape()?;
        Ok(q)
    }

    fn check_shape(&self) -> Result<()> {
        let total: usize = self.orders.iter().sum();
        if self.pi.len() != total {
            return dim_err(format!("orders sum to {total} but π has {} entries", self.pi.len()));
        }
        if let Some(&bad) = self.pi.iter().find(|&&i| i >= self.ell) {
            return Err(Error::InvalidSpec(format!("π names index {bad} but ℓ = {}", self.ell)));
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.orders.len()
    }

    /// Indices read by tensor `a`.
    pub fn slots(&self, a: usize) -> &[usize] {
        let start: usize = self.orders[..a].iter().sum();
        &self.pi[start..start + self.orders[a]]
    }

    /// Query matching `tensor.permuted(perm)` in position `a`: slot `ℓ` of
    /// the old tensor moves to slot `perm[ℓ]`.
    pub fn transposed(&self, a: usize, perm: &[usize]) -> Result<Self> {
        if a >= self.m() || perm.len() != self.orders[a] {
            return dim_err(format!("bad transposition of tensor {a}"));
        }
        let start: usize = self.orders[..a].iter().sum();
        let old = self.slots(a).to_vec();
        let mut pi = self.pi.clone();
        for (l, &p) in perm.iter().enumerate() {
            pi[start + p] = old[l];
        }
        Self::new(self.orders.clone(), self.ell, pi)
    }
}

/// Checks surjectivity of `π`, even multiplicity of every index, and
/// connectivity of the tensor/index incidence hypergraph.
pub fn validate_bcp_query(q: &BcpQuery) -> BcpReport {
    if q.check_shape().is_err() {
        return BcpReport { surjective: false, even_multiplicity: false, connected: false };
    }
    let mut count = vec![0usize; q.ell];
    for &i in &q.pi {
        count[i] += 1;
    }
    let surjective = count.iter().all(|&c| c > 0);
    let even_multiplicity = count.iter().all(|&c| c % 2 == 0);
    // union-find over tensors 0..m and indices m..m+ℓ
    let m = q.m();
    let mut parent: Vec<usize> = (0..m + q.ell).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for a in 0..m {
        for &i in q.slots(a) {
            let (x, y) = (find(&mut parent, a), find(&mut parent, m + i));
            parent[x] = y;
        }
    }
    let used: Vec<usize> = (0..m).chain((0..q.ell).filter(|&i| count[i] > 0).map(|i| m + i)).collect();
    let root = used.first().map(|&x| find(&mut parent, x));
    let connected = used.iter().all(|&x| Some(find(&mut parent, x)) == root);
    BcpReport { surjective, even_multiplicity, connected }
}

fn check_tensors(q: &BcpQuery, tensors: &[DenseTensor], n: usize) -> Result<()> {
    q.check_shape()?;
    if tensors.len() != q.m() {
        return dim_err(format!("query has {} tensors, got {}", q.m(), tensors.len()));
    }
    for (a, (t, &k)) in tensors.iter().zip(&q.orders).enumerate() {
        if t.order != k || t.dim != n {
            return dim_err(format!("tensor {a} is order {} dim {}, query needs order {k} dim {n}", t.order, t.dim));
        }
    }
    Ok(())
}

/// `(1/n) |Σ_{i_1..i_ℓ} ∏_a T_a[i_{π(a,1)}, .., i_{π(a,k_a)}]|` by variable
/// elimination.
pub fn bcp_ratio(q: &BcpQuery, tensors: &[DenseTensor], n: usize) -> Result<f64> {
    check_tensors(q, tensors, n)?;
    let factors =
        tensors.iter().enumerate().map(|(a, t)| Factor::from_tensor(t, q.slots(a), n)).collect::<Result<Vec<_>>>()?;
    // indices π never names still range over [n]
    let named: std::collections::BTreeSet<usize> = q.pi.iter().copied().collect();
    let free = (q.ell - named.len()) as i32;
    Ok(contract_factors(factors, n)?.abs() * (n as f64).powi(free) / n as f64)
}

/// [`bcp_ratio`] by enumerating all `n^ℓ` index tuples.
pub fn bcp_ratio_bruteforce(q: &BcpQuery, tensors: &[DenseTensor], n: usize) -> Result<f64> {
    check_tensors(q, tensors, n)?;
    check_log2_budget(q.ell, n, "BCP enumeration")?;
    let total = checked_pow(n, q.ell).ok_or_else(|| Error::Budget("index count overflows".into()))?;
    let mut idx = vec![0usize; q.ell];
    let mut slot_buf: Vec<Vec<usize>> = q.orders.iter().map(|&k| vec![0; k]).collect();
    let mut sum = 0.0;
    for _ in 0..total {
        let mut prod = 1.0;
        for (a, t) in tensors.iter().enumerate() {
            for (s, &i) in slot_buf[a].iter_mut().zip(q.slots(a)) {
                *s = idx[i];
            }
            prod *= t.entry(&slot_buf[a]);
        }
        sum += prod;
        advance(&mut idx, n);
    }
    Ok(sum.abs() / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two order-4 tensors reading `(i1, i1, i2, i3)` and `(i2, i3, i4, i4)`.
    fn worked_example() -> BcpQuery {
        BcpQuery::new(vec![4, 4], 4, vec![0, 0, 1, 2, 1, 2, 3, 3]).unwrap()
    }

    fn seq_tensor(order: usize, n: usize, seed: f64) -> DenseTensor {
        let len = n.pow(order as u32);
        DenseTensor::dense(order, n, (0..len).map(|i| ((i as f64 + seed) * 0.37).sin()).collect()).unwrap()
    }

    #[test]
    fn worked_example_is_valid() {
        let r = validate_bcp_query(&worked_example());
        assert!(r.even_multiplicity && r.connected && r.surjective);
    }

    #[test]
    fn worked_example_nested_loops() {
        let n = 4;
        let (t1, t2) = (seq_tensor(4, n, 0.0), seq_tensor(4, n, 5.0));
        let mut s = 0.0;
        for i1 in 0..n {
            for i2 in 0..n {
                for i3 in 0..n {
                    for i4 in 0..n {
                        s += t1.entry(&[i1, i1, i2, i3]) * t2.entry(&[i2, i3, i4, i4]);
                    }
                }
            }
        }
        let oracle = s.abs() / n as f64;
        let q = worked_example();
        let ts = [t1, t2];
        assert!((bcp_ratio_bruteforce(&q, &ts, n).unwrap() - oracle).abs() < 1e-12 * oracle.max(1.0));
        assert!((bcp_ratio(&q, &ts, n).unwrap() - oracle).abs() < 1e-12 * oracle.max(1.0));
    }

    #[test]
    fn disconnected_and_odd() {
        let q = BcpQuery::new(vec![2, 2], 2, vec![0, 0, 1, 1]).unwrap();
        let r = validate_bcp_query(&q);
        assert!(r.even_multiplicity && !r.connected);
        let q = BcpQuery::new(vec![1], 1, vec![0]).unwrap();
        assert!(!validate_bcp_query(&q).even_multiplicity);
    }

    #[test]
    fn identities_give_one() {
        let q = worked_example();
        let ts = vec![DenseTensor::identity(4, 5), DenseTensor::identity(4, 5)];
        assert!((bcp_ratio(&q, &ts, 5).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn transposition_invariance() {
        let n = 3;
        let q = worked_example();
        let ts = vec![seq_tensor(4, n, 1.0), seq_tensor(4, n, 2.0)];
        let base = bcp_ratio(&q, &ts, n).unwrap();
        let perm = [2, 0, 3, 1];
        let q2 = q.transposed(1, &perm).unwrap();
        let ts2 = vec![ts[0].clone(), ts[1].permuted(&perm).unwrap()];
        assert!((bcp_ratio(&q2, &ts2, n).unwrap() - base).abs() < 1e-12 * base.max(1.0));
    }

    #[test]
    fn order_mismatch() {
        let q = worked_example();
        assert!(bcp_ratio(&q, &[DenseTensor::identity(3, 2), DenseTensor::identity(4, 2)], 2).is_err());
        assert!(BcpQuery::new(vec![2], 1, vec![0, 1]).is_err());
    }
}
