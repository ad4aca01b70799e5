//! Permutations of tensor copies and the symmetric subspace of `(ℂ^d)^{⊗k}`.
//!
//! A multi-index `(i_1, …, i_k)` is stored as `x = Σ i_m d^{k−m}` so copy 1 is
//! the most significant digit, matching `ψ ⊗ ⋯ ⊗ ψ`.

use std::collections::HashMap;

use crate::error::{bound, Error, Result};
use crate::linalg::{ComplexOperator, MAX_DENSE_DIM, C64, ONE, ZERO};

pub const MAX_K: usize = 8;

/// All permutations of `0..k` in lexicographic order (identity first).
pub fn all_permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (1..k).rev().find(|&i| cur[i - 1] < cur[i]) else {
            break;
        };
        let j = (i..k).rev().find(|&j| cur[j] > cur[i - 1]).expect("exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

pub fn validate_permutation(pi: &[usize]) -> Result<()> {
    let mut seen = vec![false; pi.len()];
    for &p in pi {
        if p >= pi.len() || seen[p] {
            return Err(Error::InvalidPermutation(pi.to_vec()));
        }
        seen[p] = true;
    }
    Ok(())
}

pub fn inverse(pi: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; pi.len()];
    for (i, &p) in pi.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// `(a ∘ b)(i) = a(b(i))`.
pub fn compose(a: &[usize], b: &[usize]) -> Vec<usize> {
    b.iter().map(|&i| a[i]).collect()
}

pub fn cycle_count(pi: &[usize]) -> usize {
    let mut seen = vec![false; pi.len()];
    let mut cycles = 0;
    for s in 0..pi.len() {
        if !seen[s] {
            cycles += 1;
            let mut i = s;
            while !seen[i] {
                seen[i] = true;
                i = pi[i];
            }
        }
    }
    cycles
}

pub fn digits(x: usize, d: usize, k: usize) -> Vec<usize> {
    let mut out = vec![0; k];
    let mut r = x;
    for m in (0..k).rev() {
        out[m] = r % d;
        r /= d;
    }
    out
}

pub fn from_digits(ds: &[usize], d: usize) -> usize {
    ds.iter().fold(0, |acc, &i| acc * d + i)
}

/// Index of `P(π)|x⟩ = |x_{π(1)} … x_{π(k)}⟩`.
pub fn permute_index(x: usize, pi: &[usize], d: usize) -> usize {
    let ds = digits(x, d, pi.len());
    let mut acc = 0;
    for &p in pi {
        acc = acc * d + ds[p];
    }
    acc
}

/// Orthonormal basis of `Sym^k(ℂ^d)`: one normalised symmetrised vector per
/// multiset, multisets in lexicographic order.
#[derive(Clone, Debug)]
pub struct SymmetricBasis {
    pub d: usize,
    pub k: usize,
    pub multisets: Vec<Vec<usize>>,
    /// Number of arrangements of each multiset.
    pub counts: Vec<usize>,
    lookup: HashMap<Vec<usize>, usize>,
}

pub fn binomial(n: usize, r: usize) -> usize {
    if r > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

impl SymmetricBasis {
    pub fn new(d: usize, k: usize) -> Result<Self> {
        if d == 0 || k == 0 {
            return Err(Error::InvalidParameter("d and k must be positive".into()));
        }
        bound("k", k, MAX_K)?;
        bound("symmetric subspace dimension", binomial(d + k - 1, k), MAX_DENSE_DIM)?;
        let mut multisets = Vec::new();
        let mut cur = vec![0usize; k];
        loop {
            multisets.push(cur.clone());
            // next non-decreasing sequence
            let Some(pos) = (0..k).rev().find(|&m| cur[m] + 1 < d) else {
                break;
            };
            let v = cur[pos] + 1;
            for c in cur.iter_mut().skip(pos) {
                *c = v;
            }
        }
        let counts = multisets
            .iter()
            .map(|m| {
                let mut denom = 1;
                let mut run = 1;
                for w in m.windows(2) {
                    if w[0] == w[1] {
                        run += 1;
                    } else {
                        denom *= factorial(run);
                        run = 1;
                    }
                }
                denom *= factorial(run);
                factorial(k) / denom
            })
            .collect();
        let lookup = multisets
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        Ok(Self {
            d,
            k,
            multisets,
            counts,
            lookup,
        })
    }

    pub fn dim(&self) -> usize {
        self.multisets.len()
    }

    pub fn full_dim(&self) -> usize {
        self.d.pow(self.k as u32)
    }

    /// Basis index of the multiset containing full index `x`.
    pub fn class_of(&self, x: usize) -> usize {
        let mut ds = digits(x, self.d, self.k);
        ds.sort_unstable();
        self.lookup[&ds]
    }

    /// Coordinates of `ψ^{⊗k}` in this basis: `√count · Π ψ_{i_j}`.
    pub fn coefficients(&self, psi: &[C64]) -> Vec<C64> {
        assert_eq!(psi.len(), self.d, "dimension mismatch");
        self.multisets
            .iter()
            .zip(&self.counts)
            .map(|(m, &c)| {
                let prod: C64 = m.iter().map(|&i| psi[i]).product();
                prod * (c as f64).sqrt()
            })
            .collect()
    }

    /// Lifts an operator on the symmetric subspace to `(ℂ^d)^{⊗k}`.
    pub fn embed(&self, sym: &ComplexOperator) -> Result<ComplexOperator> {
        if sym.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: sym.dim(),
            });
        }
        let full = self.full_dim();
        bound("dense moment dimension", full, 1 << 12)?;
        let class: Vec<usize> = (0..full).map(|x| self.class_of(x)).collect();
        let norm: Vec<f64> = class.iter().map(|&m| (self.counts[m] as f64).sqrt()).collect();
        Ok(ComplexOperator::from_fn(full, |x, y| {
            sym.get(class[x], class[y]) / (norm[x] * norm[y])
        }))
    }

    /// `⟨S_m|X|S_n⟩`.
    pub fn compress(&self, full_op: &ComplexOperator) -> Result<ComplexOperator> {
        if full_op.dim() != self.full_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.full_dim(),
                found: full_op.dim(),
            });
        }
        let full = self.full_dim();
        let class: Vec<usize> = (0..full).map(|x| self.class_of(x)).collect();
        let mut out = ComplexOperator::zeros(self.dim());
        for x in 0..full {
            for y in 0..full {
                let (m, n) = (class[x], class[y]);
                let v = out.get(m, n) + full_op.get(x, y);
                out.set(m, n, v);
            }
        }
        Ok(ComplexOperator::from_fn(self.dim(), |m, n| {
            out.get(m, n) / ((self.counts[m] * self.counts[n]) as f64).sqrt()
        }))
    }

    /// Projector onto the symmetric subspace.
    pub fn projector(&self) -> Result<ComplexOperator> {
        self.embed(&ComplexOperator::identity(self.dim()))
    }
}

/// Dense permutation operator together with the permutation it represents.
#[derive(Clone, Debug)]
pub struct PermutationOperator {
    pub d: usize,
    pub pi: Vec<usize>,
    pub matrix: ComplexOperator,
}

/// `P(π)|i_1 … i_k⟩ = |i_{π(1)} … i_{π(k)}⟩` (0-based `π`).
pub fn permutation_operator(pi: &[usize], d: usize) -> Result<PermutationOperator> {
    validate_permutation(pi)?;
    if d == 0 || pi.is_empty() {
        return Err(Error::InvalidParameter("d and k must be positive".into()));
    }
    let full = d.checked_pow(pi.len() as u32).unwrap_or(usize::MAX);
    bound("permutation operator dimension", full, 1 << 12)?;
    let mut m = ComplexOperator::zeros(full);
    for x in 0..full {
        m.set(permute_index(x, pi, d), x, ONE);
    }
    Ok(PermutationOperator {
        d,
        pi: pi.to_vec(),
        matrix: m,
    })
}

/// `Σ_π c_π P(π)` without forming each operator.
pub(crate) fn permutation_combination(perms: &[Vec<usize>], coeffs: &[C64], d: usize) -> ComplexOperator {
    let k = perms[0].len();
    let full = d.pow(k as u32);
    let mut m = ComplexOperator::zeros(full);
    for (pi, &c) in perms.iter().zip(coeffs) {
        if c == ZERO {
            continue;
        }
        for x in 0..full {
            let y = permute_index(x, pi, d);
            let v = m.get(y, x) + c;
            m.set(y, x, v);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn permutation_counts() {
        for k in 1..=5 {
            let ps = all_permutations(k);
            assert_eq!(ps.len(), factorial(k));
            assert_eq!(ps[0], (0..k).collect::<Vec<_>>());
            let mut sorted = ps.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), ps.len());
        }
    }

    #[test]
    fn symmetric_dimension_is_binomial() {
        for (d, k) in [(2, 1), (2, 3), (4, 2), (8, 3), (3, 4)] {
            let b = SymmetricBasis::new(d, k).unwrap();
            assert_eq!(b.dim(), binomial(d + k - 1, k));
            assert_eq!(b.counts.iter().sum::<usize>(), d.pow(k as u32));
        }
    }

    #[test]
    fn projector_is_average_of_permutations() {
        // Π_sym = (1/k!) Σ_π P(π)
        for (d, k) in [(2, 2), (3, 2), (2, 3)] {
            let b = SymmetricBasis::new(d, k).unwrap();
            let perms = all_permutations(k);
            let c = vec![C64::new(1.0 / perms.len() as f64, 0.0); perms.len()];
            let avg = permutation_combination(&perms, &c, d);
            assert!(b.projector().unwrap().max_abs_diff(&avg) < 1e-14);
        }
    }

    #[test]
    fn operator_composition_convention() {
        // P(a) P(b) = P(b ∘ a) for the digit-permuting action
        let (d, k) = (2, 3);
        let perms = all_permutations(k);
        for a in &perms {
            for b in &perms {
                let pa = permutation_operator(a, d).unwrap().matrix;
                let pb = permutation_operator(b, d).unwrap().matrix;
                let pba = permutation_operator(&compose(b, a), d).unwrap().matrix;
                assert!(pa.matmul(&pb).max_abs_diff(&pba) < 1e-15);
            }
        }
    }

    #[test]
    fn invalid_permutations() {
        assert!(permutation_operator(&[0, 0], 2).is_err());
        assert!(permutation_operator(&[0, 2], 2).is_err());
    }

    proptest! {
        #[test]
        fn coefficients_match_dense_power(d in 2usize..5, k in 1usize..4, seed in 0u64..500) {
            let b = SymmetricBasis::new(d, k).unwrap();
            let mut rng = crate::linalg::stream_rng(seed, 0);
            let psi: Vec<C64> = (0..d).map(|_| {
                use rand::Rng;
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            }).collect();
            let mut dense = vec![ONE];
            for _ in 0..k { dense = crate::linalg::kron_vec(&dense, &psi); }
            let c = b.coefficients(&psi);
            let sym = ComplexOperator::outer(&c, &c);
            let full = b.embed(&sym).unwrap();
            let want = ComplexOperator::outer(&dense, &dense);
            prop_assert!(full.max_abs_diff(&want) < 1e-12);
            prop_assert!(b.compress(&want).unwrap().max_abs_diff(&sym) < 1e-12);
        }

        #[test]
        fn cycles_of_inverse(k in 1usize..6, idx in 0usize..720) {
            let ps = all_permutations(k);
            let p = &ps[idx % ps.len()];
            prop_assert_eq!(cycle_count(p), cycle_count(&inverse(p)));
            prop_assert_eq!(compose(p, &inverse(p)), (0..k).collect::<Vec<_>>());
        }
    }
}
