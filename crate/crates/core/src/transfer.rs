//! The `k`-copy transfer map `𝕋[X] = ½ Σ_z U(z)^{⊗k} X U(z)^{†⊗k}`, its
//! spectrum and its relation to the permutation operators.
//!
//! Operators are vectorised row-major: `vec(X)[a·D + b] = X[a, b]`.

use std::collections::HashMap;
use std::f64::consts::PI;

use faer::Mat;
use serde::Serialize;

use crate::dual::DualPair;
use crate::error::{bound, Error, Result};
use crate::linalg::{inner, solve_linear, tol, ComplexOperator, C64, ONE, ZERO};
use crate::symmetric::{all_permutations, cycle_count, compose, inverse, permutation_combination, permute_index};

/// Bound on `(2^t)^{2k}` for spectra.
pub const MAX_SUPEROP_DIM: usize = 1 << 14;
/// Bound on `(2^t)^{2k}` for an explicit dense superoperator.
pub const MAX_DENSE_SUPEROP_DIM: usize = 1 << 12;

#[derive(Clone, Debug)]
pub struct TransferMap {
    pub t: usize,
    pub k: usize,
    pub g: f64,
    u0k: ComplexOperator,
    u1k: ComplexOperator,
    /// Parity of the site-`t` bits over all copies, per multi-index.
    parity: Vec<bool>,
}

impl TransferMap {
    pub fn new(t: usize, k: usize, g: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        let pair = DualPair::new(t, g)?;
        bound("transfer map dimension (2^t)^(2k)", 1usize << (2 * t * k).min(63), MAX_SUPEROP_DIM)?;
        let d = 1usize << (t * k);
        let mask: usize = (0..k).map(|c| 1usize << (c * t)).sum();
        Ok(Self {
            t,
            k,
            g,
            u0k: pair.unitary(0).kron_power(k),
            u1k: pair.unitary(1).kron_power(k),
            parity: (0..d).map(|a| (a & mask).count_ones() % 2 == 1).collect(),
        })
    }

    /// Dimension `D = 2^{tk}` of the operators the map acts on.
    pub fn dim(&self) -> usize {
        self.u0k.dim()
    }

    fn check(&self, x: &ComplexOperator) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        Ok(())
    }

    /// Two-term form `½(Ũ₀XŨ₀† + Ũ₁XŨ₁†)`.
    pub fn apply(&self, x: &ComplexOperator) -> Result<ComplexOperator> {
        self.check(x)?;
        let a = x.conjugate_by(&self.u0k);
        let b = x.conjugate_by(&self.u1k);
        Ok((&a + &b).scale(C64::new(0.5, 0.0)))
    }

    /// Dephase-then-rotate form `𝕌∘ℙ`, with `ℙ` killing entries whose
    /// site-`t` parities differ.
    pub fn apply_composed(&self, x: &ComplexOperator) -> Result<ComplexOperator> {
        self.check(x)?;
        let p = ComplexOperator::from_fn(self.dim(), |a, b| {
            if self.parity[a] == self.parity[b] {
                x.get(a, b)
            } else {
                ZERO
            }
        });
        Ok(p.conjugate_by(&self.u0k))
    }

    pub fn apply_n(&self, x: &ComplexOperator, n: usize) -> Result<ComplexOperator> {
        let mut y = x.clone();
        for _ in 0..n {
            y = self.apply_composed(&y)?;
        }
        Ok(y)
    }

    /// Dense superoperator `½ Σ_z Ũ_z ⊗ Ũ_z^*`.
    pub fn matrix(&self) -> Result<ComplexOperator> {
        bound("dense superoperator dimension", self.dim() * self.dim(), MAX_DENSE_SUPEROP_DIM)?;
        let a = self.u0k.kron(&self.u0k.conj());
        let b = self.u1k.kron(&self.u1k.conj());
        Ok((&a + &b).scale(C64::new(0.5, 0.0)))
    }

    /// Spectrum through the exact reduction `𝕋 = 𝕌∘ℙ` and the cyclic copy
    /// symmetries on both tensor factors.
    pub fn spectrum(&self) -> Result<TransferSpectrum> {
        Ok(self.reduced_eigen(false)?.0)
    }

    /// Eigenvalues with `|λ| ≥ 1 − 1e-8` and their eigenoperators.
    pub fn unimodular_eigenoperators(&self) -> Result<Vec<(C64, ComplexOperator)>> {
        Ok(self.reduced_eigen(true)?.1)
    }

    fn sectors(&self) -> Vec<Vec<Vec<(usize, usize, C64)>>> {
        let (k, dd) = (self.k, self.dim());
        let d = 1usize << self.t;
        let rot = |a: usize| (a * d) % dd + a / (dd / d);
        let mut shifts = vec![vec![0usize; k]; dd];
        for (a, s) in shifts.iter_mut().enumerate() {
            let mut c = a;
            for slot in s.iter_mut() {
                *slot = c;
                c = rot(c);
            }
        }
        let omega: Vec<C64> = (0..k).map(|m| C64::from_polar(1.0, -2.0 * PI * m as f64 / k as f64)).collect();
        let mut sectors = vec![Vec::new(); k * k];
        let mut seen = vec![false; dd * dd];
        let mut coeffs: HashMap<(usize, usize), C64> = HashMap::new();
        for a in 0..dd {
            for b in 0..dd {
                if self.parity[a] != self.parity[b] || seen[a * dd + b] {
                    continue;
                }
                for m in 0..k {
                    for n in 0..k {
                        seen[shifts[a][m] * dd + shifts[b][n]] = true;
                    }
                }
                for p in 0..k {
                    for q in 0..k {
                        coeffs.clear();
                        for m in 0..k {
                            for n in 0..k {
                                let key = (shifts[a][m], shifts[b][n]);
                                *coeffs.entry(key).or_insert(ZERO) += omega[(p * m + q * n) % k];
                            }
                        }
                        let mut v: Vec<(usize, usize, C64)> = coeffs
                            .iter()
                            .filter(|(_, c)| c.norm() > 1e-9)
                            .map(|(&(x, y), &c)| (x, y, c))
                            .collect();
                        let norm: f64 = v.iter().map(|e| e.2.norm_sqr()).sum::<f64>().sqrt();
                        if norm < 1e-9 {
                            continue;
                        }
                        v.sort_by_key(|e| (e.0, e.1));
                        v.iter_mut().for_each(|e| e.2 /= norm);
                        sectors[p * k + q].push(v);
                    }
                }
            }
        }
        sectors
    }

    fn reduced_eigen(&self, want_vectors: bool) -> Result<(TransferSpectrum, Vec<(C64, ComplexOperator)>)> {
        let dd = self.dim();
        let u = &self.u0k;
        let mut eigenvalues = Vec::with_capacity(dd * dd);
        let mut residual_max = 0.0f64;
        let mut kept = 0usize;
        let mut eigenops = Vec::new();
        for basis in self.sectors() {
            let n = basis.len();
            if n == 0 {
                continue;
            }
            kept += n;
            let block = Mat::<C64>::from_fn(n, n, |i, j| {
                let mut acc = ZERO;
                for &(xa, xb, cx) in &basis[i] {
                    for &(ya, yb, cy) in &basis[j] {
                        acc += cx.conj() * cy * u.get(xa, ya) * u.get(xb, yb).conj();
                    }
                }
                acc
            });
            let evd = block
                .eigen()
                .map_err(|e| Error::Numerical(format!("transfer eigensolver: {e:?}")))?;
            let (vals, vecs) = (evd.S().column_vector(), evd.U());
            let mut unimodular = Vec::new();
            for i in 0..n {
                let lam = vals[i];
                let x: Vec<C64> = (0..n).map(|r| vecs[(r, i)]).collect();
                let xn = crate::linalg::norm_sqr(&x).sqrt();
                let mut r2 = 0.0;
                for row in 0..n {
                    let mut bx = ZERO;
                    for (c, xc) in x.iter().enumerate() {
                        bx += block[(row, c)] * xc;
                    }
                    r2 += (bx - lam * x[row]).norm_sqr();
                }
                residual_max = residual_max.max(r2.sqrt() / xn);
                eigenvalues.push(lam);
                if lam.norm() >= 1.0 - tol::UNIMODULAR {
                    unimodular.push(lam);
                }
            }
            if want_vectors {
                for (lam, xs) in null_vectors(&block, &unimodular)? {
                    for x in xs {
                        let mut op = ComplexOperator::zeros(dd);
                        for (r, vr) in basis.iter().enumerate() {
                            for &(a, b, c) in vr {
                                op.set(a, b, op.get(a, b) + c * x[r]);
                            }
                        }
                        let lifted = self.apply(&op)?.scale(ONE / lam);
                        let norm = lifted.frobenius_norm();
                        eigenops.push((lam, lifted.scale(C64::new(1.0 / norm, 0.0))));
                    }
                }
            }
        }
        eigenvalues.extend(std::iter::repeat_n(ZERO, dd * dd - kept));
        if residual_max > tol::UNIMODULAR {
            return Err(Error::Numerical(format!(
                "eigenpair residual {residual_max:e} exceeds {:e}",
                tol::UNIMODULAR
            )));
        }
        Ok((TransferSpectrum::from_eigenvalues(self.k, eigenvalues, residual_max), eigenops))
    }
}

/// Eigenvectors of `block` for clusters of nearby eigenvalues, taken as the
/// smallest right singular vectors of `block − λ𝟙`. This is markedly more
/// accurate than the eigensolver's vectors for non-normal blocks.
fn null_vectors(block: &Mat<C64>, lams: &[C64]) -> Result<Vec<(C64, Vec<Vec<C64>>)>> {
    let mut clusters: Vec<Vec<C64>> = Vec::new();
    for &l in lams {
        match clusters.iter_mut().find(|c| (c[0] - l).norm() < 1e-6) {
            Some(c) => c.push(l),
            None => clusters.push(vec![l]),
        }
    }
    let n = block.nrows();
    let mut out = Vec::new();
    for c in clusters {
        let lam = c.iter().sum::<C64>() / c.len() as f64;
        let lam = lam / lam.norm();
        let shifted = Mat::<C64>::from_fn(n, n, |i, j| block[(i, j)] - if i == j { lam } else { ZERO });
        let svd = shifted.svd().map_err(|e| Error::Numerical(format!("SVD: {e:?}")))?;
        let v = svd.V();
        let xs = (n - c.len()..n).map(|col| (0..n).map(|r| v[(r, col)]).collect()).collect();
        out.push((lam, xs));
    }
    Ok(out)
}

/// Ordered spectrum and derived gap data.
#[derive(Clone, Debug, Serialize)]
pub struct TransferSpectrum {
    pub k: usize,
    /// Sorted by modulus (descending), then argument, then real part.
    pub eigenvalues: Vec<C64>,
    pub unimodular_count: usize,
    /// `1 − |λ_{k!+1}|`.
    pub gap: Option<f64>,
    /// `1 − max{|λ| : |λ| < 1 − 1e-8}`.
    pub gap_nonunimodular: Option<f64>,
    /// `|λ_{k!+1}|`.
    pub next_abs: Option<f64>,
    pub max_modulus: f64,
    pub residual_max: f64,
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

impl TransferSpectrum {
    pub fn from_eigenvalues(k: usize, mut eigenvalues: Vec<C64>, residual_max: f64) -> Self {
        eigenvalues.sort_by(|a, b| {
            b.norm()
                .total_cmp(&a.norm())
                .then(a.arg().total_cmp(&b.arg()))
                .then(a.re.total_cmp(&b.re))
        });
        let unimodular_count = eigenvalues
            .iter()
            .filter(|l| (l.norm() - 1.0).abs() < tol::UNIMODULAR)
            .count();
        let kf = factorial(k);
        let next_abs = eigenvalues.get(kf).map(|l| l.norm());
        let gap_nonunimodular = eigenvalues
            .iter()
            .map(|l| l.norm())
            .find(|&m| m < 1.0 - tol::UNIMODULAR)
            .map(|m| 1.0 - m);
        Self {
            k,
            max_modulus: eigenvalues.first().map(|l| l.norm()).unwrap_or(0.0),
            eigenvalues,
            unimodular_count,
            gap: next_abs.map(|m| 1.0 - m),
            gap_nonunimodular,
            next_abs,
            residual_max,
        }
    }
}

/// Spectrum of an explicit superoperator by dense diagonalisation.
pub fn spectrum_dense(superop: &ComplexOperator, k: usize) -> Result<TransferSpectrum> {
    bound("dense superoperator dimension", superop.dim(), MAX_SUPEROP_DIM)?;
    let evd = superop
        .as_mat()
        .eigen()
        .map_err(|e| Error::Numerical(format!("dense eigensolver: {e:?}")))?;
    let n = superop.dim();
    let (vals, vecs) = (evd.S().column_vector(), evd.U());
    let mut residual_max = 0.0f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let x: Vec<C64> = (0..n).map(|r| vecs[(r, i)]).collect();
        let ax = superop.apply(&x);
        let r: f64 = ax.iter().zip(&x).map(|(a, b)| (a - vals[i] * b).norm_sqr()).sum();
        residual_max = residual_max.max(r.sqrt() / crate::linalg::norm_sqr(&x).sqrt());
        out.push(vals[i]);
    }
    Ok(TransferSpectrum::from_eigenvalues(k, out, residual_max))
}

pub fn transfer_apply(x: &ComplexOperator, t: usize, k: usize, g: f64) -> Result<ComplexOperator> {
    TransferMap::new(t, k, g)?.apply(x)
}

pub fn transfer_matrix(t: usize, k: usize, g: f64) -> Result<ComplexOperator> {
    TransferMap::new(t, k, g)?.matrix()
}

/// Gram matrix `G[π, π′] = Tr(P(π)^† P(π′)) = d^{#cycles(π⁻¹∘π′)}`.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    pub d: usize,
    pub perms: Vec<Vec<usize>>,
    pub entries: Mat<f64>,
    pub singular: bool,
}

pub fn gram_matrix(d: usize, k: usize) -> Result<GramMatrix> {
    if d == 0 || k == 0 {
        return Err(Error::InvalidParameter("d and k must be positive".into()));
    }
    bound("k", k, 6)?;
    let perms = all_permutations(k);
    let n = perms.len();
    let entries = Mat::<f64>::from_fn(n, n, |i, j| {
        (d as f64).powi(cycle_count(&compose(&inverse(&perms[i]), &perms[j])) as i32)
    });
    let evs = entries
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("Gram eigensolver: {e:?}")))?;
    let max = evs.iter().cloned().fold(0.0f64, f64::max);
    let min = evs.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(GramMatrix {
        d,
        perms,
        entries,
        singular: min < 1e-10 * max,
    })
}

/// Projection onto `span{P(π)}`: `Σ_π c_π P(π)` with `G c = (Tr P(π)^†X)_π`.
pub fn haar_twirl(x: &ComplexOperator, d: usize, k: usize) -> Result<ComplexOperator> {
    let full = d.checked_pow(k as u32).unwrap_or(usize::MAX);
    if x.dim() != full {
        return Err(Error::DimensionMismatch {
            expected: full,
            found: x.dim(),
        });
    }
    bound("twirl dimension", full, 1 << 12)?;
    let gram = gram_matrix(d, k)?;
    if gram.singular {
        return Err(Error::SingularGram { d, k });
    }
    let n = gram.perms.len();
    let b = Mat::<C64>::from_fn(n, 1, |i, _| (0..full).map(|s| x.get(permute_index(s, &gram.perms[i], d), s)).sum());
    let g = Mat::<C64>::from_fn(n, n, |i, j| C64::new(gram.entries[(i, j)], 0.0));
    let c = solve_linear(&g, &b);
    let coeffs: Vec<C64> = (0..n).map(|i| c[(i, 0)]).collect();
    Ok(permutation_combination(&gram.perms, &coeffs, d))
}

/// `‖𝕋^{n_b}[X] − Φ_Haar[X]‖_max`.
pub fn tdl_twirl_convergence(t: usize, k: usize, g: f64, n_b: usize, x: &ComplexOperator) -> Result<f64> {
    let map = TransferMap::new(t, k, g)?;
    let evolved = map.apply_n(x, n_b)?;
    Ok(evolved.max_abs_diff(&haar_twirl(x, 1 << t, k)?))
}

#[derive(Clone, Debug, Serialize)]
pub struct FixedSpaceReport {
    pub t: usize,
    pub k: usize,
    pub g: f64,
    /// `max_π ‖𝕋[P(π)] − P(π)‖_max`.
    pub permutation_residual: f64,
    pub unimodular_count: usize,
    pub permutation_span_dim: usize,
    /// Spectral distance between the projectors onto the unimodular
    /// eigenspace and `span{P(π)}`; 1 when the dimensions differ.
    pub eigenspace_distance: f64,
}

/// Orthonormalises vectors by modified Gram-Schmidt, dropping dependent ones.
fn orthonormalize(vs: Vec<Vec<C64>>) -> Vec<Vec<C64>> {
    let mut out: Vec<Vec<C64>> = Vec::new();
    for mut v in vs {
        let n0 = crate::linalg::norm_sqr(&v).sqrt();
        for _ in 0..2 {
            for q in &out {
                let c = inner(q, &v);
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
            }
        }
        let n = crate::linalg::norm_sqr(&v).sqrt();
        if n > 1e-8 * n0.max(1e-300) {
            v.iter_mut().for_each(|a| *a /= n);
            out.push(v);
        }
    }
    out
}

pub fn verify_fixed_space(t: usize, k: usize, g: f64) -> Result<FixedSpaceReport> {
    let map = TransferMap::new(t, k, g)?;
    let d = 1usize << t;
    let perms = all_permutations(k);
    let full = map.dim();
    let mut permutation_residual = 0.0f64;
    let mut pvecs = Vec::new();
    for pi in &perms {
        let p = crate::symmetric::permutation_operator(pi, d)?.matrix;
        permutation_residual = permutation_residual.max(map.apply(&p)?.max_abs_diff(&p));
        pvecs.push(p.to_row_major());
    }
    let q2 = orthonormalize(pvecs);
    let eig = map.unimodular_eigenoperators()?;
    let q1 = orthonormalize(eig.iter().map(|(_, op)| op.to_row_major()).collect());
    let eigenspace_distance = if q1.len() != q2.len() {
        1.0
    } else {
        let r = q1.len();
        let overlap = Mat::<C64>::from_fn(r, r, |i, j| inner(&q1[i], &q2[j]));
        let sv = overlap
            .singular_values()
            .map_err(|e| Error::Numerical(format!("SVD: {e:?}")))?;
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min).min(1.0);
        (1.0 - smin * smin).max(0.0).sqrt()
    };
    let _ = full;
    Ok(FixedSpaceReport {
        t,
        k,
        g,
        permutation_residual,
        unimodular_count: q1.len(),
        permutation_span_dim: q2.len(),
        eigenspace_distance,
    })
}
