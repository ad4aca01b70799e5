//! Dense complex operators, state vectors and the numerical primitives shared
//! by every other module.

use std::ops::{Add, Mul, Sub};

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{bound, Error, Result};

pub type C64 = Complex<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Named tolerances used across the crate.
pub mod tol {
    /// Exact identities (unitarity, duality, fixed points).
    pub const EXACT: f64 = 1e-10;
    /// Classification of eigenvalues as unimodular.
    pub const UNIMODULAR: f64 = 1e-8;
    /// Hermiticity of inputs to trace distance.
    pub const HERMITIAN_INPUT: f64 = 1e-8;
    /// Relative singular-value floor for least-squares fits.
    pub const RANK: f64 = 1e-8;
    /// Maximum accepted residual of a boundary-map fit.
    pub const FIT_RESIDUAL: f64 = 1e-9;
}

/// Largest matrix dimension any dense routine will allocate.
pub const MAX_DENSE_DIM: usize = 1 << 14;

/// Square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexOperator {
    mat: Mat<C64>,
}

impl ComplexOperator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: Mat::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: Mat::identity(dim, dim),
        }
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self {
            mat: Mat::from_fn(dim, dim, f),
        }
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.mat[(i, i)] = d;
        }
        m
    }

    /// Builds from row-major entries; the length must be a perfect square.
    pub fn from_row_major(entries: &[C64]) -> Result<Self> {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        if dim * dim != entries.len() {
            return Err(Error::InvalidParameter(format!(
                "{} entries do not form a square matrix",
                entries.len()
            )));
        }
        Ok(Self::from_fn(dim, |i, j| entries[i * dim + j]))
    }

    pub fn from_mat(mat: Mat<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows(),
                found: mat.ncols(),
            });
        }
        Ok(Self { mat })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_mat(&self) -> MatRef<'_, C64> {
        self.mat.as_ref()
    }

    pub fn into_mat(self) -> Mat<C64> {
        self.mat
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.mat[(i, j)] = v;
    }

    pub fn to_row_major(&self) -> Vec<C64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                out.push(self.mat[(i, j)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self {
            mat: self.mat.adjoint().to_owned(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            mat: self.mat.conjugate().to_owned(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            mat: self.mat.transpose().to_owned(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::from_fn(self.dim(), |i, j| self.mat[(i, j)] * c)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        Self {
            mat: &self.mat * &other.mat,
        }
    }

    /// Conjugation `A X A^†`.
    pub fn conjugate_by(&self, a: &Self) -> Self {
        a.matmul(self).matmul(&a.adjoint())
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (da, db) = (self.dim(), other.dim());
        Self::from_fn(da * db, |i, j| {
            self.mat[(i / db, j / db)] * other.mat[(i % db, j % db)]
        })
    }

    /// `A^{⊗k}`; `k = 0` gives the 1x1 identity.
    pub fn kron_power(&self, k: usize) -> Self {
        let mut out = Self::identity(1);
        for _ in 0..k {
            out = out.kron(self);
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.mat[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                m = m.max(self.mat[(i, j)].norm());
            }
        }
        m
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        let mut m = 0.0f64;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                m = m.max((self.mat[(i, j)] - other.mat[(i, j)]).norm());
            }
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.norm_l2()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn unitarity_deviation(&self) -> f64 {
        self.matmul(&self.adjoint())
            .max_abs_diff(&Self::identity(self.dim()))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_deviation() < tol
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim(), "dimension mismatch");
        let d = self.dim();
        let mut out = vec![ZERO; d];
        for j in 0..d {
            let vj = v[j];
            if vj == ZERO {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.mat[(i, j)] * vj;
            }
        }
        out
    }

    /// Rank-one operator `|u⟩⟨v|`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        assert_eq!(u.len(), v.len(), "dimension mismatch");
        Self::from_fn(u.len(), |i, j| u[i] * v[j].conj())
    }
}

impl Add for &ComplexOperator {
    type Output = ComplexOperator;
    fn add(self, rhs: Self) -> ComplexOperator {
        ComplexOperator {
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl Sub for &ComplexOperator {
    type Output = ComplexOperator;
    fn sub(self, rhs: Self) -> ComplexOperator {
        ComplexOperator {
            mat: &self.mat - &rhs.mat,
        }
    }
}

impl Mul for &ComplexOperator {
    type Output = ComplexOperator;
    fn mul(self, rhs: Self) -> ComplexOperator {
        self.matmul(rhs)
    }
}

/// Pure state on `n_qubits` qubits; qubit 1 is the most significant bit.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(n_qubits: usize, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != 1usize << n_qubits {
            return Err(Error::DimensionMismatch {
                expected: 1 << n_qubits,
                found: amps.len(),
            });
        }
        Ok(Self { n_qubits, amps })
    }

    /// Infers the qubit count; the length must be a power of two.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let n = log2_exact(amps.len())?;
        Self::new(n, amps)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[index] = ONE;
        Self { n_qubits, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amps)
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return Err(Error::Numerical("cannot normalize the zero vector".into()));
        }
        for a in &mut self.amps {
            *a /= n;
        }
        Ok(self)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C64 {
        inner(&self.amps, &other.amps)
    }

    pub fn density(&self) -> ComplexOperator {
        ComplexOperator::outer(&self.amps, &self.amps)
    }
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

/// `⟨u|v⟩`.
pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    assert_eq!(u.len(), v.len(), "dimension mismatch");
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn kron_vec(u: &[C64], v: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(u.len() * v.len());
    for a in u {
        for b in v {
            out.push(a * b);
        }
    }
    out
}

pub fn log2_exact(n: usize) -> Result<usize> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "dimension {n} is not a power of two"
        )));
    }
    Ok(n.trailing_zeros() as usize)
}

/// Eigenvalues of a Hermitian operator in ascending order.
pub fn hermitian_eigenvalues(a: &ComplexOperator) -> Result<Vec<f64>> {
    let dev = a.hermiticity_deviation();
    if dev > tol::HERMITIAN_INPUT {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let sym = symmetrized(a);
    sym.mat
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Hermitian eigensolver: {e:?}")))
}

/// Eigenpairs of a Hermitian operator; eigenvectors are the columns.
pub fn hermitian_eigen(a: &ComplexOperator) -> Result<(Vec<f64>, Mat<C64>)> {
    let dev = a.hermiticity_deviation();
    if dev > tol::HERMITIAN_INPUT {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let sym = symmetrized(a);
    let evd = sym
        .mat
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Hermitian eigensolver: {e:?}")))?;
    let vals = evd.S().column_vector().iter().map(|x| x.re).collect();
    Ok((vals, evd.U().to_owned()))
}

fn symmetrized(a: &ComplexOperator) -> ComplexOperator {
    ComplexOperator::from_fn(a.dim(), |i, j| (a.get(i, j) + a.get(j, i).conj()) * 0.5)
}

/// `½‖A − B‖₁` for Hermitian `A`, `B`.
pub fn trace_distance(a: &ComplexOperator, b: &ComplexOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    for m in [a, b] {
        let dev = m.hermiticity_deviation();
        if dev > tol::HERMITIAN_INPUT {
            return Err(Error::NotHermitian { deviation: dev });
        }
    }
    let ev = hermitian_eigenvalues(&(a - b))?;
    Ok(0.5 * ev.iter().map(|x| x.abs()).sum::<f64>())
}

/// Tests `A ≈ c·B` for unit-modulus `c`. The returned phase `φ` satisfies
/// `B ≈ e^{iφ} A` and lies in `(−π, π]`.
pub fn proportional_up_to_phase(
    a: &ComplexOperator,
    b: &ComplexOperator,
    tol: f64,
) -> Result<(bool, f64)> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let d = a.dim();
    // reference entry: largest |b|, lowest row-major index on ties
    let (mut bi, mut bj, mut best) = (0, 0, 0.0f64);
    for i in 0..d {
        for j in 0..d {
            let m = b.get(i, j).norm();
            if m > best {
                (bi, bj, best) = (i, j, m);
            }
        }
    }
    if best == 0.0 {
        if a.max_abs() == 0.0 {
            return Ok((true, 0.0));
        }
        return Err(Error::ZeroReference);
    }
    let ratio = a.get(bi, bj) / b.get(bi, bj);
    if ratio.norm() == 0.0 {
        return Ok((false, 0.0));
    }
    let c = ratio / ratio.norm();
    let dev = a.max_abs_diff(&b.scale(c));
    let mut phase = -c.arg();
    if phase <= -std::f64::consts::PI {
        phase += 2.0 * std::f64::consts::PI;
    }
    Ok((dev < tol, phase))
}

/// Counter-based stream: the same `(seed, index)` always gives the same
/// generator, independent of how work is scheduled.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn ginibre_entry<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar unitary from a Ginibre matrix drawn column-major, QR with the phases
/// of `diag(R)` absorbed into `Q`.
pub fn haar_unitary_with<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<ComplexOperator> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    bound("haar_unitary dimension", d, MAX_DENSE_DIM)?;
    let mut g = Mat::<C64>::zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            g[(i, j)] = ginibre_entry(rng);
        }
    }
    let qr = g.qr();
    let r = qr.R();
    let mut q = qr.compute_Q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let ph = if rjj.norm() == 0.0 { ONE } else { rjj / rjj.norm() };
        for i in 0..d {
            q[(i, j)] *= ph;
        }
    }
    ComplexOperator::from_mat(q)
}

pub fn haar_unitary(d: usize, seed: u64) -> Result<ComplexOperator> {
    haar_unitary_with(d, &mut stream_rng(seed, 0))
}

/// Haar-random state; identical to column 0 of the unitary drawn from the
/// same generator.
pub fn haar_state_with<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<StateVector> {
    let n = log2_exact(d)?;
    let amps: Vec<C64> = (0..d).map(|_| ginibre_entry(rng)).collect();
    StateVector::new(n, amps)?.normalized()
}

pub fn haar_state(d: usize, seed: u64) -> Result<StateVector> {
    haar_state_with(d, &mut stream_rng(seed, 0))
}

/// Solves the complex linear system `A x = b` by partial-pivot LU.
pub(crate) fn solve_linear(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
    a.partial_piv_lu().solve(b)
}

/// Fits `X` minimising `‖X V − T‖_F` where the columns of `V` span the row
/// space. Returns the fit and the singular-value ratio `σ_min/σ_max` of `V`.
pub(crate) fn row_space_lstsq(v: &Mat<C64>, t: &Mat<C64>) -> Result<(Mat<C64>, f64)> {
    let gram = v * v.adjoint();
    let rows = gram.nrows();
    let evs = gram
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Gram eigensolver: {e:?}")))?;
    let max = evs.iter().cloned().fold(0.0f64, f64::max);
    let min = evs.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0);
    let ratio = if max > 0.0 { (min / max).sqrt() } else { 0.0 };
    if ratio < tol::RANK {
        let rank = evs
            .iter()
            .filter(|&&x| x > 0.0 && (x / max).sqrt() >= tol::RANK)
            .count();
        return Err(Error::RankDeficient {
            rank,
            required: rows,
        });
    }
    // X G = T V^†  →  G X^† = V T^†
    let rhs = v * t.adjoint();
    let xh = solve_linear(&gram, &rhs);
    Ok((xh.adjoint().to_owned(), ratio))
}
