//! Kicked-Ising Floquet operator `U_F = e^{-iτH_K} e^{-iτH_I}` on a chain of
//! qubits, as a dense matrix (small chains) or applied matrix-free.
//!
//! Site 1 is the most significant bit of a basis index and `σ^z|0⟩ = +|0⟩`.

use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use crate::angle::is_multiple_of;
use crate::error::{bound, Error, Result};
use crate::linalg::{ComplexOperator, StateVector, C64, ZERO};

pub const MAX_DENSE_SITES: usize = 13;
pub const MAX_STATEVECTOR_SITES: usize = 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

fn default_tau() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KickedIsingParams {
    pub n_sites: usize,
    #[serde(rename = "J")]
    pub j: f64,
    pub h: f64,
    pub g: f64,
    pub b_left: f64,
    pub b_right: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    pub boundary: Boundary,
}

impl KickedIsingParams {
    /// Self-dual chain `J = h = π/4` with boundary fields `π/4` (open).
    pub fn self_dual(n_sites: usize, g: f64, boundary: Boundary) -> Self {
        let b = match boundary {
            Boundary::Open => FRAC_PI_4,
            Boundary::Periodic => 0.0,
        };
        Self {
            n_sites,
            j: FRAC_PI_4,
            h: FRAC_PI_4,
            g,
            b_left: b,
            b_right: b,
            tau: 1.0,
            boundary,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_sites must be at least 2, got {}",
                self.n_sites
            )));
        }
        let vals = [self.j, self.h, self.g, self.b_left, self.b_right, self.tau];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coupling".into()));
        }
        Ok(())
    }

    pub fn is_self_dual(&self) -> bool {
        let q = |x: f64| ((x * self.tau).abs() - FRAC_PI_4).abs() < 1e-12;
        q(self.j) && q(self.h)
    }

    /// Self-dual with `g ∈ ℤπ/8`.
    pub fn is_exceptional(&self) -> bool {
        self.is_self_dual() && is_multiple_of(self.g * self.tau, std::f64::consts::PI / 8.0)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Diagonal phases `e^{-iτE(x)}` of the Ising layer, evaluated through a small
/// table keyed by (domain walls, popcount, end bits).
pub(crate) struct IsingPhases {
    n: usize,
    periodic: bool,
    table: Vec<C64>,
}

impl IsingPhases {
    pub(crate) fn new(p: &KickedIsingParams) -> Self {
        Self::build(
            p.n_sites,
            p.j * p.tau,
            p.g * p.tau,
            p.b_left * p.tau,
            p.b_right * p.tau,
            p.boundary == Boundary::Periodic,
        )
    }

    /// Couplings already multiplied by τ. `n = 1` is allowed: both boundary
    /// fields then act on the single site.
    pub(crate) fn build(n: usize, j: f64, g: f64, bl: f64, br: f64, periodic: bool) -> Self {
        let mut table = vec![ZERO; (n + 1) * (n + 1) * 4];
        for dw in 0..n {
            for pc in 0..=n {
                for ends in 0..4 {
                    let (first, last) = ((ends >> 1) & 1, ends & 1);
                    let zz = (n as f64 - 1.0) - 2.0 * dw as f64;
                    let mut e = j * zz + g * (n as f64 - 2.0 * pc as f64);
                    let (z1, zn) = (1.0 - 2.0 * first as f64, 1.0 - 2.0 * last as f64);
                    if periodic {
                        e += j * z1 * zn;
                    } else {
                        e += bl * z1 + br * zn;
                    }
                    table[(dw * (n + 1) + pc) * 4 + ends] = C64::from_polar(1.0, -e);
                }
            }
        }
        Self { n, periodic, table }
    }

    #[inline]
    pub(crate) fn phase(&self, x: usize) -> C64 {
        let n = self.n;
        let mask = if n >= 2 { (1usize << (n - 1)) - 1 } else { 0 };
        let dw = ((x ^ (x >> 1)) & mask).count_ones() as usize;
        let pc = x.count_ones() as usize;
        let first = (x >> (n - 1)) & 1;
        let last = x & 1;
        let _ = self.periodic;
        self.table[(dw * (n + 1) + pc) * 4 + (first << 1 | last)]
    }

    pub(crate) fn phases(&self) -> Vec<C64> {
        (0..1usize << self.n).map(|x| self.phase(x)).collect()
    }
}

/// Applies `e^{-ihσ^y}` to every site in place.
pub(crate) fn kick_all(amps: &mut [C64], n: usize, h: f64) {
    let (c, s) = (h.cos(), h.sin());
    for site in 0..n {
        let stride = 1usize << site;
        for chunk in amps.chunks_mut(2 * stride) {
            let (lo, hi) = chunk.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a0, *a1);
                *a0 = x * c - y * s;
                *a1 = x * s + y * c;
            }
        }
    }
}

pub fn ising_layer(p: &KickedIsingParams) -> Result<ComplexOperator> {
    p.validate()?;
    bound("dense Ising layer sites", p.n_sites, MAX_DENSE_SITES)?;
    Ok(ComplexOperator::diagonal(&IsingPhases::new(p).phases()))
}

/// Dense kick layer `⊗_j e^{-iτhσ^y_j}`.
pub fn kick_layer(p: &KickedIsingParams) -> Result<ComplexOperator> {
    p.validate()?;
    bound("dense kick layer sites", p.n_sites, MAX_DENSE_SITES)?;
    Ok(kick_dense(p.n_sites, p.h * p.tau))
}

pub(crate) fn kick_dense(n: usize, h: f64) -> ComplexOperator {
    let (c, s) = (h.cos(), h.sin());
    let ry = ComplexOperator::from_row_major(&[
        C64::new(c, 0.0),
        C64::new(-s, 0.0),
        C64::new(s, 0.0),
        C64::new(c, 0.0),
    ])
    .expect("2x2");
    ry.kron_power(n)
}

pub fn build_floquet(p: &KickedIsingParams) -> Result<ComplexOperator> {
    Ok(kick_layer(p)?.matmul(&ising_layer(p)?))
}

/// Dense Floquet operator for `n ≥ 1` sites (open chain), used by the
/// dual picture where single-site chains occur.
pub(crate) fn floquet_dense_open(n: usize, j: f64, h: f64, g: f64, bl: f64, br: f64) -> ComplexOperator {
    let phases = IsingPhases::build(n, j, g, bl, br, false).phases();
    let mut out = kick_dense(n, h);
    let d = 1usize << n;
    for col in 0..d {
        for row in 0..d {
            let v = out.get(row, col) * phases[col];
            out.set(row, col, v);
        }
    }
    out
}

pub fn apply_floquet(state: &StateVector, p: &KickedIsingParams, steps: usize) -> Result<StateVector> {
    p.validate()?;
    bound("state-vector sites", p.n_sites, MAX_STATEVECTOR_SITES)?;
    if state.n_qubits() != p.n_sites {
        return Err(Error::DimensionMismatch {
            expected: p.n_sites,
            found: state.n_qubits(),
        });
    }
    let phases = IsingPhases::new(p);
    let mut amps = state.amplitudes().to_vec();
    for _ in 0..steps {
        for (x, a) in amps.iter_mut().enumerate() {
            *a *= phases.phase(x);
        }
        kick_all(&mut amps, p.n_sites, p.h * p.tau);
    }
    StateVector::new(p.n_sites, amps)
}

pub fn plus_state(n: usize) -> StateVector {
    let a = C64::new((0.5f64).powf(n as f64 / 2.0), 0.0);
    StateVector::new(n, vec![a; 1 << n]).expect("consistent size")
}

/// `H^{⊗n} e^{-igΣσ^z} Π CZ` on an open chain.
pub fn cz_form(n: usize, g: f64) -> Result<ComplexOperator> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    bound("cz_form sites", n, MAX_DENSE_SITES)?;
    let d = 1usize << n;
    let diag: Vec<C64> = (0..d)
        .map(|x| {
            let mut ph = 0.0;
            for s in 0..n {
                ph += g * (1.0 - 2.0 * ((x >> s) & 1) as f64);
            }
            let walls = if n >= 2 { (x & (x >> 1)).count_ones() } else { 0 };
            let sign = if walls % 2 == 1 { -1.0 } else { 1.0 };
            C64::from_polar(sign, -ph)
        })
        .collect();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let had = ComplexOperator::from_row_major(&[
        C64::new(s, 0.0),
        C64::new(s, 0.0),
        C64::new(s, 0.0),
        C64::new(-s, 0.0),
    ])?;
    Ok(had.kron_power(n).matmul(&ComplexOperator::diagonal(&diag)))
}

/// `σ^z` on `site` (1-based) of an `n`-site register, as a diagonal of signs.
#[cfg(test)]
pub(crate) fn sigma_z_diag(n: usize, site: usize) -> Vec<C64> {
    (0..1usize << n)
        .map(|x| if (x >> (n - site)) & 1 == 0 { C64::new(1.0, 0.0) } else { C64::new(-1.0, 0.0) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{haar_state, proportional_up_to_phase, ONE};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn pauli(name: char) -> ComplexOperator {
        let (o, z, i) = (ONE, ZERO, crate::linalg::I);
        let e = match name {
            'x' => [z, o, o, z],
            'y' => [z, -i, i, z],
            'z' => [o, z, z, -o],
            _ => [o, z, z, o],
        };
        ComplexOperator::from_row_major(&e).unwrap()
    }

    fn embed(n: usize, site: usize, op: &ComplexOperator) -> ComplexOperator {
        let id = pauli('i');
        let mut out = ComplexOperator::identity(1);
        for s in 1..=n {
            out = out.kron(if s == site { op } else { &id });
        }
        out
    }

    // Oracle: matrix exponential of a Hermitian matrix via its eigenbasis.
    fn expm_herm(h: &ComplexOperator, t: f64) -> ComplexOperator {
        let (vals, vecs) = crate::linalg::hermitian_eigen(h).unwrap();
        let v = ComplexOperator::from_mat(vecs).unwrap();
        let d: Vec<C64> = vals.iter().map(|e| C64::from_polar(1.0, -t * e)).collect();
        v.matmul(&ComplexOperator::diagonal(&d)).matmul(&v.adjoint())
    }

    fn floquet_oracle(p: &KickedIsingParams) -> ComplexOperator {
        let n = p.n_sites;
        let mut hi = ComplexOperator::zeros(1 << n);
        let zz = |a: usize, b: usize| embed(n, a, &pauli('z')).matmul(&embed(n, b, &pauli('z')));
        for s in 1..n {
            hi = &hi + &zz(s, s + 1).scale(C64::new(p.j, 0.0));
        }
        if p.boundary == Boundary::Periodic {
            hi = &hi + &zz(n, 1).scale(C64::new(p.j, 0.0));
        } else {
            hi = &hi + &embed(n, 1, &pauli('z')).scale(C64::new(p.b_left, 0.0));
            hi = &hi + &embed(n, n, &pauli('z')).scale(C64::new(p.b_right, 0.0));
        }
        let mut hk = ComplexOperator::zeros(1 << n);
        for s in 1..=n {
            hi = &hi + &embed(n, s, &pauli('z')).scale(C64::new(p.g, 0.0));
            hk = &hk + &embed(n, s, &pauli('y')).scale(C64::new(p.h, 0.0));
        }
        expm_herm(&hk, p.tau).matmul(&expm_herm(&hi, p.tau))
    }

    #[test]
    fn floquet_matches_exponential_oracle() {
        for boundary in [Boundary::Open, Boundary::Periodic] {
            for n in [2, 3, 4] {
                let p = KickedIsingParams {
                    n_sites: n,
                    j: 0.37,
                    h: 0.81,
                    g: -0.23,
                    b_left: 0.11,
                    b_right: 0.52,
                    tau: 0.9,
                    boundary,
                };
                let u = build_floquet(&p).unwrap();
                assert!(u.max_abs_diff(&floquet_oracle(&p)) < 1e-10);
                assert!(u.is_unitary(1e-10));
            }
        }
    }

    #[test]
    fn cz_form_equals_self_dual_floquet_up_to_phase() {
        for n in 2..=6 {
            for g in [PI / 9.0, PI / 5.0, 0.37] {
                let p = KickedIsingParams::self_dual(n, g, Boundary::Open);
                let (ok, _) =
                    proportional_up_to_phase(&build_floquet(&p).unwrap(), &cz_form(n, g).unwrap(), 1e-10)
                        .unwrap();
                assert!(ok, "n={n} g={g}");
            }
        }
    }

    #[test]
    fn examples() {
        let p = KickedIsingParams {
            n_sites: 2,
            j: 0.0,
            h: 0.0,
            g: 0.0,
            b_left: 0.0,
            b_right: 0.0,
            tau: 1.0,
            boundary: Boundary::Open,
        };
        assert!(build_floquet(&p).unwrap().max_abs_diff(&ComplexOperator::identity(4)) < 1e-15);
        let mut bad = p.clone();
        bad.n_sites = 1;
        assert!(build_floquet(&bad).is_err());
        let big = KickedIsingParams::self_dual(14, 0.1, Boundary::Open);
        assert!(matches!(build_floquet(&big), Err(Error::SizeBound { .. })));
        let s = plus_state(3);
        assert!(matches!(
            apply_floquet(&s, &KickedIsingParams::self_dual(4, 0.1, Boundary::Open), 1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn params_json_roundtrip_and_flags() {
        let p = KickedIsingParams::self_dual(5, PI / 8.0, Boundary::Periodic);
        let s = p.to_json().unwrap();
        assert!(s.contains("\"J\"") && s.contains("\"periodic\""));
        assert_eq!(KickedIsingParams::from_json(&s).unwrap(), p);
        assert!(p.is_self_dual() && p.is_exceptional());
        let q = KickedIsingParams::self_dual(5, PI / 9.0, Boundary::Open);
        assert!(q.is_self_dual() && !q.is_exceptional());
        let no_tau = r#"{"n_sites":3,"J":0.1,"h":0.2,"g":0.3,"b_left":0,"b_right":0,"boundary":"open"}"#;
        assert_eq!(KickedIsingParams::from_json(no_tau).unwrap().tau, 1.0);
        assert!(KickedIsingParams::from_json(&no_tau.replace("3", "1")).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn matrix_free_matches_dense(n in 2usize..7, steps in 0usize..4, seed in 0u64..1000,
                                     j in -1.0f64..1.0, h in -1.0f64..1.0, g in -1.0f64..1.0,
                                     periodic in any::<bool>()) {
            let boundary = if periodic { Boundary::Periodic } else { Boundary::Open };
            let p = KickedIsingParams { n_sites: n, j, h, g, b_left: 0.3, b_right: -0.2, tau: 1.0, boundary };
            let psi = haar_state(1 << n, seed).unwrap();
            let fast = apply_floquet(&psi, &p, steps).unwrap();
            let u = build_floquet(&p).unwrap();
            let mut v = psi.amplitudes().to_vec();
            for _ in 0..steps { v = u.apply(&v); }
            for (a, b) in fast.amplitudes().iter().zip(&v) {
                prop_assert!((a - b).norm() < 1e-10);
            }
            prop_assert!((fast.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }
}
