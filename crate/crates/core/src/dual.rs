//! Space-time dual picture: the projected state on `A` is a fixed boundary
//! map `W` applied to a circuit of two `t`-qubit dual unitaries driven by the
//! measurement record.

use std::f64::consts::FRAC_PI_4;
use std::io::Write;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{bound, Error, Result};
use crate::kicked_ising::{apply_floquet, floquet_dense_open, plus_state, Boundary, KickedIsingParams};
use crate::linalg::{row_space_lstsq, tol, ComplexOperator, C64, I, ZERO};

pub const MAX_DUAL_T: usize = 10;
/// Largest physical chain used when checking the duality directly.
pub const MAX_VERIFY_SITES: usize = 22;

/// How the outcome string `z = (z_{B,1}, …, z_{B,N_B})` orders the dual
/// circuit. `z_{B,1}` labels the site next to `A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeOrder {
    /// `𝒰(z) = U(z_1)⋯U(z_{N_B})`: the far end acts first.
    NearSiteLast,
    /// `𝒰(z) = U(z_{N_B})⋯U(z_1)`.
    NearSiteFirst,
}

/// Ordering for which the duality holds exactly.
pub const OUTCOME_ORDER: OutcomeOrder = OutcomeOrder::NearSiteLast;

/// `U(0)`, `U(1)` for a given `(t, g)`, phase-normalised so that `W` does not
/// depend on the reference bath size.
#[derive(Clone, Debug)]
pub struct DualPair {
    pub t: usize,
    pub g: f64,
    u: [ComplexOperator; 2],
}

impl DualPair {
    pub fn new(t: usize, g: f64) -> Result<Self> {
        if t == 0 {
            return Err(Error::InvalidParameter("t must be at least 1".into()));
        }
        bound("dual circuit width t", t, MAX_DUAL_T)?;
        Ok(Self {
            t,
            g,
            u: [dual_matrix(t, g, 0), dual_matrix(t, g, 1)],
        })
    }

    pub fn unitary(&self, z: u8) -> &ComplexOperator {
        &self.u[(z & 1) as usize]
    }

    pub fn dim(&self) -> usize {
        1 << self.t
    }

    /// Applies `𝒰(z)` to `v` in place.
    pub fn evolve(&self, z: &[u8], order: OutcomeOrder, v: &mut Vec<C64>) {
        let step = |b: u8, v: &mut Vec<C64>| *v = self.unitary(b).apply(v);
        match order {
            OutcomeOrder::NearSiteLast => z.iter().rev().for_each(|&b| step(b, v)),
            OutcomeOrder::NearSiteFirst => z.iter().for_each(|&b| step(b, v)),
        }
    }

    pub fn circuit(&self, z: &[u8], order: OutcomeOrder) -> ComplexOperator {
        let mut m = ComplexOperator::identity(self.dim());
        let mut step = |b: u8| m = self.unitary(b).matmul(&m);
        match order {
            OutcomeOrder::NearSiteLast => z.iter().rev().for_each(|&b| step(b)),
            OutcomeOrder::NearSiteFirst => z.iter().for_each(|&b| step(b)),
        }
        m
    }
}

fn dual_matrix(t: usize, g: f64, z: u8) -> ComplexOperator {
    let b_far = if z == 0 { FRAC_PI_4 } else { 3.0 * FRAC_PI_4 };
    let u = floquet_dense_open(t, FRAC_PI_4, FRAC_PI_4, g, FRAC_PI_4, b_far);
    let phase = C64::from_polar(1.0, FRAC_PI_4) * if z == 0 { C64::new(1.0, 0.0) } else { I };
    u.scale(phase)
}

pub fn dual_unitary(t: usize, g: f64, z: u8) -> Result<ComplexOperator> {
    if z > 1 {
        return Err(Error::InvalidParameter(format!("outcome bit must be 0 or 1, got {z}")));
    }
    Ok(DualPair::new(t, g)?.u[z as usize].clone())
}

pub fn circuit_for_outcome(z: &[u8], t: usize, g: f64, order: OutcomeOrder) -> Result<ComplexOperator> {
    if let Some(&b) = z.iter().find(|&&b| b > 1) {
        return Err(Error::InvalidParameter(format!("outcome bit must be 0 or 1, got {b}")));
    }
    Ok(DualPair::new(t, g)?.circuit(z, order))
}

/// Bits of outcome index `idx`; entry 0 is the most significant bit.
pub fn outcome_bits(idx: usize, n_b: usize) -> Vec<u8> {
    (0..n_b).map(|j| ((idx >> (n_b - 1 - j)) & 1) as u8).collect()
}

/// Boundary map `W: (ℂ²)^{⊗t} → (ℂ²)^{⊗n_a}` fitted on a reference bath.
#[derive(Clone, Debug)]
pub struct BoundaryMap {
    pub n_a: usize,
    pub t: usize,
    pub g: f64,
    pub order: OutcomeOrder,
    pub reference_nb: usize,
    /// `2^{n_a} × 2^t`.
    pub matrix: Mat<C64>,
    pub residual: f64,
    pub singular_ratio: f64,
}

impl BoundaryMap {
    pub fn get(&self, a: usize, m: usize) -> C64 {
        self.matrix[(a, m)]
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let (rows, cols) = (self.matrix.nrows(), self.matrix.ncols());
        assert_eq!(v.len(), cols, "dimension mismatch");
        let mut out = vec![ZERO; rows];
        for (m, &vm) in v.iter().enumerate() {
            for (a, o) in out.iter_mut().enumerate() {
                *o += self.matrix[(a, m)] * vm;
            }
        }
        out
    }

    pub fn ww_dag(&self) -> ComplexOperator {
        ComplexOperator::from_mat(&self.matrix * self.matrix.adjoint()).expect("square")
    }

    pub fn wdag_w(&self) -> ComplexOperator {
        ComplexOperator::from_mat(self.matrix.adjoint() * &self.matrix).expect("square")
    }

    /// One line per row of `W`, columns `re_0,im_0,re_1,im_1,…`.
    pub fn write_csv<Wr: Write>(&self, mut out: Wr) -> std::io::Result<()> {
        write_complex_csv(&mut out, self.matrix.as_ref())
    }
}

pub(crate) fn write_complex_csv<Wr: Write>(out: &mut Wr, m: faer::MatRef<'_, C64>) -> std::io::Result<()> {
    let header: Vec<String> = (0..m.ncols())
        .flat_map(|j| [format!("re_{j}"), format!("im_{j}")])
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .flat_map(|j| [m[(i, j)].re.to_string(), m[(i, j)].im.to_string()])
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Projected (unnormalised) states `ψ̃(z)` of the physical open chain, as
/// columns of a `2^{n_a} × 2^{n_b}` matrix.
pub fn physical_projected_states(n_a: usize, t: usize, g: f64, n_b: usize) -> Result<Mat<C64>> {
    let n = n_a + n_b;
    bound("physical chain sites", n, MAX_VERIFY_SITES)?;
    let p = KickedIsingParams::self_dual(n, g, Boundary::Open);
    let psi = apply_floquet(&plus_state(n), &p, t)?;
    let amps = psi.amplitudes();
    Ok(Mat::from_fn(1 << n_a, 1 << n_b, |a, z| amps[(a << n_b) | z]))
}

fn reference_nb(t: usize) -> usize {
    t + 3
}

/// Fits `W` for the given ordering without judging the residual.
pub fn extract_w_with(n_a: usize, t: usize, g: f64, order: OutcomeOrder, n_ref: usize) -> Result<BoundaryMap> {
    if n_a == 0 {
        return Err(Error::InvalidParameter("n_a must be at least 1".into()));
    }
    let pair = DualPair::new(t, g)?;
    let psi = physical_projected_states(n_a, t, g, n_ref)?;
    let scale = (2.0f64).powf(n_ref as f64 / 2.0);
    let n_out = 1usize << n_ref;
    let mut v = Mat::<C64>::zeros(pair.dim(), n_out);
    for zi in 0..n_out {
        let mut col = plus_state(t).into_amplitudes();
        pair.evolve(&outcome_bits(zi, n_ref), order, &mut col);
        for (m, c) in col.into_iter().enumerate() {
            v[(m, zi)] = c;
        }
    }
    let target = Mat::from_fn(psi.nrows(), n_out, |a, z| psi[(a, z)] * scale);
    let (w, ratio) = row_space_lstsq(&v, &target)?;
    let fit = &w * &v;
    let mut residual = 0.0f64;
    for z in 0..n_out {
        let err: f64 = (0..psi.nrows())
            .map(|a| (fit[(a, z)] - target[(a, z)]).norm_sqr())
            .sum();
        residual = residual.max(err.sqrt() / scale);
    }
    Ok(BoundaryMap {
        n_a,
        t,
        g,
        order,
        reference_nb: n_ref,
        matrix: w,
        residual,
        singular_ratio: ratio,
    })
}

/// `W` for the duality ordering; fails when the fit residual exceeds `1e-9`.
pub fn extract_w(n_a: usize, t: usize, g: f64) -> Result<BoundaryMap> {
    let w = extract_w_with(n_a, t, g, OUTCOME_ORDER, reference_nb(t))?;
    if w.residual > tol::FIT_RESIDUAL {
        return Err(Error::ResidualTooLarge {
            residual: w.residual,
            tolerance: tol::FIT_RESIDUAL,
        });
    }
    Ok(w)
}

/// `max_z ‖ψ̃(z) − 2^{-n_b/2} W 𝒰(z)|+⟩‖` with the physical chain at `g_phys`
/// and the circuit built from `W`'s own coupling and ordering.
pub fn duality_residual(w: &BoundaryMap, g_phys: f64, n_b: usize) -> Result<f64> {
    let psi = physical_projected_states(w.n_a, w.t, g_phys, n_b)?;
    let pair = DualPair::new(w.t, w.g)?;
    let scale = (0.5f64).powf(n_b as f64 / 2.0);
    let mut worst = 0.0f64;
    for zi in 0..1usize << n_b {
        let mut v = plus_state(w.t).into_amplitudes();
        pair.evolve(&outcome_bits(zi, n_b), w.order, &mut v);
        let pred = w.apply(&v);
        let err: f64 = pred
            .iter()
            .enumerate()
            .map(|(a, p)| (psi[(a, zi)] - p * scale).norm_sqr())
            .sum();
        worst = worst.max(err.sqrt());
    }
    Ok(worst)
}

pub fn verify_duality(n_a: usize, t: usize, g: f64, n_b: usize) -> Result<f64> {
    let w = extract_w(n_a, t, g)?;
    duality_residual(&w, g, n_b)
}

/// Same check with a chosen ordering; the wrong ordering is a negative control.
pub fn verify_duality_with_order(n_a: usize, t: usize, g: f64, n_b: usize, order: OutcomeOrder) -> Result<f64> {
    let w = extract_w_with(n_a, t, g, order, reference_nb(t))?;
    duality_residual(&w, g, n_b)
}

#[derive(Clone, Debug, Serialize)]
pub struct IsometryReport {
    /// `true` when `t ≥ n_a` and the check is on `W W^†`.
    pub row_isometry: bool,
    pub constant: f64,
    pub deviation: f64,
}

/// For `t ≥ n_a` checks `W W^† = 2^{t−n_a} 𝟙`; otherwise `W^†W ∝ 𝟙`.
pub fn verify_isometry(w: &BoundaryMap) -> IsometryReport {
    if w.t >= w.n_a {
        let c = (2.0f64).powi((w.t - w.n_a) as i32);
        let target = ComplexOperator::identity(1 << w.n_a).scale(C64::new(c, 0.0));
        IsometryReport {
            row_isometry: true,
            constant: c,
            deviation: w.ww_dag().max_abs_diff(&target),
        }
    } else {
        let g = w.wdag_w();
        let c = g.trace().re / g.dim() as f64;
        let target = ComplexOperator::identity(g.dim()).scale(C64::new(c, 0.0));
        IsometryReport {
            row_isometry: false,
            constant: c,
            deviation: g.max_abs_diff(&target),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{proportional_up_to_phase, ONE};
    use std::f64::consts::PI;

    #[test]
    fn dual_unitaries_are_unitary_and_differ_by_sigma_z() {
        for t in 1..=4 {
            let pair = DualPair::new(t, PI / 9.0).unwrap();
            let z = ComplexOperator::diagonal(&crate::kicked_ising::sigma_z_diag(t, t));
            assert!(pair.unitary(0).is_unitary(1e-12));
            assert!(pair.unitary(1).max_abs_diff(&pair.unitary(0).matmul(&z)) < 1e-12);
        }
        assert!(DualPair::new(0, 0.1).is_err());
        assert!(dual_unitary(2, 0.1, 2).is_err());
    }

    #[test]
    fn single_site_dual_is_hadamard_times_phase() {
        let g = 0.3;
        let u = dual_unitary(1, g, 0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = ComplexOperator::from_row_major(&[ONE * s, ONE * s, ONE * s, -ONE * s]).unwrap();
        let ph = ComplexOperator::diagonal(&[C64::from_polar(1.0, -g), C64::from_polar(1.0, g)]);
        assert!(proportional_up_to_phase(&u, &h.matmul(&ph), 1e-12).unwrap().0);
    }

    #[test]
    fn circuit_ordering() {
        let pair = DualPair::new(2, 0.4).unwrap();
        let z = [1u8, 0, 0];
        let want = pair.unitary(1).matmul(pair.unitary(0)).matmul(pair.unitary(0));
        assert!(pair.circuit(&z, OutcomeOrder::NearSiteLast).max_abs_diff(&want) < 1e-14);
        let want = pair.unitary(0).matmul(pair.unitary(0)).matmul(pair.unitary(1));
        assert!(pair.circuit(&z, OutcomeOrder::NearSiteFirst).max_abs_diff(&want) < 1e-14);
        let mut v = plus_state(2).into_amplitudes();
        pair.evolve(&z, OutcomeOrder::NearSiteLast, &mut v);
        let direct = pair.circuit(&z, OutcomeOrder::NearSiteLast).apply(plus_state(2).amplitudes());
        assert!(v.iter().zip(&direct).all(|(a, b)| (a - b).norm() < 1e-14));
    }

    #[test]
    fn duality_holds_for_small_systems() {
        for (n_a, t, n_b) in [(1, 1, 4), (2, 2, 5), (2, 3, 6), (3, 2, 4), (1, 3, 5)] {
            let r = verify_duality(n_a, t, PI / 9.0, n_b).unwrap();
            assert!(r < 1e-10, "({n_a},{t},{n_b}) residual {r}");
        }
    }

    #[test]
    fn flipped_order_fails() {
        let r = verify_duality_with_order(2, 3, PI / 9.0, 6, OutcomeOrder::NearSiteFirst).unwrap();
        assert!(r > 0.1, "{r}");
    }

    #[test]
    fn w_is_independent_of_reference_bath() {
        let a = extract_w_with(2, 2, 0.41, OUTCOME_ORDER, 4).unwrap();
        let b = extract_w_with(2, 2, 0.41, OUTCOME_ORDER, 7).unwrap();
        let diff = (&a.matrix - &b.matrix).norm_max();
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn isometry_both_regimes() {
        for (n_a, t) in [(2, 3), (3, 3), (2, 4), (3, 2), (2, 1)] {
            let w = extract_w(n_a, t, PI / 5.0).unwrap();
            let rep = verify_isometry(&w);
            assert_eq!(rep.row_isometry, t >= n_a);
            assert!(rep.deviation < 1e-9, "({n_a},{t}) {}", rep.deviation);
            if !rep.row_isometry {
                assert!((rep.constant - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn csv_has_re_im_pairs() {
        let w = extract_w(1, 1, 0.2).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "re_0,im_0,re_1,im_1");
        assert_eq!(lines.len(), 3);
        let first: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
        assert_eq!(first, w.get(0, 0).re);
    }
}
