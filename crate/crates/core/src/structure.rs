//! Structural identities behind the fixed-space argument: the `V_p`
//! operators, the single-site rotations `W₁`, `W₂`, the rotation angle `θ₁`,
//! an integer scan and the cluster-state relation.

use std::f64::consts::{FRAC_PI_4, PI};

use serde::Serialize;

use crate::dual::DualPair;
use crate::error::{bound, Error, Result};
use crate::kicked_ising::floquet_dense_open;
use crate::linalg::{inner, norm_sqr, proportional_up_to_phase, ComplexOperator, C64, I, ONE, ZERO};

pub const MAX_LEMMA_T: usize = 6;
pub const MAX_CLUSTER_QUBITS: usize = 12;

pub fn pauli_x() -> ComplexOperator {
    ComplexOperator::from_row_major(&[ZERO, ONE, ONE, ZERO]).expect("2x2")
}

pub fn pauli_y() -> ComplexOperator {
    ComplexOperator::from_row_major(&[ZERO, -I, I, ZERO]).expect("2x2")
}

pub fn pauli_z() -> ComplexOperator {
    ComplexOperator::from_row_major(&[ONE, ZERO, ZERO, -ONE]).expect("2x2")
}

/// `exp(−iθ n̂·σ)` for a unit vector `n̂`.
pub fn su2(theta: f64, n: [f64; 3]) -> ComplexOperator {
    let (c, s) = (theta.cos(), theta.sin());
    let mi = C64::new(0.0, -s);
    ComplexOperator::from_row_major(&[
        C64::new(c, 0.0) + mi * n[2],
        mi * C64::new(n[0], -n[1]),
        mi * C64::new(n[0], n[1]),
        C64::new(c, 0.0) - mi * n[2],
    ])
    .expect("2x2")
}

/// `op` on `site` (1-based) of a `t`-site register.
pub fn on_site(t: usize, site: usize, op: &ComplexOperator) -> ComplexOperator {
    let id = ComplexOperator::identity(2);
    let mut out = ComplexOperator::identity(1);
    for s in 1..=t {
        out = out.kron(if s == site { op } else { &id });
    }
    out
}

fn lemma_t(t: usize) -> Result<()> {
    if t < 2 {
        return Err(Error::InvalidParameter(format!("t must be at least 2, got {t}")));
    }
    bound("lemma register size t", t, MAX_LEMMA_T)
}

/// `V_p = U(0)^p σ^z_t U(0)^{−p}`.
pub fn v_p(p: i32, t: usize, g: f64) -> Result<ComplexOperator> {
    lemma_t(t)?;
    if p.unsigned_abs() > 8 {
        return Err(Error::InvalidParameter(format!("|p| must be at most 8, got {p}")));
    }
    let pair = DualPair::new(t, g)?;
    let step = if p >= 0 {
        pair.unitary(0).clone()
    } else {
        pair.unitary(0).adjoint()
    };
    let mut v = on_site(t, t, &pauli_z());
    for _ in 0..p.unsigned_abs() {
        v = v.conjugate_by(&step);
    }
    Ok(v)
}

/// `W₁ = V₋₁V₁V₂V₀V₋₁V₁V₂V₀`, `W₂ = V₋₁V₁V₋₁V₁`.
pub fn w1_w2(t: usize, g: f64) -> Result<(ComplexOperator, ComplexOperator)> {
    let v: Vec<ComplexOperator> = (-1..=2).map(|p| v_p(p, t, g)).collect::<Result<_>>()?;
    let (vm1, v0, v1, v2) = (&v[0], &v[1], &v[2], &v[3]);
    let half = vm1.matmul(v1).matmul(v2).matmul(v0);
    let w1 = half.matmul(&half);
    let w2 = vm1.matmul(v1).matmul(vm1).matmul(v1);
    Ok((w1, w2))
}

/// Normalised partial trace onto the last site and the residual
/// `‖W − 𝟙 ⊗ w‖_max`.
pub fn last_site_factor(w: &ComplexOperator) -> (ComplexOperator, f64) {
    let rest = w.dim() / 2;
    let mut f = ComplexOperator::zeros(2);
    for r in 0..rest {
        for s in 0..2 {
            for s2 in 0..2 {
                f.set(s, s2, f.get(s, s2) + w.get(2 * r + s, 2 * r + s2));
            }
        }
    }
    let f = f.scale(C64::new(1.0 / rest as f64, 0.0));
    let lifted = ComplexOperator::identity(rest).kron(&f);
    let res = w.max_abs_diff(&lifted);
    (f, res)
}

#[derive(Clone, Debug, Serialize)]
pub struct RotationDecomposition {
    /// In `[0, 2π)`.
    pub theta: f64,
    pub axis: [f64; 3],
    pub global_phase: f64,
    pub degenerate: bool,
}

impl RotationDecomposition {
    /// `e^{iφ} exp(−iθ n̂·S)` with `S = σ/2`.
    pub fn reconstruct(&self) -> ComplexOperator {
        su2(self.theta / 2.0, self.axis).scale(C64::from_polar(1.0, self.global_phase))
    }
}

/// Writes a 2x2 unitary as `e^{iφ} exp(−iθ n̂·S)`. The axis sign is fixed by
/// making its first nonzero component positive; `u ∝ 𝟙` gives `θ = 0`,
/// axis `+z`, flagged degenerate.
pub fn rotation_decompose(u: &ComplexOperator) -> Result<RotationDecomposition> {
    if u.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: u.dim() });
    }
    let dev = u.unitarity_deviation();
    if dev > 1e-10 {
        return Err(Error::InvalidParameter(format!("not unitary (deviation {dev:e})")));
    }
    let det = u.get(0, 0) * u.get(1, 1) - u.get(0, 1) * u.get(1, 0);
    let mut phi = det.arg() / 2.0;
    let mut v = u.scale(C64::from_polar(1.0, -phi));
    // v = cos(θ/2)𝟙 − i sin(θ/2) n̂·σ
    let comps = |v: &ComplexOperator| {
        let a0 = ((v.get(0, 0) + v.get(1, 1)) * 0.5).re;
        let x = -((v.get(0, 1) + v.get(1, 0)) * 0.5).im;
        let y = ((v.get(1, 0) - v.get(0, 1)) * 0.5).re;
        let z = -((v.get(0, 0) - v.get(1, 1)) * 0.5).im;
        (a0, [x, y, z])
    };
    let (mut a0, mut s) = comps(&v);
    let sn = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
    if sn < 1e-12 {
        return Ok(RotationDecomposition {
            theta: 0.0,
            axis: [0.0, 0.0, 1.0],
            global_phase: if a0 >= 0.0 { phi } else { wrap(phi + PI) },
            degenerate: true,
        });
    }
    let first = s.iter().copied().find(|c| c.abs() > 1e-12).unwrap_or(0.0);
    if first < 0.0 {
        phi += PI;
        v = v.scale(-ONE);
        (a0, s) = comps(&v);
    }
    let axis = [s[0] / sn, s[1] / sn, s[2] / sn];
    let mut theta = 2.0 * sn.atan2(a0);
    if theta >= 2.0 * PI {
        theta -= 2.0 * PI;
    }
    Ok(RotationDecomposition {
        theta,
        axis,
        global_phase: wrap(phi),
        degenerate: false,
    })
}

fn wrap(x: f64) -> f64 {
    let mut y = x % (2.0 * PI);
    if y <= -PI {
        y += 2.0 * PI;
    } else if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// `θ₁ = 2 arccos(2cos⁴(2g) − 1)`.
pub fn theta1(g: f64) -> f64 {
    2.0 * (2.0 * (2.0 * g).cos().powi(4) - 1.0).clamp(-1.0, 1.0).acos()
}

/// Closed-form rotation axis `n̂₁` of `W₁`.
pub fn axis_n1(g: f64) -> [f64; 3] {
    let (c, s) = ((2.0 * g).cos(), (2.0 * g).sin());
    let norm = (1.0 - (-1.0 + 4.0 * (4.0 * g).cos() + (8.0 * g).cos()).powi(2) / 16.0).sqrt();
    [
        2.0 * c.powi(3) * s / norm,
        -(4.0 * g).sin().powi(2) / 2.0 / norm,
        -2.0 * c.powi(3) * s / norm,
    ]
}

pub fn theta2(g: f64) -> f64 {
    (-8.0 * g).rem_euclid(2.0 * PI)
}

/// `e^{i2gσ^z}e^{−i2gσ^x}e^{i2gσ^z}e^{−i2gσ^x}`.
pub fn w1_closed_form(g: f64) -> ComplexOperator {
    let zp = su2(-2.0 * g, [0.0, 0.0, 1.0]);
    let xm = su2(2.0 * g, [1.0, 0.0, 0.0]);
    zp.matmul(&xm).matmul(&zp).matmul(&xm)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AngleClass {
    Rational { p: i64, q: i64 },
    NoSmallDenominatorRational,
}

#[derive(Clone, Debug, Serialize)]
pub struct RationalProbe {
    pub g_num: i64,
    pub g_den: i64,
    /// `θ₁/π`.
    pub value: f64,
    pub best_p: i64,
    pub best_q: i64,
    pub error: f64,
    pub class: AngleClass,
    /// The classification is a floating-point heuristic, not a proof.
    pub heuristic: bool,
}

/// Best rational approximation `p/q` of `x` with `q ≤ max_den`, from
/// continued-fraction convergents and the final semiconvergent.
pub fn best_rational(x: f64, max_den: i64) -> (i64, i64) {
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut y = x;
    for _ in 0..64 {
        let a = y.floor();
        if a.abs() > 1e15 {
            break;
        }
        let a = a as i64;
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if q2 > max_den {
            let m = (max_den - q0) / q1;
            let (ps, qs) = (p0 + m * p1, q0 + m * q1);
            let err = |p: i64, q: i64| (x - p as f64 / q as f64).abs();
            return if qs > 0 && err(ps, qs) < err(p1, q1) { (ps, qs) } else { (p1, q1) };
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = y - a as f64;
        if frac.abs() < 1e-300 {
            break;
        }
        y = 1.0 / frac;
    }
    (p1, q1)
}

pub fn rational_angle_probe(g_num: i64, g_den: i64, max_den: i64) -> Result<RationalProbe> {
    if g_den == 0 {
        return Err(Error::InvalidParameter("g_den must be nonzero".into()));
    }
    if g_den.abs() > 100 || max_den < 1 {
        return Err(Error::InvalidParameter("need |g_den| ≤ 100 and max_den ≥ 1".into()));
    }
    let g = g_num as f64 * PI / g_den as f64;
    let value = theta1(g) / PI;
    let (p, q) = best_rational(value, max_den);
    let error = (value - p as f64 / q as f64).abs();
    Ok(RationalProbe {
        g_num,
        g_den,
        value,
        best_p: p,
        best_q: q,
        error,
        class: if error < 1e-12 {
            AngleClass::Rational { p, q }
        } else {
            AngleClass::NoSmallDenominatorRational
        },
        heuristic: true,
    })
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Every `n ≤ n_max` such that no integer in the open interval `(n/4, 3n/4)`
/// is coprime with `n`.
pub fn lemma3_scan(n_max: u64) -> Vec<u64> {
    let ns: Vec<u64> = (1..=n_max).collect();
    let flags = crate::par::map_ordered(&ns, |&n| ((n / 4 + 1)..).take_while(|&m| 4 * m < 3 * n).all(|m| gcd(m, n) > 1));
    ns.into_iter().zip(flags).filter(|(_, f)| *f).map(|(n, _)| n).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusterCheck {
    pub n: usize,
    pub t: usize,
    pub g: f64,
    /// Fidelity with `|U_F^t)`, row 1 carrying the input index.
    pub fidelity: f64,
    /// Fidelity with the single-step `|U_F)`, for reference.
    pub fidelity_single_step: f64,
    pub matched: bool,
    pub cz_count: usize,
}

/// Cluster state on the `n × t` grid, site `(i, α)` at index `(α−1)·n + (i−1)`
/// (row 1 most significant), with `e^{−igσ^z}` on every site, bulk rows
/// projected on `⟨+|` and Hadamards on row `t`. Returns the `2n`-qubit state
/// indexed (row 1, row `t`).
pub fn cluster_boundary_state(n: usize, t: usize, g: f64) -> Result<(Vec<C64>, usize)> {
    if t < 2 {
        return Err(Error::InvalidParameter(
            "t must be at least 2: a single row has no input/output split".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    bound("cluster qubits n·t", n * t, MAX_CLUSTER_QUBITS)?;
    let nq = n * t;
    let bit = |x: usize, i: usize, a: usize| (x >> (nq - 1 - (a * n + i))) & 1;
    let mut edges = Vec::new();
    for a in 0..t {
        for i in 0..n {
            if i + 1 < n {
                edges.push(((i, a), (i + 1, a)));
            }
            if a + 1 < t {
                edges.push(((i, a), (i, a + 1)));
            }
        }
    }
    let bulk = n * (t - 2);
    let amp0 = (0.5f64).powf(nq as f64 / 2.0) * (0.5f64).powf(bulk as f64 / 2.0);
    let mut kept = vec![ZERO; 1 << (2 * n)];
    for x in 0..1usize << nq {
        let parity = edges
            .iter()
            .filter(|&&((i, a), (j, b))| bit(x, i, a) & bit(x, j, b) == 1)
            .count();
        let pc = x.count_ones() as f64;
        let phase = -g * (nq as f64 - 2.0 * pc);
        let sign = if parity % 2 == 1 { -1.0 } else { 1.0 };
        let top = x >> (nq - n);
        let last = x & ((1 << n) - 1);
        kept[(top << n) | last] += C64::from_polar(sign * amp0, phase);
    }
    // Hadamards on the row-t qubits (least significant block)
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for q in 0..n {
        let stride = 1usize << q;
        for chunk in kept.chunks_mut(2 * stride) {
            let (lo, hi) = chunk.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a0, *a1);
                *a0 = (u + v) * s;
                *a1 = (u - v) * s;
            }
        }
    }
    Ok((kept, edges.len()))
}

fn fidelity(a: &[C64], b: &[C64]) -> f64 {
    inner(a, b).norm_sqr() / (norm_sqr(a) * norm_sqr(b))
}

pub fn cluster_relation_check(n: usize, t: usize, g: f64) -> Result<ClusterCheck> {
    let (state, cz_count) = cluster_boundary_state(n, t, g)?;
    let u = floquet_dense_open(n, FRAC_PI_4, FRAC_PI_4, g, FRAC_PI_4, FRAC_PI_4);
    let mut ut = ComplexOperator::identity(1 << n);
    for _ in 0..t {
        ut = u.matmul(&ut);
    }
    let d = 1usize << n;
    // |U) with the first index the input leg: entry (m, n') = U[n', m]
    let vec_of = |op: &ComplexOperator| (0..d * d).map(|x| op.get(x % d, x / d)).collect::<Vec<_>>();
    let f = fidelity(&state, &vec_of(&ut));
    let f1 = fidelity(&state, &vec_of(&u));
    Ok(ClusterCheck {
        n,
        t,
        g,
        fidelity: f,
        fidelity_single_step: f1,
        matched: f > 1.0 - 1e-10,
        cz_count,
    })
}

/// `V_p` rebuilt from products of `U(0)`, `U(1)` and inverses using
/// `σ^z_t ∝ U(0)^{−1}U(1)`; returns `max_p` of the mismatch up to phase.
pub fn v_p_from_dual_products(t: usize, g: f64, ps: &[i32]) -> Result<f64> {
    let pair = DualPair::new(t, g)?;
    let (u0, u1) = (pair.unitary(0), pair.unitary(1));
    let z = u0.adjoint().matmul(u1);
    let mut worst = 0.0f64;
    for &p in ps {
        let mut m = z.clone();
        for _ in 0..p.unsigned_abs() {
            m = if p >= 0 { m.conjugate_by(u0) } else { m.conjugate_by(&u0.adjoint()) };
        }
        let want = v_p(p, t, g)?;
        let (ok, _) = proportional_up_to_phase(&m, &want, 1e-10)?;
        let phase = if ok { 0.0 } else { 1.0 };
        worst = worst.max(phase);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{haar_unitary, stream_rng};
    use proptest::prelude::*;

    fn close_up_to_phase(a: &ComplexOperator, b: &ComplexOperator) -> bool {
        proportional_up_to_phase(a, b, 1e-10).unwrap().0
    }

    #[test]
    fn v_p_values() {
        let g = PI / 9.0;
        for t in [2, 3, 4] {
            let sx = |s| on_site(t, s, &pauli_x());
            let sz = |s| on_site(t, s, &pauli_z());
            assert!(v_p(0, t, g).unwrap().max_abs_diff(&sz(t)) < 1e-12);
            assert!(close_up_to_phase(&v_p(1, t, g).unwrap(), &sx(t)));
            let ex = |a: f64| on_site(t, t, &su2(a, [1.0, 0.0, 0.0]));
            let v2 = sx(t - 1).matmul(&ex(g)).matmul(&sz(t)).matmul(&ex(-g));
            assert!(close_up_to_phase(&v_p(2, t, g).unwrap(), &v2));
            let ez = |a: f64| on_site(t, t, &su2(a, [0.0, 0.0, 1.0]));
            let vm1 = sz(t - 1).matmul(&ez(-g)).matmul(&sx(t)).matmul(&ez(g));
            assert!(close_up_to_phase(&v_p(-1, t, g).unwrap(), &vm1));
        }
        assert!(v_p(9, 3, g).is_err());
        assert!(v_p(1, 1, g).is_err());
    }

    #[test]
    fn v_p_is_a_product_of_dual_unitaries() {
        assert_eq!(v_p_from_dual_products(3, PI / 9.0, &[-1, 0, 1, 2]).unwrap(), 0.0);
    }

    #[test]
    fn w1_w2_are_local_rotations() {
        for g in [PI / 9.0, PI / 5.0, 0.37] {
            for t in [2, 3, 4] {
                let (w1, w2) = w1_w2(t, g).unwrap();
                let (f1, r1) = last_site_factor(&w1);
                let (f2, r2) = last_site_factor(&w2);
                assert!(r1 < 1e-10 && r2 < 1e-10);
                assert!(close_up_to_phase(&f1, &w1_closed_form(g)));
                assert!(close_up_to_phase(&f2, &su2(-4.0 * g, [0.0, 0.0, 1.0])));
            }
        }
    }

    #[test]
    fn rotation_parameters_match_closed_forms() {
        let g = PI / 9.0;
        let (w1, w2) = w1_w2(3, g).unwrap();
        let d1 = rotation_decompose(&last_site_factor(&w1).0).unwrap();
        let d2 = rotation_decompose(&last_site_factor(&w2).0).unwrap();
        assert!((d1.theta - theta1(g)).abs() < 1e-10, "{} vs {}", d1.theta, theta1(g));
        let n1 = axis_n1(g);
        assert!(d1.axis.iter().zip(&n1).all(|(a, b)| (a - b).abs() < 1e-10), "{:?} {:?}", d1.axis, n1);
        assert!((d2.theta - theta2(g)).abs() < 1e-10);
        assert!((d2.axis[2] - 1.0).abs() < 1e-12);
        // axes at an angle strictly between 0 and π/2
        let cos = n1[2].abs();
        assert!(cos > 0.0 && cos < 1.0);
    }

    #[test]
    fn rotation_examples() {
        let d = rotation_decompose(&su2(PI / 4.0, [0.0, 0.0, 1.0])).unwrap();
        assert!((d.theta - PI / 2.0).abs() < 1e-12);
        assert_eq!(d.axis, [0.0, 0.0, 1.0]);
        let d = rotation_decompose(&ComplexOperator::identity(2).scale(I)).unwrap();
        assert!(d.degenerate && d.theta == 0.0);
        assert!(d.reconstruct().max_abs_diff(&ComplexOperator::identity(2).scale(I)) < 1e-12);
        assert!(rotation_decompose(&ComplexOperator::identity(2).scale(C64::new(2.0, 0.0))).is_err());
    }

    #[test]
    fn theta1_special_values() {
        assert_eq!(theta1(0.0), 0.0);
        assert!((theta1(PI / 8.0) / PI - 4.0 / 3.0).abs() < 1e-12);
        assert!((theta1(PI / 4.0) / PI - 2.0).abs() < 1e-12);
        assert!((theta1(3.0 * PI / 8.0) / PI - 4.0 / 3.0).abs() < 1e-12);
        assert!((theta1(3.0 * PI / 4.0) / PI - 2.0).abs() < 1e-12);
        assert!((theta1(PI / 2.0) / PI).abs() < 1e-12);
    }

    #[test]
    fn rational_probe_examples() {
        let p = rational_angle_probe(1, 8, 1_000_000).unwrap();
        assert_eq!(p.class, AngleClass::Rational { p: 4, q: 3 });
        let p = rational_angle_probe(1, 4, 1_000_000).unwrap();
        assert_eq!(p.class, AngleClass::Rational { p: 2, q: 1 });
        let p = rational_angle_probe(1, 9, 1_000_000).unwrap();
        assert_eq!(p.class, AngleClass::NoSmallDenominatorRational);
        assert!(p.heuristic);
        assert!(rational_angle_probe(1, 0, 10).is_err());
        assert_eq!(best_rational(PI, 1000), (355, 113));
        assert_eq!(best_rational(PI, 100), (311, 99));
    }

    #[test]
    fn lemma3_small() {
        assert_eq!(lemma3_scan(100), vec![1, 4, 6]);
        assert!(!lemma3_scan(10).contains(&2));
    }

    #[test]
    fn cluster_relation() {
        for (n, t, g) in [(2, 2, PI / 9.0), (3, 3, PI / 5.0), (2, 3, 0.3), (1, 2, 0.2)] {
            let c = cluster_relation_check(n, t, g).unwrap();
            assert!(c.matched, "({n},{t}) fidelity {}", c.fidelity);
            assert_eq!(c.cz_count, n * (t - 1) + t * (n - 1));
        }
        let c = cluster_relation_check(2, 2, PI / 9.0).unwrap();
        assert!(c.fidelity_single_step < 0.5);
        assert!(cluster_relation_check(2, 1, 0.1).is_err());
        assert!(cluster_relation_check(4, 4, 0.1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn decompose_reconstructs(seed in 0u64..10_000) {
            let u = haar_unitary(2, seed).unwrap();
            let d = rotation_decompose(&u).unwrap();
            prop_assert!(d.reconstruct().max_abs_diff(&u) < 1e-10);
            prop_assert!((0.0..2.0 * PI).contains(&d.theta));
            let first = d.axis.iter().copied().find(|c| c.abs() > 1e-12).unwrap();
            prop_assert!(first > 0.0);
            let _ = stream_rng(seed, 0);
        }
    }
}
