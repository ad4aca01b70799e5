//! Periodic chains: the boundary map acting on the vectorised dual circuit
//! and the Haar Monte-Carlo estimate of the projected-ensemble moments.

use std::io::Write;

use faer::Mat;
use serde::Serialize;

use crate::dual::{outcome_bits, write_complex_csv, DualPair, OUTCOME_ORDER};
use crate::ensembles::MomentMatrix;
use crate::error::{bound, Error, Result};
use crate::kicked_ising::{apply_floquet, plus_state, Boundary, KickedIsingParams};
use crate::linalg::{haar_unitary_with, norm_sqr, row_space_lstsq, stream_rng, tol, ComplexOperator, C64, ZERO};
use crate::par::chunked_reduce;
use crate::symmetric::SymmetricBasis;

pub const MAX_PBC_T: usize = 3;
const MC_CHUNK: u64 = 1024;

/// `W: ℂ^{2^t} ⊗ ℂ^{2^t} → ℂ^{2^{n_a}}` with `ψ̃(z) = 2^{-N_B/2} W vec(𝒰(z))`
/// and `vec(U) = Σ_m U|m⟩ ⊗ |m⟩`.
#[derive(Clone, Debug)]
pub struct PbcBoundaryMap {
    pub n_a: usize,
    pub t: usize,
    pub g: f64,
    pub reference_nb: usize,
    /// `2^{n_a} × 4^t`.
    pub matrix: Mat<C64>,
    pub residual: f64,
    /// `max_z |c_z − 1|` for the per-outcome proportionality constant.
    pub scale_spread: f64,
}

impl PbcBoundaryMap {
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.matrix.nrows()];
        for (m, &vm) in v.iter().enumerate() {
            if vm == ZERO {
                continue;
            }
            for (a, o) in out.iter_mut().enumerate() {
                *o += self.matrix[(a, m)] * vm;
            }
        }
        out
    }

    pub fn write_csv<Wr: Write>(&self, mut out: Wr) -> std::io::Result<()> {
        write_complex_csv(&mut out, self.matrix.as_ref())
    }
}

/// Row-major flattening, i.e. `Σ_m U|m⟩ ⊗ |m⟩`.
pub fn vectorize(u: &ComplexOperator) -> Vec<C64> {
    u.to_row_major()
}

/// Projected states of the periodic physical chain with `A` = sites `1..n_a`.
pub fn physical_projected_states_pbc(n_a: usize, t: usize, g: f64, n_b: usize) -> Result<Mat<C64>> {
    let n = n_a + n_b;
    bound("periodic chain sites", n, 22)?;
    let p = KickedIsingParams::self_dual(n, g, Boundary::Periodic);
    let psi = apply_floquet(&plus_state(n), &p, t)?;
    let amps = psi.amplitudes();
    Ok(Mat::from_fn(1 << n_a, 1 << n_b, |a, z| amps[(a << n_b) | z]))
}

pub fn extract_w_pbc_with(n_a: usize, t: usize, g: f64, n_ref: usize) -> Result<PbcBoundaryMap> {
    if n_a == 0 || t == 0 {
        return Err(Error::InvalidParameter("n_a and t must be at least 1".into()));
    }
    bound("PBC circuit width t", t, MAX_PBC_T)?;
    let pair = DualPair::new(t, g)?;
    let psi = physical_projected_states_pbc(n_a, t, g, n_ref)?;
    let scale = (2.0f64).powf(n_ref as f64 / 2.0);
    let n_out = 1usize << n_ref;
    let cols = 1usize << (2 * t);
    let mut v = Mat::<C64>::zeros(cols, n_out);
    for zi in 0..n_out {
        let u = pair.circuit(&outcome_bits(zi, n_ref), OUTCOME_ORDER);
        for (m, c) in vectorize(&u).into_iter().enumerate() {
            v[(m, zi)] = c;
        }
    }
    let target = Mat::from_fn(psi.nrows(), n_out, |a, z| psi[(a, z)] * scale);
    let (w, _) = row_space_lstsq(&v, &target)?;
    let fit = &w * &v;
    let (mut residual, mut spread) = (0.0f64, 0.0f64);
    for z in 0..n_out {
        let mut err = 0.0;
        let (mut num, mut den) = (ZERO, 0.0);
        for a in 0..psi.nrows() {
            err += (fit[(a, z)] - target[(a, z)]).norm_sqr();
            num += fit[(a, z)].conj() * target[(a, z)];
            den += fit[(a, z)].norm_sqr();
        }
        residual = residual.max(err.sqrt() / scale);
        if den > 1e-20 {
            spread = spread.max((num / den - 1.0).norm());
        }
    }
    Ok(PbcBoundaryMap {
        n_a,
        t,
        g,
        reference_nb: n_ref,
        matrix: w,
        residual,
        scale_spread: spread,
    })
}

/// Fit on the reference bath `N_B = 2t + 2`; fails above a `1e-9` residual.
pub fn extract_w_pbc(n_a: usize, t: usize, g: f64) -> Result<PbcBoundaryMap> {
    let w = extract_w_pbc_with(n_a, t, g, 2 * t + 2)?;
    if w.residual > tol::FIT_RESIDUAL {
        return Err(Error::ResidualTooLarge {
            residual: w.residual,
            tolerance: tol::FIT_RESIDUAL,
        });
    }
    Ok(w)
}

/// `max_z ‖ψ̃(z) − 2^{-n_b/2} W vec(𝒰(z))‖` on a periodic chain of `n_a + n_b`
/// sites.
pub fn pbc_duality_residual(w: &PbcBoundaryMap, n_b: usize) -> Result<f64> {
    let psi = physical_projected_states_pbc(w.n_a, w.t, w.g, n_b)?;
    let pair = DualPair::new(w.t, w.g)?;
    let scale = (0.5f64).powf(n_b as f64 / 2.0);
    let mut worst = 0.0f64;
    for zi in 0..1usize << n_b {
        let pred = w.apply(&vectorize(&pair.circuit(&outcome_bits(zi, n_b), OUTCOME_ORDER)));
        let err: f64 = pred
            .iter()
            .enumerate()
            .map(|(a, p)| (psi[(a, zi)] - p * scale).norm_sqr())
            .sum();
        worst = worst.max(err.sqrt());
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct PbcRow {
    #[serde(rename = "M")]
    pub m: u64,
    pub k: usize,
    pub t: usize,
    pub n_a: usize,
    pub g: f64,
    pub delta: f64,
    pub seed: u64,
}

pub fn default_m_list() -> Vec<u64> {
    vec![100, 1_000, 10_000, 100_000]
}

struct Weighted {
    acc: Mat<C64>,
    weight: f64,
}

/// Cumulative weighted moment over Haar `U`, reported at each `M` in
/// `m_list`. Sample `i` uses the stream `(seed, i)`.
pub fn pbc_mc_scan(
    w: &PbcBoundaryMap,
    k: usize,
    m_list: &[u64],
    seed: u64,
) -> Result<Vec<PbcRow>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    bound("moment dimension 2^(n_a k)", 1usize << (w.n_a * k).min(63), 1 << 12)?;
    let mut ms = m_list.to_vec();
    ms.sort_unstable();
    ms.dedup();
    if ms.first() == Some(&0) {
        return Err(Error::InvalidParameter("sample counts must be positive".into()));
    }
    let basis = SymmetricBasis::new(1 << w.n_a, k)?;
    let n = basis.dim();
    let d = 1usize << w.t;
    let mut total = Weighted {
        acc: Mat::zeros(n, n),
        weight: 0.0,
    };
    let mut rows = Vec::with_capacity(ms.len());
    let mut done = 0u64;
    for &m in &ms {
        let start = done;
        let part = chunked_reduce(
            m - start,
            MC_CHUNK,
            || Weighted {
                acc: Mat::zeros(n, n),
                weight: 0.0,
            },
            |acc, i| {
                let u = haar_unitary_with(d, &mut stream_rng(seed, start + i))?;
                let v = w.apply(&vectorize(&u));
                let p = norm_sqr(&v);
                if p > 0.0 {
                    let s = p.sqrt();
                    let hat: Vec<C64> = v.iter().map(|c| c / s).collect();
                    let c: Vec<C64> = basis.coefficients(&hat).into_iter().map(|x| x * s).collect();
                    for j in 0..n {
                        let cj = c[j].conj();
                        for i2 in 0..n {
                            acc.acc[(i2, j)] += c[i2] * cj;
                        }
                    }
                    acc.weight += p;
                }
                Ok(())
            },
            |a, b| {
                a.acc += &b.acc;
                a.weight += b.weight;
            },
        )?;
        total.acc += &part.acc;
        total.weight += part.weight;
        done = m;
        if total.weight <= 0.0 {
            return Err(Error::Numerical("all sample weights vanish".into()));
        }
        let sym = ComplexOperator::from_mat(Mat::from_fn(n, n, |i, j| total.acc[(i, j)] / total.weight))?;
        let mom = MomentMatrix { n_a: w.n_a, k, sym };
        rows.push(PbcRow {
            m,
            k,
            t: w.t,
            n_a: w.n_a,
            g: w.g,
            delta: mom.delta()?,
            seed,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::moment;
    use crate::linalg::StateVector;
    use std::f64::consts::PI;

    #[test]
    fn fit_reproduces_reference_and_larger_baths() {
        for (n_a, t) in [(2, 1), (2, 2), (1, 2)] {
            let w = extract_w_pbc(n_a, t, PI / 9.0).unwrap();
            assert!(w.residual < 1e-9 && w.scale_spread < 1e-9, "({n_a},{t}) {} {}", w.residual, w.scale_spread);
            let r = pbc_duality_residual(&w, 2 * t + 3).unwrap();
            assert!(r < 1e-9, "({n_a},{t}) larger bath residual {r}");
        }
        let w = extract_w_pbc(2, 2, PI / 9.0).unwrap();
        assert!(pbc_duality_residual(&w, 6).unwrap() < 1e-9);
        assert!(extract_w_pbc(2, 4, 0.1).is_err());
    }

    fn rotate_sites(psi: &StateVector, shift: usize) -> StateVector {
        let n = psi.n_qubits();
        let mask = (1usize << n) - 1;
        let amps: Vec<C64> = (0..1usize << n)
            .map(|x| psi.amplitudes()[((x << shift) | (x >> (n - shift))) & mask])
            .collect();
        StateVector::new(n, amps).unwrap()
    }

    #[test]
    fn subsystem_placement_is_irrelevant() {
        let (n, n_a, t, g) = (8, 2, 2, PI / 9.0);
        let p = KickedIsingParams::self_dual(n, g, Boundary::Periodic);
        let psi = apply_floquet(&plus_state(n), &p, t).unwrap();
        let ens = |s: &StateVector| {
            let amps = s.amplitudes();
            let nb = n - n_a;
            let entries = (0..1usize << nb)
                .filter_map(|z| {
                    let v: Vec<C64> = (0..1usize << n_a).map(|a| amps[(a << nb) | z]).collect();
                    let pr = norm_sqr(&v);
                    (pr > 0.0).then(|| crate::ensembles::EnsembleEntry {
                        outcome: outcome_bits(z, nb),
                        probability: pr,
                        state: StateVector::new(n_a, v).unwrap().normalized().unwrap(),
                    })
                })
                .collect();
            crate::ensembles::ProjectedEnsemble { n_a, n_b: nb, method: crate::ensembles::Method::Direct, entries }
        };
        let a = ens(&psi);
        let b = ens(&rotate_sites(&psi, 3));
        for k in 1..=2 {
            let (ma, mb) = (moment(&a, k).unwrap(), moment(&b, k).unwrap());
            assert!(ma.sym.max_abs_diff(&mb.sym) < 1e-12);
        }
    }

    #[test]
    fn scan_is_deterministic_and_normalised() {
        let w = extract_w_pbc(2, 1, PI / 9.0).unwrap();
        let a = pbc_mc_scan(&w, 1, &[1, 10, 100], 5).unwrap();
        let b = pbc_mc_scan(&w, 1, &[100, 10, 1], 5).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.m, y.m);
            assert!((x.delta - y.delta).abs() < 1e-14);
        }
        assert!(a[0].delta <= 1.0);
        assert!(pbc_mc_scan(&w, 1, &[0], 1).is_err());
    }

    #[test]
    fn first_moment_limit_is_w_w_dagger() {
        // E[vec(U)vec(U)^†] = 𝟙/2^t, so the k = 1 limit is WW^†/Tr(WW^†)
        let w = extract_w_pbc(2, 2, PI / 9.0).unwrap();
        let ww = &w.matrix * w.matrix.adjoint();
        let tr: f64 = (0..4).map(|i| ww[(i, i)].re).sum();
        let target = ComplexOperator::from_mat(Mat::from_fn(4, 4, |i, j| ww[(i, j)] / tr)).unwrap();
        let haar = ComplexOperator::identity(4).scale(C64::new(0.25, 0.0));
        let exact_delta = crate::linalg::trace_distance(&target, &haar).unwrap();
        let rows = pbc_mc_scan(&w, 1, &[20_000], 9).unwrap();
        assert!((rows[0].delta - exact_delta).abs() < 0.03, "{} vs {}", rows[0].delta, exact_delta);
    }
}
