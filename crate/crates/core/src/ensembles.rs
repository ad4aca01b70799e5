//! Projected ensembles on subsystem `A` and their `k`-th moments, computed by
//! direct simulation, by enumerating the dual circuit, by the transfer map
//! and by sampling.

use std::io::Write;

use faer::Mat;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dual::{extract_w, outcome_bits, write_complex_csv, BoundaryMap, DualPair};
use crate::error::{bound, Error, Result};
use crate::kicked_ising::{apply_floquet, plus_state, KickedIsingParams};
use crate::linalg::{
    haar_state_with, log2_exact, norm_sqr, stream_rng, trace_distance, ComplexOperator, StateVector, C64, ONE,
};
use crate::par::chunked_reduce;
use crate::symmetric::SymmetricBasis;
use crate::transfer::TransferMap;

pub const MAX_DIRECT_SITES: usize = 24;
pub const MAX_ENUMERATED_NB: usize = 24;
/// Bound on `2^{n_a k}` for moment operators.
pub const MAX_MOMENT_DIM: usize = 1 << 12;

const SAMPLE_CHUNK: u64 = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    DualEnumeration,
    Transfer,
    Sampling,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::DualEnumeration => "dual_enumeration",
            Method::Transfer => "transfer",
            Method::Sampling => "sampling",
        }
    }
}

#[derive(Clone, Debug)]
pub struct EnsembleEntry {
    /// `z_{B,1}` first.
    pub outcome: Vec<u8>,
    pub probability: f64,
    pub state: StateVector,
}

#[derive(Clone, Debug)]
pub struct ProjectedEnsemble {
    pub n_a: usize,
    pub n_b: usize,
    pub method: Method,
    pub entries: Vec<EnsembleEntry>,
}

impl ProjectedEnsemble {
    pub fn total_probability(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }

    /// One row per outcome: the bit string (`z_{B,1}` first), its probability,
    /// then the state's amplitudes as `re_i, im_i` pairs.
    pub fn write_csv<Wr: Write>(&self, mut out: Wr) -> std::io::Result<()> {
        let mut header = vec!["outcome".to_string(), "probability".to_string()];
        header.extend((0..1usize << self.n_a).flat_map(|j| [format!("re_{j}"), format!("im_{j}")]));
        writeln!(out, "{}", header.join(","))?;
        for e in &self.entries {
            let bits: String = e.outcome.iter().map(|b| if *b == 0 { '0' } else { '1' }).collect();
            let mut row = vec![bits, e.probability.to_string()];
            row.extend(e.state.amplitudes().iter().flat_map(|c| [c.re.to_string(), c.im.to_string()]));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Equal-weight ensemble from samples.
    pub fn from_samples(n_a: usize, n_b: usize, samples: Vec<Sample>) -> Self {
        let w = 1.0 / samples.len().max(1) as f64;
        Self {
            n_a,
            n_b,
            method: Method::Sampling,
            entries: samples
                .into_iter()
                .map(|s| EnsembleEntry {
                    outcome: s.outcome,
                    probability: w,
                    state: s.state,
                })
                .collect(),
        }
    }
}

/// Outcomes below this Born probability are dropped and the rest renormalised.
pub const MIN_PROBABILITY: f64 = 1e-14;

fn entry(n_a: usize, outcome: Vec<u8>, amps: Vec<C64>) -> Result<Option<EnsembleEntry>> {
    let p = norm_sqr(&amps);
    if p < MIN_PROBABILITY {
        return Ok(None);
    }
    Ok(Some(EnsembleEntry {
        outcome,
        probability: p,
        state: StateVector::new(n_a, amps)?.normalized()?,
    }))
}

fn renormalize(entries: &mut [EnsembleEntry]) {
    let total: f64 = entries.iter().map(|e| e.probability).sum();
    entries.iter_mut().for_each(|e| e.probability /= total);
}

/// Evolves `|+⟩^{⊗N}` for `t` steps and measures all sites after the first
/// `n_a` in the `z` basis.
pub fn projected_ensemble_direct(params: &KickedIsingParams, t: usize, n_a: usize) -> Result<ProjectedEnsemble> {
    params.validate()?;
    bound("direct simulation sites", params.n_sites, MAX_DIRECT_SITES)?;
    if n_a == 0 || n_a >= params.n_sites {
        return Err(Error::InvalidParameter(format!(
            "need 1 ≤ n_a < N, got n_a = {n_a}, N = {}",
            params.n_sites
        )));
    }
    let n_b = params.n_sites - n_a;
    let psi = apply_floquet(&plus_state(params.n_sites), params, t)?;
    let amps = psi.amplitudes();
    let mut entries = Vec::new();
    for z in 0..1usize << n_b {
        let v: Vec<C64> = (0..1usize << n_a).map(|a| amps[(a << n_b) | z]).collect();
        if let Some(e) = entry(n_a, outcome_bits(z, n_b), v)? {
            entries.push(e);
        }
    }
    renormalize(&mut entries);
    Ok(ProjectedEnsemble {
        n_a,
        n_b,
        method: Method::Direct,
        entries,
    })
}

/// Depth-first enumeration of `ψ̃(z) = 2^{-n_b/2} W 𝒰(z)|+⟩`, reusing the
/// shared suffix of the circuit. The top `split` levels are fanned out and
/// each subtree's partial result is returned in outcome order.
fn enumerate_dual<T: Send>(
    pair: &DualPair,
    w: &BoundaryMap,
    n_b: usize,
    init: impl Fn() -> T + Sync,
    visit: impl Fn(&mut T, usize, Vec<C64>) -> Result<()> + Sync,
) -> Result<Vec<T>> {
    let split = n_b.min(4);
    let scale = (0.5f64).powf(n_b as f64 / 2.0);
    let prefixes: Vec<usize> = (0..1usize << split).collect();
    let run = |&prefix: &usize| -> Result<T> {
        let mut acc = init();
        let mut stack: Vec<Vec<C64>> = vec![plus_state(pair.t).into_amplitudes()];
        // the circuit's first factor is U(z_{N_B}); level ℓ fixes z_{N_B−ℓ}
        for l in 0..split {
            let b = ((prefix >> l) & 1) as u8;
            let next = pair.unitary(b).apply(&stack[l]);
            stack.push(next);
        }
        let depth = n_b - split;
        let mut idx = prefix;
        let mut choice = vec![0u8; depth];
        let mut level = 0usize;
        loop {
            if level == depth {
                let v = w.apply(&stack[split + depth]);
                visit(&mut acc, idx, v.into_iter().map(|a| a * scale).collect())?;
                // backtrack to the deepest level with an untried branch
                loop {
                    if level == 0 {
                        return Ok(acc);
                    }
                    level -= 1;
                    if choice[level] == 0 {
                        break;
                    }
                    idx &= !(1usize << (split + level));
                    stack.pop();
                }
                choice[level] = 1;
                idx |= 1usize << (split + level);
                stack.pop();
                let next = pair.unitary(1).apply(&stack[split + level]);
                stack.push(next);
                level += 1;
            } else {
                choice[level] = 0;
                let next = pair.unitary(0).apply(&stack[split + level]);
                stack.push(next);
                level += 1;
            }
        }
    };
    crate::par::map_ordered(&prefixes, run).into_iter().collect()
}

fn dual_setup(n_a: usize, t: usize, g: f64, n_b: usize) -> Result<(DualPair, BoundaryMap)> {
    if n_b == 0 {
        return Err(Error::InvalidParameter("n_b must be at least 1".into()));
    }
    bound("enumerated bath size n_b", n_b, MAX_ENUMERATED_NB)?;
    Ok((DualPair::new(t, g)?, extract_w(n_a, t, g)?))
}

pub fn projected_ensemble_dual(n_a: usize, t: usize, g: f64, n_b: usize) -> Result<ProjectedEnsemble> {
    let (pair, w) = dual_setup(n_a, t, g, n_b)?;
    let parts = enumerate_dual(&pair, &w, n_b, Vec::new, |acc: &mut Vec<(usize, Vec<C64>)>, idx, v| {
        acc.push((idx, v));
        Ok(())
    })?;
    let mut all: Vec<(usize, Vec<C64>)> = parts.into_iter().flatten().collect();
    all.sort_by_key(|e| e.0);
    let mut entries = Vec::with_capacity(all.len());
    for (idx, v) in all {
        if let Some(e) = entry(n_a, outcome_bits(idx, n_b), v)? {
            entries.push(e);
        }
    }
    renormalize(&mut entries);
    Ok(ProjectedEnsemble {
        n_a,
        n_b,
        method: Method::DualEnumeration,
        entries,
    })
}

/// `k`-th moment, stored on the symmetric subspace `Sym^k(ℂ^{2^{n_a}})`.
#[derive(Clone, Debug)]
pub struct MomentMatrix {
    pub n_a: usize,
    pub k: usize,
    pub sym: ComplexOperator,
}

impl MomentMatrix {
    pub fn basis(&self) -> Result<SymmetricBasis> {
        SymmetricBasis::new(1 << self.n_a, self.k)
    }

    pub fn trace(&self) -> f64 {
        self.sym.trace().re
    }

    /// Full operator on `(ℂ^{2^{n_a}})^{⊗k}`.
    pub fn dense(&self) -> Result<ComplexOperator> {
        self.basis()?.embed(&self.sym)
    }

    pub fn from_dense(n_a: usize, k: usize, op: &ComplexOperator) -> Result<Self> {
        let basis = SymmetricBasis::new(1 << n_a, k)?;
        Ok(Self {
            n_a,
            k,
            sym: basis.compress(op)?,
        })
    }

    /// Trace distance to the Haar moment `Π_sym / dim Sym`.
    /// Dense `d^k × d^k` matrix as CSV of `re_j, im_j` column pairs.
    pub fn write_csv<Wr: Write>(&self, mut out: Wr) -> Result<()> {
        let dense = self.dense()?;
        Ok(write_complex_csv(&mut out, dense.as_mat().as_ref())?)
    }

    pub fn delta(&self) -> Result<f64> {
        let n = self.sym.dim();
        let haar = ComplexOperator::identity(n).scale(C64::new(1.0 / n as f64, 0.0));
        trace_distance(&self.sym, &haar)
    }
}

/// Accumulates `Σ w (ψψ^†)^{⊗k}` in the symmetric basis with batched
/// rank-`b` updates.
struct MomentAccumulator {
    basis: SymmetricBasis,
    acc: Mat<C64>,
    buf: Mat<C64>,
    fill: usize,
    weight: f64,
}

const BATCH: usize = 64;

impl MomentAccumulator {
    fn new(basis: SymmetricBasis) -> Self {
        let n = basis.dim();
        Self {
            basis,
            acc: Mat::zeros(n, n),
            buf: Mat::zeros(n, BATCH),
            fill: 0,
            weight: 0.0,
        }
    }

    /// Adds `weight · (ψψ^†)^{⊗k}` for normalised `psi`.
    fn push(&mut self, weight: f64, psi: &[C64]) {
        let c = self.basis.coefficients(psi);
        let s = weight.sqrt();
        for (i, ci) in c.into_iter().enumerate() {
            self.buf[(i, self.fill)] = ci * s;
        }
        self.weight += weight;
        self.fill += 1;
        if self.fill == BATCH {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.fill == 0 {
            return;
        }
        let b = self.buf.as_ref().subcols(0, self.fill);
        self.acc += b * b.adjoint();
        self.fill = 0;
    }

    fn merge(&mut self, mut other: Self) {
        other.flush();
        self.flush();
        self.acc += &other.acc;
        self.weight += other.weight;
    }

    fn finish(mut self, n_a: usize, k: usize) -> MomentMatrix {
        self.flush();
        MomentMatrix {
            n_a,
            k,
            sym: ComplexOperator::from_mat(self.acc).expect("square"),
        }
    }
}

fn moment_basis(n_a: usize, k: usize) -> Result<SymmetricBasis> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    bound("moment dimension 2^(n_a k)", 1usize << (n_a * k).min(63), MAX_MOMENT_DIM)?;
    SymmetricBasis::new(1 << n_a, k)
}

pub fn moment(ensemble: &ProjectedEnsemble, k: usize) -> Result<MomentMatrix> {
    let basis = moment_basis(ensemble.n_a, k)?;
    let mut acc = MomentAccumulator::new(basis);
    for e in &ensemble.entries {
        acc.push(e.probability, e.state.amplitudes());
    }
    Ok(acc.finish(ensemble.n_a, k))
}

pub fn haar_moment(d: usize, k: usize) -> Result<MomentMatrix> {
    let n_a = log2_exact(d)?;
    let basis = moment_basis(n_a, k)?;
    let n = basis.dim();
    Ok(MomentMatrix {
        n_a,
        k,
        sym: ComplexOperator::identity(n).scale(C64::new(1.0 / n as f64, 0.0)),
    })
}

pub fn delta_k(ensemble: &ProjectedEnsemble, k: usize) -> Result<f64> {
    moment(ensemble, k)?.delta()
}

/// Moment of the dual-circuit ensemble without storing the states.
pub fn moment_dual_enumeration(n_a: usize, t: usize, g: f64, n_b: usize, k: usize) -> Result<MomentMatrix> {
    let basis = moment_basis(n_a, k)?;
    let (pair, w) = dual_setup(n_a, t, g, n_b)?;
    let parts = enumerate_dual(
        &pair,
        &w,
        n_b,
        || MomentAccumulator::new(basis.clone()),
        |acc, _, v| {
            let p = norm_sqr(&v);
            if p >= MIN_PROBABILITY {
                let n = p.sqrt();
                let psi: Vec<C64> = v.into_iter().map(|a| a / n).collect();
                acc.push(p, &psi);
            }
            Ok(())
        },
    )?;
    let mut total = MomentAccumulator::new(basis);
    for p in parts {
        total.merge(p);
    }
    let weight = total.weight;
    let mut m = total.finish(n_a, k);
    m.sym = m.sym.scale(C64::new(1.0 / weight, 0.0));
    Ok(m)
}

fn kron_mat(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(a.nrows() * br, a.ncols() * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Exact moment through `n_b` applications of the transfer map. For `k ≥ 2`
/// this needs every outcome's projected norm to carry the same factor, i.e.
/// `W^†W ∝ 𝟙`; the first moment is linear in `ψ̃` and always exact.
pub fn exact_moment_transfer(n_a: usize, t: usize, g: f64, n_b: usize, k: usize) -> Result<MomentMatrix> {
    let basis = moment_basis(n_a, k)?;
    let map = TransferMap::new(t, k, g)?;
    let w = extract_w(n_a, t, g)?;
    let dev = norm_spread(&w);
    if k > 1 && dev > 1e-9 {
        return Err(Error::RegimeGate(format!(
            "W^†W is not proportional to the identity (deviation {dev:e}); outcome norms are not uniform"
        )));
    }
    let d = map.dim();
    let x0 = ComplexOperator::from_fn(d, |_, _| C64::new(1.0 / d as f64, 0.0));
    let x = map.apply_n(&x0, n_b)?;
    let mut wk = Mat::<C64>::from_fn(1, 1, |_, _| ONE);
    for _ in 0..k {
        wk = kron_mat(&wk, &w.matrix);
    }
    let rho = &wk * x.as_mat() * wk.adjoint();
    let rho = ComplexOperator::from_mat(rho)?;
    let tr = rho.trace().re;
    let rho = rho.scale(C64::new(1.0 / tr, 0.0));
    Ok(MomentMatrix {
        n_a,
        k,
        sym: basis.compress(&rho)?,
    })
}

/// Relative deviation of `W^†W` from a multiple of the identity.
fn norm_spread(w: &BoundaryMap) -> f64 {
    let wdw = w.wdag_w();
    let c = wdw.trace().re / wdw.dim() as f64;
    wdw.max_abs_diff(&ComplexOperator::identity(wdw.dim()).scale(C64::new(c, 0.0))) / c.max(1.0)
}

#[derive(Clone, Debug)]
pub struct Sample {
    pub outcome: Vec<u8>,
    /// Born probability of the full outcome string.
    pub probability: f64,
    pub state: StateVector,
}

/// Ancestral sampler over outcome strings, drawing `z_{B,N}` (the unitary
/// applied first to `|+⟩`) first. With `E_m = Φ*^m(W^†W)`,
/// `Φ*(X) = ½ Σ_b U(b)^† X U(b)`, the marginal of the fixed suffix
/// `z_j … z_N` is `2^{−(N−j+1)} ⟨φ|E_{j−1}|φ⟩` for `φ = U(z_j)⋯U(z_N)|+⟩`.
pub struct ExactSampler {
    pub n_a: usize,
    pub n_b: usize,
    pair: DualPair,
    w: BoundaryMap,
    /// `E_0, E_1, …` up to convergence; later powers reuse the last entry.
    heis: Vec<ComplexOperator>,
    /// Set when the converged `E` is a multiple of the identity, so both
    /// branches are equally likely from that depth on.
    flat_from: Option<usize>,
}

impl ExactSampler {
    pub fn new(n_a: usize, t: usize, g: f64, n_b: usize) -> Result<Self> {
        if n_b == 0 {
            return Err(Error::InvalidParameter("n_b must be at least 1".into()));
        }
        let pair = DualPair::new(t, g)?;
        let w = extract_w(n_a, t, g)?;
        let adj = [pair.unitary(0).adjoint(), pair.unitary(1).adjoint()];
        let mut heis = vec![w.wdag_w()];
        while heis.len() < n_b {
            let last = &heis[heis.len() - 1];
            let next = (&adj[0].matmul(last).matmul(pair.unitary(0))
                + &adj[1].matmul(last).matmul(pair.unitary(1)))
                .scale(C64::new(0.5, 0.0));
            let converged = next.max_abs_diff(last) <= 1e-15 * last.max_abs();
            heis.push(next);
            if converged {
                break;
            }
        }
        let last = &heis[heis.len() - 1];
        let c = last.trace().re / last.dim() as f64;
        let flat = last.max_abs_diff(&ComplexOperator::identity(last.dim()).scale(C64::new(c, 0.0))) <= 1e-14 * c;
        let flat_from = (flat && heis.len() < n_b).then(|| heis.len() - 1);
        Ok(Self {
            n_a,
            n_b,
            pair,
            w,
            heis,
            flat_from,
        })
    }

    fn heisenberg(&self, m: usize) -> &ComplexOperator {
        &self.heis[m.min(self.heis.len() - 1)]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Sample> {
        let mut z = vec![0u8; self.n_b];
        let mut phi = plus_state(self.pair.t).into_amplitudes();
        let mut marg = 1.0f64;
        let mut scale = 1.0f64;
        for j in (0..self.n_b).rev() {
            if self.flat_from.is_some_and(|f| j >= f) {
                let b = usize::from(rng.random::<f64>() >= 0.5);
                marg *= 0.5;
                scale *= 0.5;
                z[j] = b as u8;
                phi = self.pair.unitary(b as u8).apply(&phi);
                continue;
            }
            let e = self.heisenberg(j);
            let cand = [self.pair.unitary(0).apply(&phi), self.pair.unitary(1).apply(&phi)];
            let q: Vec<f64> = cand
                .iter()
                .map(|v| 0.5 * scale * crate::linalg::inner(v, &e.apply(v)).re)
                .collect();
            let dev = (q[0] + q[1] - marg).abs();
            if dev > 1e-8 * marg.max(1e-300) || q[0] < -1e-12 * marg || q[1] < -1e-12 * marg {
                return Err(Error::InconsistentProbabilities {
                    deviation: dev / marg.max(1e-300),
                });
            }
            let (q0, q1) = (q[0].max(0.0), q[1].max(0.0));
            let u: f64 = rng.random();
            let b = usize::from(u * (q0 + q1) >= q0);
            marg = if b == 0 { q0 } else { q1 };
            scale *= 0.5;
            z[j] = b as u8;
            let [c0, c1] = cand;
            phi = if b == 0 { c0 } else { c1 };
        }
        let amps = self.w.apply(&phi);
        let state = StateVector::new(self.n_a, amps)?.normalized()?;
        Ok(Sample {
            outcome: z,
            probability: marg,
            state,
        })
    }
}

/// `M` outcome strings with their projected states; sample `i` draws from
/// the stream `(seed, i)`.
pub fn sample_outcomes(n_a: usize, t: usize, g: f64, n_b: usize, m: usize, seed: u64) -> Result<Vec<Sample>> {
    let sampler = ExactSampler::new(n_a, t, g, n_b)?;
    let parts = chunked_reduce(
        m as u64,
        SAMPLE_CHUNK,
        Vec::new,
        |acc: &mut Vec<Sample>, i| {
            acc.push(sampler.sample(&mut stream_rng(seed, i))?);
            Ok(())
        },
        |a, b| a.extend(b),
    )?;
    Ok(parts)
}

/// Moment estimated from `M` exact samples without storing them.
pub fn moment_sampled(n_a: usize, t: usize, g: f64, n_b: usize, k: usize, m: usize, seed: u64) -> Result<MomentMatrix> {
    if m == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    let basis = moment_basis(n_a, k)?;
    let sampler = ExactSampler::new(n_a, t, g, n_b)?;
    let acc = chunked_reduce(
        m as u64,
        SAMPLE_CHUNK,
        || MomentAccumulator::new(basis.clone()),
        |acc, i| {
            let s = sampler.sample(&mut stream_rng(seed, i))?;
            acc.push(1.0 / m as f64, s.state.amplitudes());
            Ok(())
        },
        |a, b| a.merge(b),
    )?;
    Ok(acc.finish(n_a, k))
}

#[derive(Clone, Debug, Serialize)]
pub struct HaarProjectedResult {
    pub samples: usize,
    pub weight_mean: f64,
    /// Trace distance of the (unnormalised) estimate to the Haar moment.
    pub delta: f64,
}

/// Monte-Carlo check of the projected Haar identity: for Haar `Ψ` on `t`
/// qubits, project the last `t − n_a` qubits on `⟨+|` and average
/// `w · (ψ̂ψ̂^†)^{⊗k}` with `w = 2^{t−n_a}‖Ψ₊‖²`.
pub fn haar_projected_mc(
    t: usize,
    n_a: usize,
    k: usize,
    m: usize,
    seed: u64,
) -> Result<(MomentMatrix, HaarProjectedResult)> {
    if n_a == 0 || n_a > t {
        return Err(Error::InvalidParameter(format!("need 1 ≤ n_a ≤ t, got n_a = {n_a}, t = {t}")));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    bound("Haar state qubits t", t, 20)?;
    let basis = moment_basis(n_a, k)?;
    let rest = t - n_a;
    let amp = (0.5f64).powf(rest as f64 / 2.0);
    let boost = (2.0f64).powi(rest as i32);
    let acc = chunked_reduce(
        m as u64,
        SAMPLE_CHUNK,
        || MomentAccumulator::new(basis.clone()),
        |acc, i| {
            let psi = haar_state_with(1 << t, &mut stream_rng(seed, i))?;
            let a = psi.amplitudes();
            let proj: Vec<C64> = (0..1usize << n_a)
                .map(|x| (0..1usize << rest).map(|r| a[(x << rest) | r]).sum::<C64>() * amp)
                .collect();
            let p = norm_sqr(&proj);
            if p > 0.0 {
                let n = p.sqrt();
                let hat: Vec<C64> = proj.iter().map(|c| c / n).collect();
                acc.push(boost * p / m as f64, &hat);
            }
            Ok(())
        },
        |a, b| a.merge(b),
    )?;
    let weight_mean = acc.weight;
    let mom = acc.finish(n_a, k);
    let delta = mom.delta()?;
    Ok((
        mom,
        HaarProjectedResult {
            samples: m,
            weight_mean,
            delta,
        },
    ))
}

/// Picks the cheapest exact method (transfer, then enumeration) and falls
/// back to sampling.
pub fn design_delta(
    n_a: usize,
    t: usize,
    g: f64,
    n_b: usize,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, Method)> {
    let transfer_ok = 2 * t * k <= 14 && (k == 1 || norm_spread(&extract_w(n_a, t, g)?) <= 1e-9);
    if transfer_ok {
        return Ok((exact_moment_transfer(n_a, t, g, n_b, k)?.delta()?, Method::Transfer));
    }
    if n_b <= 16 {
        return Ok((moment_dual_enumeration(n_a, t, g, n_b, k)?.delta()?, Method::DualEnumeration));
    }
    Ok((moment_sampled(n_a, t, g, n_b, k, samples, seed)?.delta()?, Method::Sampling))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kicked_ising::Boundary;
    use crate::symmetric::{all_permutations, permutation_operator};
    use std::f64::consts::PI;

    const ZERO_C: C64 = C64::new(0.0, 0.0);

    #[test]
    fn haar_moment_is_normalised_permutation_sum() {
        // ρ_Haar = Σ_π P(π) / (d(d+1)⋯(d+k−1))
        for (d, k) in [(2usize, 1usize), (2, 2), (4, 2), (2, 3)] {
            let mut sum = ComplexOperator::zeros(d.pow(k as u32));
            for pi in all_permutations(k) {
                sum = &sum + &permutation_operator(&pi, d).unwrap().matrix;
            }
            let norm: f64 = (0..k).map(|i| (d + i) as f64).product();
            let want = sum.scale(C64::new(1.0 / norm, 0.0));
            let got = haar_moment(d, k).unwrap().dense().unwrap();
            assert!(got.max_abs_diff(&want) < 1e-14);
        }
        let h = haar_moment(2, 2).unwrap();
        assert!((h.trace() - 1.0).abs() < 1e-15);
        assert!(h.delta().unwrap() < 1e-15);
    }

    #[test]
    fn direct_and_dual_ensembles_agree() {
        let (n_a, t, n_b, g) = (2, 3, 5, PI / 9.0);
        let p = KickedIsingParams::self_dual(n_a + n_b, g, Boundary::Open);
        let direct = projected_ensemble_direct(&p, t, n_a).unwrap();
        let dual = projected_ensemble_dual(n_a, t, g, n_b).unwrap();
        assert_eq!(direct.entries.len(), dual.entries.len());
        assert!((direct.total_probability() - 1.0).abs() < 1e-12);
        for (a, b) in direct.entries.iter().zip(&dual.entries) {
            assert_eq!(a.outcome, b.outcome);
            assert!((a.probability - b.probability).abs() < 1e-12);
            assert!((a.state.inner(&b.state).norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn moment_routes_agree() {
        let (n_a, t, n_b, g) = (2, 2, 6, PI / 7.0);
        let p = KickedIsingParams::self_dual(n_a + n_b, g, Boundary::Open);
        let direct = projected_ensemble_direct(&p, t, n_a).unwrap();
        for k in 1..=3 {
            let a = moment(&direct, k).unwrap();
            let b = moment_dual_enumeration(n_a, t, g, n_b, k).unwrap();
            let c = exact_moment_transfer(n_a, t, g, n_b, k).unwrap();
            assert!(a.sym.max_abs_diff(&b.sym) < 1e-10, "k={k}");
            assert!(a.sym.max_abs_diff(&c.sym) < 1e-10, "k={k}");
            assert!((a.trace() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn transfer_moment_gated_on_uniform_norms() {
        // t > n_a with W^†W of rank 2^{n_a} < 2^t
        assert!(matches!(
            exact_moment_transfer(1, 2, PI / 9.0, 4, 2),
            Err(Error::RegimeGate(_))
        ));
        // the first moment is linear in the unnormalised states
        let (n_a, t, n_b, g) = (2, 4, 5, PI / 9.0);
        let a = moment_dual_enumeration(n_a, t, g, n_b, 1).unwrap();
        let b = exact_moment_transfer(n_a, t, g, n_b, 1).unwrap();
        assert!(a.sym.max_abs_diff(&b.sym) < 1e-10);
    }

    #[test]
    fn sampler_is_deterministic_and_probabilities_are_exact() {
        let (n_a, t, n_b, g) = (2, 3, 4, PI / 9.0);
        let s1 = sample_outcomes(n_a, t, g, n_b, 50, 7).unwrap();
        let s2 = sample_outcomes(n_a, t, g, n_b, 50, 7).unwrap();
        let exact = projected_ensemble_dual(n_a, t, g, n_b).unwrap();
        for (a, b) in s1.iter().zip(&s2) {
            assert_eq!(a.outcome, b.outcome);
            let idx = a.outcome.iter().fold(0usize, |acc, &bit| acc * 2 + bit as usize);
            let e = exact.entries.iter().find(|e| {
                e.outcome.iter().fold(0usize, |acc, &bit| acc * 2 + bit as usize) == idx
            });
            let e = e.unwrap();
            assert!((a.probability - e.probability).abs() < 1e-12);
            assert!((a.state.inner(&e.state).norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sampled_moment_converges() {
        let (n_a, t, n_b, g) = (2, 2, 5, PI / 9.0);
        let exact = moment_dual_enumeration(n_a, t, g, n_b, 2).unwrap();
        let est = moment_sampled(n_a, t, g, n_b, 2, 20_000, 3).unwrap();
        let td = trace_distance(&exact.sym, &est.sym).unwrap();
        assert!(td < 0.05, "{td}");
    }

    #[test]
    fn haar_projected_small_sample() {
        let (mom, r) = haar_projected_mc(3, 1, 2, 4000, 1).unwrap();
        assert_eq!(mom.sym.dim(), 3);
        assert!((r.weight_mean - 1.0).abs() < 0.1);
        assert!(haar_projected_mc(2, 3, 1, 10, 0).is_err());
    }

    #[test]
    fn negligible_outcomes_are_dropped() {
        let tiny = vec![C64::new(5e-8, 0.0), ZERO_C];
        assert!(entry(1, vec![0], tiny).unwrap().is_none());
        let kept = entry(1, vec![1], vec![C64::new(0.5, 0.0), ZERO_C]).unwrap().unwrap();
        let mut es = vec![kept.clone(), kept];
        renormalize(&mut es);
        assert!(es.iter().all(|e| (e.probability - 0.5).abs() < 1e-15));
    }

    #[test]
    fn size_bounds() {
        let p = KickedIsingParams::self_dual(4, 0.3, Boundary::Open);
        assert!(projected_ensemble_direct(&p, 1, 4).is_err());
        let e = projected_ensemble_direct(&p, 1, 1).unwrap();
        assert!(matches!(moment(&e, 13), Err(Error::SizeBound { .. })));
    }
}
