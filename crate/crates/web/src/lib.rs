//! WebAssembly entry points for the browser demo. Each returns a JSON string
//! so the page needs no generated type bindings.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use statedesign::ensembles::{design_delta, moment, projected_ensemble_dual, Method};
use statedesign::scan::gap_at;

/// Upper limits keep a single call responsive in the browser.
const MAX_GAP_STEPS: usize = 400;
const MAX_DEMO_NB: usize = 14;
const DEMO_SAMPLES: usize = 2_000;

#[derive(Serialize)]
struct GapPoint {
    g: f64,
    gap: Option<f64>,
    unimodular_count: usize,
}

#[derive(Serialize)]
struct DesignPoint {
    n_b: usize,
    delta: f64,
    method: Method,
}

#[derive(Serialize)]
struct BlochPoint {
    x: f64,
    y: f64,
    z: f64,
    p: f64,
}

#[derive(Serialize)]
struct BlochSet {
    points: Vec<BlochPoint>,
    /// `Δ^(k)` for `k = 1, 2, 3`.
    deltas: Vec<f64>,
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Gap `1 − |λ_{k!+1}|` on `steps + 1` points of `g ∈ [0, π/2]`.
#[wasm_bindgen]
pub fn gap_curve(t: usize, k: usize, steps: usize) -> Result<String, String> {
    if steps == 0 || steps > MAX_GAP_STEPS {
        return Err(format!("steps must be in 1..={MAX_GAP_STEPS}"));
    }
    let pts = (0..=steps)
        .map(|i| {
            let g = std::f64::consts::FRAC_PI_2 * i as f64 / steps as f64;
            gap_at(t, k, g).map(|r| GapPoint {
                g,
                gap: r.gap,
                unimodular_count: r.unimodular_count,
            })
        })
        .collect::<statedesign::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    to_json(&pts)
}

/// `Δ^(k)` against `n_b = 1..=nb_max` at fixed `t`.
#[wasm_bindgen]
pub fn design_curve(n_a: usize, t: usize, g: f64, nb_max: usize, k: usize) -> Result<String, String> {
    if nb_max == 0 || nb_max > MAX_DEMO_NB {
        return Err(format!("nb_max must be in 1..={MAX_DEMO_NB}"));
    }
    let pts = (1..=nb_max)
        .map(|n_b| {
            design_delta(n_a, t, g, n_b, k, DEMO_SAMPLES, 0).map(|(delta, method)| DesignPoint { n_b, delta, method })
        })
        .collect::<statedesign::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    to_json(&pts)
}

/// Bloch vectors and weights of the one-qubit projected ensemble.
#[wasm_bindgen]
pub fn bloch_points(t: usize, n_b: usize, g: f64) -> Result<String, String> {
    if n_b == 0 || n_b > MAX_DEMO_NB {
        return Err(format!("n_b must be in 1..={MAX_DEMO_NB}"));
    }
    let ens = projected_ensemble_dual(1, t, g, n_b).map_err(|e| e.to_string())?;
    let points = ens
        .entries
        .iter()
        .map(|e| {
            let a = e.state.amplitudes();
            let c = a[0].conj() * a[1];
            BlochPoint {
                x: 2.0 * c.re,
                y: 2.0 * c.im,
                z: a[0].norm_sqr() - a[1].norm_sqr(),
                p: e.probability,
            }
        })
        .collect();
    let deltas = (1..=3)
        .map(|k| moment(&ens, k).and_then(|m| m.delta()))
        .collect::<statedesign::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    to_json(&BlochSet { points, deltas })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn gap_curve_closes_at_pi_over_4() {
        let v: Value = serde_json::from_str(&gap_curve(2, 2, 4).unwrap()).unwrap();
        let pts = v.as_array().unwrap();
        assert_eq!(pts.len(), 5);
        assert!(pts[2]["gap"].as_f64().unwrap().abs() < 1e-8);
        assert!(pts[1]["gap"].as_f64().unwrap() > 1e-3);
        assert!(gap_curve(2, 2, 0).is_err());
    }

    #[test]
    fn design_curve_first_moment_is_exact_past_t() {
        let v: Value = serde_json::from_str(&design_curve(2, 2, 0.35, 5, 1).unwrap()).unwrap();
        let pts = v.as_array().unwrap();
        assert_eq!(pts.len(), 5);
        for p in &pts[1..] {
            assert!(p["delta"].as_f64().unwrap() < 1e-10);
        }
        assert!(design_curve(2, 2, 0.35, 99, 1).is_err());
    }

    #[test]
    fn bloch_points_are_unit_vectors() {
        let v: Value = serde_json::from_str(&bloch_points(2, 6, 0.35).unwrap()).unwrap();
        let pts = v["points"].as_array().unwrap();
        let total: f64 = pts.iter().map(|p| p["p"].as_f64().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for p in pts {
            let r2: f64 = ["x", "y", "z"].iter().map(|c| p[c].as_f64().unwrap().powi(2)).sum();
            assert!((r2 - 1.0).abs() < 1e-10);
        }
        // first moment is maximally mixed once n_b ≥ n_a
        assert!(v["deltas"][0].as_f64().unwrap() < 1e-10);
    }
}
