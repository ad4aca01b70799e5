//! Parameter scans behind the design-scan and gap-scan CSVs.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::angle::Angle;
use crate::ensembles::{design_delta, Method};
use crate::error::{Error, Result};
use crate::par::map_ordered;
use crate::transfer::{TransferMap, MAX_SUPEROP_DIM};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DesignScanConfig {
    pub n_a: usize,
    pub g: Angle,
    /// Times scanned at `nb_fixed`.
    pub t_grid: Vec<usize>,
    pub nb_fixed: usize,
    /// Time used for the `n_b` scan.
    pub t_fixed: usize,
    pub nb_grid: Vec<usize>,
    pub k_list: Vec<usize>,
    /// Sample count for points that fall back to sampling.
    pub samples: usize,
    pub seed: u64,
}

impl Default for DesignScanConfig {
    fn default() -> Self {
        Self {
            n_a: 3,
            g: Angle::pi_fraction(1, 9),
            t_grid: (1..=6).collect(),
            nb_fixed: 100,
            t_fixed: 3,
            nb_grid: (1..=12).collect(),
            k_list: (1..=4).collect(),
            samples: 10_000,
            seed: 0,
        }
    }
}

impl DesignScanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.n_a == 0 {
            return bad("n_a must be at least 1");
        }
        if self.k_list.is_empty() || self.k_list.contains(&0) {
            return bad("k list must be non-empty with k ≥ 1");
        }
        if self.t_grid.contains(&0) || self.t_fixed == 0 {
            return bad("t must be at least 1");
        }
        if self.nb_grid.contains(&0) || self.nb_fixed == 0 {
            return bad("n_b must be at least 1");
        }
        if self.samples == 0 {
            return bad("samples must be positive");
        }
        Ok(())
    }

    /// `(t, n_b, k)` in output order: the time scan first, then the bath scan.
    pub fn points(&self) -> Vec<(usize, usize, usize)> {
        let mut pts = Vec::new();
        for &t in &self.t_grid {
            for &k in &self.k_list {
                pts.push((t, self.nb_fixed, k));
            }
        }
        for &nb in &self.nb_grid {
            for &k in &self.k_list {
                pts.push((self.t_fixed, nb, k));
            }
        }
        pts
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DesignRow {
    pub n_a: usize,
    pub t: usize,
    pub n_b: usize,
    pub k: usize,
    pub g: f64,
    pub delta: f64,
    pub method: Method,
    pub wall_seconds: f64,
}

pub fn design_scan(cfg: &DesignScanConfig) -> Result<Vec<DesignRow>> {
    cfg.validate()?;
    let g = cfg.g.radians;
    let rows = map_ordered(&cfg.points(), |&(t, n_b, k)| {
        let start = Instant::now();
        let (delta, method) = design_delta(cfg.n_a, t, g, n_b, k, cfg.samples, cfg.seed)?;
        Ok(DesignRow {
            n_a: cfg.n_a,
            t,
            n_b,
            k,
            g,
            delta,
            method,
            wall_seconds: start.elapsed().as_secs_f64(),
        })
    });
    rows.into_iter().collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapScanConfig {
    pub t: usize,
    pub k: usize,
    /// Number of intervals between `g_min` and `g_max`.
    pub steps: usize,
    pub g_min: Angle,
    pub g_max: Angle,
}

impl Default for GapScanConfig {
    fn default() -> Self {
        Self {
            t: 3,
            k: 2,
            steps: 100,
            g_min: Angle::pi_fraction(0, 1),
            g_max: Angle::pi_fraction(1, 2),
        }
    }
}

impl GapScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t == 0 || self.k == 0 {
            return Err(Error::InvalidParameter("t and k must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter("steps must be at least 1".into()));
        }
        let dim = 1usize.checked_shl((2 * self.t * self.k) as u32).unwrap_or(usize::MAX);
        if 2 * self.t * self.k >= 63 || dim > MAX_SUPEROP_DIM {
            return Err(Error::SizeBound {
                what: "superoperator dimension 4^(tk)",
                requested: dim,
                limit: MAX_SUPEROP_DIM,
            });
        }
        Ok(())
    }

    /// Evenly spaced grid, kept as exact multiples of π when both ends are.
    pub fn grid(&self) -> Vec<Angle> {
        let n = self.steps as i64;
        (0..=n)
            .map(|i| match (self.g_min.pi_ratio, self.g_max.pi_ratio) {
                (Some((p0, q0)), Some((p1, q1))) => {
                    Angle::pi_fraction(p0 * q1 * n + i * (p1 * q0 - p0 * q1), q0 * q1 * n)
                }
                _ => Angle::radians(
                    self.g_min.radians + (self.g_max.radians - self.g_min.radians) * i as f64 / n as f64,
                ),
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GapRow {
    pub g: f64,
    pub t: usize,
    pub k: usize,
    /// `1 − |λ_{k!+1}|`.
    pub gap: Option<f64>,
    pub unimodular_count: usize,
    /// `|λ_{k!+1}|`.
    pub lambda2_abs: Option<f64>,
    pub residual_max: f64,
    /// `1 − max{|λ| : |λ| < 1}`.
    pub gap_nonunimodular: Option<f64>,
}

pub fn gap_at(t: usize, k: usize, g: f64) -> Result<GapRow> {
    let s = TransferMap::new(t, k, g)?.spectrum()?;
    Ok(GapRow {
        g,
        t,
        k,
        gap: s.gap,
        unimodular_count: s.unimodular_count,
        lambda2_abs: s.next_abs,
        residual_max: s.residual_max,
        gap_nonunimodular: s.gap_nonunimodular,
    })
}

pub fn gap_scan(cfg: &GapScanConfig) -> Result<Vec<GapRow>> {
    cfg.validate()?;
    let rows = map_ordered(&cfg.grid(), |g| gap_at(cfg.t, cfg.k, g.radians));
    rows.into_iter().collect()
}
