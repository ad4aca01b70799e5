use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use statedesign::dual::extract_w;
use statedesign::ensembles::{moment, projected_ensemble_direct};
use statedesign::kicked_ising::{Boundary, KickedIsingParams};
use statedesign::pbc::{extract_w_pbc, pbc_mc_scan};
use statedesign::scan::{design_scan, gap_scan, DesignScanConfig, GapScanConfig};
use statedesign::verify::{run_suite, VerifyConfig};
use statedesign::{Angle, Error};

mod list;
mod output;

use list::{parse_list, parse_u64_list};
use output::{write_csv_rows, write_sidecar};

/// Bumped on any breaking change to a CSV or sidecar layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "statedesign", version, about = "Emergent state designs of the self-dual kicked Ising chain")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace distance Δ^(k) to the Haar moment versus t (fixed n_b) and versus n_b (fixed t).
    DesignScan(DesignArgs),
    /// Transfer-map gap and unimodular count over a grid of g.
    GapScan(GapArgs),
    /// Small-size identity suite; exits 1 if any check fails.
    Verify(VerifyArgs),
    /// Periodic-chain Monte-Carlo convergence curves Δ^(k)(M).
    PbcMc(PbcArgs),
    /// Projected ensemble (and optionally its k-th moment) by direct simulation.
    Ensemble(EnsembleArgs),
    /// Boundary map W as CSV of re/im pairs.
    BoundaryMap(BoundaryArgs),
}

#[derive(Args)]
struct DesignArgs {
    #[arg(long = "na", default_value_t = 3)]
    n_a: usize,
    /// Times for the fixed-n_b scan, e.g. "1..6" or "1,2,4".
    #[arg(long, default_value = "1..6", value_parser = parse_list)]
    t: std::vec::Vec<usize>,
    /// Bath sizes for the fixed-t scan.
    #[arg(long, default_value = "1..12", value_parser = parse_list)]
    nb: std::vec::Vec<usize>,
    #[arg(long, default_value_t = 100)]
    nb_fixed: usize,
    #[arg(long, default_value_t = 3)]
    t_fixed: usize,
    #[arg(long, default_value = "1..4", value_parser = parse_list)]
    k: std::vec::Vec<usize>,
    /// Radians, or a multiple of pi such as "pi/9".
    #[arg(long, default_value = "pi/9")]
    g: Angle,
    /// Sample count where exact methods are out of reach.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GapArgs {
    #[arg(long, default_value_t = 3)]
    t: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Intervals on [g-min, g-max].
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value = "0")]
    g_min: Angle,
    #[arg(long, default_value = "pi/2")]
    g_max: Angle,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Perturb the physical coupling in the duality check, which must then fail.
    #[arg(long)]
    negative_control: bool,
    /// JSON report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PbcArgs {
    #[arg(long = "na", default_value_t = 2)]
    n_a: usize,
    #[arg(long, default_value = "1..3", value_parser = parse_list)]
    t: std::vec::Vec<usize>,
    #[arg(long, default_value = "1,2", value_parser = parse_list)]
    k: std::vec::Vec<usize>,
    #[arg(long, default_value = "pi/9")]
    g: Angle,
    /// Largest sample count M; rows are written at 1, 2, 5 × 10^j from 100 up to it.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Explicit checkpoints, overriding --samples.
    #[arg(long, value_parser = parse_u64_list)]
    m_list: Option<std::vec::Vec<u64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EnsembleArgs {
    #[arg(long = "na", default_value_t = 2)]
    n_a: usize,
    #[arg(long, default_value_t = 3)]
    t: usize,
    #[arg(long, default_value_t = 4)]
    nb: usize,
    #[arg(long, default_value = "pi/9")]
    g: Angle,
    #[arg(long, default_value = "open", value_parser = parse_boundary)]
    boundary: Boundary,
    /// Also write the k-th moment next to the ensemble.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BoundaryArgs {
    #[arg(long = "na", default_value_t = 2)]
    n_a: usize,
    #[arg(long, default_value_t = 3)]
    t: usize,
    #[arg(long, default_value = "pi/9")]
    g: Angle,
    #[arg(long, default_value = "open", value_parser = parse_boundary)]
    boundary: Boundary,
    #[arg(long)]
    out: PathBuf,
}

fn parse_boundary(s: &str) -> Result<Boundary, String> {
    match s {
        "open" | "obc" => Ok(Boundary::Open),
        "periodic" | "pbc" => Ok(Boundary::Periodic),
        _ => Err(format!("unknown boundary {s:?}; expected open or periodic")),
    }
}

/// Exit status 1 or 2 with a message.
enum Failure {
    Config(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::SizeBound { .. }
            | Error::RegimeGate(_)
            | Error::DimensionMismatch { .. }
            | Error::InvalidPermutation(_)
            | Error::SingularGram { .. } => Failure::Config(e.to_string()),
            _ => Failure::Check(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Check(format!("i/o: {e}"))
    }
}

fn warn_exceptional(g: &Angle) {
    if g.is_multiple_of_pi_over_8() {
        eprintln!("warning: g = {g} is a multiple of pi/8, outside the generic regime");
    }
}

/// `1, 2, 5 × 10^j` from 100 up to `max`, plus `max` itself.
fn m_checkpoints(max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut decade = 100u64;
    'outer: loop {
        for f in [1, 2, 5] {
            let m = decade.saturating_mul(f);
            if m >= max {
                break 'outer;
            }
            out.push(m);
        }
        decade = decade.saturating_mul(10);
    }
    out.push(max);
    out
}

#[derive(Serialize)]
struct PbcConfig<'a> {
    n_a: usize,
    t: &'a [usize],
    k: &'a [usize],
    g: Angle,
    m_list: &'a [u64],
    seed: u64,
}

#[derive(Serialize)]
struct EnsembleConfig {
    n_a: usize,
    t: usize,
    n_b: usize,
    g: Angle,
    boundary: Boundary,
    k: Option<usize>,
}

fn design(a: DesignArgs, threads: usize) -> Result<(), Failure> {
    let cfg = DesignScanConfig {
        n_a: a.n_a,
        g: a.g,
        t_grid: a.t,
        nb_fixed: a.nb_fixed,
        t_fixed: a.t_fixed,
        nb_grid: a.nb,
        k_list: a.k,
        samples: a.samples,
        seed: a.seed,
    };
    cfg.validate()?;
    warn_exceptional(&cfg.g);
    let rows = design_scan(&cfg)?;
    write_csv_rows(&a.out, &rows)?;
    write_sidecar(&a.out, "design-scan", &cfg, threads)?;
    Ok(())
}

fn gap(a: GapArgs, threads: usize) -> Result<(), Failure> {
    let cfg = GapScanConfig {
        t: a.t,
        k: a.k,
        steps: a.steps,
        g_min: a.g_min,
        g_max: a.g_max,
    };
    let rows = gap_scan(&cfg)?;
    write_csv_rows(&a.out, &rows)?;
    write_sidecar(&a.out, "gap-scan", &cfg, threads)?;
    Ok(())
}

fn verify(a: VerifyArgs, threads: usize) -> Result<(), Failure> {
    let cfg = VerifyConfig {
        negative_control: a.negative_control,
    };
    let report = run_suite(&cfg);
    for c in &report.checks {
        eprintln!(
            "{} {:<18} residual {:.3e} (< {:.0e}) {:.2}s{}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.residual,
            c.threshold,
            c.wall_seconds,
            c.error.as_deref().map(|e| format!(" error: {e}")).unwrap_or_default()
        );
    }
    let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::Check(e.to_string()))?;
    match &a.out {
        Some(path) => {
            std::fs::write(path, json + "\n")?;
            write_sidecar(path, "verify", &cfg, threads)?;
        }
        None => println!("{json}"),
    }
    if report.all_pass {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        Err(Failure::Check(format!("failed checks: {}", failed.join(", "))))
    }
}

fn pbc(a: PbcArgs, threads: usize) -> Result<(), Failure> {
    if a.t.is_empty() || a.k.is_empty() {
        return Err(Failure::Config("t and k lists must be non-empty".into()));
    }
    let m_list = match a.m_list {
        Some(m) => m,
        None if a.samples == 0 => return Err(Failure::Config("--samples must be positive".into())),
        None => m_checkpoints(a.samples),
    };
    warn_exceptional(&a.g);
    let mut rows = Vec::new();
    for &t in &a.t {
        let w = extract_w_pbc(a.n_a, t, a.g.radians)?;
        for &k in &a.k {
            rows.extend(pbc_mc_scan(&w, k, &m_list, a.seed)?);
        }
    }
    write_csv_rows(&a.out, &rows)?;
    let cfg = PbcConfig {
        n_a: a.n_a,
        t: &a.t,
        k: &a.k,
        g: a.g,
        m_list: &m_list,
        seed: a.seed,
    };
    write_sidecar(&a.out, "pbc-mc", &cfg, threads)?;
    Ok(())
}

/// `run.csv` → `run.moment.csv`.
fn moment_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.moment.csv"))
}

fn ensemble(a: EnsembleArgs, threads: usize) -> Result<(), Failure> {
    let p = KickedIsingParams::self_dual(a.n_a + a.nb, a.g.radians, a.boundary);
    let ens = projected_ensemble_direct(&p, a.t, a.n_a)?;
    let file = std::fs::File::create(&a.out)?;
    ens.write_csv(std::io::BufWriter::new(file))?;
    if let Some(k) = a.k {
        let m = moment(&ens, k)?;
        let file = std::fs::File::create(moment_path(&a.out))?;
        m.write_csv(std::io::BufWriter::new(file))?;
        eprintln!("delta^({k}) = {}", m.delta()?);
    }
    let cfg = EnsembleConfig {
        n_a: a.n_a,
        t: a.t,
        n_b: a.nb,
        g: a.g,
        boundary: a.boundary,
        k: a.k,
    };
    write_sidecar(&a.out, "ensemble", &cfg, threads)?;
    Ok(())
}

fn boundary_map(a: BoundaryArgs, threads: usize) -> Result<(), Failure> {
    let file = std::io::BufWriter::new(std::fs::File::create(&a.out)?);
    let residual = match a.boundary {
        Boundary::Open => {
            let w = extract_w(a.n_a, a.t, a.g.radians)?;
            w.write_csv(file)?;
            w.residual
        }
        Boundary::Periodic => {
            let w = extract_w_pbc(a.n_a, a.t, a.g.radians)?;
            w.write_csv(file)?;
            w.residual
        }
    };
    eprintln!("fit residual {residual:e}");
    let cfg = EnsembleConfig {
        n_a: a.n_a,
        t: a.t,
        n_b: 0,
        g: a.g,
        boundary: a.boundary,
        k: None,
    };
    write_sidecar(&a.out, "boundary-map", &cfg, threads)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let threads = rayon::current_num_threads();
    let result = match cli.command {
        Command::DesignScan(a) => design(a, threads),
        Command::GapScan(a) => gap(a, threads),
        Command::Verify(a) => verify(a, threads),
        Command::PbcMc(a) => pbc(a, threads),
        Command::Ensemble(a) => ensemble(a, threads),
        Command::BoundaryMap(a) => boundary_map(a, threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            eprintln!("invalid configuration: {m}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoints() {
        assert_eq!(m_checkpoints(100_000), [100, 200, 500, 1000, 2000, 5000, 10_000, 20_000, 50_000, 100_000]);
        assert_eq!(m_checkpoints(300), [100, 200, 300]);
        assert_eq!(m_checkpoints(50), [50]);
    }

    #[test]
    fn moment_file_name() {
        assert_eq!(moment_path(Path::new("out/run.csv")), PathBuf::from("out/run.moment.csv"));
    }

    #[test]
    fn errors_map_to_exit_classes() {
        assert!(matches!(Failure::from(Error::InvalidParameter("x".into())), Failure::Config(_)));
        assert!(matches!(Failure::from(Error::Numerical("x".into())), Failure::Check(_)));
    }
}
