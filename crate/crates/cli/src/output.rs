//! CSV artifacts and their JSON metadata sidecars.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::SCHEMA_VERSION;

pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
}

/// `run.csv` → `run.csv.meta.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    out.with_file_name(name)
}

#[derive(Serialize)]
struct Meta<'a, C: Serialize> {
    schema_version: u32,
    command: &'a str,
    version: &'a str,
    core_version: &'a str,
    threads: usize,
    config: &'a C,
}

pub fn write_sidecar<C: Serialize>(out: &Path, command: &str, config: &C, threads: usize) -> std::io::Result<()> {
    let meta = Meta {
        schema_version: SCHEMA_VERSION,
        command,
        version: env!("CARGO_PKG_VERSION"),
        core_version: statedesign::VERSION,
        threads,
        config,
    };
    let json = serde_json::to_string_pretty(&meta)?;
    std::fs::write(sidecar_path(out), json + "\n")
}
