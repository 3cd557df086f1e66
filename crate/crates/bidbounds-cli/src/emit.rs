//! Deterministic output writers.
//!
//! Every emitted table opens with `# key=value` comment lines recording
//! the query parameters (tolerance, confidence level, sample size, solver
//! feasibility tolerance), followed by an ordinary CSV header and rows.
//! Floats are written in shortest round-trip form, maps iterate in sorted
//! order, and nothing time- or platform-dependent is written, so reruns
//! with identical inputs produce byte-identical files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Shortest round-trip rendering; negative zero collapses to `0`.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

/// Writes a CSV table with a `# key=value` preamble.
pub fn write_csv(
    path: &Path,
    meta: &[(&str, String)],
    header: &[&str],
    rows: &[Vec<String>],
) -> io::Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    for (key, value) in meta {
        writeln!(file, "# {key}={value}")?;
    }
    let mut csv = csv::Writer::from_writer(file);
    csv.write_record(header)?;
    for row in rows {
        csv.write_record(row)?;
    }
    csv.flush()?;
    Ok(())
}

/// Serializes any document as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value)?;
    writeln!(file)?;
    file.flush()
}

/// The run manifest: every parameter and seed a command ran with, plus
/// the program version and the solver feasibility tolerance.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: &'static str,
    pub feasibility_tol: f64,
    pub parameters: BTreeMap<String, String>,
}

/// Writes `manifest.json` into `dir` and returns its path.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    parameters: BTreeMap<String, String>,
) -> io::Result<PathBuf> {
    let manifest = Manifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION"),
        feasibility_tol: bidbounds::lp::FEASIBILITY_TOL,
        parameters,
    };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}
