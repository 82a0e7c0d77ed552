//! Deterministic output files: CSV tables with embedded metadata comments,
//! JSON reports with a meta header, and companion gnuplot scripts.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Metadata embedded in every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub seed: u64,
    pub config_digest: String,
    pub version: &'static str,
}

impl Meta {
    pub fn new(seed: u64, digest: String) -> Self {
        Meta {
            seed,
            config_digest: digest,
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

/// Resolves an output path against `DUDLEY_OUT_DIR` for relative paths.
pub fn resolve_out(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("DUDLEY_OUT_DIR") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::usage(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    let f = std::fs::File::create(path)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
    Ok(std::io::BufWriter::new(f))
}

/// Writes a CSV table: `#`-prefixed metadata lines, a mandatory header row,
/// then the rows. Floats use shortest round-trip formatting.
pub fn write_csv(
    path: &Path,
    meta: &Meta,
    header: &[String],
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    let mut w = create(path)?;
    let io = |e: std::io::Error| CliError::usage(format!("write {}: {e}", path.display()));
    writeln!(w, "# seed={}", meta.seed).map_err(io)?;
    writeln!(w, "# config_digest={}", meta.config_digest).map_err(io)?;
    writeln!(w, "# version={}", meta.version).map_err(io)?;
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for row in rows {
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    Ok(())
}

/// Writes a JSON report `{ "meta": ..., "report": ... }` with stable key
/// order (struct declaration order).
pub fn write_json<T: Serialize>(path: &Path, meta: &Meta, report: &T) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Doc<'a, T> {
        meta: &'a Meta,
        report: &'a T,
    }
    let mut w = create(path)?;
    let doc = Doc { meta, report };
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| CliError::usage(format!("serialize report: {e}")))?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .map_err(|e| CliError::usage(format!("write {}: {e}", path.display())))?;
    Ok(())
}

/// Writes a small gnuplot script next to a CSV so plots are one command away.
pub fn write_plot_script(
    path: &Path,
    csv_name: &str,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    plot_lines: &[String],
) -> Result<(), CliError> {
    let mut w = create(path)?;
    let io = |e: std::io::Error| CliError::usage(format!("write {}: {e}", path.display()));
    writeln!(w, "# gnuplot companion; run: gnuplot -p {}", path.display()).map_err(io)?;
    writeln!(w, "set datafile commentschars '#'").map_err(io)?;
    writeln!(w, "set datafile separator ','").map_err(io)?;
    writeln!(w, "set key autotitle columnhead").map_err(io)?;
    writeln!(w, "set title '{title}'").map_err(io)?;
    writeln!(w, "set xlabel '{xlabel}'").map_err(io)?;
    writeln!(w, "set ylabel '{ylabel}'").map_err(io)?;
    writeln!(w, "set logscale y").map_err(io)?;
    writeln!(w, "plot \\").map_err(io)?;
    for (k, line) in plot_lines.iter().enumerate() {
        let sep = if k + 1 == plot_lines.len() {
            ""
        } else {
            ", \\"
        };
        writeln!(w, "  '{csv_name}' {line}{sep}").map_err(io)?;
    }
    Ok(())
}

/// Formats a float with shortest round-trip representation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}
