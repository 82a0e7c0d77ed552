//! Batch experiment driver: every harness of the toolkit behind one
//! reproducible command-line interface.
//!
//! Exit codes: 0 success, 1 failed verification check, 2 validation or usage
//! error, 3 numerical guard (chart overflow / non-convergent logarithm).
//! `DUDLEY_THREADS` bounds the worker pool; `DUDLEY_OUT_DIR` prefixes
//! relative output paths. Every output file embeds the seed and a digest of
//! the resolved configuration.

mod config;
mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{config_digest, parse_f64_list, FileConfig};
use dudley_core::diffusion::{self, DiffusionConfig, Scheme};
use dudley_core::driver::{sample_path, DriverConfig};
use dudley_core::graded::{
    angular, dilate, relative_coords, ConeSpec, GradedLayout, SolePredicate,
};
use dudley_core::green::{
    cone_hit, green_estimate, slice_capacity, theorem1_check, wiener_sum, CapacityConfig,
    ConeHitConfig, GreenConfig, SliceSpec, Theorem1Config,
};
use dudley_core::lorentz::{AlgebraElement, GroupElement};
use dudley_core::selftest::run_selftest;
use dudley_core::tangent::{phi_estimate, scaling_law_test, PhiConfig, ScalingTestConfig};
use dudley_core::Error as CoreError;
use output::{fmt_f64, resolve_out, write_csv, write_json, write_plot_script, Meta};

/// Command-line error carrying the exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn guard(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }

    pub fn check_failed(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NonConvergent | CoreError::ChartOverflow => CliError::guard(e.to_string()),
            other => CliError::usage(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "dudley",
    version,
    about = "Monte Carlo toolkit for the relativistic diffusion on the Poincare group"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate group-valued paths and dump them as CSV.
    Simulate(SimulateArgs),
    /// Estimate the tangent-process occupation density at probe points.
    Tangent(TangentArgs),
    /// Estimate the Green function of the killed diffusion at probe points.
    Green(GreenArgs),
    /// Kolmogorov-Smirnov check of the dilation scaling law.
    ScalingTest(ScalingArgs),
    /// Diagonal scaling of the Green function against the tangent density.
    Theorem1(Theorem1Args),
    /// Cone hitting probabilities from the vertex.
    Cone(ConeArgs),
    /// Capacities of homogeneous cone slices.
    Capacity(CapacityArgs),
    /// Weighted partial sums of slice capacities.
    Wiener(WienerArgs),
    /// Closed-form BCH limits against the numeric matrix logarithm.
    BchCheck(BchArgs),
    /// Exact algebra, grading, BCH and driver verification suites.
    Selftest(SelftestArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Spatial dimension (2..=6).
    #[arg(long)]
    d: Option<usize>,
    /// Root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Configuration file (`key = value` lines with [section] headers).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path; relative paths resolve against DUDLEY_OUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
}

const GLOBAL_KEYS: &[&str] = &["d", "seed", "out"];

struct Resolved {
    file: FileConfig,
    section: &'static str,
}

impl Resolved {
    fn new(common: &CommonArgs, section: &'static str, allowed: &[&str]) -> Result<Self, CliError> {
        let file = match &common.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::empty(),
        };
        file.validate_keys(section, allowed, GLOBAL_KEYS)?;
        Ok(Resolved { file, section })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        self.file.get(self.section, key)
    }

    fn num<T: std::str::FromStr + Copy>(
        &self,
        cli: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, CliError>
    where
        T::Err: fmt::Display,
    {
        Ok(cli.or(self.get(key)?).unwrap_or(default))
    }
}

fn meta_for(seed: u64, digest_parts: Vec<String>) -> Meta {
    Meta::new(seed, config_digest(&digest_parts))
}

fn axis_probe(d: usize, gauge: f64) -> AlgebraElement {
    let mut a = AlgebraElement::zero(d);
    a.set_time(1.0);
    dilate(gauge, &angular(&a).expect("nonzero"))
}

fn load_probes(d: usize, path: &Path) -> Result<Vec<AlgebraElement>, CliError> {
    let layout = GradedLayout::new(d)?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read probes {}: {e}", path.display())))?;
    let mut lines = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| CliError::usage("probe file is empty"))?
        .split(',')
        .map(str::trim)
        .collect();
    let expected = layout.slot_names();
    if header != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(CliError::usage(format!(
            "probe header must be `{}`, got `{}`",
            expected.join(","),
            header.join(",")
        )));
    }
    let mut probes = Vec::new();
    for (k, line) in lines.enumerate() {
        let vals: Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|e| CliError::usage(format!("probe row {}: {e}", k + 2)))?;
        probes.push(layout.from_slots(&vals)?);
    }
    if probes.is_empty() {
        return Err(CliError::usage("probe file has a header but no rows"));
    }
    Ok(probes)
}

fn parse_widths(s: &str) -> Result<[f64; 3], CliError> {
    let v = parse_f64_list(s)?;
    if v.len() != 3 || v.iter().any(|x| !(*x > 0.0)) {
        return Err(CliError::usage(
            "widths must be three positive numbers w1,w2,w3",
        ));
    }
    Ok([v[0], v[1], v[2]])
}

// ---------------------------------------------------------------- simulate

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of paths to store.
    #[arg(long)]
    paths: Option<usize>,
    /// Step size.
    #[arg(long)]
    h: Option<f64>,
    /// Horizon.
    #[arg(long = "T")]
    t: Option<f64>,
    /// Noise scale.
    #[arg(long)]
    sigma: Option<f64>,
    /// Kill radius (omit to disable exit detection).
    #[arg(long)]
    radius: Option<f64>,
    /// Integration scheme: euler or midpoint.
    #[arg(long)]
    scheme: Option<String>,
    /// Substep refinement of the driver records.
    #[arg(long)]
    substep: Option<usize>,
}

fn run_simulate(a: &SimulateArgs) -> Result<(u64, PathBuf), CliError> {
    let r = Resolved::new(
        &a.common,
        "simulate",
        &["paths", "h", "T", "sigma", "radius", "scheme", "substep"],
    )?;
    let d = r.num(a.common.d, "d", 2)?;
    let seed = r.num(a.common.seed, "seed", 1)?;
    let n_paths = r.num(a.paths, "paths", 10)?;
    let h = r.num(a.h, "h", 1e-3)?;
    let t = r.num(a.t, "T", 1.0)?;
    let sigma = r.num(a.sigma, "sigma", 1.0)?;
    let radius = a.radius.or(r.get("radius")?);
    let scheme_name: String = a
        .scheme
        .clone()
        .or(r.get("scheme")?)
        .unwrap_or_else(|| "euler".into());
    let scheme = match scheme_name.as_str() {
        "euler" => Scheme::ExponentialEuler,
        "midpoint" => Scheme::ExponentialMidpoint,
        other => {
            return Err(CliError::usage(format!(
                "unknown scheme `{other}` (euler|midpoint)"
            )))
        }
    };
    let substep = r.num(a.substep, "substep", 1)?;
    let out = resolve_out(
        &a.common
            .out
            .clone()
            .or(r.get("out")?)
            .unwrap_or_else(|| PathBuf::from("simulate.csv")),
    );

    let cfg = DiffusionConfig {
        d,
        sigma,
        step: h,
        horizon: t,
        radius,
        scheme,
    };
    cfg.validate()?;
    let layout = GradedLayout::new(d)?;
    let start = GroupElement::identity(d);
    let mut header = vec!["path".to_string(), "time".to_string()];
    for row in 0..=d {
        for col in 0..=d {
            header.push(format!("g{row}{col}"));
        }
    }
    for mu in 0..=d {
        header.push(format!("xi{mu}"));
    }
    header.extend(layout.slot_names());
    let mut rows = Vec::new();
    for p in 0..n_paths {
        let dcfg = DriverConfig {
            seed: dudley_core::rng::stream_seed(seed, dudley_core::rng::tag::DIFFUSION, p as u64),
            horizon: t,
            step: h,
            m: d,
            substep,
        };
        let driver = sample_path(&dcfg)?;
        let sample = diffusion::integrate(&cfg, &driver, &start)?;
        for (k, state) in sample.states.iter().enumerate() {
            let mut row = vec![p.to_string(), fmt_f64(sample.times[k])];
            for r_ in 0..=d {
                for c_ in 0..=d {
                    row.push(fmt_f64(state.lorentz().get(r_, c_)));
                }
            }
            for mu in 0..=d {
                row.push(fmt_f64(state.translation().get(mu)));
            }
            let rel = if !sample.rel.is_empty() {
                Some(sample.rel[k])
            } else {
                relative_coords(&start, state).ok()
            };
            match rel {
                Some(w) => row.extend(layout.to_slots(&w).iter().map(|x| fmt_f64(*x))),
                None => row.extend(std::iter::repeat_n("NaN".to_string(), layout.n_slots())),
            }
            rows.push(row);
        }
    }
    let digest = vec![
        format!("cmd=simulate d={d} seed={seed} paths={n_paths} h={h} T={t} sigma={sigma}"),
        format!("radius={radius:?} scheme={scheme_name} substep={substep}"),
    ];
    let meta = meta_for(seed, digest);
    write_csv(&out, &meta, &header, &rows)?;
    Ok((seed, out))
}

// ----------------------------------------------------------------- tangent

#[derive(Args)]
struct TangentArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    substep: Option<usize>,
    /// Per-layer relative box half-widths `w1,w2,w3`.
    #[arg(long)]
    widths: Option<String>,
    /// Use the unit probe on the time axis.
    #[arg(long)]
    probe_axis: bool,
    /// Gauge of the axis probe.
    #[arg(long)]
    probe_gauge: Option<f64>,
    /// CSV file of probes in canonical slot order.
    #[arg(long)]
    probes: Option<PathBuf>,
}

fn resolve_probes(
    d: usize,
    probe_axis: bool,
    probe_gauge: Option<f64>,
    probes: &Option<PathBuf>,
) -> Result<Vec<AlgebraElement>, CliError> {
    match (probe_axis, probes) {
        (true, None) => Ok(vec![axis_probe(d, probe_gauge.unwrap_or(1.0))]),
        (false, Some(path)) => load_probes(d, path),
        (false, None) => Err(CliError::usage("need --probe-axis or --probes FILE")),
        (true, Some(_)) => Err(CliError::usage("--probe-axis and --probes are exclusive")),
    }
}

fn run_tangent(a: &TangentArgs) -> Result<(u64, PathBuf), CliError> {
    let r = Resolved::new(
        &a.common,
        "tangent",
        &["paths", "h", "substep", "widths", "probe_gauge"],
    )?;
    let d = r.num(a.common.d, "d", 2)?;
    let seed = r.num(a.common.seed, "seed", 1)?;
    let n_paths = r.num(a.paths, "paths", 10_000)?;
    let h = r.num(a.h, "h", 1e-3)?;
    let substep = r.num(a.substep, "substep", 8)?;
    let widths_s: String = a
        .widths
        .clone()
        .or(r.get("widths")?)
        .unwrap_or_else(|| "0.2,0.1,0.05".into());
    let rel_half = parse_widths(&widths_s)?;
    let probe_gauge = a.probe_gauge.or(r.get("probe_gauge")?);
    let probes = resolve_probes(d, a.probe_axis, probe_gauge, &a.probes)?;
    let out = resolve_out(
        &a.common
            .out
            .clone()
            .or(r.get("out")?)
            .unwrap_or_else(|| PathBuf::from("tangent.csv")),
    );

    let cfg = PhiConfig {
        d,
        n_paths,
        step: h,
        substep,
        seed,
        rel_half,
    };
    let rows_data = phi_estimate(&cfg, &probes)?;
    let layout = GradedLayout::new(d)?;
    let mut header = layout.slot_names();
    header.extend(
        [
            "phi", "stderr", "upper95", "hits", "n_paths", "w1", "w2", "w3", "horizon",
        ]
        .map(String::from),
    );
    let rows: Vec<Vec<String>> = rows_data
        .iter()
        .map(|row| {
            let mut out_row: Vec<String> = row.probe_slots.iter().map(|x| fmt_f64(*x)).collect();
            out_row.push(fmt_f64(row.phi));
            out_row.push(fmt_f64(row.stderr));
            out_row.push(row.upper95.map(fmt_f64).unwrap_or_default());
            out_row.push(row.hits.to_string());
            out_row.push(row.n_paths.to_string());
            out_row.extend(row.box_half.iter().map(|x| fmt_f64(*x)));
            out_row.push(fmt_f64(row.horizon));
            out_row
        })
        .collect();
    let digest = vec![format!(
        "cmd=tangent d={d} seed={seed} paths={n_paths} h={h} substep={substep} widths={widths_s} probes={}",
        probes.len()
    )];
    let meta = meta_for(seed, digest);
    write_csv(&out, &meta, &header, &rows)?;
    Ok((seed, out))
}

// ------------------------------------------------------------------- green

#[derive(Args)]
struct GreenArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    widths: Option<String>,
    #[arg(long)]
    probe_axis: bool,
    #[arg(long)]
    probe_gauge: Option<f64>,
    #[arg(long)]
    probes: Option<PathBuf>,
}

fn run_green(a: &GreenArgs) -> Result<(u64, PathBuf), CliError> {
    let r = Resolved::new(
        &a.common,
        "green",
        &["paths", "h", "sigma", "radius", "widths", "probe_gauge"],
    )?;
    let d = r.num(a.common.d, "d", 2)?;
    let seed = r.num(a.common.seed, "seed", 1)?;
    let n_paths = r.num(a.paths, "paths", 10_000)?;
    let h = r.num(a.h, "h", 2e-4)?;
    let sigma = r.num(a.sigma, "sigma", 1.0)?;
    let radius = r.num(a.radius, "radius", 1.0)?;
    let widths_s: String = a
        .widths
        .clone()
        .or(r.get("widths")?)
        .unwrap_or_else(|| "0.2,0.1,0.05".into());
    let rel_half = parse_widths(&widths_s)?;
    let probe_gauge = a.probe_gauge.or(r.get("probe_gauge")?);
    let probes = resolve_probes(d, a.probe_axis, probe_gauge.or(Some(0.3)), &a.probes)?;
    let out = resolve_out(
        &a.common
            .out
            .clone()
            .or(r.get("out")?)
            .unwrap_or_else(|| PathBuf::from("green.csv")),
    );

    let cfg = GreenConfig {
        d,
        sigma,
        radius,
        n_paths,
        step: h,
        seed,
        rel_half,
    };
    let table = green_estimate(&cfg, &probes)?;
    let layout = GradedLayout::new(d)?;
    let mut header = layout.slot_names();
    header.extend(["green", "stderr", "hits", "n_paths", "w1", "w2", "w3"].map(String::from));
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|row| {
            let mut out_row: Vec<String> = row.probe_slots.iter().map(|x| fmt_f64(*x)).collect();
            out_row.push(fmt_f64(row.green));
            out_row.push(fmt_f64(row.stderr));
            out_row.push(row.hits.to_string());
            out_row.push(row.n_paths.to_string());
            out_row.extend(row.box_half.iter().map(|x| fmt_f64(*x)));
            out_row
        })
        .collect();
    let digest = vec![format!(
        "cmd=green d={d} seed={seed} paths={n_paths} h={h} sigma={sigma} radius={radius} widths={widths_s} probes={}",
        probes.len()
    )];
    let meta = meta_for(seed, digest);
    write_csv(&out, &meta, &header, &rows)?;
    let json_out = out.with_extension("json");
    write_json(&json_out, &meta, &table)?;
    Ok((seed, out))
}

// ------------------------------------------------------------ scaling-test

#[derive(Args)]
struct ScalingArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    substep: Option<usize>,
    /// Also compare occupation times of a box at the axis probe against its
    /// dilated image.
    #[arg(long)]
    occupation: bool,
    #[arg(long)]
    widths: Option<String>,
}

fn run_scaling(a: &ScalingArgs) -> Result<(u64, PathBuf), CliError> {
    let r = Resolved::new(
        &a.common,
        "scaling-test",
        &["eps", "T", "paths", "h", "substep", "widths"],
    )?;
    let d = r.num(a.common.d, "d", 2)?;
    let seed = r.num(a.common.seed, "seed", 1)?;
    let eps = r.num(a.eps, "eps", 0.5)?;
    let t = r.num(a.t, "T", 1.0)?;
    let n_paths = r.num(a.paths, "paths", 10_000)?;
    let h = r.num(a.h, "h", 1e-3)?;
    let substep = r.num(a.substep, "substep", 4)?;
    let out = resolve_out(
        &a.common
            .out
            .clone()
            .or(r.get("out")?)
            .unwrap_or_else(|| PathBuf::from("scaling.json")),
    );
    let cfg = ScalingTestConfig {
        d,
        eps,
        t,
        n_paths,
        step: h,
        substep,
        seed,
    };
    let rep = scaling_law_test(&cfg)?;
    let occupation = if a.occupation {
        let widths_s: String = a
            .widths
            .clone()
            .or(r.get("widths")?)
            .unwrap_or_else(|| "0.5,0.3,0.6".into());
        let rel_half = parse_widths(&widths_s)?;
        let mut probe = AlgebraElement::zero(d);
        probe.set_time(1.0);
        let pcfg = dudley_core::tangent::PhiConfig {
            d,
            n_paths,
            step: h,
            substep,
            seed,
            rel_half,
        };
        Some(dudley_core::tangent::occupation_scaling_test(
            &pcfg, &probe, eps,
        )?)
    } else {
        None
    };
    #[derive(Serialize)]
    struct ScalingDoc {
        ks: dudley_core::tangent::ScalingReport,
        occupation: Option<dudley_core::tangent::OccupationScalingReport>,
    }
    let digest =
        vec![format!("cmd=scaling-test d={d} seed={seed} eps={eps} T={t} paths={n_paths} h={h} substep={substep} occupation={}", a.occupation)];
    let meta = meta_for(seed, digest);
    write_json(
        &out,
        &meta,
        &ScalingDoc {
            ks: rep,
            occupation,
        },
    )?;
    Ok((seed, out))
}

// ---------------------------------------------------------------- theorem1

#[derive(Args)]
struct Theorem1Args {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated descending gauge ladder.
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    widths: Option<String>,
    #[arg(long)]
    substep: Option<usize>,
    /// Angular probe on the time axis (the only built-in probe).
    #[arg(long)]
    probe_axis: bool,
}

fn run_theorem1(a: &Theorem1Args) -> Result<(u64, PathBuf), CliError> {
    let r = Resolved::new(
        &a.common,
        "theorem1",
        &["eps", "paths", "radius", "h", "widths", "substep"],
    )?;
    let d = r.num(a.common.d, "d", 2)?;
    let seed = r.num(a.common.seed, "seed", 1)?;
    let eps_s: String = a
        .eps
        .clone()
        .or(r.get("eps")?)
        .unwrap_or_else(|| "0.4,0.2,0.1".into());
    let eps_ladder = parse_f64_list(&eps_s)?;
    let n_paths = r.num(a.paths, "paths", 50_000)?;
    let radius = r.num(a.radius, "radius", 0.6)?;
    let h = r.num(a.h, "h", 1.5e-3)?;
    let widths_s: String = a
        .widths
        .clone()
        .or(r.get("widths")?)
        .unwrap_or_else(|| "0.4,0.25,0.5".into());
    let rel_half = parse_widths(&widths_s)?;
    let substep = r.num(a.substep, "substep", 2)?;
    let out = resolve_out(
        &a.common
            .out
            .clone()
            .or(r.get("out")?)
            .unwrap_or_else(|| PathBuf::from("theorem1.json")),
    );
    let mut axis = AlgebraElement::zero(d);
    axis.set_time(1.0);
    let theta = angular(&axis)?;
    let cfg = Theorem1Config {
        d,
        theta,
        eps_ladder: eps_ladder.clone(),
        n_paths,
        radius,
        step: h,
        seed,
        rel_half,
        substep,
    };
    let rep = theorem1_check(&cfg)?;
    let digest = vec![format!(
        "cmd=theorem1 d={d} seed={seed} eps={eps_s} paths={n_paths} radius={radius} h={h} widths={widths_s} substep={substep}"
    )];
    let meta = meta_for(seed, digest);
    write_json(&out, &meta, &rep)?;
    // CSV + plot companion
    let csv_out = out.with_extension("csv");
    let header: Vec<String> = ["eps", "s_value", "s_stderr", "phi", "phi_stderr"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = rep
        .rungs
        .iter()
        .map(|rung| {
            vec![
                fmt_f64(rung.eps),
                fmt_f64(rung.s_value),
                fmt_f64(rung.s_stderr),
                fmt_f64(rep.phi),
                fmt_f64(rep.phi_stderr),
            ]
        })
        .collect();
    write_csv(&csv_out, &meta, &header, &rows)?;
    let gp = out.with_extension("gp");
    let csv_name = csv_out.file_name().unwrap().to_string_lossy().into_owned();
    write_plot_script(
        &gp,
        &csv_name,
        "rescaled Green value vs tangent density",
        "eps",
        "value",
        &[
            "using 1:2:3 with yerrorlines title 'S(eps)'".to_string(),
            "using 1:4 with lines title 'phi'".to_string(),
        ],
    )?;
    Ok((seed, out))
}

// -------------------------------------------------------------------- cone

#[derive(Args)]
struct ConeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Sole threshold: angular time component at least this value.
    #[arg(long)]
    min_u0: Option<f64>,
    /// Comma-separated ascending probe times.
    #[arg(long)]
    t_grid: Option<String>,
    /// Comma-separated descending step sizes.
    #[arg(long)]
    h_ladder: Option<String>,
    #[arg(long)]
    paths: Option<usize>,
}

fn run_cone(a: &ConeArgs) -> Result<(u64, PathBuf), CliError> {
    let r = Resolved::new(
        &a.common,
        "cone",
        &["min_u0", "t_grid", "h_ladder", "paths"],
    )?;
    let d = r.num(a.common.d, "d", 2)?;
    let seed = r.num(a.common.seed, "seed", 1)?;
    let min_u0 = r.num(a.min_u0, "min_u0", 0.3)?;
    let t_s: String = a
        .t_grid
        .clone()
        .or(r.get("t_grid")?)
        .unwrap_or_else(|| "0.002,0.005,0.01".into());
    let h_s: String = a
        .h_ladder
        .clone()
        .or(r.get("h_ladder")?)
        .unwrap_or_else(|| "1e-4,1e-5".into());
    let n_paths = r.num(a.paths, "paths", 2000)?;
    let out = resolve_out(
        &a.common
            .out
            .clone()
            .or(r.get("out")?)
            .unwrap_or_else(|| PathBuf::from("cone.json")),
    );
    let cfg = ConeHitConfig {
        d,
        cone: ConeSpec {
            vertex: GroupElement::identity(d),
            sole: SolePredicate::AxisFuture { min_u0 },
            sole_in_future: min_u0 > 0.0,
        },
        t_grid: parse_f64_list(&t_s)?,
        n_paths,
        h_ladder: parse_f64_list(&h_s)?,
        seed,
    };
    let rep = cone_hit(&cfg)?;
    let digest = vec![format!(
        "cmd=cone d={d} seed={seed} min_u0={min_u0} t_grid={t_s} h_ladder={h_s} paths={n_paths}"
    )];
    let meta = meta_for(seed, digest);
    write_json(&out, &meta, &rep)?;
    let csv_out = out.with_extension("csv");
    let mut header = vec!["t".to_string()];
    header.extend(rep.h_ladder.iter().map(|h| format!("p_h{h}")));
    let rows: Vec<Vec<String>> = rep
        .t_grid
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let mut row = vec![fmt_f64(*t)];
            row.extend(rep.prob.iter().map(|per_h| fmt_f64(per_h[k])));
            row
        })
        .collect();
    write_csv(&csv_out, &meta, &header, &rows)?;
    let gp = out.with_extension("gp");
    let csv_name = csv_out.file_name().unwrap().to_string_lossy().into_owned();
    let plots: Vec<String> = (0..rep.h_ladder.len())
        .map(|k| format!("using 1:{} with linespoints", k + 2))
        .collect();
    write_plot_script(
        &gp,
        &csv_name,
        "cone hitting probability",
        "t",
        "P(T <= t)",
        &plots,
    )?;
    Ok((seed, out))
}

// ---------------------------------------------------------------- capacity

#[derive(Args)]
struct CapacityArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    n_lo: Option<usize>,
    #[arg(long)]
    n_hi: Option<usize>,
    #[arg(long)]
    min_u0: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    h: Option<f64>,
}

fn run_capacity(a: &CapacityArgs) -> Result<(u64, PathBuf), CliError> {
    let r = Resolved::new(
        &a.common,
        "capacity",
        &["lambda", "n_lo", "n_hi", "min_u0", "radius", "paths", "h"],
    )?;
    let d = r.num(a.common.d, "d", 2)?;
    let seed = r.num(a.common.seed, "seed", 1)?;
    let lambda = r.num(a.lambda, "lambda", 0.5)?;
    let n_lo = r.num(a.n_lo, "n_lo", 1)?;
    let n_hi = r.num(a.n_hi, "n_hi", 4)?;
    let min_u0 = r.num(a.min_u0, "min_u0", 0.4)?;
    let radius = r.num(a.radius, "radius", 1.2)?;
    let n_paths = r.num(a.paths, "paths", 2000)?;
    let h = r.num(a.h, "h", 2e-3)?;
    let out = resolve_out(
        &a.common
            .out
            .clone()
            .or(r.get("out")?)
            .unwrap_or_else(|| PathBuf::from("capacity.json")),
    );
    let cfg = CapacityConfig {
        d,
        slices: SliceSpec {
            cone_min_u0: min_u0,
            lambda,
            n_lo,
            n_hi,
        },
        radius,
        n_paths,
        step: h,
        seed,
    };
    let rep = slice_capacity(&cfg)?;
    let digest = vec![format!(
        "cmd=capacity d={d} seed={seed} lambda={lambda} n={n_lo}..{n_hi} min_u0={min_u0} radius={radius} paths={n_paths} h={h}"
    )];
    let meta = meta_for(seed, digest);
    write_json(&out, &meta, &rep)?;
    let csv_out = out.with_extension("csv");
    let header: Vec<String> = [
        "n",
        "gauge_lo",
        "gauge_hi",
        "mass",
        "max_potential",
        "max_potential_stderr",
        "capacity",
        "capacity_stderr",
        "overflows",
    ]
    .map(String::from)
    .to_vec();
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|row| {
            vec![
                row.n.to_string(),
                fmt_f64(row.gauge_lo),
                fmt_f64(row.gauge_hi),
                fmt_f64(row.mass),
                fmt_f64(row.max_potential),
                fmt_f64(row.max_potential_stderr),
                fmt_f64(row.capacity),
                fmt_f64(row.capacity_stderr),
                row.overflows.to_string(),
            ]
        })
        .collect();
    write_csv(&csv_out, &meta, &header, &rows)?;
    Ok((seed, out))
}

// ------------------------------------------------------------------ wiener

#[derive(Args)]
struct WienerArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    n_lo: Option<usize>,
    /// CSV produced by `capacity` (reads the `capacity` column).
    #[arg(long)]
    capacities: Option<PathBuf>,
    /// Inline comma-separated capacities (alternative to --capacities).
    #[arg(long)]
    caps: Option<String>,
    /// Weight exponent; defaults to -(Q-2).
    #[arg(long)]
    weight_exponent: Option<f64>,
}

fn read_capacity_column(path: &Path) -> Result<(Vec<f64>, Option<usize>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| CliError::usage("capacity file is empty"))?
        .split(',')
        .map(str::trim)
        .collect();
    let cap_col = header
        .iter()
        .position(|h| *h == "capacity")
        .ok_or_else(|| CliError::usage("capacity file lacks a `capacity` column"))?;
    let n_col = header.iter().position(|h| *h == "n");
    let mut caps = Vec::new();
    let mut first_n = None;
    for (k, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        let v: f64 = cells
            .get(cap_col)
            .ok_or_else(|| CliError::usage(format!("row {}: missing capacity cell", k + 2)))?
            .trim()
            .parse()
            .map_err(|e| CliError::usage(format!("row {}: {e}", k + 2)))?;
        caps.push(v);
        if k == 0 {
            if let Some(nc) = n_col {
                first_n = cells.get(nc).and_then(|s| s.trim().parse::<usize>().ok());
            }
        }
    }
    Ok((caps, first_n))
}

fn run_wiener(a: &WienerArgs) -> Result<(u64, PathBuf), CliError> {
    let r = Resolved::new(
        &a.common,
        "wiener",
        &["lambda", "n_lo", "weight_exponent", "caps"],
    )?;
    let d = r.num(a.common.d, "d", 2)?;
    let seed = r.num(a.common.seed, "seed", 0)?;
    let lambda = r.num(a.lambda, "lambda", 0.5)?;
    let weight_exponent = a.weight_exponent.or(r.get("weight_exponent")?);
    let (caps, file_n_lo) = match (&a.capacities, &a.caps) {
        (Some(path), None) => read_capacity_column(path)?,
        (None, Some(list)) => (parse_f64_list(list)?, None),
        _ => {
            return Err(CliError::usage(
                "need exactly one of --capacities FILE or --caps LIST",
            ))
        }
    };
    let n_lo = a.n_lo.or(r.get("n_lo")?).or(file_n_lo).unwrap_or(0);
    let out = resolve_out(
        &a.common
            .out
            .clone()
            .or(r.get("out")?)
            .unwrap_or_else(|| PathBuf::from("wiener.json")),
    );
    let rep = wiener_sum(d, lambda, n_lo, &caps, weight_exponent)?;
    let digest = vec![format!(
        "cmd=wiener d={d} lambda={lambda} n_lo={n_lo} caps={caps:?} weight_exponent={weight_exponent:?}"
    )];
    let meta = meta_for(seed, digest);
    write_json(&out, &meta, &rep)?;
    let csv_out = out.with_extension("csv");
    let header: Vec<String> = ["n", "term", "partial_sum"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = rep
        .terms
        .iter()
        .zip(&rep.partial_sums)
        .enumerate()
        .map(|(k, (t, s))| vec![(n_lo + k).to_string(), fmt_f64(*t), fmt_f64(*s)])
        .collect();
    write_csv(&csv_out, &meta, &header, &rows)?;
    let gp = out.with_extension("gp");
    let csv_name = csv_out.file_name().unwrap().to_string_lossy().into_owned();
    write_plot_script(
        &gp,
        &csv_name,
        "weighted capacity partial sums",
        "n",
        "sum",
        &["using 1:3 with linespoints title 'partial sum'".to_string()],
    )?;
    Ok((seed, out))
}

// --------------------------------------------------------------- bch-check

#[derive(Args)]
struct BchArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    pairs: Option<usize>,
}

#[derive(Serialize)]
struct BchReport {
    pairs: usize,
    checks: Vec<dudley_core::selftest::CheckResult>,
    passed: bool,
}

fn run_bch(a: &BchArgs) -> Result<(u64, PathBuf, bool), CliError> {
    let r = Resolved::new(&a.common, "bch-check", &["pairs"])?;
    let seed = r.num(a.common.seed, "seed", 1)?;
    let pairs = r.num(a.pairs, "pairs", 1000)?;
    let out = resolve_out(
        &a.common
            .out
            .clone()
            .or(r.get("out")?)
            .unwrap_or_else(|| PathBuf::from("bch.json")),
    );
    let suite = dudley_core::selftest::suite_bch_sized(seed, pairs);
    let rep = BchReport {
        pairs,
        checks: suite.checks.clone(),
        passed: suite.passed,
    };
    let digest = vec![format!("cmd=bch-check seed={seed} pairs={pairs}")];
    let meta = meta_for(seed, digest);
    write_json(&out, &meta, &rep)?;
    Ok((seed, out, suite.passed))
}

// ---------------------------------------------------------------- selftest

#[derive(Args)]
struct SelftestArgs {
    #[command(flatten)]
    common: CommonArgs,
}

fn run_selftest_cmd(a: &SelftestArgs) -> Result<(u64, bool), CliError> {
    let r = Resolved::new(&a.common, "selftest", &[])?;
    let seed = r.num(a.common.seed, "seed", 1)?;
    let suites = run_selftest(seed);
    let mut all = true;
    for s in &suites {
        let status = if s.passed { "PASS" } else { "FAIL" };
        println!("[{status}] {} ({} ms)", s.name, s.elapsed_ms);
        for c in &s.checks {
            println!(
                "    {} {}: {}",
                if c.passed { "ok " } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        all &= s.passed;
    }
    if let Some(out) = &a.common.out {
        let meta = meta_for(seed, vec![format!("cmd=selftest seed={seed}")]);
        write_json(&resolve_out(out), &meta, &suites)?;
    }
    Ok((seed, all))
}

fn init_threads() {
    if let Ok(v) = std::env::var("DUDLEY_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let start = Instant::now();
    let (name, seed, out): (&str, u64, Option<PathBuf>) = match &cli.cmd {
        Cmd::Simulate(a) => {
            let (seed, out) = run_simulate(a)?;
            ("simulate", seed, Some(out))
        }
        Cmd::Tangent(a) => {
            let (seed, out) = run_tangent(a)?;
            ("tangent", seed, Some(out))
        }
        Cmd::Green(a) => {
            let (seed, out) = run_green(a)?;
            ("green", seed, Some(out))
        }
        Cmd::ScalingTest(a) => {
            let (seed, out) = run_scaling(a)?;
            ("scaling-test", seed, Some(out))
        }
        Cmd::Theorem1(a) => {
            let (seed, out) = run_theorem1(a)?;
            ("theorem1", seed, Some(out))
        }
        Cmd::Cone(a) => {
            let (seed, out) = run_cone(a)?;
            ("cone", seed, Some(out))
        }
        Cmd::Capacity(a) => {
            let (seed, out) = run_capacity(a)?;
            ("capacity", seed, Some(out))
        }
        Cmd::Wiener(a) => {
            let (seed, out) = run_wiener(a)?;
            ("wiener", seed, Some(out))
        }
        Cmd::BchCheck(a) => {
            let (seed, out, passed) = run_bch(a)?;
            if !passed {
                return Err(CliError::check_failed("bch-check failed; see the report"));
            }
            ("bch-check", seed, Some(out))
        }
        Cmd::Selftest(a) => {
            let (seed, all) = run_selftest_cmd(a)?;
            if !all {
                return Err(CliError::check_failed("selftest failed"));
            }
            println!(
                "selftest ok seed={seed} elapsed={:.1}s",
                start.elapsed().as_secs_f64()
            );
            return Ok(());
        }
    };
    println!(
        "{name} ok seed={seed} elapsed={:.1}s out={}",
        start.elapsed().as_secs_f64(),
        out.map(|p| p.display().to_string()).unwrap_or_default()
    );
    Ok(())
}

fn main() {
    init_threads();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.code);
        }
    }
}
