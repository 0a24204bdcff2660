use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use monopole::abelian_data::{charge1_doc, load_bundle, verify_hitchin, AbelianBundle};
use monopole::config::RunConfig;
use monopole::field_reconstruction::{field_sample, phi_norm_at, FieldDiagnostics};
use monopole::matrix_kit::{CMat, SpatialPoint, C64, ZERO};
use monopole::par;
use monopole::reference_oracles::{build_charge2_bundle, Charge2Params};
use monopole::report::Report;
use monopole::selftest::{self, SelftestOptions};
use monopole::weyl_solver::SpectralContext;
use monopole::MonopoleError;

const EXIT_VALIDATION: u8 = 1;
const EXIT_SCHEMA: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_NO_INPUT: u8 = 66;

const BUILTINS: [&str; 2] = ["charge1", "charge2"];

/// SU(2) monopole fields from spectral data.
#[derive(Debug, Parser)]
#[command(name = "monopole", version)]
struct Cli {
    #[command(flatten)]
    settings: Settings,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Settings {
    /// Truncation tolerance of theta series.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol_theta: f64,
    /// Local error tolerance of the gauge-flow integrator.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol_ode: f64,
    /// Spatial finite-difference step, scaled by max(1, r).
    #[arg(long, global = true, default_value_t = 1e-3)]
    fd_step: f64,
    /// Standoff from the poles at z = ±1.
    #[arg(long, global = true, default_value_t = 1e-3)]
    delta: f64,
    /// Gauss-Legendre nodes on [-1, 1].
    #[arg(long, global = true, default_value_t = 256)]
    z_nodes: usize,
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

impl Settings {
    fn config(&self) -> RunConfig {
        RunConfig {
            tol_theta: self.tol_theta,
            tol_ode: self.tol_ode,
            fd_step: self.fd_step,
            delta: self.delta,
            z_nodes: self.z_nodes,
            jobs: self.jobs,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check every invariant of a bundle; JSON report on stdout.
    Validate {
        /// Bundle file, or a builtin name (charge1, charge2).
        bundle: String,
    },
    /// All fields at one point, as JSON.
    #[command(allow_negative_numbers = true)]
    Point { bundle: String, x1: f64, x2: f64, x3: f64 },
    /// |Φ| and the Bogomolny residual on a box, as CSV.
    Grid {
        bundle: String,
        /// Lower corner `x1,x2,x3`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        lo: Vec<f64>,
        /// Upper corner `x1,x2,x3`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        hi: Vec<f64>,
        /// Points per axis: `N` or `N1,N2,N3`.
        #[arg(long, value_delimiter = ',', required = true)]
        resolution: Vec<usize>,
        /// Output file (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite and print a timing table.
    Selftest {
        /// Only the sub-minute subset.
        #[arg(long)]
        quick: bool,
        /// Also write the full results as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print a builtin bundle as JSON.
    Export { name: String },
}

/// A failure with its exit status.
struct Exit(u8, String);

impl From<MonopoleError> for Exit {
    fn from(e: MonopoleError) -> Self {
        let code = match e {
            MonopoleError::Schema(_) => EXIT_SCHEMA,
            MonopoleError::InvalidInput(_) => EXIT_USAGE,
            _ => EXIT_VALIDATION,
        };
        Exit(code, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Exit(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Exit> {
    let config = cli.settings.config();
    config.validate()?;
    match cli.command {
        Command::Validate { bundle } => validate(&bundle),
        Command::Point { bundle, x1, x2, x3 } => point(&bundle, SpatialPoint::new(x1, x2, x3), &config),
        Command::Grid { bundle, lo, hi, resolution, out } => grid(&bundle, &lo, &hi, &resolution, out.as_deref(), &config),
        Command::Selftest { quick, json } => run_selftest(quick, json.as_deref(), &config),
        Command::Export { name } => {
            emit(&builtin_text(&name)?);
            Ok(0)
        }
    }
}

/// Writes a line to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn builtin_text(name: &str) -> Result<String, Exit> {
    match name {
        "charge1" => Ok(charge1_doc([ZERO; 3]).to_json()),
        "charge2" => Ok(build_charge2_bundle(Charge2Params::default())?.doc.to_json()),
        other => Err(Exit(EXIT_USAGE, format!("unknown builtin bundle {other:?}; expected one of {BUILTINS:?}"))),
    }
}

/// Bundle text for a path or a builtin name. Builtins are read from
/// `$MONOPOLE_BUNDLE_DIR/<name>.json` when that file exists.
fn bundle_text(spec: &str) -> Result<String, Exit> {
    let path = Path::new(spec);
    if path.exists() {
        return std::fs::read_to_string(path).map_err(|e| Exit(EXIT_NO_INPUT, format!("{spec}: {e}")));
    }
    if BUILTINS.contains(&spec) {
        if let Some(dir) = std::env::var_os("MONOPOLE_BUNDLE_DIR") {
            let file = Path::new(&dir).join(format!("{spec}.json"));
            if file.exists() {
                return std::fs::read_to_string(&file).map_err(|e| Exit(EXIT_NO_INPUT, format!("{}: {e}", file.display())));
            }
        }
        return builtin_text(spec);
    }
    Err(Exit(EXIT_NO_INPUT, format!("{spec}: no such file or builtin bundle")))
}

/// Loads a bundle that must pass validation.
fn valid_bundle(spec: &str) -> Result<AbelianBundle, Exit> {
    let (bundle, report) = load_bundle(&bundle_text(spec)?)?;
    if let Some(c) = report.failures().first() {
        return Err(Exit(EXIT_VALIDATION, format!("bundle fails {} (residual {:e}, tol {:e})", c.check, c.residual, c.tol)));
    }
    Ok(bundle)
}

fn validate(spec: &str) -> Result<u8, Exit> {
    let text = bundle_text(spec)?;
    let report = match load_bundle(&text) {
        Ok((bundle, mut report)) => {
            for c in verify_hitchin(&bundle).checks {
                if !report.checks.iter().any(|k| k.check == c.check) {
                    report.push(c);
                }
            }
            report
        }
        Err(e @ MonopoleError::Schema(_)) => return Err(e.into()),
        Err(e) => {
            emit(&json!({ "bundle": spec, "pass": false, "error": e.to_string(), "checks": [] }).to_string());
            return Err(Exit(EXIT_VALIDATION, e.to_string()));
        }
    };
    for c in &report.checks {
        eprintln!("{:<28} {:>12.3e}  tol {:<8.1e} {}", c.check, c.residual, c.tol, if c.pass { "ok" } else { "FAIL" });
    }
    let pass = report.all_pass();
    emit(&json!({ "bundle": spec, "pass": pass, "checks": finite_checks(&report) }).to_string());
    Ok(if pass { 0 } else { EXIT_VALIDATION })
}

/// Checks with non-finite residuals written as `null`.
fn finite_checks(report: &Report) -> serde_json::Value {
    serde_json::Value::Array(
        report
            .checks
            .iter()
            .map(|c| json!({ "check": c.check, "residual": finite(c.residual), "tol": c.tol, "pass": c.pass }))
            .collect(),
    )
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn rows(m: &CMat) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[derive(Serialize)]
struct PointOutput {
    x: [f64; 3],
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    phi_norm: Option<f64>,
    bogomolny_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phi: Option<Vec<Vec<C64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<[Vec<Vec<C64>>; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<FieldDiagnostics>,
}

/// Full sample, or `|Φ|` alone when the stencil cannot be built.
fn sample_point(ctx: &SpectralContext, x: &SpatialPoint) -> PointOutput {
    let empty = |status: String, error: Option<String>| PointOutput {
        x: x.arr(),
        status,
        error,
        phi_norm: None,
        bogomolny_residual: None,
        phi: None,
        a: None,
        diagnostics: None,
    };
    match field_sample(ctx, x) {
        Ok(s) => PointOutput {
            x: x.arr(),
            status: "ok".into(),
            error: None,
            phi_norm: finite(s.phi_norm),
            bogomolny_residual: finite(s.bogomolny_residual),
            phi: Some(rows(&s.phi)),
            a: Some(s.a.each_ref().map(rows)),
            diagnostics: Some(s.diagnostics),
        },
        Err(e) => match phi_norm_at(ctx, x) {
            Ok(p) => PointOutput { phi_norm: finite(p), ..empty(format!("partial:{}", e.kind()), Some(e.to_string())) },
            Err(_) => empty(e.kind().into(), Some(e.to_string())),
        },
    }
}

fn point(spec: &str, x: SpatialPoint, config: &RunConfig) -> Result<u8, Exit> {
    if !x.is_finite() {
        return Err(Exit(EXIT_USAGE, "coordinates must be finite".into()));
    }
    let bundle = valid_bundle(spec)?;
    let ctx = SpectralContext::new(&bundle, config)?;
    let out = par::with_jobs(config.jobs, || sample_point(&ctx, &x));
    let failed = out.phi_norm.is_none();
    emit(&serde_json::to_string_pretty(&out).expect("point output serialises"));
    Ok(if failed { EXIT_VALIDATION } else { 0 })
}

/// Points of the box in row-major order with `x3` fastest.
fn box_points(lo: &[f64], hi: &[f64], res: [usize; 3]) -> Vec<SpatialPoint> {
    let axis = |k: usize| -> Vec<f64> {
        let n = res[k];
        if n == 1 {
            return vec![lo[k]];
        }
        (0..n).map(|i| lo[k] + (hi[k] - lo[k]) * i as f64 / (n - 1) as f64).collect()
    };
    let (a, b, c) = (axis(0), axis(1), axis(2));
    let mut out = Vec::with_capacity(a.len() * b.len() * c.len());
    for &x1 in &a {
        for &x2 in &b {
            for &x3 in &c {
                out.push(SpatialPoint::new(x1, x2, x3));
            }
        }
    }
    out
}

fn grid(spec: &str, lo: &[f64], hi: &[f64], resolution: &[usize], out: Option<&Path>, config: &RunConfig) -> Result<u8, Exit> {
    let res = match *resolution {
        [n] => [n; 3],
        [a, b, c] => [a, b, c],
        _ => return Err(Exit(EXIT_USAGE, "resolution takes one or three values".into())),
    };
    if lo.len() != 3 || hi.len() != 3 {
        return Err(Exit(EXIT_USAGE, "box corners take three comma-separated values".into()));
    }
    if res.contains(&0) {
        return Err(Exit(EXIT_USAGE, "resolution must be at least 1 on every axis".into()));
    }
    if lo.iter().chain(hi).any(|v| !v.is_finite()) {
        return Err(Exit(EXIT_USAGE, "box corners must be finite".into()));
    }
    let bundle = valid_bundle(spec)?;
    let ctx = SpectralContext::new(&bundle, config)?;
    let points = box_points(lo, hi, res);
    let samples = par::with_jobs(config.jobs, || {
        par::map(&points, |x| {
            let s = sample_point(&ctx, x);
            (s.phi_norm, s.bogomolny_residual, s.status)
        })
    });
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| Exit(EXIT_NO_INPUT, format!("{}: {e}", p.display())))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let io = |e: csv::Error| Exit(EXIT_VALIDATION, e.to_string());
    w.write_record(["x1", "x2", "x3", "phi_norm", "bogomolny_residual", "status"]).map_err(io)?;
    let cell = |v: Option<f64>| v.map(|v| format!("{v:?}")).unwrap_or_default();
    let mut bad = 0;
    for (x, (pn, bog, status)) in points.iter().zip(&samples) {
        bad += usize::from(status != "ok");
        w.write_record([format!("{:?}", x.x1), format!("{:?}", x.x2), format!("{:?}", x.x3), cell(*pn), cell(*bog), status.clone()]).map_err(io)?;
    }
    w.flush().map_err(|e| Exit(EXIT_VALIDATION, e.to_string()))?;
    eprintln!("{} points, {} not ok", points.len(), bad);
    Ok(0)
}

fn run_selftest(quick: bool, json_path: Option<&Path>, config: &RunConfig) -> Result<u8, Exit> {
    let opts = SelftestOptions { config: *config, quick, tol_scale: 1.0 };
    let results = par::with_jobs(config.jobs, || selftest::run(&opts, None))?;
    for r in &results {
        if let Some(e) = &r.error {
            eprintln!("criterion {}: {e}", r.id);
        }
        for c in r.checks.iter().filter(|c| !c.pass) {
            eprintln!("criterion {}: {} residual {:e} tol {:e}", r.id, c.check, c.residual, c.tol);
        }
    }
    emit(selftest::timing_table(&results).trim_end());
    if let Some(p) = json_path {
        let body: Vec<serde_json::Value> = results
            .iter()
            .map(|r| {
                let report = Report { checks: r.checks.clone() };
                json!({ "id": r.id, "name": r.name, "pass": r.pass, "seconds": r.seconds, "error": r.error, "checks": finite_checks(&report) })
            })
            .collect();
        let text = serde_json::to_string_pretty(&body).expect("results serialise");
        std::fs::write(p, text).map_err(|e| Exit(EXIT_NO_INPUT, format!("{}: {e}", p.display())))?;
    }
    Ok(if results.iter().all(|r| r.pass) { 0 } else { EXIT_VALIDATION })
}
