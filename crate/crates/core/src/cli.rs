//! Command-line surface of the `rrlevy` binary.
//!
//! Exit codes: 0 success, 1 failed check or numerical failure, 2 usage or
//! configuration error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identities::{IdentityContext, IdentityRequest, Quantity, Value};
use crate::model::{ModelSpec, Target};
use crate::scale::{ScaleEvaluator, ScaleFn, ScaleOptions};
use crate::simulator::{run_ensemble, trace_csv, trace_paths, SchemeKind, SimConfig, DEFAULT_HORIZON_CAP};
use crate::verifier::{all_pass, run_suite, summary_table, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "rrlevy", version, about = "Refracted-reflected spectrally negative Levy processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate W, W', Wbar, Z, Zbar as CSV.
    Scale(ScaleArgs),
    /// Evaluate named fluctuation identities as JSON or CSV.
    Identity(IdentityArgs),
    /// Run a Monte Carlo ensemble and print estimates as JSON.
    Simulate(SimulateArgs),
    /// Run a verification suite; exit status 1 if any check fails.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct ScaleArgs {
    /// Model file (TOML, or JSON with a .json extension).
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub q: f64,
    #[arg(long, value_enum, default_value = "x")]
    pub target: TargetArg,
    /// Evaluation points, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x: Vec<f64>,
    /// Grid `start:stop:step`, endpoints included.
    #[arg(long, conflicts_with = "x", allow_hyphen_values = true)]
    pub x_range: Option<String>,
    /// Use Talbot inversion even when the closed form is available.
    #[arg(long)]
    pub force_inversion: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    X,
    Y,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::X => Target::X,
            TargetArg::Y => Target::Y,
        }
    }
}

#[derive(Debug, Args)]
pub struct IdentityArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Request file with a `[[request]]` table per evaluation.
    #[arg(long, conflicts_with = "quantity")]
    pub request: Option<PathBuf>,
    /// Single request given on the command line.
    #[arg(long)]
    pub quantity: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub x: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub z: Option<f64>,
    #[arg(long)]
    pub z1: Option<f64>,
    #[arg(long)]
    pub z2: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Simulation config file; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Starting point `x0`.
    #[arg(long, allow_negative_numbers = true)]
    pub x: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paths: Option<u64>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long)]
    pub step: Option<f64>,
    /// Band `z1 z2` whose discounted occupation is estimated.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub band: Option<Vec<f64>>,
    #[arg(long)]
    pub horizon_cap: Option<f64>,
    /// Write traces of the first k paths.
    #[arg(long)]
    pub trace_paths: Option<usize>,
    /// Trace CSV path; defaults to `<out>.trace.csv` or `trace.csv`.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    ExactBv,
    Euler,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// analytic, lemma_pi, degeneracy, mc_small or mc_full.
    #[arg(long)]
    pub suite: String,
    #[arg(long, default_value_t = 20240601)]
    pub seed: u64,
    /// Override the model's refraction rate, e.g. 0 for the reflected case.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Report file; defaults to `verify_<suite>.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command, writing
/// results to `stdout` and diagnostics to `stderr`. Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Scale(a) => cmd_scale(&a, stdout),
        Command::Identity(a) => cmd_identity(&a, stdout),
        Command::Simulate(a) => cmd_simulate(&a, stdout),
        Command::Verify(a) => cmd_verify(&a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numeric(_) | Error::RootNotConverged { .. } => EXIT_CHECK_FAILED,
        _ => EXIT_USAGE,
    }
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// `start:stop:step` with both endpoints included.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("x-range `{spec}` must be start:stop:step with step > 0"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0 && stop >= start && start.is_finite() && stop.is_finite()) {
        return Err(bad());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + step * i as f64).collect())
}

fn cmd_scale(args: &ScaleArgs, stdout: &mut dyn Write) -> Result<i32> {
    let model = ModelSpec::load(&args.model)?;
    if !(args.q >= 0.0 && args.q.is_finite()) {
        return Err(Error::Config(format!("--q must be >= 0, got {}", args.q)));
    }
    let xs = match &args.x_range {
        Some(r) => parse_range(r)?,
        None if !args.x.is_empty() => args.x.clone(),
        None => return Err(Error::Config("give --x or --x-range".into())),
    };
    let opts = ScaleOptions {
        force_inversion: args.force_inversion,
        ..ScaleOptions::default()
    };
    let ev = ScaleEvaluator::build_with(&model, args.q, args.target.into(), opts)?;
    let mut text = format!(
        "# model_hash={} backend={} q={} target={}\nx,W,Wprime,Wbar,Z,Zbar\n",
        model.hash(),
        ev.backend().label(),
        args.q,
        Target::from(args.target)
    );
    for x in xs {
        let row = [ScaleFn::W, ScaleFn::WPrime, ScaleFn::WBar, ScaleFn::Z, ScaleFn::ZBar]
            .iter()
            .map(|&k| ev.try_eval(k, x).map(|v| format!("{v:.16e}")))
            .collect::<Result<Vec<_>>>()?;
        text.push_str(&format!("{x:.16e},{}\n", row.join(",")));
    }
    emit(args.out.as_deref(), &text, stdout)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RequestFile {
    request: Vec<IdentityRequest>,
}

/// Reads a request file: TOML with `[[request]]` tables, or a JSON array.
pub fn load_requests(path: &Path) -> Result<Vec<IdentityRequest>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let annotate = |msg: String| {
        let hint = if msg.contains("unknown variant") {
            format!("; valid names: {}", Quantity::valid_names())
        } else {
            String::new()
        };
        Error::Config(format!("request file {}: {msg}{hint}", path.display()))
    };
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| annotate(e.to_string()))
    } else {
        toml::from_str::<RequestFile>(&text)
            .map(|f| f.request)
            .map_err(|e| annotate(e.to_string()))
    }
}

/// JSON-friendly rendering of a value: a number, or `"inf"` with a reason.
#[derive(Debug, Serialize)]
#[serde(untagged)]
enum Rendered {
    Number(f64),
    Text(&'static str),
}

#[derive(Debug, Serialize)]
struct IdentityRow {
    #[serde(flatten)]
    request: IdentityRequest,
    value: Rendered,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    backends: Vec<String>,
    panel_width: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
struct IdentityOutput {
    model_hash: String,
    results: Vec<IdentityRow>,
}

fn cmd_identity(args: &IdentityArgs, stdout: &mut dyn Write) -> Result<i32> {
    let model = ModelSpec::load(&args.model)?;
    let requests = match (&args.request, &args.quantity) {
        (Some(path), _) => load_requests(path)?,
        (None, Some(name)) => vec![IdentityRequest {
            quantity: name.parse()?,
            x: args.x,
            a: args.a,
            z: args.z,
            z1: args.z1,
            z2: args.z2,
            p: args.p,
            q: args.q,
        }],
        (None, None) => return Err(Error::Config("give --request FILE or --quantity NAME".into())),
    };
    let mut rows = Vec::with_capacity(requests.len());
    for req in &requests {
        let ctx = IdentityContext::new(model.clone())?;
        let v = ctx.evaluate(req)?;
        let (value, reason) = match v.value {
            Value::Finite(x) => (Rendered::Number(x), None),
            Value::Infinite { reason } => (Rendered::Text("inf"), Some(reason)),
        };
        rows.push(IdentityRow {
            request: v.request,
            value,
            reason,
            backends: v.backends,
            panel_width: v.panel_width,
            warnings: v.warnings,
        });
    }
    let text = match args.format {
        Format::Json => {
            let out = IdentityOutput {
                model_hash: model.hash(),
                results: rows,
            };
            serde_json::to_string_pretty(&out)? + "\n"
        }
        Format::Csv => {
            let mut s = format!("# model_hash={}\nquantity,x,a,z,z1,z2,p,q,value,reason\n", model.hash());
            let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
            for r in rows {
                let q = &r.request;
                let value = match r.value {
                    Rendered::Number(x) => format!("{x:.16e}"),
                    Rendered::Text(t) => t.to_string(),
                };
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    q.quantity,
                    opt(q.x),
                    opt(q.a),
                    opt(q.z),
                    opt(q.z1),
                    opt(q.z2),
                    opt(q.p),
                    opt(q.q),
                    value,
                    r.reason.unwrap_or_default()
                ));
            }
            s
        }
    };
    emit(args.out.as_deref(), &text, stdout)?;
    Ok(EXIT_OK)
}

/// Builds the simulation config from an optional file plus flag overrides.
pub fn simulation_config(args: &SimulateArgs) -> Result<SimConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            SimConfig::from_toml_str(&text)?
        }
        None => {
            let need = |v: Option<f64>, flag: &str| {
                v.ok_or_else(|| Error::Config(format!("without --config, {flag} is required")))
            };
            SimConfig {
                x0: need(args.x, "--x")?,
                a: args.a,
                q: need(args.q, "--q")?,
                p: 0.0,
                n_paths: args.paths.unwrap_or(100_000),
                seed: args.seed.unwrap_or(1),
                scheme: SchemeKind::ExactBv,
                step: None,
                substeps: 1,
                horizon_cap: DEFAULT_HORIZON_CAP,
                band: None,
                trace_paths: 0,
            }
        }
    };
    if let Some(v) = args.x {
        cfg.x0 = v;
    }
    if args.a.is_some() {
        cfg.a = args.a;
    }
    if let Some(v) = args.q {
        cfg.q = v;
    }
    if let Some(v) = args.p {
        cfg.p = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.paths {
        cfg.n_paths = v;
    }
    if let Some(s) = args.scheme {
        cfg.scheme = match s {
            SchemeArg::ExactBv => SchemeKind::ExactBv,
            SchemeArg::Euler => SchemeKind::Euler,
        };
    }
    if args.step.is_some() {
        cfg.step = args.step;
    }
    if let Some(b) = &args.band {
        cfg.band = Some([b[0], b[1]]);
    }
    if let Some(v) = args.horizon_cap {
        cfg.horizon_cap = v;
    }
    if let Some(k) = args.trace_paths {
        cfg.trace_paths = k;
    }
    cfg.scheme_checked()?;
    Ok(cfg)
}

#[derive(Debug, Serialize)]
struct SimulationOutput<'a> {
    config: &'a SimConfig,
    #[serde(flatten)]
    estimates: crate::simulator::EstimateSet,
}

fn cmd_simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<i32> {
    let model = ModelSpec::load(&args.model)?;
    let cfg = simulation_config(args)?;
    let set = run_ensemble(&model, &cfg)?;
    if cfg.trace_paths > 0 {
        let traces = trace_paths(&model, &cfg, cfg.trace_paths)?;
        let path = match (&args.trace_out, &args.out) {
            (Some(p), _) => p.clone(),
            (None, Some(out)) => out.with_extension("trace.csv"),
            (None, None) => PathBuf::from("trace.csv"),
        };
        std::fs::write(&path, trace_csv(&traces))
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    let out = SimulationOutput {
        config: &cfg,
        estimates: set,
    };
    let text = serde_json::to_string_pretty(&out)? + "\n";
    emit(args.out.as_deref(), &text, stdout)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct VerifyOutput<'a> {
    model_hash: String,
    suite: Suite,
    seed: u64,
    reports: &'a [crate::verifier::VerificationReport],
}

fn cmd_verify(args: &VerifyArgs, stdout: &mut dyn Write) -> Result<i32> {
    let suite: Suite = args.suite.parse()?;
    let mut model = ModelSpec::load(&args.model)?;
    if let Some(d) = args.delta {
        model = model.with_delta(d);
        model.validate()?;
    }
    let reports = run_suite(&model, suite, args.seed)?;
    let path = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("verify_{suite}.json")));
    let out = VerifyOutput {
        model_hash: model.hash(),
        suite,
        seed: args.seed,
        reports: &reports,
    };
    let json = serde_json::to_string_pretty(&out)? + "\n";
    std::fs::write(&path, json).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    write!(stdout, "# model_hash={} suite={suite}\n{}", model.hash(), summary_table(&reports))?;
    Ok(if all_pass(&reports) { EXIT_OK } else { EXIT_CHECK_FAILED })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_includes_endpoints() {
        let xs = parse_range("0:2:0.1").unwrap();
        assert_eq!(xs.len(), 21);
        assert!((xs[20] - 2.0).abs() < 1e-12);
        assert!(parse_range("0:2").is_err());
        assert!(parse_range("0:2:0").is_err());
        assert!(parse_range("2:0:0.1").is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(run(["rrlevy", "bogus"], &mut o, &mut e), EXIT_USAGE);
        assert_eq!(run(["rrlevy", "--help"], &mut o, &mut e), EXIT_OK);
    }
}
