//! Command-line driver for the `itersim` experiments.
//!
//! Every subcommand writes CSV to `--out` (when given) and prints a one-line
//! summary. Exit codes: 0 on success, 1 on a runtime failure, 2 on an
//! invalid configuration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use itersim::feynman_kac::{self, ScalarFn};
use itersim::scalar::format_real;
use itersim::stats::{self, StrongErrorConfig};
use itersim::{
    Dynamics, Error, Killing, McConfig, MonteCarloEstimate, ProcessSpec, QuadratureRule, RngStream, Stability,
    TestFunction,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

type Spec = ProcessSpec<f64>;

#[derive(Debug, Parser)]
#[command(name = "itersim", version, about = "Simulation and Feynman-Kac estimation for iterated processes")]
pub struct Cli {
    /// TOML file of `key = value` pairs; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads (defaults to the available parallelism).
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one composed trajectory.
    Simulate(SimulateArgs),
    /// Compare terminal samples with the quadrature density.
    Density(DensityArgs),
    /// Estimate higher-order variations along the scheme grid.
    Variations(VariationsArgs),
    /// Monte Carlo Feynman-Kac estimate, optionally against the quadrature oracle.
    Fk(FkArgs),
    /// Two-sided process with optional constant killing rates.
    TwoSided(TwoSidedArgs),
    /// Two-sided process under a scaled Cauchy clock.
    Beam(BeamArgs),
    /// Intertwining check between squared Bessel processes.
    Intertwine(IntertwineArgs),
    /// Strong error on coupled levels and the fitted order.
    Convergence(ConvergenceArgs),
    /// Half-derivative transform of a built-in slice.
    Transform(TransformArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Master seed.
    #[arg(long, env = "ITERSIM_SEED", default_value_t = 0)]
    pub seed: u64,

    /// CSV output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SimulateArgs {
    #[arg(long, default_value = "bm")]
    pub position: Spec,
    #[arg(long, default_value = "bm")]
    pub time: Spec,
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.0)]
    pub x0: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct DensityArgs {
    #[arg(long, default_value = "bm")]
    pub position: Spec,
    #[arg(long, default_value = "bm")]
    pub time: Spec,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 0.0)]
    pub x0: f64,
    #[arg(long, default_value_t = 20_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = -4.0, allow_negative_numbers = true)]
    pub z_min: f64,
    #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
    pub z_max: f64,
    #[arg(long, default_value_t = 161)]
    pub z_points: usize,
    #[arg(long, default_value_t = itersim::quadrature::DEFAULT_NODES)]
    pub nodes: usize,
    /// CSV path for the oracle curve (`z,p_oracle`).
    #[arg(long)]
    pub curve_out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct VariationsArgs {
    #[arg(long, default_value = "bm")]
    pub position: Spec,
    #[arg(long, default_value = "bm")]
    pub time: Spec,
    #[arg(long, default_value_t = 4)]
    pub order: u32,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 2000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Datum {
    /// `exp(-x^2)`.
    Gauss,
    /// Smooth bump supported on `(bump_lo, bump_hi)`.
    Bump,
    /// `f(x) = x`, `f~(x, y) = x cosh y`.
    LinearCosh,
}

#[derive(Debug, Args)]
pub struct DatumArgs {
    #[arg(long, value_enum, default_value_t = Datum::Gauss)]
    pub f: Datum,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub bump_lo: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub bump_hi: f64,
}

impl DatumArgs {
    fn one_sided(&self) -> Result<TestFunction<f64>, Error> {
        Ok(match self.f {
            Datum::Gauss => TestFunction::gauss(),
            Datum::Bump => {
                let (lo, hi) = self.bump_support()?;
                TestFunction::bump(lo, hi)
            }
            Datum::LinearCosh => TestFunction::custom(|x| x),
        })
    }

    fn two_sided(&self) -> Result<Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>, Error> {
        Ok(match self.f {
            Datum::Gauss => Arc::new(|x: f64, y: f64| (-(x * x) - y * y).exp()),
            Datum::Bump => {
                let (lo, hi) = self.bump_support()?;
                Arc::new(move |x, y| feynman_kac::bump(x, lo, hi) * feynman_kac::bump(y, lo, hi))
            }
            Datum::LinearCosh => Arc::new(|x: f64, y: f64| x * y.cosh()),
        })
    }

    fn bump_support(&self) -> Result<(f64, f64), Error> {
        if self.bump_lo < self.bump_hi {
            Ok((self.bump_lo, self.bump_hi))
        } else {
            Err(invalid("bump-hi", "must exceed bump-lo"))
        }
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct FkArgs {
    #[arg(long, default_value = "bm")]
    pub position: Spec,
    #[arg(long, default_value = "bm")]
    pub time: Spec,
    #[command(flatten)]
    pub datum: DatumArgs,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x: f64,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Also evaluate the quadrature oracle.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = itersim::quadrature::DEFAULT_NODES)]
    pub nodes: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TwoSidedArgs {
    #[arg(long, default_value = "ou")]
    pub plus: Spec,
    #[arg(long, default_value = "bm")]
    pub minus: Spec,
    #[arg(long, default_value = "bm")]
    pub time: Spec,
    #[command(flatten)]
    pub datum: DatumArgs,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub x: f64,
    /// Constant killing rate on the positive branch.
    #[arg(long, default_value_t = 0.0)]
    pub kill_plus: f64,
    /// Constant killing rate on the negative branch.
    #[arg(long, default_value_t = 0.0)]
    pub kill_minus: f64,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct BeamArgs {
    /// Product of flexural rigidity and mass density.
    #[arg(long, default_value_t = 1.0)]
    pub gm: f64,
    #[arg(long, default_value = "bm")]
    pub plus: Spec,
    #[arg(long, default_value = "bm")]
    pub minus: Spec,
    #[command(flatten)]
    pub datum: DatumArgs,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x: f64,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct IntertwineArgs {
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.25)]
    pub t: f64,
    /// Comma-separated evaluation points.
    #[arg(long, value_delimiter = ',', default_value = "1.5,2,3")]
    pub x: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub bump_lo: f64,
    #[arg(long, default_value_t = 2.0)]
    pub bump_hi: f64,
    #[arg(long, default_value_t = 20_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 64)]
    pub nodes: usize,
    #[arg(long, default_value_t = 16)]
    pub lambda_nodes: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ConvergenceArgs {
    #[arg(long, default_value = "bm")]
    pub position: Spec,
    #[arg(long, default_value = "bm")]
    pub time: Spec,
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    /// Comma-separated, strictly increasing levels.
    #[arg(long, value_delimiter = ',', default_value = "16,32,64,128,256")]
    pub levels: Vec<usize>,
    #[arg(long, default_value_t = 16)]
    pub ref_multiplier: usize,
    #[arg(long, default_value_t = 200)]
    pub paths: usize,
    /// Moment order: the curve reports `E sup-error^{2p}`.
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Slice {
    /// `v(xi) = xi`.
    Linear,
    /// `v(xi) = 1`.
    Constant,
    /// `v(xi) = exp(-xi^2)`.
    Gauss,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TransformArgs {
    #[arg(long, value_enum, default_value_t = Slice::Linear)]
    pub v: Slice,
    /// Comma-separated times.
    #[arg(long, value_delimiter = ',', default_value = "0.1,1,10")]
    pub t: Vec<f64>,
    #[arg(long, default_value_t = itersim::quadrature::DEFAULT_NODES)]
    pub nodes: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Model(e) => match e {
                Error::InvalidParameter { .. } | Error::OutOfRange { .. } | Error::Parse { .. } | Error::Unsupported { .. } => {
                    EXIT_CONFIG
                }
                Error::NonFiniteCoefficient { .. } | Error::NonFinite(_) | Error::HeadroomExceeded { .. } => EXIT_RUNTIME,
            },
            CliError::Io { .. } => EXIT_RUNTIME,
        }
    }
}

fn invalid(name: &'static str, reason: &str) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.to_string(),
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match merge_config(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{rendered}")
            } else {
                write!(stdout, "{rendered}")
            };
            return code;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n as usize);
    }
    let pool = match builder.build() {
        Ok(pool) => pool,
        Err(e) => {
            let _ = writeln!(stderr, "error: cannot start worker pool: {e}");
            return EXIT_RUNTIME;
        }
    };
    match pool.install(|| execute(&cli.command)) {
        Ok(summary) => {
            let _ = writeln!(stdout, "{summary}");
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

/// Expands `--config FILE` into `--key value` arguments placed right after
/// the subcommand, so explicit flags that follow override them.
fn merge_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config = None;
    let mut iter = argv.into_iter();
    while let Some(arg) = iter.next() {
        let text = arg.to_string_lossy().into_owned();
        if text == "--config" {
            let path = iter
                .next()
                .ok_or_else(|| CliError::Config("`--config` needs a file path".into()))?;
            config = Some(PathBuf::from(path));
        } else if let Some(path) = text.strip_prefix("--config=") {
            config = Some(PathBuf::from(path));
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let flags = config_flags(&path)?;
    let Some(sub) = rest.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')) else {
        return Ok(rest);
    };
    // Global flags may precede the subcommand; `--threads N` takes a value.
    let sub = sub + 1;
    if sub >= 2 && rest[sub - 1] == "--threads" {
        let after = rest[sub + 1..]
            .iter()
            .position(|a| !a.to_string_lossy().starts_with('-'))
            .map(|p| p + sub + 1);
        if let Some(real) = after {
            return Ok(splice(rest, real, flags));
        }
        return Ok(rest);
    }
    Ok(splice(rest, sub, flags))
}

fn splice(mut argv: Vec<OsString>, sub: usize, flags: Vec<OsString>) -> Vec<OsString> {
    let tail = argv.split_off(sub + 1);
    argv.extend(flags);
    argv.extend(tail);
    argv
}

fn config_flags(path: &Path) -> Result<Vec<OsString>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
    let mut flags = Vec::new();
    for (key, value) in table {
        if key == "config" || key == "threads" {
            return Err(CliError::Config(format!("config key `{key}` is only accepted on the command line")));
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let rendered = match value {
            toml::Value::Boolean(true) => {
                flags.push(flag.into());
                continue;
            }
            toml::Value::Boolean(false) => continue,
            toml::Value::String(s) => s,
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(x) => x.to_string(),
            toml::Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    toml::Value::String(s) => Ok(s.clone()),
                    toml::Value::Integer(i) => Ok(i.to_string()),
                    toml::Value::Float(x) => Ok(x.to_string()),
                    _ => Err(CliError::Config(format!("config key `{key}`: unsupported array element"))),
                })
                .collect::<Result<Vec<_>, _>>()?
                .join(","),
            _ => return Err(CliError::Config(format!("config key `{key}`: unsupported value type"))),
        };
        flags.push(flag.into());
        flags.push(rendered.into());
    }
    Ok(flags)
}

fn execute(command: &Command) -> Result<String, CliError> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Density(a) => density(a),
        Command::Variations(a) => variations(a),
        Command::Fk(a) => fk(a),
        Command::TwoSided(a) => two_sided(a),
        Command::Beam(a) => beam(a),
        Command::Intertwine(a) => intertwine(a),
        Command::Convergence(a) => convergence(a),
        Command::Transform(a) => transform(a),
    }
}

fn write_csv<F>(path: &Option<PathBuf>, body: F) -> Result<String, CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    let Some(path) = path else {
        return Ok(String::new());
    };
    let io_err = |source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    body(&mut out).map_err(io_err)?;
    out.flush().map_err(io_err)?;
    Ok(format!(" -> {}", path.display()))
}

fn quad(nodes: usize) -> Result<QuadratureRule<f64>, CliError> {
    QuadratureRule::with_nodes(nodes).map_err(|_| CliError::Config("`--nodes` must be at least 2".into()))
}

fn mc_config(paths: usize, steps: usize, seed: u64) -> Result<McConfig, CliError> {
    if paths < 2 {
        return Err(CliError::Config("`--paths` must be at least 2".into()));
    }
    if steps == 0 {
        return Err(CliError::Config("`--steps` must be at least 1".into()));
    }
    Ok(McConfig::new(paths, steps, seed))
}

fn describe(est: &MonteCarloEstimate<f64>) -> String {
    let flag = match est.stability {
        Stability::Stable => String::new(),
        Stability::Unstable { spread_ratio } => {
            format!(" [UNSTABLE: batch means spread {spread_ratio:.1} pooled stderr]")
        }
        Stability::NonFinite { count } => format!(" [NON-FINITE: {count} paths]"),
    };
    format!("{:.6} +/- {:.6} ({} paths, seed {}){flag}", est.mean, est.stderr, est.n_paths, est.seed)
}

fn simulate(a: &SimulateArgs) -> Result<String, CliError> {
    if a.steps == 0 {
        return Err(CliError::Config("`--steps` must be at least 1".into()));
    }
    let seed = a.common.seed;
    let mut ts = RngStream::derive_lane(seed, 0, itersim::rng::TIME_LANE);
    let mut ps = RngStream::derive_lane(seed, 0, itersim::rng::POSITION_LANE);
    let path = itersim::simulate_iterated(&a.position, &a.time, a.x0, 0.0, a.horizon, a.steps, &mut ts, &mut ps)?;
    let wrote = write_csv(&a.common.out, |w| path.write_csv(w))?;
    Ok(format!(
        "simulate: {} knots, Z_T = {:.6}, M_n = {:.6}{wrote}",
        path.knots().len(),
        path.terminal(),
        path.m_n()
    ))
}

fn density(a: &DensityArgs) -> Result<String, CliError> {
    let cfg = mc_config(a.paths, a.steps, a.common.seed)?;
    if a.z_points < 2 || !(a.z_min < a.z_max) {
        return Err(CliError::Config("need `--z-min` < `--z-max` and `--z-points` >= 2".into()));
    }
    let q = quad(a.nodes)?;
    let samples = stats::terminal_samples(&a.position, &a.time, a.t, a.x0, &cfg)?;
    let step = (a.z_max - a.z_min) / (a.z_points - 1) as f64;
    let grid: Vec<f64> = (0..a.z_points).map(|i| a.z_min + step * i as f64).collect();
    let cmp = stats::density_compare(&a.position, &a.time, a.t, a.x0, &samples, &grid, &q)?;
    let wrote = write_csv(&a.common.out, |w| cmp.histogram.write_csv(w))?;
    let curve = write_csv(&a.curve_out, |w| cmp.write_curve_csv(w))?;
    let ks = match cmp.ks_distance {
        Some(d) => format!("KS distance {d:.5}"),
        None => "oracle unavailable".to_string(),
    };
    Ok(format!(
        "density: {} samples, {} bins, {ks}{wrote}{curve}",
        samples.len(),
        cmp.histogram.counts().len()
    ))
}

fn variations(a: &VariationsArgs) -> Result<String, CliError> {
    let cfg = mc_config(a.paths, a.steps, a.common.seed)?;
    let est = stats::variation_estimate(&a.position, &a.time, a.order, a.t, &cfg)?;
    let wrote = write_csv(&a.common.out, |w| {
        writeln!(w, "order,t,mean,stderr,n_paths,seed")?;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            a.order,
            format_real(a.t),
            format_real(est.mean),
            format_real(est.stderr),
            est.n_paths,
            est.seed
        )
    })?;
    Ok(format!("variations: order {} at t = {}: {}{wrote}", a.order, a.t, describe(&est)))
}

fn fk(a: &FkArgs) -> Result<String, CliError> {
    let cfg = mc_config(a.paths, a.steps, a.common.seed)?;
    let f = a.datum.one_sided()?;
    let position = Dynamics::from(a.position);
    let time = Dynamics::from(a.time);
    let est = feynman_kac::fk_estimate(&position, &time, |z| f.eval(z), a.t, a.x, &cfg)?;
    let oracle = if a.oracle {
        Some(feynman_kac::fk_oracle(&a.position, &a.time, &f, a.t, a.x, &quad(a.nodes)?)?)
    } else {
        None
    };
    let wrote = write_csv(&a.common.out, |w| {
        writeln!(w, "{}", MonteCarloEstimate::<f64>::CSV_HEADER)?;
        est.write_csv_row(w, a.t, a.x)
    })?;
    let tail = match oracle {
        Some(v) => format!(", oracle {v:.6}, |diff|/stderr = {:.2}", est.z_score(v)),
        None => String::new(),
    };
    Ok(format!("fk: v({}, {}) = {}{tail}{wrote}", a.t, a.x, describe(&est)))
}

fn constant_rate(c: f64, name: &'static str) -> Result<Option<ScalarFn<f64>>, CliError> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(CliError::Model(invalid(name, "killing rate must be finite and non-negative")));
    }
    Ok((c > 0.0).then(|| Arc::new(move |_: f64| c) as ScalarFn<f64>))
}

fn two_sided(a: &TwoSidedArgs) -> Result<String, CliError> {
    let cfg = mc_config(a.paths, a.steps, a.common.seed)?;
    let f = a.datum.two_sided()?;
    let killing = Killing::new(
        constant_rate(a.kill_plus, "kill-plus")?,
        constant_rate(a.kill_minus, "kill-minus")?,
    );
    let time = Dynamics::from(a.time);
    let est = feynman_kac::two_sided_fk_estimate(&a.plus, &a.minus, |x, y| f(x, y), &time, a.t, a.x, &cfg, &killing)?;
    let wrote = write_csv(&a.common.out, |w| {
        writeln!(w, "{}", MonteCarloEstimate::<f64>::CSV_HEADER)?;
        est.write_csv_row(w, a.t, a.x)
    })?;
    Ok(format!("two-sided: u({}, {}) = {}{wrote}", a.t, a.x, describe(&est)))
}

fn beam(a: &BeamArgs) -> Result<String, CliError> {
    let cfg = mc_config(a.paths, a.steps, a.common.seed)?;
    let f = a.datum.two_sided()?;
    let est = feynman_kac::beam_estimate(a.gm, |x, y| f(x, y), &a.plus, &a.minus, a.t, a.x, &cfg)?;
    let wrote = write_csv(&a.common.out, |w| {
        writeln!(w, "{}", MonteCarloEstimate::<f64>::CSV_HEADER)?;
        est.write_csv_row(w, a.t, a.x)
    })?;
    Ok(format!("beam: u({}, {}) = {}{wrote}", a.t, a.x, describe(&est)))
}

fn intertwine(a: &IntertwineArgs) -> Result<String, CliError> {
    let cfg = mc_config(a.paths, a.steps, a.common.seed)?;
    if !(a.bump_lo < a.bump_hi) {
        return Err(CliError::Model(invalid("bump-hi", "must exceed bump-lo")));
    }
    let f = TestFunction::bump(a.bump_lo, a.bump_hi);
    let rows = feynman_kac::intertwine_check(&f, a.alpha, a.beta, a.t, &a.x, &cfg, &quad(a.nodes)?, &quad(a.lambda_nodes)?)?;
    let wrote = write_csv(&a.common.out, |w| {
        writeln!(w, "x,h_mc,h_stderr,lambda_v,lambda_v_stderr,z")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                format_real(r.x),
                format_real(r.h_mc.mean),
                format_real(r.h_mc.stderr),
                format_real(r.lambda_v),
                format_real(r.lambda_v_stderr),
                format_real(r.discrepancy() / r.combined_stderr())
            )?;
        }
        Ok(())
    })?;
    let worst = rows
        .iter()
        .map(|r| r.discrepancy() / r.combined_stderr())
        .fold(0.0_f64, f64::max);
    Ok(format!(
        "intertwine: {} points, max |h - Lambda v| / stderr = {worst:.2}{wrote}",
        rows.len()
    ))
}

fn convergence(a: &ConvergenceArgs) -> Result<String, CliError> {
    let cfg = StrongErrorConfig {
        horizon: a.horizon,
        levels: a.levels.clone(),
        ref_multiplier: a.ref_multiplier,
        n_paths: a.paths,
        p: a.p,
        master_seed: a.common.seed,
    };
    let curve = stats::strong_error(&a.position, &a.time, &cfg)?;
    let wrote = write_csv(&a.common.out, |w| curve.write_csv(w))?;
    let order = match stats::fit_order(&curve) {
        Ok((alpha, _)) => format!("fitted order {alpha:.3}"),
        Err(_) => "order not fitted".to_string(),
    };
    Ok(format!("convergence: {} levels, {order}{wrote}", curve.levels.len()))
}

fn transform(a: &TransformArgs) -> Result<String, CliError> {
    let q = quad(a.nodes)?;
    let v: fn(f64) -> f64 = match a.v {
        Slice::Linear => |xi| xi,
        Slice::Constant => |_| 1.0,
        Slice::Gauss => |xi| (-xi * xi).exp(),
    };
    let values = a
        .t
        .iter()
        .map(|&t| feynman_kac::half_derivative_transform(v, t, &q).map(|y| (t, y)))
        .collect::<Result<Vec<_>, _>>()?;
    let wrote = write_csv(&a.common.out, |w| {
        writeln!(w, "t,value")?;
        for (t, y) in &values {
            writeln!(w, "{},{}", format_real(*t), format_real(*y))?;
        }
        Ok(())
    })?;
    let listed: Vec<String> = values.iter().map(|(t, y)| format!("{t}: {y:.10}")).collect();
    Ok(format!("transform: {}{wrote}", listed.join(", ")))
}
