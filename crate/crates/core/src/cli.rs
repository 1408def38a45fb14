//! Command-line front end.
//!
//! Exit codes: 0 success, 2 malformed input, 3 kernel specification
//! problems, 4 estimator or output failures.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::deconv::{deconvolve_with, BandwidthRule, EstimatorConfig};
use crate::error::DeconvError;
use crate::kernels::{make_smooth_kernel, BASE_SMOOTHNESS, ESTIMATOR_SMOOTHNESS};
use crate::resolvent::{decompose, RationalLaplaceKernel, ResolventDecomposition};
use crate::sim::{
    builtin_g, fmt_float, reports_to_csv, run_experiment, simulate_data, table_grid, GParams, Scenario,
    DEFAULT_TRIM,
};
use crate::smoother::{estimate_sigma, ConstantRule, LepskiConfig, NoisySample};

#[derive(Debug, Parser)]
#[command(name = "lapdeconv", version, about = "Adaptive Laplace deconvolution")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate f from noisy samples of q = g * f.
    Deconvolve(DeconvolveArgs),
    /// Monte-Carlo benchmark cells.
    Simulate(SimulateArgs),
    /// Build a smoothing kernel of order (L, j).
    MakeKernel(MakeKernelArgs),
    /// Print the resolvent decomposition of a convolution kernel.
    InspectKernel(InspectKernelArgs),
}

/// Estimator knobs shared by `deconvolve` and `simulate`.
#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    /// Kernel order L (must exceed r).
    #[arg(long = "order", short = 'L', default_value_t = 8)]
    pub order: usize,
    /// Endpoint zero multiplicity of the smoothing kernels.
    #[arg(long, default_value_t = ESTIMATOR_SMOOTHNESS)]
    pub smoothness: usize,
    /// Lepski grid ratio.
    #[arg(long, default_value_t = 1.2)]
    pub a: f64,
    /// Fixed Lepski constant C_j; by default C_j^2 = mu^2 ||K_j||^2.
    #[arg(long = "c")]
    pub c: Option<f64>,
    /// Multiplier of the Lepski threshold.
    #[arg(long, default_value_t = 3.0)]
    pub threshold_mult: f64,
    /// Fixed bandwidths for j = 0..=r instead of Lepski selection.
    #[arg(long, value_delimiter = ',')]
    pub bandwidths: Option<Vec<f64>>,
    /// Evaluation grid size on [0, T].
    #[arg(long, default_value_t = 1024)]
    pub grid_size: usize,
}

impl EstimatorArgs {
    pub fn config(&self) -> EstimatorConfig {
        let bandwidth = match &self.bandwidths {
            Some(b) => BandwidthRule::Fixed { bandwidths: b.clone() },
            None => {
                let constant = match self.c {
                    Some(value) => ConstantRule::Fixed { value },
                    None => ConstantRule::KernelNorm { factor: 1.0 },
                };
                BandwidthRule::Lepski(LepskiConfig {
                    a: self.a,
                    constant,
                    threshold_mult: self.threshold_mult,
                    ..Default::default()
                })
            }
        };
        EstimatorConfig {
            order: self.order,
            smoothness: self.smoothness,
            bandwidth,
            grid_size: self.grid_size,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct DeconvolveArgs {
    /// CSV with header `t,y`, sorted by t.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Kernel spec: inline JSON or a path to a JSON file.
    #[arg(long, short)]
    pub kernel: String,
    /// Known noise standard deviation.
    #[arg(long, conflicts_with = "estimate_sigma", required_unless_present = "estimate_sigma")]
    pub sigma: Option<f64>,
    /// Estimate sigma from successive differences instead.
    #[arg(long)]
    pub estimate_sigma: bool,
    /// Interval length T; defaults to the largest t.
    #[arg(long)]
    pub interval: Option<f64>,
    /// Output CSV `t,f_hat`.
    #[arg(long, short)]
    pub output: PathBuf,
    /// JSON sidecar; defaults to the output path with extension `.json`.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// One cell `g,f,n,i`.
    #[arg(long, conflicts_with = "full", required_unless_present = "full")]
    pub cell: Option<String>,
    /// Every cell of the benchmark table.
    #[arg(long)]
    pub full: bool,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Fraction trimmed at each side before computing the MSE.
    #[arg(long, default_value_t = DEFAULT_TRIM)]
    pub trim: f64,
    /// Report CSV; stdout when absent.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Full JSON report including per-run MSEs.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Write the first replication's `t,y` data of the cell.
    #[arg(long, requires = "cell")]
    pub emit_data: Option<PathBuf>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Debug, Args)]
pub struct MakeKernelArgs {
    #[arg(long = "L")]
    pub l: usize,
    #[arg(long = "j")]
    pub j: usize,
    /// Right end of the support [-1, rho].
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = BASE_SMOOTHNESS)]
    pub smoothness: usize,
    /// Coefficient JSON; stdout when absent.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// 1001 samples `t,k` over the support.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectKernelArgs {
    /// Kernel spec: inline JSON or a path to a JSON file.
    #[arg(long, short)]
    pub kernel: String,
}

/// Convolution kernel as given on the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum KernelSpec {
    /// `num(s) / den(s)`, ascending coefficients.
    Rational { num: Vec<f64>, den: Vec<f64> },
    /// `sum_j rho_j / (s + a)^{r + j}`.
    ExpPoly { a: f64, r: usize, rho: Vec<f64> },
    Builtin {
        name: String,
        #[serde(default)]
        params: GParams,
    },
}

impl KernelSpec {
    pub fn build(&self) -> Result<RationalLaplaceKernel, DeconvError> {
        match self {
            KernelSpec::Rational { num, den } => RationalLaplaceKernel::from_real(num, den, "rational"),
            KernelSpec::ExpPoly { a, r, rho } => RationalLaplaceKernel::exp_poly_family(*a, *r, rho),
            KernelSpec::Builtin { name, params } => builtin_g(name, params),
        }
    }
}

/// A failure mapped to an exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    fn kernel(message: impl Into<String>) -> Self {
        CliError { code: 3, message: message.into() }
    }

    fn other(message: impl Into<String>) -> Self {
        CliError { code: 4, message: message.into() }
    }
}

impl From<DeconvError> for CliError {
    fn from(e: DeconvError) -> Self {
        let code = exit_code(&e);
        CliError { code, message: e.to_string() }
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &DeconvError) -> i32 {
    match e {
        DeconvError::InvalidSample(_) => 2,
        DeconvError::InvalidKernel(_)
        | DeconvError::KernelOrderTooLow { .. }
        | DeconvError::UnknownBuiltin(_)
        | DeconvError::RepeatedRoots => 3,
        _ => 4,
    }
}

/// Summary written next to a deconvolution result.
#[derive(Debug, Serialize)]
pub struct Sidecar<'a> {
    pub n: usize,
    pub interval: f64,
    pub sigma: f64,
    pub sigma_estimated: bool,
    pub kernel: &'a KernelSpec,
    pub decomposition: &'a ResolventDecomposition,
    pub stable: bool,
    pub bandwidths: &'a [f64],
    pub levels: &'a Option<Vec<usize>>,
    pub config: &'a EstimatorConfig,
}

#[derive(Debug, Serialize)]
struct KernelDoc {
    order: usize,
    deriv: usize,
    smoothness: usize,
    support: [f64; 2],
    /// Ascending monomial coefficients in `t`.
    coeffs: Vec<f64>,
    center: f64,
    half_width: f64,
    /// Ascending coefficients in `x = (t - center) / half_width`.
    local_coeffs: Vec<f64>,
    /// `K = (1 - x^2)^s sum_k g_k C_k(x)` with Gegenbauer `C_k` of index `s + 1/2`.
    gegenbauer_coeffs: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct Inspection<'a> {
    r: usize,
    b_r: f64,
    stable: bool,
    decomposition: &'a ResolventDecomposition,
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    configure_threads();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("LAPDECONV_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // a second call in the same process keeps the existing pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Deconvolve(a) => cmd_deconvolve(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::MakeKernel(a) => cmd_make_kernel(&a),
        Command::InspectKernel(a) => cmd_inspect_kernel(&a),
    }
}

/// Inline JSON when the argument starts with `{`, a file path otherwise.
pub fn parse_kernel_spec(arg: &str) -> Result<KernelSpec, CliError> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|e| CliError::kernel(format!("cannot read kernel spec {arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::kernel(format!("malformed kernel spec: {e}")))
}

/// Read a `t,y` CSV.
pub fn read_samples(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| CliError::input(e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "y" {
        return Err(CliError::input(format!("expected header `t,y`, found `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let (mut t, mut y) = (Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::input(e.to_string()))?;
        let parse = |k: usize| -> Result<f64, CliError> {
            rec[k]
                .parse::<f64>()
                .map_err(|_| CliError::input(format!("row {}: `{}` is not a number", line + 2, &rec[k])))
        };
        t.push(parse(0)?);
        y.push(parse(1)?);
    }
    Ok((t, y))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::other(format!("cannot write {}: {e}", path.display())))
}

fn write_two_columns(path: &Path, header: [&str; 2], xs: &[f64], ys: &[f64]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::other(format!("cannot write {}: {e}", path.display())))?;
    let mut put = |a: &str, b: &str| w.write_record([a, b]).map_err(|e| CliError::other(e.to_string()));
    put(header[0], header[1])?;
    for (x, y) in xs.iter().zip(ys) {
        put(&fmt_float(*x), &fmt_float(*y))?;
    }
    w.flush().map_err(|e| CliError::other(e.to_string()))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(|e| CliError::other(e.to_string()))
}

fn cmd_deconvolve(args: &DeconvolveArgs) -> Result<(), CliError> {
    let spec = parse_kernel_spec(&args.kernel)?;
    let g = spec.build()?;
    let (t, y) = read_samples(&args.input)?;
    let interval = match args.interval {
        Some(v) => v,
        None => t.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    let (sigma, estimated) = match args.sigma {
        Some(s) => (s, false),
        None => (estimate_sigma(&y), true),
    };
    let data = NoisySample::new(t, y, interval, sigma)?;
    let cfg = args.estimator.config();
    let dec = decompose(&g)?;
    let res = deconvolve_with(&data, &dec, &cfg)?;

    write_two_columns(&args.output, ["t", "f_hat"], &res.grid, &res.f_hat)?;
    let sidecar = Sidecar {
        n: data.len(),
        interval,
        sigma,
        sigma_estimated: estimated,
        kernel: &spec,
        decomposition: &dec,
        stable: g.is_stable(),
        bandwidths: &res.bandwidths,
        levels: &res.levels,
        config: &res.config,
    };
    let json_path = args.json.clone().unwrap_or_else(|| args.output.with_extension("json"));
    write_file(&json_path, &to_json(&sidecar)?)
}

/// Parse `g,f,n,i`.
pub fn parse_cell(s: &str) -> Result<(String, String, usize, usize), CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(CliError::input(format!("cell must be `g,f,n,i`, got `{s}`")));
    }
    let n = parts[2].parse().map_err(|_| CliError::input(format!("bad n `{}`", parts[2])))?;
    let i = parts[3].parse().map_err(|_| CliError::input(format!("bad noise index `{}`", parts[3])))?;
    Ok((parts[0].into(), parts[1].into(), n, i))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let cfg = args.estimator.config();
    let scenarios: Vec<Scenario> = match &args.cell {
        Some(cell) => {
            let (g, f, n, i) = parse_cell(cell)?;
            let mut sc = Scenario::cell(&g, &f, n, i, args.runs, args.seed)?;
            sc.estimator = cfg;
            vec![sc]
        }
        None => table_grid(args.runs, args.seed, &cfg),
    };
    let mut reports = Vec::with_capacity(scenarios.len());
    for mut sc in scenarios {
        sc.trim = args.trim;
        reports.push(run_experiment(&sc)?);
    }
    if let (Some(path), Some(sc)) = (&args.emit_data, reports.first().map(|r| &r.scenario)) {
        let (t, y) = simulate_data(sc, 0)?;
        write_two_columns(path, ["t", "y"], &t, &y)?;
    }
    let csv = reports_to_csv(&reports);
    match &args.csv {
        Some(path) => write_file(path, &csv)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(csv.as_bytes()).map_err(|e| CliError::other(e.to_string()))?;
        }
    }
    if let Some(path) = &args.json {
        write_file(path, &to_json(&reports)?)?;
    }
    Ok(())
}

fn cmd_make_kernel(args: &MakeKernelArgs) -> Result<(), CliError> {
    let k = make_smooth_kernel(args.l, args.j, args.rho, args.smoothness).map_err(|e| CliError::kernel(e.to_string()))?;
    let (lo, hi) = k.support();
    let doc = KernelDoc {
        order: args.l,
        deriv: args.j,
        smoothness: args.smoothness,
        support: [lo, hi],
        coeffs: k.monomial_coeffs(),
        center: k.center(),
        half_width: k.half_width(),
        local_coeffs: k.local_coeffs(),
        gegenbauer_coeffs: k.gegenbauer_coeffs().to_vec(),
    };
    let json = to_json(&doc)?;
    match &args.json {
        Some(path) => write_file(path, &json)?,
        None => print!("{json}"),
    }
    if let Some(path) = &args.csv {
        let ts: Vec<f64> = (0..1001).map(|i| lo + (hi - lo) * i as f64 / 1000.0).collect();
        let ks: Vec<f64> = ts.iter().map(|&t| k.eval(t)).collect();
        write_two_columns(path, ["t", "k"], &ts, &ks)?;
    }
    Ok(())
}

fn cmd_inspect_kernel(args: &InspectKernelArgs) -> Result<(), CliError> {
    let g = parse_kernel_spec(&args.kernel)?.build()?;
    let dec = decompose(&g)?;
    let doc = Inspection { r: dec.r, b_r: dec.b_r, stable: g.is_stable(), decomposition: &dec };
    print!("{}", to_json(&doc)?);
    Ok(())
}
