//! `curveclust` command line.
//!
//! Machine-readable results go to stdout (or to `--out`), progress and
//! errors to stderr. Any flag can also come from a `--config` file of
//! `key=value` lines, where keys are flag names without the dashes; flags
//! given on the command line win.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::basis::{BasisFamily, DesignSpec};
use crate::dataset::{format_csv, read_csv, Dataset, Layout};
use crate::em_robust::{fit_robust, LambdaDenominator, RobustConfig};
use crate::em_standard::{fit_em, EmConfig, InitStrategy, RestartOutcome};
use crate::metrics::{evaluate, EvalReport, GroundTruth};
use crate::mixture_model::{map_partition, posterior, DesignedData, Partition, RegressionMixture, Responsibilities};
use crate::simulators::{generate, ClassSampling, Scenario, SimSpec};
use crate::trace::FitTrace;
use crate::Error;

/// Exit code for a fit that stopped at `max_iter`.
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "curveclust", version, about = "Regression-mixture clustering of curves")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a labelled benchmark dataset.
    Generate(GenerateArgs),
    /// Fit a mixture to a dataset.
    Fit(FitArgs),
    /// Score a fit against ground-truth labels.
    Eval(EvalArgs),
    /// Repeat generate, fit and eval over several seeds.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    #[value(name = "three_class", alias = "three-class")]
    ThreeClass,
    Waveform,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::ThreeClass => Scenario::ThreeClass,
            ScenarioArg::Waveform => Scenario::Waveform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    Wide,
    Long,
}

impl From<LayoutArg> for Layout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::Wide => Layout::Wide,
            LayoutArg::Long => Layout::Long,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplingArg {
    Exact,
    Multinomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    Em,
    Robust,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    Poly,
    Spline,
    Bspline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Random,
    Kmeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DenominatorArg {
    #[value(name = "max-entropy")]
    MaxEntropy,
    Entropy,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioArg,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "wide")]
    pub layout: LayoutArg,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long, value_enum, default_value = "exact")]
    pub class_sampling: SamplingArg,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BasisArgs {
    #[arg(long, value_enum, default_value = "poly")]
    pub basis: BasisArg,
    /// Polynomial degree.
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    /// Spline order (degree + 1).
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    /// Number of equispaced interior knots.
    #[arg(long, default_value_t = 3)]
    pub knots: usize,
    /// Explicit interior knots, `;`-separated; overrides `--knots`.
    #[arg(long)]
    pub knot_positions: Option<String>,
    /// Outer knots as `lo;hi`; defaults to the data range.
    #[arg(long)]
    pub boundary: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "robust")]
    pub algorithm: Algorithm,
    /// Number of components (standard EM only).
    #[arg(long = "k", short = 'K', alias = "K")]
    pub k: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub n_restarts: usize,
    #[arg(long, value_enum, default_value = "random")]
    pub init: InitArg,
    #[arg(long, value_enum, default_value = "max-entropy")]
    pub lambda_denominator: DenominatorArg,
    /// Stop as soon as the penalized phase converges.
    #[arg(long)]
    pub no_final_phase: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "wide")]
    pub layout: LayoutArg,
    #[command(flatten)]
    pub basis: BasisArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output prefix for `.model`, `.basis`, `.trace.csv`, `.tau.csv`, `.labels.csv`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Labelled dataset.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "wide")]
    pub layout: LayoutArg,
    /// Fitted model; its partition is the MAP assignment on `--data`.
    #[arg(long, conflicts_with = "labels", required_unless_present = "labels")]
    pub model: Option<PathBuf>,
    /// Estimated labels, one per line.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[command(flatten)]
    pub basis: BasisArgs,
    /// Simulation scenario the data came from, for mean-curve and parameter errors.
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioArg,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub replications: usize,
    /// Replication `r` uses data seed `seed + r`.
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub basis: BasisArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn usage(message: impl Into<String>) -> Error {
    Error::Usage(message.into())
}

fn parse_config(text: &str) -> Result<Vec<(String, String)>, Error> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key=value", i + 1)))?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Appends flags from the `--config` file that are not already on the command line.
pub fn merge_config(args: Vec<OsString>) -> Result<Vec<OsString>, Error> {
    let strings: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut path = None;
    for (i, a) in strings.iter().enumerate() {
        if a == "--config" {
            path = strings.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(io_error(Path::new(&path)))?;
    let mut merged = args;
    for (key, value) in parse_config(&text)? {
        let flag = format!("--{key}");
        let present = strings.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if present || key == "config" {
            continue;
        }
        match value.as_str() {
            "true" => merged.push(flag.into()),
            "false" => {}
            _ => merged.push(format!("{flag}={value}").into()),
        }
    }
    Ok(merged)
}

fn parse_floats(text: &str, what: &str) -> Result<Vec<f64>, Error> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().map_err(|_| usage(format!("{what}: cannot parse `{s}`"))))
        .collect()
}

impl BasisArgs {
    pub fn family(&self) -> BasisFamily {
        match self.basis {
            BasisArg::Poly => BasisFamily::Polynomial,
            BasisArg::Spline => BasisFamily::Spline,
            BasisArg::Bspline => BasisFamily::BSpline,
        }
    }

    /// Design spec for `dataset`; the boundary defaults to its abscissa range.
    pub fn spec(&self, dataset: &Dataset) -> Result<DesignSpec, Error> {
        let family = self.family();
        if family == BasisFamily::Polynomial {
            return Ok(DesignSpec::polynomial(self.degree));
        }
        let (lo, hi) = match &self.boundary {
            Some(b) => match parse_floats(b, "boundary")?[..] {
                [lo, hi] => (lo, hi),
                _ => return Err(usage("boundary needs two values `lo;hi`")),
            },
            None => dataset.x_range(),
        };
        let spec = match &self.knot_positions {
            Some(k) => {
                let knots = parse_floats(k, "knot-positions")?;
                match family {
                    BasisFamily::Spline => DesignSpec::spline(self.order, knots, (lo, hi))?,
                    _ => DesignSpec::bspline(self.order, knots, (lo, hi))?,
                }
            }
            None => DesignSpec::equispaced(family, self.order, self.knots, lo, hi)?,
        };
        Ok(spec)
    }
}

impl ModelArgs {
    fn em_config(&self, seed: u64) -> Result<EmConfig, Error> {
        let defaults = EmConfig::default();
        Ok(EmConfig {
            k: self.k.ok_or_else(|| usage("--k is required for the em algorithm"))?,
            max_iter: self.max_iter.unwrap_or(defaults.max_iter),
            tol: self.tol.unwrap_or(defaults.tol),
            n_restarts: self.n_restarts,
            init: match self.init {
                InitArg::Random => InitStrategy::RandomPartition,
                InitArg::Kmeans => InitStrategy::KmeansPartition,
            },
            seed,
        })
    }

    fn robust_config(&self, seed: u64) -> RobustConfig {
        let defaults = RobustConfig::default();
        RobustConfig {
            tol: self.tol.unwrap_or(defaults.tol),
            max_iter: self.max_iter.unwrap_or(defaults.max_iter),
            seed,
            lambda_denominator: match self.lambda_denominator {
                DenominatorArg::MaxEntropy => LambdaDenominator::MaxProportionEntropy,
                DenominatorArg::Entropy => LambdaDenominator::Entropy,
            },
            final_standard_phase: !self.no_final_phase,
        }
    }
}

/// Outcome of fitting with either algorithm.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub model: RegressionMixture,
    pub tau: Responsibilities,
    pub trace: FitTrace,
    pub failed_restarts: usize,
}

/// Fits `dataset` with the algorithm and settings in `args`.
pub fn run_fit(dataset: &Dataset, spec: &DesignSpec, args: &ModelArgs, seed: u64) -> Result<FitOutput, Error> {
    match args.algorithm {
        Algorithm::Em => {
            let fit = fit_em(dataset, spec, &args.em_config(seed)?)?;
            let failed_restarts = fit
                .restarts
                .iter()
                .filter(|r| matches!(r, RestartOutcome::Failed { .. }))
                .count();
            Ok(FitOutput {
                model: fit.model,
                tau: fit.tau,
                trace: fit.trace,
                failed_restarts,
            })
        }
        Algorithm::Robust => {
            let fit = fit_robust(dataset, spec, &args.robust_config(seed))?;
            Ok(FitOutput {
                model: fit.model,
                tau: fit.tau,
                trace: fit.trace,
                failed_restarts: 0,
            })
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(io_error(path))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn ground_truth(dataset: &Dataset, scenario: Option<Scenario>) -> Result<GroundTruth, Error> {
    let labels = dataset
        .labels
        .clone()
        .ok_or_else(|| usage("the dataset carries no ground-truth labels"))?;
    let mut truth = GroundTruth {
        labels,
        ..GroundTruth::default()
    };
    if let Some(s) = scenario {
        if let Some(grid) = dataset.shared_grid() {
            truth.means = Some((grid.to_vec(), s.true_means(grid)));
        }
        truth.sigma = Some(s.noise_sd());
        truth.proportions = Some(s.proportions());
    }
    Ok(truth)
}

fn cmd_generate(args: &GenerateArgs, out: &mut dyn Write, log: &mut dyn Write) -> Result<i32, Error> {
    let spec = SimSpec {
        scenario: args.scenario.into(),
        n: args.n,
        seed: args.seed,
        noise_sd: args.noise_sd,
        fixed_u: None,
        class_sampling: match args.class_sampling {
            SamplingArg::Exact => ClassSampling::ExactCounts,
            SamplingArg::Multinomial => ClassSampling::Multinomial,
        },
    };
    let dataset = generate(&spec)?;
    let csv = format_csv(&dataset, args.layout.into())?;
    let labels = dataset.labels.as_deref().unwrap_or_default();
    let counts: Vec<String> = (0..3)
        .map(|c| labels.iter().filter(|&&l| l == c).count().to_string())
        .collect();
    let summary = format!(
        "n={}\nm={}\nclass_counts={}\n",
        dataset.n(),
        dataset.min_len(),
        counts.join(";")
    );
    match &args.out {
        Some(path) => {
            write_file(path, &csv)?;
            out.write_all(summary.as_bytes()).map_err(io_error(Path::new("stdout")))?;
        }
        None => {
            out.write_all(csv.as_bytes()).map_err(io_error(Path::new("stdout")))?;
            log.write_all(summary.as_bytes()).map_err(io_error(Path::new("stderr")))?;
        }
    }
    Ok(0)
}

fn cmd_fit(args: &FitArgs, out: &mut dyn Write, log: &mut dyn Write) -> Result<i32, Error> {
    let dataset = read_csv(&args.data, args.layout.into())?;
    let spec = args.basis.spec(&dataset)?;
    let _ = writeln!(
        log,
        "fitting {} curves, basis {} (d = {}), algorithm {:?}",
        dataset.n(),
        spec.family(),
        spec.dim(),
        args.model.algorithm
    );
    let fit = run_fit(&dataset, &spec, &args.model, args.seed)?;
    fit.model.write(with_suffix(&args.out, ".model"))?;
    let basis: String = spec.to_key_values().iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    write_file(&with_suffix(&args.out, ".basis"), &basis)?;
    write_file(&with_suffix(&args.out, ".trace.csv"), &fit.trace.to_csv())?;
    write_file(&with_suffix(&args.out, ".tau.csv"), &fit.tau.to_csv())?;
    write_file(&with_suffix(&args.out, ".labels.csv"), &map_partition(&fit.tau).to_csv())?;
    let mut summary = String::new();
    let _ = writeln!(summary, "k={}", fit.model.k());
    let _ = writeln!(summary, "loglik={}", fit.trace.final_loglik);
    let _ = writeln!(summary, "penalized_loglik={}", fit.trace.final_penalized_loglik);
    let _ = writeln!(summary, "iterations={}", fit.trace.iterations());
    let _ = writeln!(summary, "converged={}", fit.trace.converged);
    let _ = writeln!(summary, "failed_restarts={}", fit.failed_restarts);
    let _ = writeln!(summary, "variance_clamps={}", fit.trace.variance_clamps());
    let _ = writeln!(summary, "ridge_jitters={}", fit.trace.ridge_jitters());
    out.write_all(summary.as_bytes()).map_err(io_error(Path::new("stdout")))?;
    if fit.trace.converged {
        Ok(0)
    } else {
        let _ = writeln!(log, "warning: stopped at the iteration limit without converging");
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn cmd_eval(args: &EvalArgs, out: &mut dyn Write, _log: &mut dyn Write) -> Result<i32, Error> {
    let dataset = read_csv(&args.data, args.layout.into())?;
    let truth = ground_truth(&dataset, args.scenario.map(Scenario::from))?;
    let report = match (&args.model, &args.labels) {
        (Some(path), _) => {
            let model = RegressionMixture::read(path)?;
            let spec = args.basis.spec(&dataset)?;
            let data = DesignedData::new(&dataset, &spec)?;
            if model.dim() != data.dim() {
                return Err(usage(format!(
                    "model has {} coefficients per component but the basis gives {}",
                    model.dim(),
                    data.dim()
                )));
            }
            let (tau, _) = posterior(&model, &data);
            evaluate(map_partition(&tau).labels(), Some((&model, &spec)), &truth)?
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(io_error(path))?;
            let labels = Partition::from_csv(&text)?;
            evaluate(labels.labels(), None, &truth)?
        }
        (None, None) => return Err(usage("either --model or --labels is required")),
    };
    let text = report.to_key_values();
    if let Some(path) = &args.out {
        write_file(path, &text)?;
    }
    out.write_all(text.as_bytes()).map_err(io_error(Path::new("stdout")))?;
    Ok(0)
}

const BENCH_COLUMNS: [&str; 13] = [
    "replication",
    "seed",
    "status",
    "iterations",
    "converged",
    "k_estimated",
    "k_true",
    "misclassification_rate",
    "rand_index",
    "approx_error",
    "approx_error_partial",
    "sigma_error",
    "pi_error",
];

/// Per-replication numeric values, in `BENCH_COLUMNS` order from `iterations`.
fn bench_values(trace: &FitTrace, report: &EvalReport) -> [Option<f64>; 10] {
    [
        Some(trace.iterations() as f64),
        Some(if trace.converged { 1.0 } else { 0.0 }),
        Some(report.k_estimated as f64),
        report.k_true.map(|k| k as f64),
        report.misclassification_rate,
        report.rand_index,
        report.approx_error,
        Some(if report.approx_error_partial { 1.0 } else { 0.0 }),
        report.sigma_error,
        report.pi_error,
    ]
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn cmd_bench(args: &BenchArgs, out: &mut dyn Write, log: &mut dyn Write) -> Result<i32, Error> {
    if args.replications == 0 {
        return Err(usage("--replications must be at least 1"));
    }
    let scenario: Scenario = args.scenario.into();
    let runs: Vec<Result<[Option<f64>; 10], String>> = (0..args.replications)
        .into_par_iter()
        .map(|r| {
            let seed = args.seed.wrapping_add(r as u64);
            let run = || -> Result<[Option<f64>; 10], Error> {
                let dataset = generate(&SimSpec::new(scenario, args.n, seed))?;
                let spec = args.basis.spec(&dataset)?;
                let fit = run_fit(&dataset, &spec, &args.model, seed)?;
                let truth = ground_truth(&dataset, Some(scenario))?;
                let report = evaluate(map_partition(&fit.tau).labels(), Some((&fit.model, &spec)), &truth)?;
                Ok(bench_values(&fit.trace, &report))
            };
            run().map_err(|e| e.to_string())
        })
        .collect();
    let mut csv = BENCH_COLUMNS.join(",");
    csv.push('\n');
    let mut ok = Vec::new();
    for (r, run) in runs.iter().enumerate() {
        let seed = args.seed.wrapping_add(r as u64);
        match run {
            Ok(values) => {
                ok.push(values);
                let cells: Vec<String> = values.iter().map(|v| cell(*v)).collect();
                let _ = writeln!(csv, "{r},{seed},ok,{}", cells.join(","));
            }
            Err(message) => {
                let _ = writeln!(log, "replication {r} (seed {seed}) failed: {message}");
                let _ = writeln!(csv, "{r},{seed},failed{}", ",".repeat(10));
            }
        }
    }
    for (label, stat) in [("mean", 0), ("std", 1)] {
        let cells: Vec<String> = (0..10)
            .map(|c| {
                let xs: Vec<f64> = ok.iter().filter_map(|v| v[c]).collect();
                if xs.is_empty() {
                    return String::new();
                }
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                let value = if stat == 0 {
                    mean
                } else if xs.len() < 2 {
                    0.0
                } else {
                    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
                };
                value.to_string()
            })
            .collect();
        let _ = writeln!(csv, "{label},,{},{}", ok.len(), cells.join(","));
    }
    match &args.out {
        Some(path) => write_file(path, &csv)?,
        None => out.write_all(csv.as_bytes()).map_err(io_error(Path::new("stdout")))?,
    }
    let _ = writeln!(log, "{} of {} replications succeeded", ok.len(), args.replications);
    Ok(0)
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run(args: Vec<OsString>, out: &mut dyn Write, log: &mut dyn Write) -> i32 {
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(log, "error: {e}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(rendered.as_bytes());
            } else {
                let _ = log.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a, out, log),
        Command::Fit(a) => cmd_fit(a, out, log),
        Command::Eval(a) => cmd_eval(a, out, log),
        Command::Bench(a) => cmd_bench(a, out, log),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(log, "error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(args: &[&str]) -> Vec<OsString> {
        args.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_fills_missing_flags_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "# comment\nn = 50\nseed=3\nnoise-sd=0.5\n").unwrap();
        let merged = merge_config(os(&[
            "curveclust",
            "generate",
            "--n",
            "10",
            "--config",
            path.to_str().unwrap(),
        ]))
        .unwrap();
        let strings: Vec<String> = merged.iter().map(|s| s.to_string_lossy().into_owned()).collect();
        assert!(strings.contains(&"--seed=3".to_string()));
        assert!(strings.contains(&"--noise-sd=0.5".to_string()));
        assert!(!strings.iter().any(|s| s == "--n=50"));
    }

    #[test]
    fn boolean_config_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "no-final-phase=true\n").unwrap();
        let merged = merge_config(os(&["curveclust", "fit", "--config", path.to_str().unwrap()])).unwrap();
        assert_eq!(merged.last().unwrap(), "--no-final-phase");
    }

    #[test]
    fn bad_config_line() {
        assert!(parse_config("just words").is_err());
    }

    #[test]
    fn missing_seed_is_a_usage_error() {
        let (mut out, mut log) = (Vec::new(), Vec::new());
        let code = run(os(&["curveclust", "generate", "--scenario", "waveform", "--n", "5"]), &mut out, &mut log);
        assert_eq!(code, 1);
        assert!(String::from_utf8(log).unwrap().contains("--seed"));
    }
}
