use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use grouptest_core::compare::Tolerances;
use grouptest_core::popdyn::PoolInit;
use grouptest_core::Laws;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "grouptest",
    version,
    about = "Group testing offspring laws, Monte Carlo checks and population dynamics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form constants and offspring PMFs.
    Analytic(RunArgs),
    /// Sample graphs and measure survival shares and offspring histograms.
    Simulate(RunArgs),
    /// Sample graphs and test the histograms against the limiting laws.
    Compare(RunArgs),
    /// Population dynamics for the marginals of non-hard individuals.
    Popdyn(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Analytic(_) => "analytic",
            Command::Simulate(_) => "simulate",
            Command::Compare(_) => "compare",
            Command::Popdyn(_) => "popdyn",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Analytic(a) | Command::Simulate(a) | Command::Compare(a) | Command::Popdyn(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LawsArg {
    Stated,
    Corrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Uniform,
    Prior,
}

/// Flags shared by every subcommand. Unset values fall back to `--config`, then defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Number of individuals.
    #[arg(long)]
    pub n: Option<usize>,
    /// Infected fraction.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Density parameter.
    #[arg(long)]
    pub d: Option<f64>,
    /// Tests per individual.
    #[arg(long)]
    pub delta: Option<usize>,
    /// Sampled graphs (simulate, compare, popdyn --validate).
    #[arg(long)]
    pub trials: Option<u64>,
    /// Message pool size.
    #[arg(long)]
    pub pop: Option<usize>,
    /// Population dynamics sweeps.
    #[arg(long)]
    pub sweeps: Option<usize>,
    /// Roots drawn per type for marginal histograms.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Bins of the marginal histograms.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Initial message pools.
    #[arg(long, value_enum)]
    pub init: Option<InitArg>,
    /// Master seed; every random stream derives from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Tables as separate CSV files or embedded in report.json.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Which closed forms drive the offspring laws.
    #[arg(long, value_enum)]
    pub laws: Option<LawsArg>,
    /// Cross-check population dynamics against BP on sampled graphs.
    #[arg(long)]
    pub validate: bool,
    /// Exit nonzero when pools fail to stabilize or the Bayes check fails.
    #[arg(long)]
    pub strict: bool,
    /// Flat `key = value` file; explicit flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Max TV for V0+ root offspring counts.
    #[arg(long)]
    pub tol_v0plus_tv: Option<f64>,
    /// Min chi-square p-value for V0+ root offspring counts.
    #[arg(long)]
    pub tol_pvalue: Option<f64>,
    /// Max TV for the V1+ offspring shape given survival counts.
    #[arg(long)]
    pub tol_shape_tv: Option<f64>,
    /// W1 change per window below which pools count as stable.
    #[arg(long)]
    pub tol_w1: Option<f64>,
    /// Max TV between popdyn and BP marginal histograms.
    #[arg(long)]
    pub tol_popdyn_tv: Option<f64>,
    /// Max deviation of the mixture mean from the infected share.
    #[arg(long)]
    pub tol_bayes: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PopdynTolerances {
    pub w1_change: f64,
    pub popdyn_tv: f64,
    pub bayes: f64,
}

impl Default for PopdynTolerances {
    fn default() -> Self {
        Self {
            w1_change: 1e-3,
            popdyn_tv: 0.05,
            bayes: 0.02,
        }
    }
}

/// Fully resolved run settings. `workers` and `out` are left out of reports
/// since they cannot change any output value.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub n: usize,
    pub lambda: f64,
    pub d: f64,
    pub delta: usize,
    pub trials: u64,
    pub pop: usize,
    pub sweeps: usize,
    pub samples: usize,
    pub bins: usize,
    pub init: PoolInit,
    pub seed: u64,
    pub format: Format,
    pub laws: Laws,
    pub validate: bool,
    pub strict: bool,
    pub tolerances: Tolerances,
    pub popdyn_tolerances: PopdynTolerances,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub workers: usize,
}

/// Error in flags or config contents; maps to the usage exit code.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key = value", i + 1)))?;
        out.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(out)
}

struct Merged {
    file: BTreeMap<String, String>,
}

impl Merged {
    fn take<T: FromStr>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        let from_file = self.file.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        from_file
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| usage(format!("config key {key} = {v}: {e}")))
            })
            .transpose()
    }

    fn take_enum<T: ValueEnum>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let from_file = self.file.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        from_file
            .map(|v| T::from_str(&v, true).map_err(|e| usage(format!("config key {key} = {v}: {e}"))))
            .transpose()
    }

    fn take_flag(&mut self, key: &str, flag: bool) -> Result<bool> {
        Ok(flag || self.take::<bool>(key, None)?.unwrap_or(false))
    }
}

fn required<T>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| usage(format!("missing required --{name}")))
}

impl RunConfig {
    pub fn resolve(command: &Command) -> Result<Self> {
        let args = command.args();
        let file = match &args.config {
            Some(path) => read_config_file(path)?,
            None => BTreeMap::new(),
        };
        let mut m = Merged { file };
        let defaults = Tolerances::default();
        let pd = PopdynTolerances::default();
        let cfg = RunConfig {
            command: command.name(),
            n: required(m.take("n", args.n)?, "n")?,
            lambda: required(m.take("lambda", args.lambda)?, "lambda")?,
            d: required(m.take("d", args.d)?, "d")?,
            delta: required(m.take("delta", args.delta)?, "delta")?,
            trials: m.take("trials", args.trials)?.unwrap_or(50),
            pop: m.take("pop", args.pop)?.unwrap_or(10_000),
            sweeps: m.take("sweeps", args.sweeps)?.unwrap_or(200),
            samples: m.take("samples", args.samples)?.unwrap_or(100_000),
            bins: m
                .take("bins", args.bins)?
                .unwrap_or(grouptest_core::popdyn::DEFAULT_BINS),
            init: match m.take_enum("init", args.init)?.unwrap_or(InitArg::Uniform) {
                InitArg::Uniform => PoolInit::Uniform,
                InitArg::Prior => PoolInit::Prior,
            },
            seed: m.take("seed", args.seed)?.unwrap_or(0),
            format: m.take_enum("format", args.format)?.unwrap_or(Format::Json),
            laws: match m.take_enum("laws", args.laws)?.unwrap_or(LawsArg::Stated) {
                LawsArg::Stated => Laws::Stated,
                LawsArg::Corrected => Laws::Corrected,
            },
            validate: m.take_flag("validate", args.validate)?,
            strict: m.take_flag("strict", args.strict)?,
            tolerances: Tolerances {
                v0plus_tv: m
                    .take("tol-v0plus-tv", args.tol_v0plus_tv)?
                    .unwrap_or(defaults.v0plus_tv),
                min_pvalue: m.take("tol-pvalue", args.tol_pvalue)?.unwrap_or(defaults.min_pvalue),
                v1plus_shape_tv: m
                    .take("tol-shape-tv", args.tol_shape_tv)?
                    .unwrap_or(defaults.v1plus_shape_tv),
            },
            popdyn_tolerances: PopdynTolerances {
                w1_change: m.take("tol-w1", args.tol_w1)?.unwrap_or(pd.w1_change),
                popdyn_tv: m.take("tol-popdyn-tv", args.tol_popdyn_tv)?.unwrap_or(pd.popdyn_tv),
                bayes: m.take("tol-bayes", args.tol_bayes)?.unwrap_or(pd.bayes),
            },
            out: m.take("out", args.out.clone())?.unwrap_or_else(|| PathBuf::from(".")),
            workers: m
                .take("workers", args.workers)?
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        };
        if let Some(key) = m.file.keys().next() {
            bail!(usage(format!("unknown config key {key}")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        grouptest_core::derive_params(self.n, self.lambda, self.d, self.delta).map_err(|e| usage(e.to_string()))?;
        if self.workers == 0 {
            bail!(usage("--workers must be at least 1"));
        }
        if self.command == "popdyn" && self.pop < grouptest_core::popdyn::MIN_POPULATION {
            bail!(usage(format!(
                "--pop {} is below the minimum {}",
                self.pop,
                grouptest_core::popdyn::MIN_POPULATION
            )));
        }
        if self.bins == 0 || self.samples == 0 {
            bail!(usage("--bins and --samples must be positive"));
        }
        if matches!(self.command, "simulate" | "compare") && self.trials == 0 {
            bail!(usage("--trials must be at least 1"));
        }
        Ok(())
    }
}
