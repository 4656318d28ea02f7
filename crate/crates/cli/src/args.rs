use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nonlocal::{Family, PriorKind};

#[derive(Debug, Parser)]
#[command(name = "nonlocal", version, about = "Bayesian variable selection with nonlocal priors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every model up to size q (or search) on a CSV dataset.
    Fit(FitArgs),
    /// Draw a synthetic dataset and its truth sidecar.
    Simulate(SimulateArgs),
    /// Evaluate a prior density on a grid.
    Density(DensityArgs),
    /// Run a simulation study.
    Study(StudyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Logistic,
    Poisson,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gaussian => Family::Gaussian,
            FamilyArg::Logistic => Family::Logistic,
            FamilyArg::Poisson => Family::Poisson,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriorArg {
    Pimom,
    Spimom,
}

impl From<PriorArg> for PriorKind {
    fn from(p: PriorArg) -> Self {
        match p {
            PriorArg::Pimom => PriorKind::Pimom,
            PriorArg::Spimom => PriorKind::Spimom,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StudyKind {
    MleRate,
    ModeRate,
    LogmRatio,
    Consistency,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::MleRate => "mle-rate",
            StudyKind::ModeRate => "mode-rate",
            StudyKind::LogmRatio => "logm-ratio",
            StudyKind::Consistency => "consistency",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FamilyOpts {
    #[arg(long, value_enum, default_value = "gaussian")]
    pub family: FamilyArg,
    /// Gaussian noise variance [default: 1].
    #[arg(long)]
    pub sigma2: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PriorOpts {
    #[arg(long, value_enum, default_value = "spimom")]
    pub prior: PriorArg,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// piMOM scale [default: 1].
    #[arg(long)]
    pub tau: Option<f64>,
    /// spiMOM scale [default: 1, or derived from --delta].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Effect-size floor: choose λ so that 1% of the spiMOM mass lies in (-δ, δ).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Use the halved spiMOM normalizing constant.
    #[arg(long)]
    pub paper_constant: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// CSV with a header, a "y" column and numeric predictors.
    #[arg(long)]
    pub input: PathBuf,
    /// JSON result path [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub family: FamilyOpts,
    #[command(flatten)]
    pub prior: PriorOpts,
    /// Largest model size [default: min(p, 5)].
    #[arg(long)]
    pub q: Option<usize>,
    /// Fall back to greedy search when the model space exceeds the cap.
    #[arg(long)]
    pub search: bool,
    /// Greedy-search budget of scored models.
    #[arg(long, default_value_t = 1000)]
    pub budget: usize,
    /// Largest model space that is enumerated.
    #[arg(long, default_value_t = 1_000_000)]
    pub cap: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Known true support (1-based, comma separated) for the nested and
    /// non-nested masses.
    #[arg(long)]
    pub truth: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct DesignOpts {
    #[arg(long, default_value_t = 5)]
    pub p: usize,
    /// True support, 1-based and comma separated; empty for the null model.
    #[arg(long, default_value = "1,2")]
    pub support: String,
    /// Signal per support column [default: 1 for each].
    #[arg(long)]
    pub beta: Option<String>,
    /// Decay exponent: every support coefficient becomes c·n^(-m).
    #[arg(long)]
    pub m: Option<f64>,
    /// Decay constant used with --m.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Equicorrelation of the design columns.
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// CSV output path; the truth sidecar is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[command(flatten)]
    pub design: DesignOpts,
    #[command(flatten)]
    pub family: FamilyOpts,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub prior: PriorOpts,
    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    pub hi: f64,
    #[arg(long, default_value_t = 601)]
    pub points: usize,
    /// Also integrate the density over the real line.
    #[arg(long)]
    pub verify: bool,
    /// CSV output path [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    #[arg(long, value_enum)]
    pub study: StudyKind,
    /// Sample sizes, comma separated [default: 200,800,3200; scalar mode-rate:
    /// 1000,...,10000000].
    #[arg(long)]
    pub n_grid: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[command(flatten)]
    pub design: DesignOpts,
    #[command(flatten)]
    pub family: FamilyOpts,
    #[command(flatten)]
    pub prior: PriorOpts,
    /// Largest model size [default: min(p, |J0| + 1)].
    #[arg(long)]
    pub q: Option<usize>,
    /// mode-rate only: solve the stationarity equation instead of simulating.
    #[arg(long)]
    pub scalar: bool,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub nu: f64,
    /// logm-ratio: supersets sampled per extra size.
    #[arg(long, default_value_t = 5)]
    pub supersets: usize,
    /// consistency: greedy-search budget when the space is too large to enumerate.
    #[arg(long, default_value_t = 1000)]
    pub budget: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Tidy CSV path; the JSON summary goes next to it as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
