use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use germflow_core::{BridgeConstant, MetricChoice};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "germflow", version, about = "Kuo-condition checks and homotopy flows for polynomial map germs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the horn of the germ and certify the Kuo condition.
    CheckKuo(JobArgs),
    /// Check the ND(ν) condition and its implication for the Kuo bound.
    CheckNd(JobArgs),
    /// Search for points off Σ×ℝˡ where the x-gradient loses rank.
    CheckRank(JobArgs),
    /// Check that a perturbation has high enough order along Σ.
    CheckPerturbation(JobArgs),
    /// Integrate one trajectory of the homotopy flow.
    Flow(JobArgs),
    /// Run the full equivalence pipeline between a germ and its perturbation.
    VerifyEquivalence(JobArgs),
    /// Numerical checks of the auxiliary inequalities used by the flow.
    VerifyLemmas(JobArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::CheckKuo(_) => "check-kuo",
            Command::CheckNd(_) => "check-nd",
            Command::CheckRank(_) => "check-rank",
            Command::CheckPerturbation(_) => "check-perturbation",
            Command::Flow(_) => "flow",
            Command::VerifyEquivalence(_) => "verify-equivalence",
            Command::VerifyLemmas(_) => "verify-lemmas",
        }
    }

    pub fn args(&self) -> &JobArgs {
        match self {
            Command::CheckKuo(a)
            | Command::CheckNd(a)
            | Command::CheckRank(a)
            | Command::CheckPerturbation(a)
            | Command::Flow(a)
            | Command::VerifyEquivalence(a)
            | Command::VerifyLemmas(a) => a,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricArg {
    Auto,
    Weighted,
    Euclidean,
}

impl From<MetricArg> for MetricChoice {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Auto => MetricChoice::Auto,
            MetricArg::Weighted => MetricChoice::Weighted,
            MetricArg::Euclidean => MetricChoice::Euclidean,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BridgeArg {
    Scaled,
    Sharp,
}

impl From<BridgeArg> for BridgeConstant {
    fn from(b: BridgeArg) -> Self {
        match b {
            BridgeArg::Scaled => BridgeConstant::Scaled,
            BridgeArg::Sharp => BridgeConstant::Sharp,
        }
    }
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(_) => Err("must be positive".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn count(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Clone, Debug, Args)]
pub struct JobArgs {
    /// Germ spec file.
    #[arg(long)]
    pub spec: PathBuf,
    /// Perturbation germ p, so the target is f + p.
    #[arg(long, conflicts_with = "target")]
    pub pert: Option<PathBuf>,
    /// Target germ g; the perturbation is g − f.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Horn degree, also the order threshold d.
    #[arg(long, default_value_t = 3.0, value_parser = positive)]
    pub r: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub delta: f64,
    /// Horn width w̄.
    #[arg(long, default_value_t = 0.5, value_parser = positive)]
    pub width: f64,
    /// Radius α of the ball.
    #[arg(long, default_value_t = 0.5, value_parser = positive)]
    pub radius: f64,
    #[arg(long, default_value_t = 20000, value_parser = count)]
    pub samples: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Zero-set seeds flowed by verify-equivalence.
    #[arg(long, default_value_t = 500, value_parser = count)]
    pub seeds: usize,
    /// Horn samples used for the contact identity.
    #[arg(long, default_value_t = 500, value_parser = count)]
    pub contact_samples: usize,
    #[arg(long, value_enum, default_value_t = MetricArg::Auto)]
    pub metric: MetricArg,
    /// ν for check-nd, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub nu: Vec<f64>,
    #[arg(long, default_value_t = 0.7, value_parser = positive)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.5, value_parser = positive)]
    pub nd_width: f64,
    #[arg(long, value_enum, default_value_t = BridgeArg::Scaled)]
    pub bridge_constant: BridgeArg,
    /// Order threshold d for the perturbation; defaults to --r.
    #[arg(long, value_parser = positive)]
    pub degree: Option<f64>,
    /// Initial point for `flow`, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub u0: Vec<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub t0: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub t1: f64,
    #[arg(long, default_value_t = 1e-10, value_parser = positive)]
    pub atol: f64,
    #[arg(long, default_value_t = 1e-8, value_parser = positive)]
    pub rtol: f64,
    /// Step clamp relative to the distance to Σ.
    #[arg(long, default_value_t = 0.1, value_parser = positive)]
    pub eta: f64,
    /// JSON report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for per-trajectory CSV files.
    #[arg(long)]
    pub trace_dir: Option<PathBuf>,
    /// Directory for zero-set overlay CSV files.
    #[arg(long)]
    pub plot_dir: Option<PathBuf>,
    /// Leave wall-clock timing out of the report.
    #[arg(long)]
    pub omit_timing: bool,
}

/// Echo of the job in the report. The report path itself is left out so that two runs
/// writing to different files produce identical bytes.
#[derive(Clone, Debug, Serialize)]
pub struct JobConfig {
    pub command: String,
    pub spec: PathBuf,
    pub pert: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub r: f64,
    pub delta: f64,
    pub width: f64,
    pub radius: f64,
    pub samples: usize,
    pub seed: u64,
    pub seeds: usize,
    pub contact_samples: usize,
    pub metric: MetricArg,
    pub nu: Vec<f64>,
    pub epsilon: f64,
    pub nd_width: f64,
    pub bridge_constant: BridgeArg,
    pub degree: f64,
    pub u0: Vec<f64>,
    pub t0: f64,
    pub t1: f64,
    pub atol: f64,
    pub rtol: f64,
    pub eta: f64,
    pub trace_dir: Option<PathBuf>,
    pub plot_dir: Option<PathBuf>,
    #[serde(skip)]
    pub omit_timing: bool,
}

impl JobConfig {
    pub fn from_command(cmd: &Command) -> Self {
        let a = cmd.args().clone();
        Self {
            command: cmd.name().into(),
            spec: a.spec,
            pert: a.pert,
            target: a.target,
            r: a.r,
            delta: a.delta,
            width: a.width,
            radius: a.radius,
            samples: a.samples,
            seed: a.seed,
            seeds: a.seeds,
            contact_samples: a.contact_samples,
            metric: a.metric,
            nu: a.nu,
            epsilon: a.epsilon,
            nd_width: a.nd_width,
            bridge_constant: a.bridge_constant,
            degree: a.degree.unwrap_or(a.r),
            u0: a.u0,
            t0: a.t0,
            t1: a.t1,
            atol: a.atol,
            rtol: a.rtol,
            eta: a.eta,
            trace_dir: a.trace_dir,
            plot_dir: a.plot_dir,
            omit_timing: a.omit_timing,
        }
    }
}
