//! `elnp` command-line frontend.

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser, Serialize, Debug)]
#[command(name = "elnp", version, about = "Noisy-label estimation and Neyman-Pearson classification")]
pub struct Cli {
    /// Root seed; `simulate` falls back to the scenario's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for `simulate` (other subcommands run single-threaded).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
    /// Omit the timestamp line from experiment CSVs.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Serialize, Debug)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Fit the noisy-label model and write model JSON plus EM trace.
    Fit(FitArgs),
    /// Binary Neyman-Pearson classifier on top of the fitted posterior.
    NpBinary(NpBinaryArgs),
    /// Multiclass Neyman-Pearson classifier via the Lagrangian dual.
    Npmc(NpmcArgs),
    /// Noise-adjusted umbrella classifier.
    Umbrella(UmbrellaArgs),
    /// Monte Carlo experiment over a scenario file.
    Simulate(SimulateArgs),
    /// Predict classes and posteriors with a saved model.
    Predict(PredictArgs),
    /// Export a scenario sample as CSV.
    Generate(GenerateArgs),
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct DataArgs {
    #[arg(long)]
    pub data: String,
    /// identity or quad
    #[arg(long, default_value = "identity")]
    pub basis: String,
    /// Center and scale features before the basis expansion.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct EmArgs {
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    /// plain | frozen | constrained=x0,x1,... | penalized=e0,e1,...
    #[arg(long, default_value = "plain")]
    pub t_update: String,
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub wml_tol: f64,
    #[arg(long, default_value_t = 200)]
    pub wml_max_iter: usize,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct HjArgs {
    #[arg(long, default_value_t = 200.0)]
    pub box_hi: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol_step: f64,
    #[arg(long, default_value_t = 8)]
    pub hj_starts: usize,
    #[arg(long, default_value_t = 200_000)]
    pub max_evals: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub feas_margin: f64,
}

#[derive(Args, Serialize, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub k: usize,
    #[command(flatten)]
    pub em: EmArgs,
    #[arg(long)]
    pub out: String,
    /// Defaults to the model path with a `.trace.csv` suffix.
    #[arg(long)]
    pub trace: Option<String>,
}

#[derive(Args, Serialize, Debug)]
pub struct NpBinaryArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub alpha: f64,
    #[command(flatten)]
    pub em: EmArgs,
    #[arg(long)]
    pub out: String,
    #[arg(long)]
    pub trace: Option<String>,
}

#[derive(Args, Serialize, Debug)]
pub struct NpmcArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// JSON with `rho`, `alpha` and `S`.
    #[arg(long)]
    pub spec: String,
    #[command(flatten)]
    pub em: EmArgs,
    #[command(flatten)]
    pub hj: HjArgs,
    #[arg(long)]
    pub out: String,
    #[arg(long)]
    pub trace: Option<String>,
}

#[derive(Args, Serialize, Debug)]
pub struct UmbrellaArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// known=m0,m1 | estimated
    #[arg(long, default_value = "estimated")]
    pub corruption: String,
    #[command(flatten)]
    pub em: EmArgs,
    #[arg(long)]
    pub out: String,
}

#[derive(Args, Serialize, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: String,
    /// Defaults to the scenario's training size.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub reps: u64,
    #[arg(long, default_value_t = 0)]
    pub first_rep: u64,
    /// Comma-separated; defaults depend on the task.
    #[arg(long)]
    pub methods: Option<String>,
    #[command(flatten)]
    pub em: EmArgs,
    #[command(flatten)]
    pub hj: HjArgs,
    #[arg(long)]
    pub out: String,
}

#[derive(Args, Serialize, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub data: String,
    #[arg(long)]
    pub out: String,
}

#[derive(Args, Serialize, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub rep: u64,
    /// Write the clean evaluation set instead of the training sample.
    #[arg(long)]
    pub eval: bool,
    #[arg(long)]
    pub out: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .target(env_logger::Target::Stderr)
        .init();
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
