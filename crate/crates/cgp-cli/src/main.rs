//! Command-line interface for compressed GP regression: dataset simulation,
//! ensemble fitting, prediction, and benchmark reproduction.

mod commands;
mod error;
mod io;
mod model_file;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cgp", version, about = "Compressed Gaussian process regression toolkit")]
struct Cli {
    /// Worker threads (overrides the CGP_THREADS environment variable).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic swiss-roll dataset as CSV.
    Simulate(SimulateArgs),
    /// Fit a model-averaged compressed GP ensemble on a training CSV.
    Fit(FitArgs),
    /// Predict with a saved model on a test CSV.
    Predict(PredictArgs),
    /// Run benchmark scenarios and summarize replicate metrics.
    Benchmark(BenchmarkArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exact,
    Lowrank,
}

#[derive(Args)]
struct SimulateArgs {
    /// Training rows.
    #[arg(long)]
    n: usize,
    /// Additional test rows drawn from the same stream.
    #[arg(long, default_value_t = 0)]
    n_pred: usize,
    /// Ambient feature count (at least 3).
    #[arg(long)]
    p: usize,
    /// Feature noise standard deviation.
    #[arg(long)]
    tau: f64,
    /// Upper end of the second manifold coordinate.
    #[arg(long, default_value_t = 3.0)]
    hmax: f64,
    /// Observation noise standard deviation.
    #[arg(long, default_value_t = 0.02)]
    response_noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Test CSV path (required when --n-pred > 0).
    #[arg(long)]
    test_out: Option<PathBuf>,
    /// Optional CSV of the latent (t, h) coordinates for all rows.
    #[arg(long)]
    latent_out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Training CSV with header y,x1,...,xp.
    #[arg(long)]
    train: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    mode: ModeArg,
    /// Spacing between compression dimensions in the grid.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Cap on the top of the dimension window.
    #[arg(long)]
    m_cap: Option<usize>,
    /// Rank of the sample-space map (low-rank mode).
    #[arg(long, default_value_t = 150)]
    m_phi: usize,
    /// Give each member an independent sample-space map.
    #[arg(long, default_value_t = false)]
    per_member_phi: bool,
    /// Point cap for pairwise-distance extremes in bandwidth draws.
    #[arg(long, default_value_t = 1000)]
    subsample_cap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output model JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Saved model JSON.
    #[arg(long)]
    model: PathBuf,
    /// Test CSV; the y column is optional and ignored.
    #[arg(long)]
    test: PathBuf,
    /// Central predictive-interval coverage.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Output CSV with columns mean,lower,upper.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScenarioArg {
    /// Six small-sample settings (n=100).
    Table2,
    /// Six large-sample settings (n=5000); sized for big machines.
    Table4,
    /// One setting from --n/--p/--tau/--hmax.
    Custom,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long, value_enum)]
    scenario: ScenarioArg,
    /// Replicates per scenario.
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Comma-separated methods to run: cgp, dsl.
    #[arg(long, default_value = "cgp,dsl")]
    methods: String,
    /// Posterior mode for the cgp method; defaults to exact for table2 and
    /// custom, low-rank for table4.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 3.0)]
    hmax: f64,
    /// Test rows per replicate; defaults to 100 for table2, 200 otherwise.
    #[arg(long)]
    n_pred: Option<usize>,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long)]
    m_cap: Option<usize>,
    #[arg(long, default_value_t = 150)]
    m_phi: usize,
    #[arg(long, default_value_t = 1000)]
    subsample_cap: usize,
    /// Clusters for the dsl baseline.
    #[arg(long, default_value_t = 10)]
    n_clust: usize,
    /// Ridge regularization for the dsl per-cluster fits.
    #[arg(long, default_value_t = 1e-6)]
    ridge: f64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for results.json and replicates.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[cfg(feature = "parallel")]
fn init_threads(threads: Option<usize>) {
    let count = threads.or_else(|| {
        std::env::var("CGP_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(count) = count {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(count)
            .build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn init_threads(_threads: Option<usize>) {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads(cli.threads);
    let outcome = match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Fit(args) => commands::fit(args),
        Command::Predict(args) => commands::predict(args),
        Command::Benchmark(args) => commands::benchmark(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
