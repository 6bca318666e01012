//! Benchmark CLI: sweeps estimators over synthetic instances of the five
//! built-in problems and writes per-trial plus summary CSV files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use imot::bench::{run_sweep, summarize, write_csv, write_summary_csv, BenchConfig, EstimatorKind, ProblemKind};
use imot::g2o::{parse_g2o_2d, write_g2o_2d};
use imot::problems::PoseGraphAdapter;
use imot::synth::read_point_file;
use imot::{imot, EstimatorConfig};

#[derive(Parser)]
#[command(name = "imot-bench", about = "Monte Carlo benchmarks for robust estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single rotation averaging
    RotAvg(Shared),
    /// Rotation search over vector correspondences
    RotSearch(Shared),
    /// Rigid point cloud registration
    Registration {
        #[command(flatten)]
        shared: Shared,
        /// Model points file: one "x y z" triple per line (default: random
        /// unit-cube points)
        #[arg(long)]
        points: Option<PathBuf>,
    },
    /// Category-level registration with an active shape basis
    Category {
        #[command(flatten)]
        shared: Shared,
        /// Shape basis size
        #[arg(long, default_value_t = 50)]
        shape_size: usize,
    },
    /// 2D pose graph optimization on a synthetic grid trajectory
    Slam {
        #[command(flatten)]
        shared: Shared,
        #[arg(long, default_value_t = 10)]
        rows: usize,
        #[arg(long, default_value_t = 20)]
        cols: usize,
        #[arg(long, default_value_t = 50)]
        loop_closures: usize,
        /// Optimize a g2o pose-graph file instead of running the synthetic
        /// sweep; writes `<stem>_optimized.g2o` into the output directory
        #[arg(long)]
        g2o: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Shared {
    /// Measurement count (for slam: ignored, use --rows/--cols)
    #[arg(long)]
    n: Option<usize>,
    /// Inlier noise level (radians for rot-avg, meters otherwise)
    #[arg(long)]
    sigma: Option<f64>,
    /// Comma separated outlier ratios in [0, 1)
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.2, 0.4, 0.6, 0.8])]
    ratios: Vec<f64>,
    /// Monte Carlo trials per cell
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Base RNG seed; the whole sweep is deterministic given this
    #[arg(long)]
    seed: u64,
    /// Comma separated estimators: imot, imot-star, gnc-tls, gnc-gm, adapt,
    /// ransac (default: all that apply)
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<EstimatorKind>>,
    /// Threshold layer count (default: per-problem recommendation)
    #[arg(long)]
    d: Option<usize>,
    /// Threshold convergence tolerance
    #[arg(long, default_value_t = 5e-3)]
    delta: f64,
    /// Noise bound as a multiple of sigma (default: per-problem)
    #[arg(long)]
    gamma_mult: Option<f64>,
    /// Output directory for CSV files (default: $IMOT_BENCH_OUT or ".")
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Shared {
    fn apply(&self, mut config: BenchConfig) -> imot::Result<BenchConfig> {
        if let Some(n) = self.n {
            config.n = n;
        }
        if let Some(sigma) = self.sigma {
            let mult = config.noise_bound / config.sigma;
            config.sigma = sigma;
            config.noise_bound = mult * sigma;
        }
        if let Some(mult) = self.gamma_mult {
            config.noise_bound = mult * config.sigma;
        }
        if let Some(d) = self.d {
            config.layer_count = d;
        }
        config.convergence_tol = self.delta;
        config.ratios = self.ratios.clone();
        config.trials = self.trials;
        config.seed = self.seed;
        if let Some(est) = &self.estimators {
            config.estimators = est.clone();
        } else {
            config.estimators = EstimatorKind::ALL.to_vec();
            if matches!(config.problem, ProblemKind::Category | ProblemKind::Slam) {
                config.estimators.retain(|e| *e != EstimatorKind::Ransac);
            }
        }
        Ok(config)
    }

    fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os("IMOT_BENCH_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

/// Runs the noise-bound estimator on an on-disk pose graph and writes the
/// optimized trajectory back out in the same format.
fn optimize_g2o(shared: &Shared, path: &PathBuf) -> imot::Result<bool> {
    let (graph, initial) = parse_g2o_2d(path)?;
    let defaults = BenchConfig::default_for(ProblemKind::Slam);
    let config = shared.apply(defaults)?;
    let estimator = EstimatorConfig {
        layer_count: config.layer_count,
        convergence_tol: config.convergence_tol,
        noise_bound: Some(config.noise_bound),
        ..EstimatorConfig::default()
    };
    let loops = graph.loop_closure_indices().len();
    let edges = graph.edges().len();
    let adapter = PoseGraphAdapter::new(graph);
    let result = imot(&adapter, &estimator)?;

    let dir = shared.out_dir();
    std::fs::create_dir_all(&dir)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("graph");
    let out_path = dir.join(format!("{stem}_optimized.g2o"));
    write_g2o_2d(&out_path, adapter.graph(), &result.solution)?;

    let kept_loops = result
        .inliers
        .iter()
        .filter(|&&i| matches!(adapter.graph().edges()[i].kind, imot::problems::EdgeKind::LoopClosure))
        .count();
    println!(
        "{}: {} vertices, {edges} edges ({loops} loop closures)",
        path.display(),
        initial.len(),
    );
    println!(
        "kept {kept_loops}/{loops} loop closures in {} iterations -> {}",
        result.iterations,
        out_path.display(),
    );
    Ok(false)
}

fn run() -> imot::Result<bool> {
    let cli = Cli::parse();
    let (shared, config) = match &cli.command {
        Command::RotAvg(shared) => (
            shared,
            shared.apply(BenchConfig::default_for(ProblemKind::RotationAveraging))?,
        ),
        Command::RotSearch(shared) => (
            shared,
            shared.apply(BenchConfig::default_for(ProblemKind::RotationSearch))?,
        ),
        Command::Registration { shared, points } => {
            let mut config = shared.apply(BenchConfig::default_for(ProblemKind::Registration))?;
            if let Some(path) = points {
                config.registration_points = Some(read_point_file(path)?);
            }
            (shared, config)
        }
        Command::Category { shared, shape_size } => {
            let mut config = shared.apply(BenchConfig::default_for(ProblemKind::Category))?;
            config.shape_size = *shape_size;
            (shared, config)
        }
        Command::Slam {
            shared,
            rows,
            cols,
            loop_closures,
            g2o,
        } => {
            if let Some(path) = g2o {
                return optimize_g2o(shared, path);
            }
            let mut config = shared.apply(BenchConfig::default_for(ProblemKind::Slam))?;
            config.slam_rows = *rows;
            config.slam_cols = *cols;
            config.slam_loop_closures = *loop_closures;
            config.n = rows * cols;
            (shared, config)
        }
    };

    let rows = run_sweep(&config);
    let summary = summarize(&rows);

    let dir = shared.out_dir();
    std::fs::create_dir_all(&dir)?;
    let trial_path = dir.join(format!("{}_trials.csv", config.problem));
    let summary_path = dir.join(format!("{}_summary.csv", config.problem));
    write_csv(&rows, std::fs::File::create(&trial_path)?)?;
    write_summary_csv(&summary, std::fs::File::create(&summary_path)?)?;

    println!(
        "{} sweep: {} rows -> {}",
        config.problem,
        rows.len(),
        trial_path.display()
    );
    for s in &summary {
        let accuracy = s
            .median_rotation_error_deg
            .map(|e| format!("rot {:.3} deg", e))
            .or(s.median_trajectory_rmse.map(|e| format!("ate {:.3}", e)))
            .unwrap_or_else(|| "-".into());
        println!(
            "  {:>9} ratio {:.2}: {} | precision {} recall {} | {:.1} ms | {}/{} failed",
            s.estimator.to_string(),
            s.outlier_ratio,
            accuracy,
            s.mean_precision.map(|p| format!("{p:.3}")).unwrap_or_else(|| "-".into()),
            s.mean_recall.map(|r| format!("{r:.3}")).unwrap_or_else(|| "-".into()),
            s.mean_wall_time_ms,
            s.failures,
            s.trials,
        );
    }
    Ok(rows.iter().any(|r| r.failure.is_some()))
}

fn main() -> ExitCode {
    match run() {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("some trials failed; see the failure column in the trial CSV");
            ExitCode::FAILURE
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
