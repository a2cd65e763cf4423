use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use velcro_peel::controller::{ControllerKind, NoProbe};
use velcro_peel::geometry::ShapeKind;
use velcro_peel::harness::{
    dump_trajectory, episode_curve, episode_seed, format_summary, run_benchmark, run_single, BenchmarkConfig,
};
use velcro_peel::Result;

/// Velcro peeling simulator, filter and benchmark.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true, env = "VELCRO_PEEL_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full benchmark and print cost / success tables.
    Bench(BenchArgs),
    /// Run one episode and dump its trajectory as JSONL.
    Run(RunArgs),
    /// Print sampled surface curves as JSON lines.
    Sample(SampleArgs),
}

#[derive(Args)]
struct Common {
    /// Base seed for episode seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Observation noise on the force direction, in degrees.
    #[arg(long)]
    noise_beta_deg: Option<f64>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
}

impl Common {
    fn apply(&self, cfg: &mut BenchmarkConfig) {
        if let Some(v) = self.seed {
            cfg.base_seed = v;
        }
        if let Some(v) = self.noise_beta_deg {
            cfg.episode.sim.noise_std_beta = v.to_radians();
        }
        if let Some(v) = self.particles {
            cfg.episode.filter.n_particles = v;
        }
        if let Some(v) = self.max_steps {
            cfg.episode.controller.max_steps = v;
        }
        if let Some(v) = self.c1 {
            cfg.episode.cost.c1 = v;
        }
        if let Some(v) = self.c2 {
            cfg.episode.cost.c2 = v;
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated subset of flat,arc,corner.
    #[arg(long, value_delimiter = ',')]
    shapes: Option<Vec<ShapeKind>>,
    /// Comma-separated subset of full_obs,heuristic.
    #[arg(long, value_delimiter = ',')]
    controllers: Option<Vec<ControllerKind>>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Per-episode metrics CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Directory for one JSONL trajectory per episode.
    #[arg(long)]
    trajectory_dir: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Fill the wall_ms column.
    #[arg(long)]
    wall_time: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "flat")]
    shape: ShapeKind,
    #[arg(long, default_value = "heuristic")]
    controller: ControllerKind,
    /// Episode index within the shape's benchmark sequence.
    #[arg(long, default_value_t = 0)]
    episode: usize,
    /// Trajectory output path.
    #[arg(long, short)]
    out: PathBuf,
    /// Particles stored per record (0 disables snapshots).
    #[arg(long)]
    snapshot_particles: Option<usize>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    shapes: Option<Vec<ShapeKind>>,
    #[arg(long, default_value_t = 5)]
    count: usize,
    /// Also emit this many evenly spaced surface points per curve.
    #[arg(long, default_value_t = 0)]
    points: usize,
}

fn load(cli: &Cli) -> Result<BenchmarkConfig> {
    match &cli.config {
        Some(p) => BenchmarkConfig::load(p),
        None => Ok(BenchmarkConfig::default()),
    }
}

fn bench(mut cfg: BenchmarkConfig, args: BenchArgs) -> Result<()> {
    args.common.apply(&mut cfg);
    if let Some(v) = args.shapes {
        cfg.shapes = v;
    }
    if let Some(v) = args.controllers {
        cfg.controllers = v;
    }
    if let Some(v) = args.episodes {
        cfg.episodes_per_shape = v;
    }
    if args.csv.is_some() {
        cfg.csv_path = args.csv;
    }
    if args.trajectory_dir.is_some() {
        cfg.trajectory_dir = args.trajectory_dir;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    cfg.record_wall_time |= args.wall_time;
    let report = run_benchmark(&cfg)?;
    print!("{}", format_summary(&report.summaries));
    Ok(())
}

fn run(mut cfg: BenchmarkConfig, args: RunArgs) -> Result<()> {
    args.common.apply(&mut cfg);
    if let Some(v) = args.snapshot_particles {
        cfg.episode.snapshot_particles = v;
    }
    cfg.validate()?;
    let (row, result) = run_single(&cfg, args.shape, args.controller, args.episode, true, &mut NoProbe)?;
    dump_trajectory(&result.records, &args.out)?;
    println!(
        "{} {} episode {} (seed {}): {} after {} steps, E = {:.3}",
        row.shape, row.controller, row.episode_index, row.seed, row.terminal_event, row.steps, row.total_cost
    );
    Ok(())
}

fn sample(mut cfg: BenchmarkConfig, args: SampleArgs) -> Result<()> {
    if let Some(v) = args.seed {
        cfg.base_seed = v;
    }
    let shapes = args.shapes.unwrap_or_else(|| cfg.shapes.clone());
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for shape in shapes {
        for i in 0..args.count {
            let seed = episode_seed(cfg.base_seed, shape, i);
            let curve = episode_curve(&cfg, shape, seed)?;
            let mut line = serde_json::json!({ "shape": shape, "episode_index": i, "seed": seed, "curve": curve });
            if args.points > 1 {
                let n = args.points - 1;
                let pts = (0..=n)
                    .map(|k| curve.point_at(curve.attached_length * k as f64 / n as f64).map(|p| [p.x, p.y]))
                    .collect::<Result<Vec<_>>>()?;
                line["points"] = serde_json::json!(pts);
            }
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = load(&cli).and_then(|cfg| match cli.command {
        Command::Bench(a) => bench(cfg, a),
        Command::Run(a) => run(cfg, a),
        Command::Sample(a) => sample(cfg, a),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
