use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use noper_cli::{commands, RunConfig};
use noper_core::operator::ModelKind;
use noper_core::train::Task;

#[derive(Parser)]
#[command(name = "noper", version, about = "Neural operators for path-dependent SDEs and fractional Brownian motion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate training datasets, one per seed.
    GenData(Common),
    /// Train models and write checkpoints with their loss histories.
    Train(Common),
    /// Evaluate checkpoints at their training resolution.
    Eval(Common),
    /// Evaluate checkpoints across the test resolutions and plot the errors.
    Sweep(Common),
    /// Time Euler solving against operator inference across resolutions.
    BenchTime(Bench),
    /// Redraw the plots of every sweep CSV in the output directory.
    Report(Common),
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse().map_err(|e: noper_core::Error| e.to_string())
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: noper_core::Error| e.to_string())
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_task)]
    task: Option<Task>,
    /// Model, or a comma-separated list of models.
    #[arg(long, value_parser = parse_model, value_delimiter = ',')]
    model: Vec<ModelKind>,
    /// Training resolution in segments.
    #[arg(long)]
    resolution: Option<usize>,
    /// Comma-separated test resolutions.
    #[arg(long, value_delimiter = ',')]
    resolutions: Vec<usize>,
    /// Training samples.
    #[arg(long)]
    n: Option<usize>,
    /// Seed, or a comma-separated list of seeds.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory holding checkpoints, when it differs from the output.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct Bench {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    repeats: Option<usize>,
    /// Paths per timed call.
    #[arg(long)]
    batch: Option<usize>,
    /// Largest resolution tried while searching for the crossover.
    #[arg(long)]
    crossover_limit: Option<usize>,
}

impl Common {
    fn resolve(self) -> noper_cli::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(t) = self.task {
            c.task = t;
        }
        if !self.model.is_empty() {
            c.models = self.model;
        }
        if let Some(r) = self.resolution {
            c.resolution = r;
        }
        if !self.resolutions.is_empty() {
            c.resolutions = self.resolutions;
        }
        if let Some(n) = self.n {
            c.train.dataset_size = n;
        }
        if !self.seed.is_empty() {
            c.seeds = self.seed;
        }
        if let Some(e) = self.epochs {
            c.train.epochs = e;
        }
        if let Some(o) = self.out {
            c.out = o;
        }
        if self.checkpoint.is_some() {
            c.checkpoint = self.checkpoint;
        }
        c.validated()
    }
}

fn run(cli: Cli) -> noper_cli::Result<()> {
    noper_cli::init_threads()?;
    let written = match cli.command {
        Command::GenData(c) => commands::gen_data(&c.resolve()?)?,
        Command::Train(c) => commands::train(&c.resolve()?)?,
        Command::Eval(c) => {
            let (path, rows) = commands::eval(&c.resolve()?)?;
            for r in rows {
                println!("{} {} r={}: rel_l2 {:.4e} rel_linf {:.4e}", r.model.name(), r.task, r.resolution, r.rel_l2_mean, r.rel_linf_mean);
            }
            vec![path]
        }
        Command::Sweep(c) => commands::sweep(&c.resolve()?)?.0,
        Command::BenchTime(b) => {
            // --resolutions picks the timing grid here, not the sweep grid.
            let grid = b.common.resolutions.clone();
            let mut c = b.common.resolve()?;
            if !grid.is_empty() {
                c.bench.resolutions = grid;
            }
            if let Some(r) = b.repeats {
                c.bench.repeats = r;
            }
            if let Some(n) = b.batch {
                c.bench.batch = n;
            }
            if let Some(n) = b.crossover_limit {
                c.bench.crossover_limit = n;
            }
            let c = c.validated()?;
            let (paths, summary) = commands::bench_time(&c)?;
            for f in &summary.fits {
                println!("{:?} slope {:.3} over {}..{}", f.method, f.slope, f.from, f.to);
            }
            match summary.measured_crossover {
                Some(n) => println!("operator faster from n = {n}"),
                None => println!("no measured crossover; fitted lines meet at n = {:.0}", summary.fitted_crossover.unwrap_or(f64::NAN)),
            }
            paths
        }
        Command::Report(c) => commands::report(&c.resolve()?)?,
    };
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::FAILURE
        }
    }
}
