use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

use cvt_elites_cli::commands::{self, EvaluateOptions, SweepAxis};
use cvt_elites_cli::config::{parse_override, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "cvt-elites",
    version,
    about = "Quality-diversity experiments with CVT-MAP-Elites"
)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the centroid file for the configured behavior space.
    GenerateCentroids(ConfigArgs),
    /// Run MAP-Elites (grid or CVT) and write archives and logs.
    Run(ConfigArgs),
    /// Re-evaluate the archives of a run directory in the test scenarios.
    Evaluate {
        #[arg(long)]
        run_dir: PathBuf,
        /// Maze file with the evaluation scenarios (default: the run's maze).
        #[arg(long)]
        maze: Option<PathBuf>,
        /// Also score the unmodified task as scenario `base`.
        #[arg(long)]
        include_base: bool,
    },
    /// Repeat generate-centroids, run and evaluate over values of k or p.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated values, e.g. 5,50,500.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
    },
    /// Coverage, spread and best performance of each archive in a run directory.
    Metrics {
        #[arg(long)]
        run_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    K,
    P,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override any configuration key, e.g. --set mutation_rate=0.05.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    algorithm: Option<String>,
    /// Trajectory samples in the maze descriptor.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Evaluation budget per run.
    #[arg(long)]
    evaluations: Option<usize>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut overrides = self.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>>>()?;
        let mut push = |key: &str, value: toml::Value| overrides.push((key.to_string(), value));
        let int = |v: usize| toml::Value::Integer(v as i64);
        if let Some(v) = &self.task {
            push("task", v.clone().into());
        }
        if let Some(v) = &self.algorithm {
            push("algorithm", v.clone().into());
        }
        if let Some(v) = self.samples {
            push("descriptor_samples", int(v));
        }
        if let Some(v) = self.k {
            push("k", int(v));
        }
        if let Some(v) = self.seed {
            push("seed", toml::Value::Integer(i64::try_from(v)?));
        }
        if let Some(v) = self.runs {
            push("runs", int(v));
        }
        if let Some(v) = self.evaluations {
            push("total_evaluations", int(v));
        }
        if let Some(v) = &self.output {
            push("output_dir", v.display().to_string().into());
        }
        if let Some(v) = self.threads {
            push("threads", int(v));
        }
        ExperimentConfig::load(self.config.as_deref(), &overrides)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::GenerateCentroids(args) => {
            let s = commands::generate_centroids(&args.load()?)?;
            println!(
                "wrote {} centroids to {} ({} iterations, inertia {:.6e})",
                s.k,
                s.path.display(),
                s.iterations,
                s.inertia
            );
        }
        Command::Run(args) => {
            let config = args.load()?;
            for r in commands::run(&config)? {
                println!(
                    "run {}: seed {}, {} evaluations, {} elites, coverage {:.4}, best {}",
                    r.run, r.seed, r.evaluations, r.elites, r.coverage, r.best
                );
            }
            println!("results in {}", config.output_dir.display());
        }
        Command::Evaluate {
            run_dir,
            maze,
            include_base,
        } => {
            commands::evaluate(
                &run_dir,
                &EvaluateOptions {
                    maze_file: maze,
                    include_base,
                },
            )?;
            println!("wrote {}", run_dir.join(commands::BEST_FILE).display());
        }
        Command::Sweep { config, axis, values } => {
            let axis = match axis {
                Axis::K => SweepAxis::K,
                Axis::P => SweepAxis::P,
            };
            let config = config.load()?;
            commands::sweep(&config, axis, &values)?;
            println!("wrote {}", config.output_dir.join(commands::SWEEP_FILE).display());
        }
        Command::Metrics { run_dir } => {
            for m in commands::metrics(&run_dir)? {
                let spread = m.spread.map_or("n/a".to_string(), |s| format!("{s:.4}"));
                println!(
                    "run {}: {} elites, coverage {:.4}, spread {spread}, best {}",
                    m.run, m.elites, m.coverage, m.best
                );
            }
        }
    }
    Ok(())
}
