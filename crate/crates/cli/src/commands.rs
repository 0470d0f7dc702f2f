//! Subcommand implementations. Each takes a validated configuration and
//! writes its results as CSV files.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use log::info;

use cvt_elites::archive::Archive;
use cvt_elites::evolve::{self, write_log_csv};
use cvt_elites::geometry::{cvt_best_of, sample_uniform, CvtConfig};
use cvt_elites::metrics::{self, BestRow};
use cvt_elites::tasks::{sample_constrained_set, TrajectoryDescriptor, LIFETIME, MAX_WHEEL_SPEED};
use cvt_elites::{rng_from_seed, Task};

use crate::config::{Algorithm, AnyTask, ExperimentConfig, TaskKind, CONFIG_FILE};

/// Runs `f` on a pool of `threads` workers (0 = one per core).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    pool.install(f)
}

#[derive(Clone, Debug)]
pub struct CentroidSummary {
    pub path: PathBuf,
    pub k: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub converged: bool,
}

/// Samples the behavior space, runs Lloyd's algorithm and writes the
/// centroid file. Maze descriptors are sampled from physically reachable
/// trajectories; the synthetic task samples its unit square uniformly.
pub fn generate_centroids(config: &ExperimentConfig) -> Result<CentroidSummary> {
    ensure!(
        config.algorithm == Algorithm::Cvt,
        "centroids are only used with algorithm = \"cvt\""
    );
    ensure!(
        config.k <= config.cvt_samples,
        "k = {} exceeds the number of CVT samples ({})",
        config.k,
        config.cvt_samples
    );
    with_threads(config.threads, || {
        let space = config.behavior_space();
        let mut rng = rng_from_seed(config.seed);
        let samples = match config.task {
            TaskKind::Maze => {
                let maze = config.load_maze()?;
                let desc = TrajectoryDescriptor::new(config.descriptor_samples, LIFETIME)?;
                sample_constrained_set(&maze, &desc, MAX_WHEEL_SPEED, config.cvt_samples, &mut rng)?
            }
            TaskKind::Synthetic => sample_uniform(&space, config.cvt_samples, &mut rng)?,
        };
        info!("sampled {} points in {} dimensions", samples.len(), samples.dims());
        let cvt_config = CvtConfig {
            max_iter: config.cvt_max_iter,
            norm: config.norm(),
            ..CvtConfig::new(config.k)
        };
        let result = cvt_best_of(&space, &samples, &cvt_config, config.cvt_restarts, &mut rng)?;
        for (i, inertia) in result.history.iter().enumerate() {
            info!("k-means iteration {}: inertia {inertia}", i + 1);
        }
        info!(
            "{} centroids after {} iterations (converged: {}), final inertia {}",
            config.k, result.iterations, result.converged, result.inertia
        );
        let path = config.centroids_path();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        result.centroids.save(&path)?;
        Ok(CentroidSummary {
            path,
            k: config.k,
            iterations: result.iterations,
            inertia: result.inertia,
            converged: result.converged,
        })
    })
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub evaluations: usize,
    pub elites: usize,
    pub coverage: f64,
    pub best: f64,
}

pub fn run_dir(output: &Path, run: usize) -> PathBuf {
    output.join(format!("run_{run}"))
}

pub const ARCHIVE_FILE: &str = "archive.csv";
pub const LOG_FILE: &str = "log.csv";

/// Executes `config.runs` seeded runs and writes `run_<i>/archive.csv` and
/// `run_<i>/log.csv` under the output directory.
pub fn run(config: &ExperimentConfig) -> Result<Vec<RunSummary>> {
    let task = config.build_task()?;
    let indexer = config.build_indexer()?;
    std::fs::create_dir_all(&config.output_dir).with_context(|| format!("creating {}", config.output_dir.display()))?;
    config.save_into(&config.output_dir)?;
    with_threads(config.threads, || {
        let mut summaries = Vec::with_capacity(config.runs);
        for i in 0..config.runs {
            let evo = config.evolution(i);
            let archive = config.empty_archive(indexer.clone(), &task);
            let record = evolve::run(&task, archive, &evo)?;
            let dir = run_dir(&config.output_dir, i);
            std::fs::create_dir_all(&dir)?;
            record.archive.save(&dir.join(ARCHIVE_FILE))?;
            write_log_csv(&dir.join(LOG_FILE), &record.generations)?;
            let last = record.generations.last().expect("initialization is logged");
            info!(
                "run {i} (seed {}): {} evaluations, {} elites, coverage {:.4}, best {}",
                evo.seed,
                record.evaluations,
                record.archive.len(),
                last.coverage,
                last.best_performance
            );
            summaries.push(RunSummary {
                run: i,
                seed: evo.seed,
                evaluations: record.evaluations,
                elites: record.archive.len(),
                coverage: last.coverage,
                best: last.best_performance,
            });
        }
        Ok(summaries)
    })
}

/// Reads the configuration echoed into a run directory.
pub fn load_run_config(dir: &Path) -> Result<ExperimentConfig> {
    let path = dir.join(CONFIG_FILE);
    ensure!(
        path.is_file(),
        "{} not found; is {} a run directory?",
        path.display(),
        dir.display()
    );
    ExperimentConfig::load(Some(&path), &[])
}

/// Loads every run's archive from a run directory.
pub fn load_archives(dir: &Path, config: &ExperimentConfig, task: &AnyTask) -> Result<Vec<Archive>> {
    let indexer = config.build_indexer()?;
    (0..config.runs)
        .map(|i| {
            let path = run_dir(dir, i).join(ARCHIVE_FILE);
            ensure!(path.is_file(), "archive {} not found", path.display());
            Archive::load(&path, indexer.clone(), task.direction())
                .with_context(|| format!("loading {}", path.display()))
        })
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct EvaluateOptions {
    /// Maze file providing the scenarios; defaults to the run's maze.
    pub maze_file: Option<PathBuf>,
    /// Also score the unmodified task, reported as scenario `base`.
    pub include_base: bool,
}

pub const BEST_FILE: &str = "best.csv";
pub const EXPECTED_BEST_FILE: &str = "expected_best.csv";
pub const DISTRIBUTION_FILE: &str = "distribution.csv";

/// Re-evaluates every archive in every evaluation scenario. Writes
/// `best.csv` (scenario, run, best), `expected_best.csv` (median over runs)
/// and `distribution.csv` (CDF for the maze, CCDF for the synthetic task,
/// over all non-base scenarios).
pub fn evaluate(dir: &Path, options: &EvaluateOptions) -> Result<()> {
    let config = load_run_config(dir)?;
    let task = config.build_task()?;
    let archives = load_archives(dir, &config, &task)?;

    let mut scenarios: Vec<(String, AnyTask)> = Vec::new();
    let mut evaluation_count = 0;
    if let AnyTask::Maze(maze_task) = &task {
        let maze = match &options.maze_file {
            Some(p) => cvt_elites::tasks::Maze::load(p).with_context(|| format!("loading maze {}", p.display()))?,
            None => config.load_maze()?,
        };
        if options.include_base {
            scenarios.push(("base".into(), AnyTask::Maze(maze_task.with_maze(maze.clone()))));
        }
        for m in maze.evaluation_scenarios()? {
            scenarios.push((m.name.clone(), AnyTask::Maze(maze_task.with_maze(m))));
            evaluation_count += 1;
        }
    } else {
        scenarios.push(("base".into(), task.clone()));
    }
    // the distribution is taken over evaluation scenarios when there are any
    let in_distribution = |name: &str| evaluation_count == 0 || name != "base";

    with_threads(config.threads, || {
        let mut rng = rng_from_seed(config.seed);
        let mut rows = Vec::new();
        let mut sets = Vec::new();
        for (run, archive) in archives.iter().enumerate() {
            for (name, scenario) in &scenarios {
                let f = metrics::scenario_fitnesses(archive, scenario, config.evaluation_cap, &mut rng)?;
                let best = task.direction().best(f.iter().copied()).expect("archive not empty");
                rows.push(BestRow {
                    scenario: name.clone(),
                    run,
                    best,
                });
                if in_distribution(name) {
                    sets.push(f);
                }
            }
        }
        metrics::write_best_csv(&dir.join(BEST_FILE), &rows)?;

        let expected: Vec<Vec<String>> = scenarios
            .iter()
            .map(|(name, _)| {
                let mut v: Vec<f64> = rows.iter().filter(|r| &r.scenario == name).map(|r| r.best).collect();
                vec![name.clone(), metrics::median(&mut v).expect("runs >= 1").to_string()]
            })
            .collect();
        write_rows(&dir.join(EXPECTED_BEST_FILE), &["scenario", "median_best"], expected)?;

        let table = metrics::distribution_from_fitnesses(&sets, &config.fitness_grid(), task.direction())?;
        table.save(&dir.join(DISTRIBUTION_FILE))?;
        info!("evaluated {} archives in {} scenarios", archives.len(), scenarios.len());
        Ok(())
    })
}

pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Clone, Debug, PartialEq)]
pub struct ArchiveMetrics {
    pub run: usize,
    pub elites: usize,
    pub coverage: f64,
    /// `None` with fewer than two elites.
    pub spread: Option<f64>,
    pub best: f64,
}

/// Coverage, spread and stored best performance per run; written to
/// `metrics.csv`.
pub fn metrics(dir: &Path) -> Result<Vec<ArchiveMetrics>> {
    let config = load_run_config(dir)?;
    let task = config.build_task()?;
    let archives = load_archives(dir, &config, &task)?;
    let out: Vec<ArchiveMetrics> = with_threads(config.threads, || {
        archives
            .iter()
            .enumerate()
            .map(|(run, a)| {
                Ok(ArchiveMetrics {
                    run,
                    elites: a.len(),
                    coverage: metrics::coverage(a),
                    spread: if a.len() >= 2 { Some(metrics::spread(a)?) } else { None },
                    best: a.best().map_or(f64::NAN, |(_, e)| e.performance),
                })
            })
            .collect()
    })?;
    write_rows(
        &dir.join(METRICS_FILE),
        &["run", "elites", "coverage", "spread", "best"],
        out.iter().map(|m| {
            vec![
                m.run.to_string(),
                m.elites.to_string(),
                m.coverage.to_string(),
                m.spread.map_or(String::new(), |s| s.to_string()),
                m.best.to_string(),
            ]
        }),
    )?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    /// Number of niches.
    K,
    /// Minkowski order of the distance.
    P,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::K => "k",
            SweepAxis::P => "p",
        })
    }
}

pub const SWEEP_FILE: &str = "sweep.csv";

/// Runs the whole pipeline (centroids, runs, evaluation, metrics) once per
/// axis value, each in `<output_dir>/<axis>_<value>`, and collects per-run
/// metrics in `<output_dir>/sweep.csv`.
pub fn sweep(config: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<PathBuf>> {
    if values.is_empty() {
        bail!("the sweep axis has no values");
    }
    ensure!(
        config.algorithm == Algorithm::Cvt,
        "sweeps vary CVT parameters; set algorithm = \"cvt\""
    );
    let mut dirs = Vec::new();
    let mut rows = Vec::new();
    for &v in values {
        let mut sub = config.clone();
        let label = match axis {
            SweepAxis::K => {
                ensure!(
                    v >= 1.0 && v.fract() == 0.0,
                    "k values must be positive integers, got {v}"
                );
                sub.k = v as usize;
                format!("{}", sub.k)
            }
            SweepAxis::P => {
                sub.norm_order = v;
                format!("{v}")
            }
        };
        sub.output_dir = config.output_dir.join(format!("{axis}_{label}"));
        sub.centroids_file = None;
        sub.validate()?;
        info!("sweep {axis} = {label}");
        generate_centroids(&sub)?;
        run(&sub)?;
        evaluate(&sub.output_dir, &EvaluateOptions::default())?;
        for m in metrics(&sub.output_dir)? {
            rows.push(vec![
                axis.to_string(),
                label.clone(),
                m.run.to_string(),
                m.elites.to_string(),
                m.coverage.to_string(),
                m.spread.map_or(String::new(), |s| s.to_string()),
                m.best.to_string(),
            ]);
        }
        dirs.push(sub.output_dir);
    }
    write_rows(
        &config.output_dir.join(SWEEP_FILE),
        &["axis", "value", "run", "elites", "coverage", "spread", "best"],
        rows,
    )?;
    Ok(dirs)
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        std::fs::write(tmp.path(), text)?;
    }
    tmp.persist(path)?;
    Ok(())
}
