//! Experiment configuration: a TOML file whose keys can be overridden from
//! the command line. Defaults follow the maze setup (2000 random
//! initial solutions, 200 offspring per generation, 200k evaluations,
//! k = 5000 niches from 10^6 samples).

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use cvt_elites::archive::{Archive, GridSpec, Indexer};
use cvt_elites::evolve::{Evaluation, EvolutionConfig};
use cvt_elites::metrics::FitnessGrid;
use cvt_elites::tasks::{Maze, MazeTask, SyntheticTask, LIFETIME};
use cvt_elites::{BehaviorSpace, CentroidIndex, Centroids, Direction, DiscreteGenotypeSpec, NormSpec, Task};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Maze,
    Synthetic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Grid,
    Cvt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub maze_file: PathBuf,
    /// Trajectory samples `m`; the maze descriptor has `2m` dimensions.
    pub descriptor_samples: usize,
    pub hidden_units: usize,
    /// Spacing of the synthetic task's coordinate values.
    pub synthetic_step: f64,

    pub algorithm: Algorithm,
    /// Cells per dimension for grid MAP-Elites. A single value applies to
    /// every dimension.
    pub discretizations: Vec<usize>,
    /// Number of CVT niches.
    pub k: usize,
    /// Monte Carlo samples `K` used to build the CVT.
    pub cvt_samples: usize,
    pub cvt_max_iter: usize,
    pub cvt_restarts: usize,
    /// Minkowski order used for nearest-centroid lookups and the CVT.
    pub norm_order: f64,
    /// Defaults to `<output_dir>/centroids.txt`.
    pub centroids_file: Option<PathBuf>,

    pub initial_count: usize,
    pub offspring_per_generation: usize,
    /// Evaluation budget per run, initial solutions included.
    pub total_evaluations: usize,
    pub mutation_rate: f64,

    /// Run `i` uses seed `seed + i`.
    pub seed: u64,
    pub runs: usize,
    pub output_dir: PathBuf,
    /// Worker threads for evaluations; 0 uses every core.
    pub threads: usize,

    /// Largest number of elites re-evaluated per archive and scenario.
    pub evaluation_cap: usize,
    /// Query values of the CDF/CCDF: `[min, max, step]`. Defaults to
    /// `[0, 400, 1]` for the maze and `[0, 1, 0.01]` for the synthetic task.
    pub fitness_grid: Option<[f64; 3]>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: TaskKind::Maze,
            maze_file: PathBuf::from("data/open_maze.txt"),
            descriptor_samples: 1,
            hidden_units: cvt_elites::tasks::DEFAULT_HIDDEN,
            synthetic_step: 0.005,
            algorithm: Algorithm::Cvt,
            discretizations: Vec::new(),
            k: 5000,
            cvt_samples: 1_000_000,
            cvt_max_iter: 100,
            cvt_restarts: 1,
            norm_order: 2.0,
            centroids_file: None,
            initial_count: 2000,
            offspring_per_generation: 200,
            total_evaluations: 200_000,
            mutation_rate: 0.1,
            seed: 0,
            runs: 30,
            output_dir: PathBuf::from("results"),
            threads: 0,
            evaluation_cap: cvt_elites::metrics::DEFAULT_EVALUATION_CAP,
            fitness_grid: None,
        }
    }
}

/// File name of the configuration echoed into every output directory.
pub const CONFIG_FILE: &str = "config.toml";

impl ExperimentConfig {
    /// Reads `path` (if any), applies `key = value` overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                text.parse::<toml::Table>()
                    .with_context(|| format!("parsing {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for (k, v) in overrides {
            table.insert(k.clone(), v.clone());
        }
        let config: Self = toml::Value::Table(table).try_into().context("invalid configuration")?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.runs >= 1, "runs must be at least 1");
        ensure!(self.evaluation_cap >= 1, "evaluation_cap must be at least 1");
        NormSpec::new(self.norm_order)?;
        self.evolution(0).validate()?;
        match self.task {
            TaskKind::Maze => {
                ensure!(
                    (1..=LIFETIME).contains(&self.descriptor_samples),
                    "descriptor_samples must be between 1 and {LIFETIME}"
                );
                ensure!(self.hidden_units >= 1, "hidden_units must be at least 1");
                ensure!(
                    self.maze_file.is_file(),
                    "maze file {} does not exist",
                    self.maze_file.display()
                );
            }
            TaskKind::Synthetic => {
                ensure!(
                    self.synthetic_step > 0.0 && self.synthetic_step <= 0.5,
                    "synthetic_step must be in (0, 0.5]"
                );
            }
        }
        match self.algorithm {
            Algorithm::Grid => {
                ensure!(
                    !self.discretizations.is_empty(),
                    "grid MAP-Elites needs `discretizations`"
                );
                ensure!(
                    self.discretizations.iter().all(|&n| n >= 1),
                    "discretizations must be positive"
                );
                let d = self.descriptor_dims();
                ensure!(
                    self.discretizations.len() == 1 || self.discretizations.len() == d,
                    "{} discretizations given for a {d}-dimensional descriptor",
                    self.discretizations.len()
                );
            }
            Algorithm::Cvt => {
                ensure!(self.k >= 1, "k must be at least 1");
                ensure!(self.cvt_max_iter >= 1, "cvt_max_iter must be at least 1");
                ensure!(self.cvt_restarts >= 1, "cvt_restarts must be at least 1");
            }
        }
        if let Some(g) = self.fitness_grid {
            FitnessGrid::range(g[0], g[1], g[2])?;
        }
        Ok(())
    }

    pub fn descriptor_dims(&self) -> usize {
        match self.task {
            TaskKind::Maze => 2 * self.descriptor_samples,
            TaskKind::Synthetic => 2,
        }
    }

    /// Descriptors of both tasks live in the unit cube.
    pub fn behavior_space(&self) -> BehaviorSpace {
        BehaviorSpace::unit(self.descriptor_dims()).expect("positive dimension")
    }

    pub fn norm(&self) -> NormSpec {
        NormSpec::new(self.norm_order).expect("validated")
    }

    pub fn centroids_path(&self) -> PathBuf {
        self.centroids_file
            .clone()
            .unwrap_or_else(|| self.output_dir.join("centroids.txt"))
    }

    pub fn evolution(&self, run: usize) -> EvolutionConfig {
        EvolutionConfig {
            initial_count: self.initial_count,
            offspring_per_generation: self.offspring_per_generation,
            total_evaluations: self.total_evaluations,
            mutation_rate: self.mutation_rate,
            seed: self.seed.wrapping_add(run as u64),
        }
    }

    pub fn fitness_grid(&self) -> FitnessGrid {
        let [lo, hi, step] = self.fitness_grid.unwrap_or(match self.task {
            TaskKind::Maze => [0.0, 400.0, 1.0],
            TaskKind::Synthetic => [0.0, 1.0, 0.01],
        });
        FitnessGrid::range(lo, hi, step).expect("validated")
    }

    pub fn load_maze(&self) -> Result<Maze> {
        Maze::load(&self.maze_file).with_context(|| format!("loading maze {}", self.maze_file.display()))
    }

    pub fn build_task(&self) -> Result<AnyTask> {
        Ok(match self.task {
            TaskKind::Maze => AnyTask::Maze(MazeTask::new(
                self.load_maze()?,
                self.descriptor_samples,
                self.hidden_units,
            )?),
            TaskKind::Synthetic => AnyTask::Synthetic(SyntheticTask::new(self.synthetic_step)?),
        })
    }

    /// Grid spec or loaded centroids, as configured. Fails cleanly for grids
    /// too large to index.
    pub fn build_indexer(&self) -> Result<Indexer> {
        match self.algorithm {
            Algorithm::Grid => {
                let d = self.descriptor_dims();
                let discretizations = if self.discretizations.len() == 1 {
                    vec![self.discretizations[0]; d]
                } else {
                    self.discretizations.clone()
                };
                Ok(Indexer::Grid(GridSpec::new(discretizations, self.behavior_space())?))
            }
            Algorithm::Cvt => {
                let path = self.centroids_path();
                if !path.is_file() {
                    bail!(
                        "centroid file {} not found; run `generate-centroids` first",
                        path.display()
                    );
                }
                let centroids = Centroids::load(&path, self.behavior_space())
                    .with_context(|| format!("loading centroids {}", path.display()))?;
                ensure!(
                    centroids.k() == self.k,
                    "{} holds {} centroids but k = {}",
                    path.display(),
                    centroids.k(),
                    self.k
                );
                Ok(Indexer::Centroids(CentroidIndex::build(centroids, self.norm())))
            }
        }
    }

    pub fn empty_archive(&self, indexer: Indexer, task: &AnyTask) -> Archive {
        Archive::new(indexer, task.direction())
    }

    /// The configuration with paths made absolute, as echoed into output
    /// directories.
    pub fn resolved(&self) -> Result<Self> {
        let abs = |p: &Path| -> Result<PathBuf> {
            Ok(if p.is_absolute() {
                p.to_path_buf()
            } else {
                std::env::current_dir()?.join(p)
            })
        };
        Ok(Self {
            maze_file: abs(&self.maze_file)?,
            centroids_file: Some(abs(&self.centroids_path())?),
            output_dir: abs(&self.output_dir)?,
            ..self.clone()
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Writes the resolved configuration to `dir/config.toml`.
    pub fn save_into(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let tmp = tempfile::NamedTempFile::new_in(dir)?;
        std::fs::write(tmp.path(), self.resolved()?.to_toml()?)?;
        tmp.persist(dir.join(CONFIG_FILE))?;
        Ok(())
    }
}

/// Parses `key=value`; the value is read as TOML and falls back to a string.
pub fn parse_override(s: &str) -> Result<(String, toml::Value)> {
    let Some((key, value)) = s.split_once('=') else {
        bail!("expected key=value, got `{s}`");
    };
    let key = key.trim();
    ensure!(!key.is_empty(), "empty key in `{s}`");
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key.to_string(), parsed))
}

/// One of the built-in tasks.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum AnyTask {
    Maze(MazeTask),
    Synthetic(SyntheticTask),
}

impl Task for AnyTask {
    fn genotype_spec(&self) -> &DiscreteGenotypeSpec {
        match self {
            AnyTask::Maze(t) => t.genotype_spec(),
            AnyTask::Synthetic(t) => t.genotype_spec(),
        }
    }

    fn descriptor_dims(&self) -> usize {
        match self {
            AnyTask::Maze(t) => t.descriptor_dims(),
            AnyTask::Synthetic(t) => t.descriptor_dims(),
        }
    }

    fn direction(&self) -> Direction {
        match self {
            AnyTask::Maze(t) => t.direction(),
            AnyTask::Synthetic(t) => t.direction(),
        }
    }

    fn evaluate(&self, genotype: &[f64]) -> Evaluation {
        match self {
            AnyTask::Maze(t) => t.evaluate(genotype),
            AnyTask::Synthetic(t) => t.evaluate(genotype),
        }
    }
}
