//! The selection/variation loop shared by grid and CVT MAP-Elites.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::archive::{Archive, Direction, Elite};
use crate::error::{Error, Result};
use crate::geometry::parent_dir;

/// Genotypes are fixed-length vectors whose genes take values from a finite,
/// sorted set.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteGenotypeSpec {
    length: usize,
    values: Vec<f64>,
}

impl DiscreteGenotypeSpec {
    pub fn new(length: usize, values: Vec<f64>) -> Result<Self> {
        if length == 0 {
            return Err(Error::InvalidArgument("genotype length must be positive".into()));
        }
        if values.len() < 2 {
            return Err(Error::InvalidArgument("a gene needs at least two values".into()));
        }
        if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "gene values must be finite, sorted and distinct".into(),
            ));
        }
        Ok(Self { length, values })
    }

    /// Evenly spaced values `lo, lo + step, ..., hi`, e.g. `{-2, -1.5, ..., 2}`.
    pub fn stepped(length: usize, lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && hi > lo) {
            return Err(Error::InvalidArgument(format!(
                "bad value range {lo}..{hi} step {step}"
            )));
        }
        let intervals = ((hi - lo) / step).round() as usize;
        let values = (0..=intervals)
            .map(|i| lo + (hi - lo) * i as f64 / intervals as f64)
            .collect();
        Self::new(length, values)
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn value_index(&self, v: f64) -> Option<usize> {
        self.values.binary_search_by(|x| x.total_cmp(&v)).ok()
    }

    pub fn conforms(&self, genotype: &[f64]) -> bool {
        genotype.len() == self.length && genotype.iter().all(|&g| self.value_index(g).is_some())
    }
}

/// Each gene drawn uniformly from the value set.
pub fn random_genotype<R: Rng + ?Sized>(spec: &DiscreteGenotypeSpec, rng: &mut R) -> Vec<f64> {
    (0..spec.length)
        .map(|_| spec.values[rng.random_range(0..spec.values.len())])
        .collect()
}

/// With probability `rate`, each gene is replaced by a different value
/// drawn uniformly from the rest of the set.
pub fn mutate<R: Rng + ?Sized>(
    genotype: &[f64],
    spec: &DiscreteGenotypeSpec,
    rate: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n = spec.values.len();
    genotype
        .iter()
        .map(|&g| {
            let current = spec
                .value_index(g)
                .ok_or_else(|| Error::InvalidArgument(format!("gene value {g} is not in the value set")))?;
            if rng.random::<f64>() < rate {
                let j = rng.random_range(0..n - 1);
                Ok(spec.values[if j >= current { j + 1 } else { j }])
            } else {
                Ok(g)
            }
        })
        .collect()
}

/// Result of evaluating one genotype.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub performance: f64,
    pub descriptor: Vec<f64>,
}

/// A deterministic problem MAP-Elites can illuminate.
pub trait Task: Sync {
    fn genotype_spec(&self) -> &DiscreteGenotypeSpec;
    fn descriptor_dims(&self) -> usize;
    fn direction(&self) -> Direction;
    fn evaluate(&self, genotype: &[f64]) -> Evaluation;
}

impl<T: Task + ?Sized> Task for &T {
    fn genotype_spec(&self) -> &DiscreteGenotypeSpec {
        (**self).genotype_spec()
    }
    fn descriptor_dims(&self) -> usize {
        (**self).descriptor_dims()
    }
    fn direction(&self) -> Direction {
        (**self).direction()
    }
    fn evaluate(&self, genotype: &[f64]) -> Evaluation {
        (**self).evaluate(genotype)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionConfig {
    /// Random solutions evaluated before selection starts.
    pub initial_count: usize,
    pub offspring_per_generation: usize,
    /// Total evaluation budget, the initial batch included. Only whole
    /// generations run: `initial_count + g * offspring_per_generation`
    /// never exceeds it (2000 + 990 * 200 = 200 000 for the maze defaults).
    pub total_evaluations: usize,
    pub mutation_rate: f64,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            initial_count: 2000,
            offspring_per_generation: 200,
            total_evaluations: 200_000,
            mutation_rate: 0.1,
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.initial_count == 0 {
            return Err(Error::InvalidArgument("initial_count must be at least 1".into()));
        }
        if self.offspring_per_generation == 0 {
            return Err(Error::InvalidArgument(
                "offspring_per_generation must be at least 1".into(),
            ));
        }
        if self.total_evaluations < self.initial_count {
            return Err(Error::BudgetTooSmall {
                budget: self.total_evaluations,
                initial: self.initial_count,
            });
        }
        if !(self.mutation_rate > 0.0 && self.mutation_rate <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "mutation rate {} is outside (0, 1]",
                self.mutation_rate
            )));
        }
        Ok(())
    }

    /// Number of full generations the budget allows after initialization.
    pub fn generations(&self) -> usize {
        (self.total_evaluations - self.initial_count) / self.offspring_per_generation
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationStats {
    /// 0 is the random initialization.
    pub generation: usize,
    pub evaluations: usize,
    pub best_performance: f64,
    pub coverage: f64,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub generations: Vec<GenerationStats>,
    pub evaluations: usize,
    /// Best solution evaluated during the run.
    pub best_ever: Elite,
    pub archive: Archive,
}

/// Runs MAP-Elites on `task`, filling `archive`.
///
/// Offspring genotypes of a generation are produced sequentially from one
/// random stream seeded with `config.seed`, evaluated in parallel, and
/// inserted in order. Results do not depend on the number of threads.
pub fn run<T: Task>(task: &T, archive: Archive, config: &EvolutionConfig) -> Result<RunRecord> {
    run_observed(task, archive, config, |_, _| {})
}

/// [`run`], calling `observe` after initialization and after every generation.
pub fn run_observed<T: Task>(
    task: &T,
    mut archive: Archive,
    config: &EvolutionConfig,
    mut observe: impl FnMut(&GenerationStats, &Archive),
) -> Result<RunRecord> {
    config.validate()?;
    if task.descriptor_dims() != archive.indexer().dims() {
        return Err(Error::DimensionMismatch {
            expected: archive.indexer().dims(),
            actual: task.descriptor_dims(),
        });
    }
    if task.direction() != archive.direction() {
        return Err(Error::InvalidArgument(format!(
            "task wants to {} but the archive is set to {}",
            task.direction(),
            archive.direction()
        )));
    }
    let spec = task.genotype_spec();
    let direction = task.direction();
    let mut rng = crate::rng_from_seed(config.seed);

    let mut best_ever: Option<Elite> = None;
    let mut evaluations = 0;
    let mut generations = Vec::with_capacity(config.generations() + 1);

    let mut batch: Vec<Vec<f64>> = (0..config.initial_count)
        .map(|_| random_genotype(spec, &mut rng))
        .collect();
    for generation in 0..=config.generations() {
        if generation > 0 {
            batch.clear();
            for _ in 0..config.offspring_per_generation {
                let parent = archive.random_elite(&mut rng)?;
                batch.push(mutate(&parent.genotype, spec, config.mutation_rate, &mut rng)?);
            }
        }
        let results: Vec<Evaluation> = batch.par_iter().map(|g| task.evaluate(g)).collect();
        evaluations += batch.len();
        for (genotype, eval) in batch.drain(..).zip(results) {
            let elite = Elite {
                genotype,
                performance: eval.performance,
                descriptor: eval.descriptor,
            };
            if best_ever
                .as_ref()
                .is_none_or(|b| direction.is_better(elite.performance, b.performance))
            {
                best_ever = Some(elite.clone());
            }
            archive.insert(elite)?;
        }
        let stats = GenerationStats {
            generation,
            evaluations,
            best_performance: archive.best().map_or(direction.worst(), |(_, e)| e.performance),
            coverage: archive.coverage(),
        };
        observe(&stats, &archive);
        generations.push(stats);
    }

    Ok(RunRecord {
        generations,
        evaluations,
        best_ever: best_ever.expect("initial batch is never empty"),
        archive,
    })
}

/// Writes per-generation statistics as CSV:
/// `generation,evaluations,best_performance,coverage`.
pub fn write_log_csv(path: &Path, stats: &[GenerationStats]) -> Result<()> {
    let tmp = tempfile::NamedTempFile::new_in(parent_dir(path))?;
    {
        let mut w = csv::Writer::from_writer(tmp.as_file());
        w.write_record(["generation", "evaluations", "best_performance", "coverage"])?;
        for s in stats {
            w.write_record([
                s.generation.to_string(),
                s.evaluations.to_string(),
                s.best_performance.to_string(),
                s.coverage.to_string(),
            ])?;
        }
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
