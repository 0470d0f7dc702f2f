//! Archive quality: coverage, spread, expected best performance and the
//! CDF/CCDF of re-evaluated fitness over evaluation scenarios.

use std::path::Path;

use rayon::prelude::*;

use crate::archive::{Archive, Direction};
use crate::error::{Error, Result};
use crate::evolve::Task;
use crate::geometry::{parent_dir, NormSpec};

/// Archives larger than this are subsampled before re-evaluation.
pub const DEFAULT_EVALUATION_CAP: usize = 10_000;

/// Fraction of niches holding an elite.
pub fn coverage(archive: &Archive) -> f64 {
    archive.coverage()
}

/// Re-evaluates the archive's elites under `scenario` and returns their
/// fitness in archive order. At most `cap` elites, chosen uniformly without
/// replacement, are evaluated.
pub fn scenario_fitnesses<T: Task>(
    archive: &Archive,
    scenario: &T,
    cap: usize,
    rng: &mut crate::Rng,
) -> Result<Vec<f64>> {
    if archive.is_empty() {
        return Err(Error::EmptyArchive);
    }
    if cap == 0 {
        return Err(Error::InvalidArgument("evaluation cap must be positive".into()));
    }
    let elites: Vec<_> = archive.elites().collect();
    let chosen: Vec<_> = if elites.len() > cap {
        let mut idx = rand::seq::index::sample(rng, elites.len(), cap).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| elites[i]).collect()
    } else {
        elites
    };
    Ok(chosen
        .par_iter()
        .map(|e| scenario.evaluate(&e.genotype).performance)
        .collect())
}

/// Best re-evaluated fitness of the archive under `scenario`.
pub fn best_performance<T: Task>(archive: &Archive, scenario: &T, cap: usize, rng: &mut crate::Rng) -> Result<f64> {
    let f = scenario_fitnesses(archive, scenario, cap, rng)?;
    Ok(scenario.direction().best(f).expect("archive is not empty"))
}

/// Query fitness values for a CDF/CCDF, e.g. `0, 1, ..., 400`.
#[derive(Clone, Debug, PartialEq)]
pub struct FitnessGrid {
    values: Vec<f64>,
}

impl FitnessGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("fitness grid is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "fitness grid must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self { values })
    }

    /// `lo, lo + step, ...` up to `hi` inclusive.
    pub fn range(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && hi >= lo) {
            return Err(Error::InvalidArgument(format!("bad grid {lo}..{hi} step {step}")));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        Self::new((0..=n).map(|i| lo + i as f64 * step).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Per query value, the median over (run, scenario) pairs of the fraction of
/// archive solutions with fitness `<= x` (minimization, CDF) or `> x`
/// (maximization, CCDF).
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionTable {
    pub direction: Direction,
    pub x: Vec<f64>,
    pub median_ratio: Vec<f64>,
}

impl DistributionTable {
    pub fn is_cdf(&self) -> bool {
        self.direction == Direction::Minimize
    }

    /// Writes `x,median_ratio` rows.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_csv(
            path,
            &["x", "median_ratio"],
            self.x
                .iter()
                .zip(&self.median_ratio)
                .map(|(x, r)| vec![x.to_string(), r.to_string()]),
        )
    }
}

/// Fraction of `fitnesses` at or below (CDF) / above (CCDF) each grid value.
pub fn ratios(fitnesses: &[f64], grid: &FitnessGrid, direction: Direction) -> Vec<f64> {
    let mut sorted = fitnesses.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    grid.values
        .iter()
        .map(|&x| {
            let at_most = sorted.partition_point(|&f| f <= x) as f64;
            match direction {
                Direction::Minimize => at_most / n,
                Direction::Maximize => (n - at_most) / n,
            }
        })
        .collect()
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Builds the table from already re-evaluated fitness sets, one per
/// (run, scenario) pair.
pub fn distribution_from_fitnesses(
    sets: &[Vec<f64>],
    grid: &FitnessGrid,
    direction: Direction,
) -> Result<DistributionTable> {
    if sets.is_empty() || sets.iter().any(Vec::is_empty) {
        return Err(Error::InvalidArgument(
            "distribution needs non-empty fitness sets".into(),
        ));
    }
    let per_pair: Vec<Vec<f64>> = sets.iter().map(|f| ratios(f, grid, direction)).collect();
    let median_ratio = (0..grid.values.len())
        .map(|i| {
            let mut column: Vec<f64> = per_pair.iter().map(|r| r[i]).collect();
            median(&mut column).expect("non-empty")
        })
        .collect();
    Ok(DistributionTable {
        direction,
        x: grid.values.clone(),
        median_ratio,
    })
}

/// Re-evaluates every archive under every scenario and tabulates the
/// CDF (minimization) or CCDF (maximization).
pub fn distribution<T: Task>(
    archives: &[Archive],
    scenarios: &[T],
    grid: &FitnessGrid,
    cap: usize,
    rng: &mut crate::Rng,
) -> Result<DistributionTable> {
    let direction = scenarios
        .first()
        .ok_or_else(|| Error::InvalidArgument("no evaluation scenarios".into()))?
        .direction();
    if archives.is_empty() {
        return Err(Error::InvalidArgument("no archives".into()));
    }
    let mut sets = Vec::with_capacity(archives.len() * scenarios.len());
    for archive in archives {
        for scenario in scenarios {
            sets.push(scenario_fitnesses(archive, scenario, cap, rng)?);
        }
    }
    distribution_from_fitnesses(&sets, grid, direction)
}

/// Mean Euclidean nearest-neighbour distance between elite descriptors,
/// divided by the largest nearest-neighbour distance.
pub fn spread(archive: &Archive) -> Result<f64> {
    let descriptors: Vec<&[f64]> = archive.elites().map(|e| e.descriptor.as_slice()).collect();
    spread_of(&descriptors)
}

pub fn spread_of(descriptors: &[&[f64]]) -> Result<f64> {
    if descriptors.len() < 2 {
        return Err(Error::TooFewElites(descriptors.len()));
    }
    let norm = NormSpec::EUCLIDEAN;
    let nn: Vec<f64> = (0..descriptors.len())
        .into_par_iter()
        .map(|i| {
            let mut best = f64::INFINITY;
            for (j, other) in descriptors.iter().enumerate() {
                if j != i {
                    if let Some(s) = norm.pow_sum_within(descriptors[i], other, best) {
                        best = best.min(s);
                    }
                }
            }
            best.sqrt()
        })
        .collect();
    let max = nn.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Err(Error::InvalidArgument("all descriptors coincide".into()));
    }
    Ok(nn.iter().sum::<f64>() / nn.len() as f64 / max)
}

/// Best re-evaluated fitness of one run's archive in one scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct BestRow {
    pub scenario: String,
    pub run: usize,
    pub best: f64,
}

/// Writes `scenario,run,best` rows.
pub fn write_best_csv(path: &Path, rows: &[BestRow]) -> Result<()> {
    write_csv(
        path,
        &["scenario", "run", "best"],
        rows.iter()
            .map(|r| vec![r.scenario.clone(), r.run.to_string(), r.best.to_string()]),
    )
}

pub(crate) fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let tmp = tempfile::NamedTempFile::new_in(parent_dir(path))?;
    {
        let mut w = csv::Writer::from_writer(tmp.as_file());
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
