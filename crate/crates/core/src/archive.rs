//! Elite archives.
//!
//! An [`Archive`] maps niche ids to the best solution seen in that niche.
//! Niches come either from a regular grid over the behavior space
//! ([`GridSpec`]) or from the Voronoi cells of a set of centroids
//! ([`CentroidIndex`]). Only occupied niches take memory.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::geometry::{parent_dir, BehaviorSpace, CentroidIndex};

/// Largest number of niches a grid archive may declare.
pub const MAX_GRID_CELLS: u64 = 1 << 40;

/// Bytes a dense grid needs per cell for its slot table (one 32-bit slot
/// index per cell). Used only for the memory estimate in capacity errors.
pub const GRID_BYTES_PER_CELL: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    /// Whether `candidate` strictly beats `incumbent`.
    pub fn is_better(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Direction::Maximize => candidate > incumbent,
            Direction::Minimize => candidate < incumbent,
        }
    }

    /// Best value of a sequence; the first one wins ties.
    pub fn best<I: IntoIterator<Item = f64>>(self, values: I) -> Option<f64> {
        values.into_iter().fold(None, |acc, v| match acc {
            Some(b) if !self.is_better(v, b) => Some(b),
            _ => Some(v),
        })
    }

    /// The worst possible value, beaten by any finite performance.
    pub fn worst(self) -> f64 {
        match self {
            Direction::Maximize => f64::NEG_INFINITY,
            Direction::Minimize => f64::INFINITY,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Maximize => "maximize",
            Direction::Minimize => "minimize",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maximize" | "max" => Ok(Direction::Maximize),
            "minimize" | "min" => Ok(Direction::Minimize),
            _ => Err(Error::InvalidArgument(format!("unknown direction {s:?}"))),
        }
    }
}

/// A solution together with its evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Elite {
    pub genotype: Vec<f64>,
    pub performance: f64,
    pub descriptor: Vec<f64>,
}

/// Regular grid with `discretizations[i]` bins along dimension `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    discretizations: Vec<usize>,
    strides: Vec<u64>,
    cells: u64,
    space: BehaviorSpace,
}

impl GridSpec {
    pub fn new(discretizations: Vec<usize>, space: BehaviorSpace) -> Result<Self> {
        space.check_dims(discretizations.len())?;
        if discretizations.contains(&0) {
            return Err(Error::InvalidArgument("every dimension needs at least one bin".into()));
        }
        let exact = discretizations
            .iter()
            .try_fold(1u128, |acc, &n| acc.checked_mul(n as u128));
        match exact {
            Some(cells) if cells <= MAX_GRID_CELLS as u128 => {}
            _ => {
                let approx: f64 = discretizations.iter().map(|&n| n as f64).product();
                let memory_bytes = approx * GRID_BYTES_PER_CELL;
                return Err(Error::GridCapacity {
                    cells: exact.map_or_else(|| format!("{approx:.3e}"), |c| c.to_string()),
                    limit: MAX_GRID_CELLS,
                    memory: format_bytes(memory_bytes),
                    memory_bytes,
                });
            }
        }
        let mut strides = vec![1u64; discretizations.len()];
        for i in (0..discretizations.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * discretizations[i + 1] as u64;
        }
        let cells = strides[0] * discretizations[0] as u64;
        Ok(Self {
            discretizations,
            strides,
            cells,
            space,
        })
    }

    pub fn discretizations(&self) -> &[usize] {
        &self.discretizations
    }

    pub fn space(&self) -> &BehaviorSpace {
        &self.space
    }

    pub fn cells(&self) -> u64 {
        self.cells
    }

    /// Row-major cell id of `b`. Coordinates outside the bounds fall into
    /// the edge bins.
    pub fn cell_index(&self, b: &[f64]) -> Result<u64> {
        self.space.check_dims(b.len())?;
        let mut id = 0;
        for (i, &x) in b.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::InvalidArgument("descriptor has non-finite coordinates".into()));
            }
            let (lo, hi) = (self.space.lower()[i], self.space.upper()[i]);
            let n = self.discretizations[i];
            let bin = (n as f64 * (x - lo) / (hi - lo)).floor();
            let bin = if bin <= 0.0 { 0 } else { (bin as usize).min(n - 1) };
            id += bin as u64 * self.strides[i];
        }
        Ok(id)
    }

    /// Center of a cell, the inverse of [`cell_index`](Self::cell_index).
    pub fn cell_center(&self, id: u64) -> Vec<f64> {
        let mut rest = id;
        self.strides
            .iter()
            .enumerate()
            .map(|(i, &stride)| {
                let bin = rest / stride;
                rest %= stride;
                let (lo, hi) = (self.space.lower()[i], self.space.upper()[i]);
                lo + (bin as f64 + 0.5) * (hi - lo) / self.discretizations[i] as f64
            })
            .collect()
    }
}

/// Formats a byte count in binary units, stopping at TB.
pub fn format_bytes(bytes: f64) -> String {
    const UNITS: [&str; 5] = ["B", "KB", "MB", "GB", "TB"];
    let mut v = bytes;
    let mut unit = 0;
    while v >= 1024.0 && unit + 1 < UNITS.len() {
        v /= 1024.0;
        unit += 1;
    }
    if v.fract() == 0.0 && v < 1e15 {
        format!("{v:.0} {}", UNITS[unit])
    } else {
        format!("{v:.1} {}", UNITS[unit])
    }
}

/// How descriptors are mapped to niches.
#[derive(Clone, Debug)]
pub enum Indexer {
    Grid(GridSpec),
    Centroids(CentroidIndex),
}

impl Indexer {
    pub fn capacity(&self) -> u64 {
        match self {
            Indexer::Grid(g) => g.cells(),
            Indexer::Centroids(c) => c.k() as u64,
        }
    }

    pub fn dims(&self) -> usize {
        match self {
            Indexer::Grid(g) => g.space().dims(),
            Indexer::Centroids(c) => c.dims(),
        }
    }

    pub fn niche(&self, b: &[f64]) -> Result<u64> {
        match self {
            Indexer::Grid(g) => g.cell_index(b),
            Indexer::Centroids(c) => c.nearest_centroid(b).map(|id| id as u64),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    Added,
    Replaced,
    Rejected,
}

impl InsertOutcome {
    pub fn improved(self) -> bool {
        self != InsertOutcome::Rejected
    }
}

/// Archive of at most one elite per niche.
///
/// Occupied niches are kept in first-occupation order, which makes uniform
/// selection reproducible for a given seed.
#[derive(Clone, Debug)]
pub struct Archive {
    indexer: Indexer,
    direction: Direction,
    elites: IndexMap<u64, Elite>,
}

impl Archive {
    pub fn new(indexer: Indexer, direction: Direction) -> Self {
        Self {
            indexer,
            direction,
            elites: IndexMap::new(),
        }
    }

    pub fn indexer(&self) -> &Indexer {
        &self.indexer
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn capacity(&self) -> u64 {
        self.indexer.capacity()
    }

    pub fn len(&self) -> usize {
        self.elites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elites.is_empty()
    }

    pub fn get(&self, niche: u64) -> Option<&Elite> {
        self.elites.get(&niche)
    }

    /// Occupied niches with their elites, in first-occupation order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = (u64, &Elite)> + '_ {
        self.elites.iter().map(|(&n, e)| (n, e))
    }

    pub fn elites(&self) -> impl ExactSizeIterator<Item = &Elite> + '_ {
        self.elites.values()
    }

    /// Puts `elite` in its niche if the niche is empty or the elite is
    /// strictly better than the incumbent.
    pub fn insert(&mut self, elite: Elite) -> Result<InsertOutcome> {
        if elite.performance.is_nan() {
            return Err(Error::InvalidArgument("performance is NaN".into()));
        }
        let niche = self.indexer.niche(&elite.descriptor)?;
        Ok(match self.elites.get_mut(&niche) {
            None => {
                self.elites.insert(niche, elite);
                InsertOutcome::Added
            }
            Some(incumbent) if self.direction.is_better(elite.performance, incumbent.performance) => {
                *incumbent = elite;
                InsertOutcome::Replaced
            }
            Some(_) => InsertOutcome::Rejected,
        })
    }

    /// Fraction of niches that hold an elite.
    pub fn coverage(&self) -> f64 {
        self.len() as f64 / self.capacity() as f64
    }

    /// An elite drawn uniformly among occupied niches.
    pub fn random_elite(&self, rng: &mut crate::Rng) -> Result<&Elite> {
        if self.elites.is_empty() {
            return Err(Error::EmptyArchive);
        }
        let i = rng.random_range(0..self.elites.len());
        Ok(&self.elites[i])
    }

    /// The best elite; the earliest occupied niche wins ties.
    pub fn best(&self) -> Option<(u64, &Elite)> {
        let mut best: Option<(u64, &Elite)> = None;
        for (n, e) in self.iter() {
            match best {
                Some((_, b)) if !self.direction.is_better(e.performance, b.performance) => {}
                _ => best = Some((n, e)),
            }
        }
        best
    }

    /// Writes the archive as CSV, one row per occupied niche:
    /// `niche_id, performance, b_0..b_{d-1}, genotype_len, g_0..g_{n-1}`.
    ///
    /// The file is written to a temporary sibling and renamed into place, so
    /// readers never see a partial archive.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = tempfile::NamedTempFile::new_in(parent_dir(path))?;
        {
            let mut w = csv::WriterBuilder::new().flexible(true).from_writer(tmp.as_file());
            let genes = self.elites.values().map(|e| e.genotype.len()).max().unwrap_or(0);
            let mut header = vec!["niche_id".to_string(), "performance".to_string()];
            header.extend((0..self.indexer.dims()).map(|i| format!("b{i}")));
            header.push("genotype_len".into());
            header.extend((0..genes).map(|i| format!("g{i}")));
            w.write_record(&header)?;
            for (niche, e) in self.iter() {
                let mut row = Vec::with_capacity(header.len());
                row.push(niche.to_string());
                row.push(e.performance.to_string());
                row.extend(e.descriptor.iter().map(f64::to_string));
                row.push(e.genotype.len().to_string());
                row.extend(e.genotype.iter().map(f64::to_string));
                w.write_record(&row)?;
            }
            w.flush()?;
        }
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    /// Rebuilds an archive from [`save`](Self::save) output, checking that
    /// every row sits in the niche its descriptor maps to.
    pub fn load(path: &Path, indexer: Indexer, direction: Direction) -> Result<Self> {
        let rows = read_archive_csv(path)?;
        let mut archive = Archive::new(indexer, direction);
        for (line, (niche, elite)) in rows.into_iter().enumerate() {
            let expected = archive.indexer.niche(&elite.descriptor)?;
            if expected != niche {
                return Err(Error::parse(
                    path,
                    line + 2,
                    format!("row claims niche {niche} but its descriptor maps to {expected}"),
                ));
            }
            if archive.elites.insert(niche, elite).is_some() {
                return Err(Error::parse(path, line + 2, format!("niche {niche} appears twice")));
            }
        }
        Ok(archive)
    }
}

/// Reads the rows of an archive CSV without needing its indexer.
pub fn read_archive_csv(path: &Path) -> Result<Vec<(u64, Elite)>> {
    let mut r = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let header = r.headers()?.clone();
    let dims = header.iter().filter(|h| h.starts_with('b')).count();
    if header.get(0) != Some("niche_id")
        || header.get(1) != Some("performance")
        || header.get(2 + dims) != Some("genotype_len")
    {
        return Err(Error::parse(path, 1, "not an archive header"));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |j: usize| -> Result<f64> {
            rec.get(j)
                .ok_or_else(|| Error::parse(path, line, "row is too short"))?
                .parse::<f64>()
                .map_err(|_| Error::parse(path, line, format!("column {j} is not a number")))
        };
        let niche: u64 = rec
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(path, line, "bad niche id"))?;
        let performance = num(1)?;
        let descriptor = (0..dims).map(|j| num(2 + j)).collect::<Result<Vec<_>>>()?;
        let genes: usize = rec
            .get(2 + dims)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(path, line, "bad genotype length"))?;
        if rec.len() != 3 + dims + genes {
            return Err(Error::parse(path, line, "genotype length does not match the row"));
        }
        let genotype = (0..genes).map(|j| num(3 + dims + j)).collect::<Result<Vec<_>>>()?;
        rows.push((
            niche,
            Elite {
                genotype,
                performance,
                descriptor,
            },
        ));
    }
    Ok(rows)
}
