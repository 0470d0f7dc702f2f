//! Distances, Monte Carlo CVT construction and nearest-centroid search.

mod cvt;
mod index;
mod norm;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng as _;

pub use cvt::{cvt, cvt_best_of, CvtConfig, CvtResult};
pub use index::{nearest_linear, CentroidIndex, KdTree};
pub use norm::{minkowski_distance, NormSpec};

use crate::error::{Error, Result};

/// Axis-aligned box bounding a behavior space.
#[derive(Clone, Debug, PartialEq)]
pub struct BehaviorSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BehaviorSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidSpace("at least one dimension is required".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidSpace(format!(
                    "dimension {i}: bounds [{lo}, {hi}] are not an increasing finite interval"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit hypercube `[0, 1]^dims`.
    pub fn unit(dims: usize) -> Result<Self> {
        Self::new(vec![0.0; dims], vec![1.0; dims])
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Euclidean length of the box diagonal.
    pub fn diagonal(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dims()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| lo <= x && x <= hi)
    }

    pub(crate) fn clamp_in_place(&self, point: &mut [f64]) {
        for (x, (lo, hi)) in point.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *x = x.clamp(*lo, *hi);
        }
    }

    pub(crate) fn check_dims(&self, actual: usize) -> Result<()> {
        if actual == self.dims() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual,
            })
        }
    }
}

/// Points stored contiguously, `dims` coordinates each.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    dims: usize,
    data: Vec<f64>,
}

impl SampleSet {
    pub fn from_flat(dims: usize, data: Vec<f64>) -> Result<Self> {
        if dims == 0 || data.is_empty() || !data.len().is_multiple_of(dims) {
            return Err(Error::InvalidArgument(format!(
                "{} values cannot be split into points of dimension {dims}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dims = points.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(dims * points.len());
        for p in points {
            if p.len() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    actual: p.len(),
                });
            }
            data.extend_from_slice(p);
        }
        Self::from_flat(dims, data)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dims)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}

/// Draws `count` points independently and uniformly inside `space`.
pub fn sample_uniform(space: &BehaviorSpace, count: usize, rng: &mut crate::Rng) -> Result<SampleSet> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let mut data = Vec::with_capacity(count * space.dims());
    for _ in 0..count {
        for (lo, hi) in space.lower.iter().zip(&space.upper) {
            let u: f64 = rng.random();
            data.push((lo + u * (hi - lo)).min(*hi));
        }
    }
    SampleSet::from_flat(space.dims(), data)
}

/// The k sites of a centroidal Voronoi tessellation. Site `i` is niche `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Centroids {
    space: BehaviorSpace,
    points: SampleSet,
}

impl Centroids {
    /// Validates that every point is inside `space` and that no two coincide.
    pub fn new(space: BehaviorSpace, points: SampleSet) -> Result<Self> {
        space.check_dims(points.dims())?;
        let mut seen = std::collections::HashSet::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if !space.contains(p) {
                return Err(Error::InvalidArgument(format!(
                    "centroid {i} lies outside the behavior space"
                )));
            }
            let key: Vec<u64> = p.iter().map(|x| (x + 0.0).to_bits()).collect();
            if !seen.insert(key) {
                return Err(Error::InvalidArgument(format!(
                    "centroid {i} duplicates an earlier one"
                )));
            }
        }
        Ok(Self { space, points })
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    pub fn dims(&self) -> usize {
        self.points.dims()
    }

    pub fn space(&self) -> &BehaviorSpace {
        &self.space
    }

    pub fn point(&self, id: usize) -> &[f64] {
        self.points.point(id)
    }

    pub fn points(&self) -> &SampleSet {
        &self.points
    }

    /// Writes one centroid per line as space-separated decimals.
    ///
    /// Values use the shortest representation that parses back to the same
    /// `f64`, so a save/load cycle is exact.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(parent_dir(path))?;
        {
            let mut out = BufWriter::new(tmp.as_file_mut());
            for p in self.points.iter() {
                let mut first = true;
                for x in p {
                    if !first {
                        out.write_all(b" ")?;
                    }
                    write!(out, "{x}")?;
                    first = false;
                }
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    pub fn load(path: &Path, space: BehaviorSpace) -> Result<Self> {
        let points = read_centroid_file(path)?;
        if points.dims() != space.dims() {
            return Err(Error::parse(
                path,
                1,
                format!("expected {} values per line, found {}", space.dims(), points.dims()),
            ));
        }
        Self::new(space, points)
    }
}

/// Parses a centroid file without validating it against a space.
pub fn read_centroid_file(path: &Path) -> Result<SampleSet> {
    let text = fs::read_to_string(path)?;
    let mut dims = None;
    let mut data = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let x: f64 = tok
                .parse()
                .map_err(|_| Error::parse(path, n + 1, format!("not a number: {tok:?}")))?;
            data.push(x);
        }
        let width = data.len() - before;
        match dims {
            None => dims = Some(width),
            Some(d) if d != width => {
                return Err(Error::parse(path, n + 1, format!("expected {d} values, found {width}")))
            }
            Some(_) => {}
        }
    }
    match dims {
        Some(d) => SampleSet::from_flat(d, data),
        None => Err(Error::parse(path, 1, "no centroids in file")),
    }
}

pub(crate) fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_rejects_degenerate_bounds() {
        assert!(BehaviorSpace::new(vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
        assert!(BehaviorSpace::new(vec![], vec![]).is_err());
        assert!(BehaviorSpace::new(vec![1.0], vec![0.0]).is_err());
        assert!(BehaviorSpace::new(vec![0.0], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn uniform_samples_stay_in_bounds() {
        let space = BehaviorSpace::unit(2).unwrap();
        let s = sample_uniform(&space, 4, &mut crate::rng_from_seed(42)).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.iter().all(|p| space.contains(p)));
    }

    #[test]
    fn uniform_samples_are_seeded() {
        let space = BehaviorSpace::new(vec![-3.0, 10.0], vec![5.0, 11.0]).unwrap();
        let a = sample_uniform(&space, 50, &mut crate::rng_from_seed(7)).unwrap();
        let b = sample_uniform(&space, 50, &mut crate::rng_from_seed(7)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|p| space.contains(p)));
    }

    #[test]
    fn uniform_sample_mean_converges() {
        let space = BehaviorSpace::unit(1).unwrap();
        let s = sample_uniform(&space, 1_000_000, &mut crate::rng_from_seed(3)).unwrap();
        let mean = s.as_flat().iter().sum::<f64>() / s.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn zero_samples_rejected() {
        let space = BehaviorSpace::unit(2).unwrap();
        assert!(sample_uniform(&space, 0, &mut crate::rng_from_seed(0)).is_err());
    }

    #[test]
    fn centroids_reject_duplicates_and_outliers() {
        let space = BehaviorSpace::unit(2).unwrap();
        let dup = SampleSet::from_points(&[vec![0.1, 0.2], vec![0.1, 0.2]]).unwrap();
        assert!(Centroids::new(space.clone(), dup).is_err());
        let out = SampleSet::from_points(&[vec![0.1, 1.2]]).unwrap();
        assert!(Centroids::new(space, out).is_err());
    }

    #[test]
    fn centroid_file_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.dat");
        let space = BehaviorSpace::unit(3).unwrap();
        let pts = sample_uniform(&space, 20, &mut crate::rng_from_seed(11)).unwrap();
        let c = Centroids::new(space.clone(), pts).unwrap();
        c.save(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 20);
        assert_eq!(text.lines().next().unwrap().split(' ').count(), 3);
        let back = Centroids::load(&path, space).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn centroid_file_with_ragged_lines_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.dat");
        fs::write(&path, "0.1 0.2\n0.3\n").unwrap();
        let err = read_centroid_file(&path).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }
}
