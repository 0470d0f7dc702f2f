use log::debug;
use rand::seq::index;
use rayon::prelude::*;

use super::{BehaviorSpace, Centroids, KdTree, NormSpec, SampleSet};
use crate::error::{Error, Result};

/// Samples per parallel work unit in the assignment step.
const ASSIGN_CHUNK: usize = 1024;

#[derive(Clone, Debug)]
pub struct CvtConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this (Euclidean). `None`
    /// means `1e-4` times the space diagonal. Iteration also stops as soon as
    /// the assignment is unchanged, which is exact convergence.
    pub tol: Option<f64>,
    pub norm: NormSpec,
}

impl CvtConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_iter: 100,
            tol: None,
            norm: NormSpec::EUCLIDEAN,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CvtResult {
    pub centroids: Centroids,
    /// Nearest centroid of every sample under the construction norm.
    pub assignment: Vec<usize>,
    /// Sum over samples of the squared distance to their centroid.
    pub inertia: f64,
    /// Inertia measured at every assignment step, final one included.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

struct Assignment {
    labels: Vec<usize>,
    /// Squared norm distance from each sample to its centroid.
    sq_dist: Vec<f64>,
}

impl Assignment {
    fn inertia(&self) -> f64 {
        self.sq_dist.iter().sum()
    }
}

fn assign(samples: &SampleSet, centers: &SampleSet, norm: NormSpec) -> Assignment {
    let tree = KdTree::build(centers.clone(), norm);
    let pairs: Vec<(usize, f64)> = (0..samples.len())
        .into_par_iter()
        .with_min_len(ASSIGN_CHUNK)
        .map(|i| {
            let (id, s) = tree.nearest(samples.point(i));
            if norm.is_euclidean() {
                (id, s)
            } else {
                (id, norm.root(s).powi(2))
            }
        })
        .collect();
    let (labels, sq_dist) = pairs.into_iter().unzip();
    Assignment { labels, sq_dist }
}

/// Approximates a centroidal Voronoi tessellation of `space` by running
/// Lloyd iterations (k-means) over the Monte Carlo sample set `samples`.
///
/// Centroids start at `k` distinct samples drawn without replacement. A
/// cluster that ends up empty is reseeded at the sample farthest from its
/// current centroid.
pub fn cvt(space: &BehaviorSpace, samples: &SampleSet, config: &CvtConfig, rng: &mut crate::Rng) -> Result<CvtResult> {
    let k = config.k;
    space.check_dims(samples.dims())?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if config.max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    if k > samples.len() {
        return Err(Error::TooFewSamples {
            k,
            samples: samples.len(),
        });
    }
    let tol = config.tol.unwrap_or(1e-4 * space.diagonal());
    let d = samples.dims();
    let norm = config.norm;

    let mut flat = Vec::with_capacity(k * d);
    for i in index::sample(rng, samples.len(), k).into_iter() {
        flat.extend_from_slice(samples.point(i));
    }
    let mut centers = SampleSet::from_flat(d, flat)?;

    let mut history = Vec::new();
    let mut current = assign(samples, &centers, norm);
    history.push(current.inertia());
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iter {
        iterations += 1;
        let (next, shift) = update(space, samples, &centers, &current);
        centers = next;
        let fresh = assign(samples, &centers, norm);
        history.push(fresh.inertia());
        let stable = fresh.labels == current.labels;
        current = fresh;
        debug!(
            "cvt iteration {iterations}: inertia {:.6e}, max shift {shift:.3e}",
            current.inertia()
        );
        if stable || shift < tol {
            converged = true;
            break;
        }
    }

    let inertia = current.inertia();
    let centroids = Centroids::new(space.clone(), centers).map_err(|_| Error::DegenerateSamples { k })?;
    Ok(CvtResult {
        centroids,
        assignment: current.labels,
        inertia,
        history,
        iterations,
        converged,
    })
}

/// Moves every centroid to the mean of its samples. Returns the new centers
/// and the largest Euclidean displacement.
fn update(space: &BehaviorSpace, samples: &SampleSet, centers: &SampleSet, current: &Assignment) -> (SampleSet, f64) {
    let d = samples.dims();
    let k = centers.len();
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (i, &c) in current.labels.iter().enumerate() {
        counts[c] += 1;
        for (s, x) in sums[c * d..(c + 1) * d].iter_mut().zip(samples.point(i)) {
            *s += x;
        }
    }

    // Farthest samples first; lowest sample index first among equals.
    let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
    let mut reseeds = Vec::new();
    if !empty.is_empty() {
        let mut by_distance: Vec<usize> = (0..samples.len()).collect();
        by_distance.sort_by(|&a, &b| current.sq_dist[b].total_cmp(&current.sq_dist[a]).then(a.cmp(&b)));
        reseeds = by_distance.into_iter().take(empty.len()).collect();
    }

    let mut next = Vec::with_capacity(k * d);
    let mut shift: f64 = 0.0;
    let mut reseed = reseeds.into_iter();
    for c in 0..k {
        let start = next.len();
        if counts[c] == 0 {
            let s = reseed.next().expect("one reseed per empty cluster");
            next.extend_from_slice(samples.point(s));
        } else {
            let n = counts[c] as f64;
            next.extend(sums[c * d..(c + 1) * d].iter().map(|s| s / n));
            space.clamp_in_place(&mut next[start..]);
        }
        let moved = NormSpec::EUCLIDEAN.distance(&next[start..], centers.point(c));
        shift = shift.max(moved);
    }
    (SampleSet::from_flat(d, next).expect("k >= 1 centroids"), shift)
}

/// Runs [`cvt`] `restarts` times from different initializations and keeps
/// the lowest-inertia result (earliest on ties).
pub fn cvt_best_of(
    space: &BehaviorSpace,
    samples: &SampleSet,
    config: &CvtConfig,
    restarts: usize,
    rng: &mut crate::Rng,
) -> Result<CvtResult> {
    let mut best: Option<CvtResult> = None;
    for _ in 0..restarts.max(1) {
        let r = cvt(space, samples, config, rng)?;
        if best.as_ref().is_none_or(|b| r.inertia < b.inertia) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one restart"))
}
