//! Trajectory descriptors and the reachability-constrained sampler used to
//! build maze centroids.

use rand::seq::SliceRandom;
use rand::Rng;

use super::maze::{Maze, Point};
use super::robot::Trajectory;
use crate::error::{Error, Result};
use crate::geometry::SampleSet;

/// Rejection draws per trajectory point before the trajectory is restarted.
const REJECTION_BUDGET: usize = 10_000;
/// Whole-trajectory restarts before giving up.
const TRAJECTORY_RETRIES: usize = 100;

/// `m` positions taken at equally spaced steps, the last one at the final
/// step, flattened to `(x1, y1, ..., xm, ym)` and scaled by the arena size.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryDescriptor {
    steps: Vec<usize>,
}

impl TrajectoryDescriptor {
    pub fn new(samples: usize, lifetime: usize) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidArgument("descriptor needs at least one sample".into()));
        }
        if samples > lifetime {
            return Err(Error::InvalidArgument(format!(
                "cannot take {samples} samples from a {lifetime}-step trajectory"
            )));
        }
        let steps = (1..=samples).map(|i| i * lifetime / samples).collect();
        Ok(Self { steps })
    }

    pub fn samples(&self) -> usize {
        self.steps.len()
    }

    pub fn dims(&self) -> usize {
        2 * self.steps.len()
    }

    /// 1-based simulation steps that are sampled.
    pub fn sample_steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn describe(&self, trajectory: &Trajectory, maze: &Maze) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dims());
        for &t in &self.steps {
            let p = trajectory.positions[t - 1];
            out.push(p[0] / maze.width);
            out.push(p[1] / maze.height);
        }
        out
    }
}

/// Draws a descriptor a robot with top speed `max_speed` could physically
/// produce, ignoring interior walls.
///
/// Sample points are fixed in random order. Each new point is drawn
/// uniformly from the arena intersected with the discs reachable from its
/// nearest fixed neighbours in time (the start counts as fixed at step 0).
/// Farther neighbours add no constraint: the fixed points already satisfy
/// the pairwise bounds, so their discs contain the nearer ones'.
pub fn sample_constrained_trajectory<R: Rng + ?Sized>(
    maze: &Maze,
    descriptor: &TrajectoryDescriptor,
    max_speed: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(max_speed > 0.0 && max_speed.is_finite()) {
        return Err(Error::InvalidArgument(format!("bad maximum speed {max_speed}")));
    }
    for _ in 0..TRAJECTORY_RETRIES {
        if let Some(points) = try_sample(maze, descriptor.sample_steps(), max_speed, rng) {
            return Ok(points
                .iter()
                .flat_map(|p| [p[0] / maze.width, p[1] / maze.height])
                .collect());
        }
    }
    Err(Error::SamplingExhausted(TRAJECTORY_RETRIES))
}

fn try_sample<R: Rng + ?Sized>(maze: &Maze, steps: &[usize], speed: f64, rng: &mut R) -> Option<Vec<Point>> {
    let m = steps.len();
    let mut fixed: Vec<Option<Point>> = vec![None; m];
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);

    for &i in &order {
        let t = steps[i] as f64;
        let pred = (0..i)
            .rev()
            .find_map(|j| fixed[j].map(|p| (steps[j] as f64, p)))
            .unwrap_or((0.0, maze.start));
        let succ = (i + 1..m).find_map(|j| fixed[j].map(|p| (steps[j] as f64, p)));
        let discs: Vec<(Point, f64)> = [Some(pred), succ]
            .into_iter()
            .flatten()
            .map(|(tj, p)| (p, speed * (t - tj).abs()))
            .collect();

        let mut lo = [0.0, 0.0];
        let mut hi = [maze.width, maze.height];
        for (c, r) in &discs {
            for a in 0..2 {
                lo[a] = f64::max(lo[a], c[a] - r);
                hi[a] = f64::min(hi[a], c[a] + r);
            }
        }
        if lo[0] > hi[0] || lo[1] > hi[1] {
            return None;
        }
        let point = (0..REJECTION_BUDGET).find_map(|_| {
            let p = [
                lo[0] + rng.random::<f64>() * (hi[0] - lo[0]),
                lo[1] + rng.random::<f64>() * (hi[1] - lo[1]),
            ];
            discs
                .iter()
                .all(|(c, r)| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) <= r * r)
                .then_some(p)
        })?;
        fixed[i] = Some(point);
    }
    fixed.into_iter().collect()
}

/// `count` constrained descriptors, e.g. as input to the CVT.
pub fn sample_constrained_set<R: Rng + ?Sized>(
    maze: &Maze,
    descriptor: &TrajectoryDescriptor,
    max_speed: f64,
    count: usize,
    rng: &mut R,
) -> Result<SampleSet> {
    let mut data = Vec::with_capacity(count * descriptor.dims());
    for _ in 0..count {
        data.extend(sample_constrained_trajectory(maze, descriptor, max_speed, rng)?);
    }
    SampleSet::from_flat(descriptor.dims(), data)
}
