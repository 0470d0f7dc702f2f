//! Benchmark tasks.

mod descriptor;
mod maze;
mod robot;
mod synthetic;

pub use descriptor::{sample_constrained_set, sample_constrained_trajectory, TrajectoryDescriptor};
pub use maze::{Maze, Point, Scenario, Segment, ROBOT_DIAMETER, ROBOT_RADIUS, SCENARIO_COUNT};
pub use robot::{
    pie_slices, simulate, Controller, MazeTask, Robot, SimConfig, Trajectory, DEFAULT_HIDDEN, INPUTS, LIFETIME,
    MAX_WHEEL_SPEED, OUTPUTS,
};
pub use synthetic::{landscape, Bump, SyntheticTask, BUMPS, OPTIMUM, OPTIMUM_VALUE};

use crate::error::{Error, Result};

/// Fraction of steps each channel is on, e.g. per-leg ground contact.
pub fn duty_factor(contacts: &[Vec<bool>]) -> Result<Vec<f64>> {
    let len = contacts
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidArgument("no contact channels".into()))?;
    if len == 0 {
        return Err(Error::InvalidArgument("contact series are empty".into()));
    }
    if let Some(bad) = contacts.iter().find(|c| c.len() != len) {
        return Err(Error::DimensionMismatch {
            expected: len,
            actual: bad.len(),
        });
    }
    Ok(contacts
        .iter()
        .map(|c| c.iter().filter(|&&on| on).count() as f64 / len as f64)
        .collect())
}
