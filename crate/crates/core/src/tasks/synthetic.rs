//! A cheap two-dimensional multimodal landscape for quick experiments.

use crate::archive::Direction;
use crate::error::Result;
use crate::evolve::{DiscreteGenotypeSpec, Evaluation, Task};

/// A compact bump `height * (1 - r²/radius²)²` for `r < radius`, zero outside.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub center: [f64; 2],
    pub height: f64,
    pub radius: f64,
}

/// Five non-overlapping bumps in the unit square. The global maximum is 1.0
/// at (0.2, 0.3); fitness is 0 away from all bumps.
pub const BUMPS: [Bump; 5] = [
    Bump {
        center: [0.2, 0.3],
        height: 1.0,
        radius: 0.15,
    },
    Bump {
        center: [0.75, 0.7],
        height: 0.8,
        radius: 0.2,
    },
    Bump {
        center: [0.7, 0.2],
        height: 0.6,
        radius: 0.12,
    },
    Bump {
        center: [0.25, 0.8],
        height: 0.5,
        radius: 0.15,
    },
    Bump {
        center: [0.5, 0.5],
        height: 0.3,
        radius: 0.08,
    },
];

pub const OPTIMUM: [f64; 2] = [0.2, 0.3];
pub const OPTIMUM_VALUE: f64 = 1.0;

pub fn landscape(x: [f64; 2]) -> f64 {
    BUMPS
        .iter()
        .map(|b| {
            let r2 = (x[0] - b.center[0]).powi(2) + (x[1] - b.center[1]).powi(2);
            let u = 1.0 - r2 / (b.radius * b.radius);
            if u > 0.0 {
                b.height * u * u
            } else {
                0.0
            }
        })
        .sum()
}

/// Genotype = descriptor = position in `[0, 1]²`, fitness maximized.
#[derive(Clone, Debug)]
pub struct SyntheticTask {
    genotype: DiscreteGenotypeSpec,
}

impl SyntheticTask {
    /// Coordinates take values `0, step, ..., 1`.
    pub fn new(step: f64) -> Result<Self> {
        Ok(Self {
            genotype: DiscreteGenotypeSpec::stepped(2, 0.0, 1.0, step)?,
        })
    }
}

impl Default for SyntheticTask {
    fn default() -> Self {
        Self::new(0.005).expect("valid default step")
    }
}

impl Task for SyntheticTask {
    fn genotype_spec(&self) -> &DiscreteGenotypeSpec {
        &self.genotype
    }

    fn descriptor_dims(&self) -> usize {
        2
    }

    fn direction(&self) -> Direction {
        Direction::Maximize
    }

    fn evaluate(&self, genotype: &[f64]) -> Evaluation {
        Evaluation {
            performance: landscape([genotype[0], genotype[1]]),
            descriptor: genotype.to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_centres_have_their_heights() {
        for b in BUMPS {
            assert_eq!(landscape(b.center), b.height);
        }
    }

    #[test]
    fn bumps_do_not_overlap_and_stay_inside() {
        for (i, a) in BUMPS.iter().enumerate() {
            for c in a.center {
                assert!(c - a.radius >= 0.0 && c + a.radius <= 1.0);
            }
            for b in &BUMPS[..i] {
                let d = (a.center[0] - b.center[0]).hypot(a.center[1] - b.center[1]);
                assert!(d > a.radius + b.radius);
            }
        }
    }

    #[test]
    fn grid_scan_finds_the_documented_optimum() {
        let n = 1000;
        let mut best = (f64::MIN, [0.0, 0.0]);
        for i in 0..n {
            for j in 0..n {
                let x = [i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64];
                let f = landscape(x);
                if f > best.0 {
                    best = (f, x);
                }
            }
        }
        assert!((best.0 - OPTIMUM_VALUE).abs() < 1e-3);
        assert!((best.1[0] - OPTIMUM[0]).abs() < 1e-3 && (best.1[1] - OPTIMUM[1]).abs() < 1e-3);
    }

    #[test]
    fn descriptor_is_the_genotype() {
        let t = SyntheticTask::default();
        let g = [0.35, 0.905];
        let e = t.evaluate(&g);
        assert_eq!(e.descriptor, g);
        assert_eq!(landscape([0.0, 0.0]), 0.0);
        assert_eq!(t.genotype_spec().values().len(), 201);
    }
}
