//! Differential-drive robot in a maze, driven by a fixed-topology network.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use super::descriptor::TrajectoryDescriptor;
use super::maze::{cast_ray, Maze, Point, Segment, ROBOT_DIAMETER, ROBOT_RADIUS};
use crate::archive::Direction;
use crate::error::{Error, Result};
use crate::evolve::{DiscreteGenotypeSpec, Evaluation, Task};

pub const MAX_WHEEL_SPEED: f64 = 2.0;
/// Simulation steps per evaluation.
pub const LIFETIME: usize = 3000;
/// 3 lasers and 4 pie-slice goal sensors.
pub const INPUTS: usize = 7;
pub const OUTPUTS: usize = 2;
pub const DEFAULT_HIDDEN: usize = 10;

// Positions closer than this to a wall still count as clear, so rounding in
// the slide projection does not pin the robot in place.
const CONTACT_SLACK: f64 = 1e-9;
const SLIDE_ITERATIONS: usize = 4;
// Walls are culled to those near the robot; the list is rebuilt after the
// robot has moved this far.
const NEAR_MARGIN: f64 = 50.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub steps: usize,
    pub laser_range: f64,
    /// Laser headings relative to the robot heading, radians.
    pub laser_angles: [f64; 3],
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            steps: LIFETIME,
            laser_range: 100.0,
            laser_angles: [-FRAC_PI_4, 0.0, FRAC_PI_4],
        }
    }
}

/// Pose of the robot. Heading is in radians, counter-clockwise from +x.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Robot {
    pub position: Point,
    pub heading: f64,
}

/// Feedforward network `7 -> hidden (tanh) -> 2 (tanh, scaled to ±2)`.
///
/// Weight layout: for each hidden unit its 7 input weights then its bias,
/// then for each output its `hidden` weights then its bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Controller {
    hidden: usize,
    weights: Vec<f64>,
}

impl Controller {
    pub fn weight_count(hidden: usize) -> usize {
        (INPUTS + 1) * hidden + (hidden + 1) * OUTPUTS
    }

    pub fn new(hidden: usize, weights: Vec<f64>) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::InvalidArgument(
                "controller needs at least one hidden unit".into(),
            ));
        }
        if weights.len() != Self::weight_count(hidden) {
            return Err(Error::DimensionMismatch {
                expected: Self::weight_count(hidden),
                actual: weights.len(),
            });
        }
        Ok(Self { hidden, weights })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Wheel speeds (left, right) in `[-2, 2]`.
    pub fn wheel_speeds(&self, inputs: &[f64; INPUTS]) -> [f64; OUTPUTS] {
        self.forward(inputs, &mut vec![0.0; self.hidden])
    }

    #[inline]
    fn forward(&self, inputs: &[f64; INPUTS], hidden: &mut [f64]) -> [f64; OUTPUTS] {
        let (w_in, w_out) = self.weights.split_at((INPUTS + 1) * self.hidden);
        for (h, w) in hidden.iter_mut().zip(w_in.chunks_exact(INPUTS + 1)) {
            let mut a = w[INPUTS];
            for (x, wi) in inputs.iter().zip(w) {
                a += x * wi;
            }
            *h = tanh(a);
        }
        let mut out = [0.0; OUTPUTS];
        for (o, w) in out.iter_mut().zip(w_out.chunks_exact(self.hidden + 1)) {
            let mut a = w[self.hidden];
            for (x, wi) in hidden.iter().zip(w) {
                a += x * wi;
            }
            *o = (MAX_WHEEL_SPEED * tanh(a)).clamp(-MAX_WHEEL_SPEED, MAX_WHEEL_SPEED);
        }
        out
    }
}

// libm's tanh goes through expm1 and dominated simulation time. This form
// is within 5e-16 of it everywhere.
#[inline]
fn tanh(x: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * x).exp() + 1.0)
}

#[inline]
fn norm(v: Point) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

/// Robot centre positions after steps 1..=T.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub positions: Vec<Point>,
}

/// One-hot goal direction relative to the heading: front, left, back, right.
/// Sectors are 90° wide and centred on the four directions; a boundary
/// direction belongs to the sector counter-clockwise of it, except that
/// 135° is back.
pub fn pie_slices(robot: &Robot, goal: Point) -> [f64; 4] {
    let (s, c) = robot.heading.sin_cos();
    pie_slices_with(robot.position, s, c, goal)
}

#[inline]
fn pie_slices_with(position: Point, sin: f64, cos: f64, goal: Point) -> [f64; 4] {
    let (dx, dy) = (goal[0] - position[0], goal[1] - position[1]);
    // goal in the robot frame, x forward and y to the left
    let fx = dx * cos + dy * sin;
    let fy = dy * cos - dx * sin;
    let sector = if fy < fx && fy >= -fx {
        0
    } else if fy >= fx && fy > -fx {
        1
    } else if fy <= fx && fy < -fx {
        3
    } else {
        2
    };
    let mut out = [0.0; 4];
    out[sector] = 1.0;
    out
}

/// Wraps to `[-π, π)`.
#[inline]
fn wrap_angle(a: f64) -> f64 {
    if (-PI..PI).contains(&a) {
        a
    } else if (PI..3.0 * PI).contains(&a) {
        a - TAU
    } else if (-3.0 * PI..-PI).contains(&a) {
        a + TAU
    } else {
        (a + PI).rem_euclid(TAU) - PI
    }
}

fn sensors(walls: &[Segment], robot: &Robot, goal: Point, lasers: &[[f64; 2]; 3], range: f64) -> [f64; INPUTS] {
    let mut x = [0.0; INPUTS];
    let (s, c) = robot.heading.sin_cos();
    for (xi, [lc, ls]) in x.iter_mut().zip(lasers) {
        let u = [c * lc - s * ls, s * lc + c * ls];
        *xi = cast_ray(walls, robot.position, u).min(range) / range;
    }
    x[3..].copy_from_slice(&pie_slices_with(robot.position, s, c, goal));
    x
}

/// Moves from `p` by `d`, sliding along walls in the way. If no collision
/// free slide is found the robot stays at `p`.
fn slide(walls: &[Segment], p: Point, mut d: Point) -> Point {
    let clear = (ROBOT_RADIUS - CONTACT_SLACK).powi(2);
    for _ in 0..SLIDE_ITERATIONS {
        let q = [p[0] + d[0], p[1] + d[1]];
        let Some(wall) = walls.iter().find(|s| s.distance_squared(q) < clear) else {
            return q;
        };
        let c = wall.closest_point(q);
        let mut n = [q[0] - c[0], q[1] - c[1]];
        let len = norm(n);
        if len == 0.0 {
            return p;
        }
        n = [n[0] / len, n[1] / len];
        let dn = d[0] * n[0] + d[1] * n[1];
        if dn >= 0.0 {
            return p;
        }
        d = [d[0] - dn * n[0], d[1] - dn * n[1]];
    }
    p
}

/// Runs one lifetime. Returns the smallest distance to the goal, start
/// included, and the trajectory.
pub fn simulate(maze: &Maze, controller: &Controller, config: &SimConfig) -> (f64, Trajectory) {
    let mut robot = Robot {
        position: maze.start,
        heading: PI / 2.0,
    };
    let dist = |p: Point| norm([p[0] - maze.goal[0], p[1] - maze.goal[1]]);
    let mut best = dist(robot.position);
    let mut positions = Vec::with_capacity(config.steps);
    let mut hidden = vec![0.0; controller.hidden];
    let lasers = config.laser_angles.map(|a| {
        let (s, c) = a.sin_cos();
        [c, s]
    });
    // far walls can neither be seen within laser range nor touched
    let reach = config.laser_range.max(ROBOT_RADIUS + MAX_WHEEL_SPEED) + NEAR_MARGIN;
    let nearby = |p: Point| -> Vec<Segment> {
        maze.obstacles()
            .iter()
            .filter(|s| s.box_distance(p) <= reach)
            .copied()
            .collect()
    };
    let mut anchor = robot.position;
    let mut walls = nearby(anchor);

    while positions.len() < config.steps {
        if norm([robot.position[0] - anchor[0], robot.position[1] - anchor[1]]) > NEAR_MARGIN {
            anchor = robot.position;
            walls = nearby(anchor);
        }
        let inputs = sensors(&walls, &robot, maze.goal, &lasers, config.laser_range);
        let [left, right] = controller.forward(&inputs, &mut hidden);
        let v = 0.5 * (left + right);
        let omega = (right - left) / ROBOT_DIAMETER;
        let (s, c) = robot.heading.sin_cos();
        let next = Robot {
            position: slide(&walls, robot.position, [v * c, v * s]),
            heading: wrap_angle(robot.heading + omega),
        };
        positions.push(next.position);
        best = best.min(dist(next.position));
        if next == robot {
            // sensors see the same pose again, so nothing will ever change
            positions.resize(config.steps, next.position);
            break;
        }
        robot = next;
    }
    (best, Trajectory { positions })
}

/// Maze navigation as a minimization task: distance to the goal, trajectory
/// samples as descriptor.
#[derive(Clone, Debug)]
pub struct MazeTask {
    maze: Maze,
    sim: SimConfig,
    hidden: usize,
    descriptor: TrajectoryDescriptor,
    genotype: DiscreteGenotypeSpec,
}

impl MazeTask {
    /// Weights take values in `{-2, -1.5, ..., 2}`.
    pub fn new(maze: Maze, samples: usize, hidden: usize) -> Result<Self> {
        Self::with_config(maze, samples, hidden, SimConfig::default())
    }

    pub fn with_config(maze: Maze, samples: usize, hidden: usize, sim: SimConfig) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::InvalidArgument(
                "controller needs at least one hidden unit".into(),
            ));
        }
        let descriptor = TrajectoryDescriptor::new(samples, sim.steps)?;
        let genotype = DiscreteGenotypeSpec::stepped(Controller::weight_count(hidden), -2.0, 2.0, 0.5)?;
        Ok(Self {
            maze,
            sim,
            hidden,
            descriptor,
            genotype,
        })
    }

    /// The same robot and descriptor in another maze.
    pub fn with_maze(&self, maze: Maze) -> Self {
        Self { maze, ..self.clone() }
    }

    pub fn maze(&self) -> &Maze {
        &self.maze
    }

    pub fn descriptor(&self) -> &TrajectoryDescriptor {
        &self.descriptor
    }

    pub fn sim_config(&self) -> &SimConfig {
        &self.sim
    }

    pub fn controller(&self, genotype: &[f64]) -> Result<Controller> {
        Controller::new(self.hidden, genotype.to_vec())
    }
}

impl Task for MazeTask {
    fn genotype_spec(&self) -> &DiscreteGenotypeSpec {
        &self.genotype
    }

    fn descriptor_dims(&self) -> usize {
        self.descriptor.dims()
    }

    fn direction(&self) -> Direction {
        Direction::Minimize
    }

    fn evaluate(&self, genotype: &[f64]) -> Evaluation {
        let controller = self
            .controller(genotype)
            .expect("genotype length matches the controller");
        let (performance, trajectory) = simulate(&self.maze, &controller, &self.sim);
        Evaluation {
            performance,
            descriptor: self.descriptor.describe(&trajectory, &self.maze),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::random_genotype;
    use crate::tasks::maze::Segment;

    fn open_maze() -> Maze {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/open_maze.txt");
        Maze::load(&path).unwrap()
    }

    fn empty_maze() -> Maze {
        Maze::new(1000.0, 1000.0, [500.0, 100.0], [500.0, 500.0], vec![]).unwrap()
    }

    /// Output biases only: constant wheel speeds `2 tanh(bl)`, `2 tanh(br)`.
    fn constant(hidden: usize, bl: f64, br: f64) -> Controller {
        let mut w = vec![0.0; Controller::weight_count(hidden)];
        let n = w.len();
        w[n - hidden - 2] = bl;
        w[n - 1] = br;
        Controller::new(hidden, w).unwrap()
    }

    #[test]
    fn weight_count_matches_layout() {
        assert_eq!(Controller::weight_count(10), 8 * 10 + 11 * 2);
        assert!(Controller::new(10, vec![0.0; 5]).is_err());
        assert!(Controller::new(0, vec![0.0; 2]).is_err());
    }

    #[test]
    fn tanh_matches_libm() {
        for i in -4000..=4000 {
            let x = i as f64 * 0.01;
            assert!((tanh(x) - x.tanh()).abs() <= 5e-16, "{x}");
        }
        assert_eq!(tanh(1e3), 1.0);
        assert_eq!(tanh(-1e3), -1.0);
        assert_eq!(tanh(0.0), 0.0);
    }

    #[test]
    fn outputs_are_bounded() {
        let c = Controller::new(3, vec![2.0; Controller::weight_count(3)]).unwrap();
        for x in [[1.0; INPUTS], [0.0; INPUTS], [-5.0; INPUTS]] {
            for o in c.wheel_speeds(&x) {
                assert!(o.abs() <= MAX_WHEEL_SPEED);
            }
        }
        assert_eq!(constant(4, 0.0, 0.0).wheel_speeds(&[0.3; INPUTS]), [0.0, 0.0]);
        let [l, r] = constant(4, 1.0, -0.5).wheel_speeds(&[0.3; INPUTS]);
        assert!((l - 2.0 * 1f64.tanh()).abs() < 1e-15 && (r - 2.0 * (-0.5f64).tanh()).abs() < 1e-15);
    }

    #[test]
    fn zero_controller_never_moves() {
        let maze = open_maze();
        let c = Controller::new(10, vec![0.0; 102]).unwrap();
        let (fitness, traj) = simulate(&maze, &c, &SimConfig::default());
        assert_eq!(traj.positions.len(), LIFETIME);
        assert!(traj.positions.iter().all(|&p| p == maze.start));
        assert_eq!(fitness, 400.0);
    }

    #[test]
    fn straight_line_in_empty_arena() {
        let maze = empty_maze();
        let c = constant(2, 3.0, 3.0);
        let speed = 2.0 * 3f64.tanh();
        let sim = SimConfig {
            steps: 100,
            ..Default::default()
        };
        let (fitness, traj) = simulate(&maze, &c, &sim);
        let last = traj.positions[99];
        assert!((last[0] - 500.0).abs() < 1e-9);
        assert!((last[1] - (100.0 + 100.0 * speed)).abs() < 1e-9);
        assert!((fitness - (400.0 - 100.0 * speed)).abs() < 1e-9);
    }

    #[test]
    fn robot_stops_at_a_wall_it_faces() {
        let maze = empty_maze();
        let c = constant(2, 3.0, 3.0);
        let (_, traj) = simulate(&maze, &c, &SimConfig::default());
        // the step that would touch the wall is cancelled
        let last = traj.positions[LIFETIME - 1];
        let gap = 1000.0 - ROBOT_RADIUS - last[1];
        assert!((0.0..MAX_WHEEL_SPEED).contains(&gap), "{last:?}");
        assert!(traj.positions.iter().all(|p| !maze.collides(*p, ROBOT_RADIUS - 1e-6)));
    }

    #[test]
    fn slides_along_a_diagonal_approach() {
        let maze = empty_maze();
        // heading up, a wall at y = 1000; a sideways push slides along it
        let p = [500.0, 1000.0 - ROBOT_RADIUS];
        let q = slide(maze.obstacles(), p, [1.0, 1.0]);
        assert!((q[0] - 501.0).abs() < 1e-12 && (q[1] - p[1]).abs() < 1e-12, "{q:?}");
        let wall = Segment::new([0.0, 500.0], [1000.0, 500.0]);
        let maze = Maze::new(1000.0, 1000.0, [500.0, 100.0], [500.0, 900.0], vec![wall]).unwrap();
        // head-on: nothing left after removing the normal component
        assert_eq!(slide(maze.obstacles(), [300.0, 489.0], [0.0, 2.0]), [300.0, 489.0]);
        let q = slide(maze.obstacles(), [300.0, 489.0], [2.0, 2.0]);
        assert_eq!(q, [302.0, 489.0]);
    }

    #[test]
    fn exactly_one_pie_slice() {
        let goal = [0.0, 0.0];
        for i in 0..720 {
            let robot = Robot {
                position: [(i as f64 * 0.37).cos() * 50.0, (i as f64 * 0.11).sin() * 50.0],
                heading: i as f64 * 0.5 - 100.0,
            };
            let s = pie_slices(&robot, goal);
            assert_eq!(s.iter().sum::<f64>(), 1.0);
        }
        let at = |heading: f64| {
            pie_slices(
                &Robot {
                    position: [0.0, -10.0],
                    heading,
                },
                goal,
            )
        };
        assert_eq!(at(PI / 2.0), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(at(0.0), [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(at(-PI / 2.0), [0.0, 0.0, 1.0, 0.0]);
        assert_eq!(at(PI), [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn pie_slices_agree_with_bearings() {
        let mut rng = crate::rng_from_seed(13);
        for _ in 0..10_000 {
            use rand::Rng;
            let robot = Robot {
                position: [rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0)],
                heading: rng.random_range(-PI..PI),
            };
            let goal = [500.0, 500.0];
            let a = wrap_angle((goal[1] - robot.position[1]).atan2(goal[0] - robot.position[0]) - robot.heading);
            let deg = a.to_degrees();
            let expected = if deg.abs() < 44.9 {
                Some(0)
            } else if (45.1..134.9).contains(&deg) {
                Some(1)
            } else if (-134.9..-45.1).contains(&deg) {
                Some(3)
            } else if deg.abs() > 135.1 {
                Some(2)
            } else {
                None
            };
            if let Some(e) = expected {
                assert_eq!(pie_slices(&robot, goal)[e], 1.0, "{deg}");
            }
        }
    }

    #[test]
    fn angle_wrapping() {
        for a in [0.0, 3.0, -3.0, PI, -PI, 4.0, -4.0, 10.0, -10.0, 100.0] {
            let w = wrap_angle(a);
            assert!((-PI..PI).contains(&w), "{a} -> {w}");
            assert!(((w - a) / TAU - ((w - a) / TAU).round()).abs() < 1e-12);
        }
    }

    #[test]
    fn lasers_read_normalized_distances() {
        let maze = empty_maze();
        let robot = Robot {
            position: [950.0, 500.0],
            heading: 0.0,
        };
        let cfg = SimConfig::default();
        let lasers = cfg.laser_angles.map(|a| [a.cos(), a.sin()]);
        let x = sensors(maze.obstacles(), &robot, maze.goal, &lasers, cfg.laser_range);
        assert!((x[1] - 0.5).abs() < 1e-12);
        assert!((x[0] - 50.0 * std::f64::consts::SQRT_2 / 100.0).abs() < 1e-12);
        let far = Robot {
            position: [500.0, 500.0],
            heading: 0.0,
        };
        assert_eq!(
            sensors(maze.obstacles(), &far, maze.goal, &lasers, cfg.laser_range)[..3],
            [1.0, 1.0, 1.0]
        );
    }

    #[test]
    fn random_controllers_respect_physics() {
        let maze = open_maze();
        let task = MazeTask::new(maze.clone(), 10, DEFAULT_HIDDEN).unwrap();
        let start_dist = 400.0;
        let mut rng = crate::rng_from_seed(11);
        for _ in 0..40 {
            let g = random_genotype(task.genotype_spec(), &mut rng);
            let c = task.controller(&g).unwrap();
            let (fitness, traj) = simulate(&maze, &c, &SimConfig::default());
            assert_eq!(traj.positions.len(), LIFETIME);
            assert!(fitness <= start_dist);
            let mut prev = maze.start;
            for &p in &traj.positions {
                let step = (p[0] - prev[0]).hypot(p[1] - prev[1]);
                assert!(step <= MAX_WHEEL_SPEED + 1e-9, "{step}");
                assert!(p[0] > 0.0 && p[0] < 1000.0 && p[1] > 0.0 && p[1] < 1000.0);
                assert!(!maze.collides(p, ROBOT_RADIUS - 1e-6));
                prev = p;
            }
            let again = simulate(&maze, &c, &SimConfig::default());
            assert_eq!(again, (fitness, traj));
        }
    }

    /// Same loop as `simulate` with every wall considered at every step.
    fn simulate_unculled(maze: &Maze, controller: &Controller, config: &SimConfig) -> Vec<Point> {
        let lasers = config.laser_angles.map(|a| {
            let (s, c) = a.sin_cos();
            [c, s]
        });
        let mut robot = Robot {
            position: maze.start,
            heading: PI / 2.0,
        };
        let mut out = Vec::new();
        for _ in 0..config.steps {
            let x = sensors(maze.obstacles(), &robot, maze.goal, &lasers, config.laser_range);
            let [l, r] = controller.wheel_speeds(&x);
            let v = 0.5 * (l + r);
            let (s, c) = robot.heading.sin_cos();
            robot = Robot {
                position: slide(maze.obstacles(), robot.position, [v * c, v * s]),
                heading: wrap_angle(robot.heading + (r - l) / ROBOT_DIAMETER),
            };
            out.push(robot.position);
        }
        out
    }

    #[test]
    fn wall_culling_changes_nothing() {
        let maze = open_maze().scenario(9).unwrap();
        let task = MazeTask::new(maze.clone(), 1, DEFAULT_HIDDEN).unwrap();
        let mut rng = crate::rng_from_seed(12);
        for _ in 0..20 {
            let c = task
                .controller(&random_genotype(task.genotype_spec(), &mut rng))
                .unwrap();
            let (_, traj) = simulate(&maze, &c, &SimConfig::default());
            assert_eq!(traj.positions, simulate_unculled(&maze, &c, &SimConfig::default()));
        }
    }

    #[test]
    fn scenario_walls_change_outcomes() {
        let maze = open_maze();
        // straight up through both south openings reaches the goal
        let c = constant(2, 3.0, 3.0);
        let (open, _) = simulate(&maze, &c, &SimConfig::default());
        assert!(open < 1.0, "{open}");
        let blocked = maze.scenario(5).unwrap();
        let (closed, _) = simulate(&blocked, &c, &SimConfig::default());
        assert!(closed > 100.0, "{closed}");
    }
}
