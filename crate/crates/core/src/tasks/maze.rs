//! Maze geometry and the maze definition file.
//!
//! A maze file is line based. `#` starts a comment, blank lines are ignored.
//!
//! ```text
//! arena 1000 1000
//! start 500 100
//! goal 500 500
//! wall 200 200 460 200
//! scenario outer-south/inner-north
//! block 460 350 540 350
//! end
//! ```
//!
//! `wall` lines outside a scenario belong to the base maze. Each scenario
//! lists the extra segments (`block`) that close openings of the base maze.
//! The arena boundary is always walled.

use std::path::Path;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Number of evaluation scenarios a maze file must declare.
pub const SCENARIO_COUNT: usize = 16;

/// Robot body diameter in maze units.
pub const ROBOT_DIAMETER: f64 = 20.0;
pub const ROBOT_RADIUS: f64 = ROBOT_DIAMETER / 2.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub fn new(a: Point, b: Point) -> Self {
        Self { a, b }
    }

    /// Closest point of the segment to `p`.
    pub fn closest_point(&self, p: Point) -> Point {
        let e = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let len2 = e[0] * e[0] + e[1] * e[1];
        if len2 == 0.0 {
            return self.a;
        }
        let s = (((p[0] - self.a[0]) * e[0] + (p[1] - self.a[1]) * e[1]) / len2).clamp(0.0, 1.0);
        [self.a[0] + s * e[0], self.a[1] + s * e[1]]
    }

    pub fn distance_squared(&self, p: Point) -> f64 {
        let c = self.closest_point(p);
        (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)
    }

    /// Distance along the unit direction `u` from `o` to the segment, if the
    /// ray hits it. Segments parallel to the ray are never hit.
    #[inline]
    pub fn ray_hit(&self, o: Point, u: Point) -> Option<f64> {
        let e = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let denom = u[0] * e[1] - u[1] * e[0];
        let w = [self.a[0] - o[0], self.a[1] - o[1]];
        let tn = w[0] * e[1] - w[1] * e[0];
        let sn = w[0] * u[1] - w[1] * u[0];
        // t = tn / denom >= 0 and s = sn / denom in [0, 1], without dividing
        let hit = if denom > 0.0 {
            tn >= 0.0 && sn >= 0.0 && sn <= denom
        } else if denom < 0.0 {
            tn <= 0.0 && sn <= 0.0 && sn >= denom
        } else {
            false
        };
        hit.then(|| tn / denom)
    }

    /// Distance from `p` to the segment's bounding box.
    pub fn box_distance(&self, p: Point) -> f64 {
        let gap = |v: f64, a: f64, b: f64| (a.min(b) - v).max(v - a.max(b)).max(0.0);
        gap(p[0], self.a[0], self.b[0]).hypot(gap(p[1], self.a[1], self.b[1]))
    }
}

/// Distance from `o` along unit direction `u` to the nearest segment.
#[inline]
pub fn cast_ray(segments: &[Segment], o: Point, u: Point) -> f64 {
    segments
        .iter()
        .filter_map(|s| s.ray_hit(o, u))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub blocks: Vec<Segment>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Maze {
    pub name: String,
    pub width: f64,
    pub height: f64,
    pub start: Point,
    pub goal: Point,
    /// Interior walls, not including the arena boundary.
    pub walls: Vec<Segment>,
    pub scenarios: Vec<Scenario>,
    // interior walls followed by the four boundary segments
    obstacles: Vec<Segment>,
}

impl Maze {
    pub fn new(width: f64, height: f64, start: Point, goal: Point, walls: Vec<Segment>) -> Result<Self> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad arena size {width} x {height}")));
        }
        let mut maze = Self {
            name: "base".into(),
            width,
            height,
            start,
            goal,
            walls,
            scenarios: Vec::new(),
            obstacles: Vec::new(),
        };
        maze.rebuild();
        maze.validate()?;
        Ok(maze)
    }

    fn rebuild(&mut self) {
        let (w, h) = (self.width, self.height);
        self.obstacles = self.walls.clone();
        self.obstacles.extend([
            Segment::new([0.0, 0.0], [w, 0.0]),
            Segment::new([w, 0.0], [w, h]),
            Segment::new([w, h], [0.0, h]),
            Segment::new([0.0, h], [0.0, 0.0]),
        ]);
    }

    fn validate(&self) -> Result<()> {
        let inside = |p: Point| {
            p.iter().all(|v| v.is_finite()) && p[0] > 0.0 && p[0] < self.width && p[1] > 0.0 && p[1] < self.height
        };
        if !inside(self.start) || !inside(self.goal) {
            return Err(Error::InvalidArgument(
                "start and goal must lie inside the arena".into(),
            ));
        }
        if self.collides(self.start, ROBOT_RADIUS) {
            return Err(Error::InvalidArgument(format!(
                "a robot at the start {:?} would overlap a wall",
                self.start
            )));
        }
        if self.obstacles.iter().any(|s| s.distance_squared(self.goal) == 0.0) {
            return Err(Error::InvalidArgument("goal lies on a wall".into()));
        }
        Ok(())
    }

    /// All segments a robot can hit, arena boundary included.
    pub fn obstacles(&self) -> &[Segment] {
        &self.obstacles
    }

    /// True when a disc of `radius` centred at `p` overlaps a wall.
    pub fn collides(&self, p: Point, radius: f64) -> bool {
        let r2 = radius * radius;
        self.obstacles.iter().any(|s| s.distance_squared(p) < r2)
    }

    /// Distance from `o` along unit direction `u` to the nearest obstacle.
    pub fn cast_ray(&self, o: Point, u: Point) -> f64 {
        cast_ray(&self.obstacles, o, u)
    }

    /// The base maze with the blocking segments of scenario `index` added.
    pub fn scenario(&self, index: usize) -> Result<Maze> {
        let sc = self.scenarios.get(index).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "scenario {index} does not exist ({} declared)",
                self.scenarios.len()
            ))
        })?;
        let mut walls = self.walls.clone();
        walls.extend(&sc.blocks);
        let mut maze = Maze::new(self.width, self.height, self.start, self.goal, walls)?;
        maze.name = sc.name.clone();
        Ok(maze)
    }

    /// The evaluation mazes, one per declared scenario.
    pub fn evaluation_scenarios(&self) -> Result<Vec<Maze>> {
        if self.scenarios.len() < SCENARIO_COUNT {
            return Err(Error::InvalidArgument(format!(
                "maze declares {} scenarios, {SCENARIO_COUNT} are needed",
                self.scenarios.len()
            )));
        }
        (0..self.scenarios.len()).map(|i| self.scenario(i)).collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut arena = None;
        let mut start = None;
        let mut goal = None;
        let mut walls = Vec::new();
        let mut scenarios: Vec<Scenario> = Vec::new();
        let mut open: Option<Scenario> = None;

        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let rest = rest.trim();
            let nums = |count: usize| -> Result<Vec<f64>> {
                let v: Vec<f64> = rest
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| Error::parse(origin, line_no, format!("`{t}` is not a number")))
                    })
                    .collect::<Result<_>>()?;
                if v.len() != count || v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::parse(
                        origin,
                        line_no,
                        format!("`{key}` takes {count} finite numbers"),
                    ));
                }
                Ok(v)
            };
            match key {
                "arena" => {
                    let v = nums(2)?;
                    arena = Some((v[0], v[1]));
                }
                "start" => {
                    let v = nums(2)?;
                    start = Some([v[0], v[1]]);
                }
                "goal" => {
                    let v = nums(2)?;
                    goal = Some([v[0], v[1]]);
                }
                "wall" | "block" => {
                    let v = nums(4)?;
                    let seg = Segment::new([v[0], v[1]], [v[2], v[3]]);
                    match (key, open.as_mut()) {
                        ("wall", None) => walls.push(seg),
                        ("block", Some(sc)) => sc.blocks.push(seg),
                        ("wall", Some(_)) => {
                            return Err(Error::parse(origin, line_no, "`wall` inside a scenario, use `block`"))
                        }
                        _ => return Err(Error::parse(origin, line_no, "`block` outside a scenario")),
                    }
                }
                "scenario" => {
                    if open.is_some() {
                        return Err(Error::parse(
                            origin,
                            line_no,
                            "scenario opened before the previous `end`",
                        ));
                    }
                    if rest.is_empty() {
                        return Err(Error::parse(origin, line_no, "scenario needs a name"));
                    }
                    if scenarios.iter().any(|s| s.name == rest) {
                        return Err(Error::parse(origin, line_no, format!("duplicate scenario `{rest}`")));
                    }
                    open = Some(Scenario {
                        name: rest.to_string(),
                        blocks: Vec::new(),
                    });
                }
                "end" => match open.take() {
                    Some(sc) => scenarios.push(sc),
                    None => return Err(Error::parse(origin, line_no, "`end` without a scenario")),
                },
                other => return Err(Error::parse(origin, line_no, format!("unknown keyword `{other}`"))),
            }
        }
        if open.is_some() {
            return Err(Error::parse(origin, text.lines().count(), "unterminated scenario"));
        }
        let missing = |what: &str| Error::parse(origin, 0, format!("missing `{what}` line"));
        let (w, h) = arena.ok_or_else(|| missing("arena"))?;
        let mut maze = Maze::new(
            w,
            h,
            start.ok_or_else(|| missing("start"))?,
            goal.ok_or_else(|| missing("goal"))?,
            walls,
        )?;
        maze.scenarios = scenarios;
        Ok(maze)
    }
}
