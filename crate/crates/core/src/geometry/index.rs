use super::{Centroids, NormSpec, SampleSet};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 8;
const NO_POINT: u32 = u32::MAX;

#[derive(Clone, Debug)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u32,
        value: f64,
        left: u32,
        right: u32,
    },
}

/// Exact nearest-neighbor k-d tree over a fixed point set.
///
/// Pruning uses the single-coordinate bound `|q_a − c_a|^p ≤ Σ_i |q_i − c_i|^p`,
/// which holds for every order `p > 0`, so fractional orders are searched
/// exactly as well. Results match [`nearest_linear`] including tie-breaking:
/// among equidistant points the lowest id wins.
#[derive(Clone, Debug)]
pub struct KdTree {
    points: SampleSet,
    norm: NormSpec,
    order: Vec<u32>,
    /// Point coordinates laid out in `order`, so leaves scan contiguous memory.
    packed: Vec<f64>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn build(points: SampleSet, norm: NormSpec) -> Self {
        assert!(points.len() < NO_POINT as usize, "too many points for the index");
        let mut tree = KdTree {
            order: (0..points.len() as u32).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
            packed: Vec::new(),
            points,
            norm,
        };
        let n = tree.order.len();
        tree.build_node(0, n);
        tree.packed = tree
            .order
            .iter()
            .flat_map(|&i| tree.points.point(i as usize))
            .copied()
            .collect();
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf {
            start: start as u32,
            end: end as u32,
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let Some(axis) = self.widest_axis(start, end) else {
            // all points identical
            return id;
        };
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            let (xa, xb) = (points.point(a as usize)[axis], points.point(b as usize)[axis]);
            xa.total_cmp(&xb).then(a.cmp(&b))
        });
        let value = self.points.point(self.order[mid] as usize)[axis];
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id as usize] = Node::Split {
            axis: axis as u32,
            value,
            left,
            right,
        };
        id
    }

    fn widest_axis(&self, start: usize, end: usize) -> Option<usize> {
        let d = self.points.dims();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for &i in &self.order[start..end] {
            for (a, &x) in self.points.point(i as usize).iter().enumerate() {
                lo[a] = lo[a].min(x);
                hi[a] = hi[a].max(x);
            }
        }
        let (axis, spread) = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| h - l)
            .enumerate()
            .fold((0, 0.0), |best, (a, s)| if s > best.1 { (a, s) } else { best });
        (spread > 0.0).then_some(axis)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.points.dims()
    }

    pub fn norm(&self) -> NormSpec {
        self.norm
    }

    /// Returns the id of the nearest point and its (un-rooted) power sum.
    /// `query` must have the tree's dimensionality.
    pub fn nearest(&self, query: &[f64]) -> (usize, f64) {
        debug_assert_eq!(query.len(), self.dims());
        let mut best = (NO_POINT, f64::INFINITY);
        self.search(0, query, &mut best);
        if best.0 == NO_POINT {
            // only reachable with NaN coordinates
            return nearest_linear(&self.points, self.norm, query);
        }
        (best.0 as usize, best.1)
    }

    fn search(&self, node: u32, q: &[f64], best: &mut (u32, f64)) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                let (start, end) = (start as usize, end as usize);
                let d = self.points.dims();
                let packed = self.packed[start * d..end * d].chunks_exact(d);
                for (p, &id) in packed.zip(&self.order[start..end]) {
                    if let Some(s) = self.norm.pow_sum_within(p, q, best.1) {
                        if s < best.1 || (s == best.1 && id < best.0) {
                            *best = (id, s);
                        }
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let qa = q[axis as usize];
                let (near, far, gap) = if qa < value {
                    (left, right, value - qa)
                } else {
                    (right, left, qa - value)
                };
                self.search(near, q, best);
                let mut bound = self.norm.term(gap);
                if !(self.norm.is_euclidean() || self.norm.order() == 1.0) {
                    // powf is not guaranteed to be correctly rounded
                    bound *= 1.0 - 1e-12;
                }
                // Equal bounds are still searched: a tie with a lower id may hide there.
                if bound <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

/// Exhaustive nearest-point search; lowest id wins ties.
pub fn nearest_linear(points: &SampleSet, norm: NormSpec, query: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, p) in points.iter().enumerate() {
        if let Some(s) = norm.pow_sum_within(p, query, best.1) {
            if s < best.1 {
                best = (i, s);
            }
        }
    }
    if best.1.is_infinite() {
        best.1 = norm.pow_sum(points.point(0), query);
    }
    best
}

/// Nearest-centroid lookup for a CVT archive.
#[derive(Clone, Debug)]
pub struct CentroidIndex {
    centroids: Centroids,
    tree: KdTree,
}

impl CentroidIndex {
    pub fn build(centroids: Centroids, norm: NormSpec) -> Self {
        let tree = KdTree::build(centroids.points().clone(), norm);
        Self { centroids, tree }
    }

    pub fn centroids(&self) -> &Centroids {
        &self.centroids
    }

    pub fn norm(&self) -> NormSpec {
        self.tree.norm()
    }

    pub fn k(&self) -> usize {
        self.centroids.k()
    }

    pub fn dims(&self) -> usize {
        self.centroids.dims()
    }

    /// Id of the centroid closest to `b`. Points outside the space's bounds
    /// are accepted as they are.
    pub fn nearest_centroid(&self, b: &[f64]) -> Result<usize> {
        if b.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: b.len(),
            });
        }
        if b.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("descriptor has non-finite coordinates".into()));
        }
        Ok(self.tree.nearest(b).0)
    }
}
