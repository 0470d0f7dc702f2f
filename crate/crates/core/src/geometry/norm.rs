use crate::error::{Error, Result};

/// Number of independent partial sums used when accumulating distance terms.
///
/// Every distance computed by this crate goes through the same accumulation
/// order, so the linear scan, the k-d tree and [`minkowski_distance`] agree
/// bit for bit on which centroid is closest.
const LANES: usize = 8;
/// Chunks processed between early-abandon checks.
const CHECK_EVERY: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind {
    Manhattan,
    Euclidean,
    Other,
}

/// Order `p` of a Minkowski distance. Orders below 1 are allowed; they do
/// not satisfy the triangle inequality.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormSpec {
    order: f64,
    kind: Kind,
}

impl NormSpec {
    pub const EUCLIDEAN: NormSpec = NormSpec {
        order: 2.0,
        kind: Kind::Euclidean,
    };

    pub fn new(order: f64) -> Result<Self> {
        if !(order.is_finite() && order > 0.0) {
            return Err(Error::InvalidNorm(order));
        }
        let kind = if order == 2.0 {
            Kind::Euclidean
        } else if order == 1.0 {
            Kind::Manhattan
        } else {
            Kind::Other
        };
        Ok(Self { order, kind })
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn is_euclidean(&self) -> bool {
        self.kind == Kind::Euclidean
    }

    /// `|delta|^p`.
    #[inline]
    pub fn term(&self, delta: f64) -> f64 {
        match self.kind {
            Kind::Euclidean => delta * delta,
            Kind::Manhattan => delta.abs(),
            Kind::Other => delta.abs().powf(self.order),
        }
    }

    /// Maps a sum of terms back to a distance.
    #[inline]
    pub fn root(&self, pow_sum: f64) -> f64 {
        match self.kind {
            Kind::Euclidean => pow_sum.sqrt(),
            Kind::Manhattan => pow_sum,
            Kind::Other => pow_sum.powf(self.order.recip()),
        }
    }

    /// `Σ |x_i − y_i|^p`, the distance before the final root. Monotone in the
    /// distance, so comparisons can skip the root.
    #[inline]
    pub fn pow_sum(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        self.pow_sum_within(x, y, f64::INFINITY)
            .expect("unbounded sum is never abandoned")
    }

    /// Like [`pow_sum`](Self::pow_sum) but gives up with `None` as soon as the
    /// sum is known to exceed `bound`. A returned value is always exact.
    #[inline]
    pub fn pow_sum_within(&self, x: &[f64], y: &[f64], bound: f64) -> Option<f64> {
        match self.kind {
            Kind::Euclidean => lane_sum(x, y, bound, |d| d * d),
            Kind::Manhattan => lane_sum(x, y, bound, f64::abs),
            Kind::Other => {
                let p = self.order;
                lane_sum(x, y, bound, move |d| d.abs().powf(p))
            }
        }
    }

    #[inline]
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.root(self.pow_sum(x, y))
    }
}

impl Default for NormSpec {
    fn default() -> Self {
        Self::EUCLIDEAN
    }
}

#[inline]
fn combine(acc: &[f64; LANES]) -> f64 {
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

// Partial sums only grow and `combine` is monotone in every lane, so an
// abandoned sum would have exceeded `bound` had it been completed.
#[inline(always)]
fn lane_sum(x: &[f64], y: &[f64], bound: f64, term: impl Fn(f64) -> f64) -> Option<f64> {
    let mut acc = [0.0f64; LANES];
    let body = x.len() / LANES * LANES;
    let (xb, xr) = x.split_at(body);
    let (yb, yr) = y.split_at(body);
    for (xs, ys) in xb.chunks(LANES * CHECK_EVERY).zip(yb.chunks(LANES * CHECK_EVERY)) {
        for (a, b) in xs.chunks_exact(LANES).zip(ys.chunks_exact(LANES)) {
            let a: &[f64; LANES] = a.try_into().unwrap();
            let b: &[f64; LANES] = b.try_into().unwrap();
            for l in 0..LANES {
                acc[l] += term(a[l] - b[l]);
            }
        }
        if combine(&acc) > bound {
            return None;
        }
    }
    let mut sum = combine(&acc);
    for (a, b) in xr.iter().zip(yr) {
        sum += term(a - b);
    }
    if sum > bound {
        None
    } else {
        Some(sum)
    }
}

/// Minkowski distance of order `norm.order()`: `(Σ |x_i − y_i|^p)^(1/p)`.
pub fn minkowski_distance(x: &[f64], y: &[f64], norm: NormSpec) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok(norm.distance(x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norm(p: f64) -> NormSpec {
        NormSpec::new(p).unwrap()
    }

    #[test]
    fn pythagorean_triple() {
        assert_eq!(minkowski_distance(&[3.0, 4.0], &[0.0, 0.0], norm(2.0)).unwrap(), 5.0);
    }

    #[test]
    fn identical_points_are_at_distance_zero() {
        let x = [0.7, 0.1, 0.4];
        for p in [0.3, 0.5, 1.0, 2.0, 3.5] {
            assert_eq!(minkowski_distance(&x, &x, norm(p)).unwrap(), 0.0);
        }
    }

    #[test]
    fn fractional_order_half() {
        // (1^0.5 + 1^0.5)^(1/0.5) = 2^2
        let d = minkowski_distance(&[1.0, 1.0], &[0.0, 0.0], norm(0.5)).unwrap();
        assert!((d - 4.0).abs() < 1e-12, "{d}");
    }

    #[test]
    fn manhattan_and_general_orders() {
        assert_eq!(minkowski_distance(&[1.0, -2.0], &[0.0, 0.0], norm(1.0)).unwrap(), 3.0);
        let d = minkowski_distance(&[1.0, 2.0], &[0.0, 0.0], norm(3.0)).unwrap();
        assert!((d - 9f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(matches!(
            minkowski_distance(&[1.0, 2.0], &[1.0], NormSpec::EUCLIDEAN),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn invalid_orders_rejected() {
        for p in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(NormSpec::new(p).is_err(), "{p}");
        }
    }

    #[test]
    fn long_vectors_match_sequential_sum() {
        let x: Vec<f64> = (0..1003).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..1003).map(|i| (i as f64 * 0.11).cos()).collect();
        let seq: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        let lanes = NormSpec::EUCLIDEAN.pow_sum(&x, &y);
        assert!((seq - lanes).abs() <= 1e-12 * seq);
    }

    #[test]
    fn abandoned_sums_really_exceed_bound() {
        let x: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let y = vec![0.0; 100];
        let full = NormSpec::EUCLIDEAN.pow_sum(&x, &y);
        assert_eq!(NormSpec::EUCLIDEAN.pow_sum_within(&x, &y, full), Some(full));
        assert_eq!(NormSpec::EUCLIDEAN.pow_sum_within(&x, &y, full * 0.5), None);
        assert_eq!(NormSpec::EUCLIDEAN.pow_sum_within(&x, &y, 0.01), None);
    }

    fn triple(d: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        let v = || prop::collection::vec(-10.0f64..10.0, d);
        (v(), v(), v())
    }

    proptest! {
        #[test]
        fn euclidean_triangle_inequality((x, y, z) in (1usize..40).prop_flat_map(triple)) {
            let n = NormSpec::EUCLIDEAN;
            let (xy, yz, xz) = (n.distance(&x, &y), n.distance(&y, &z), n.distance(&x, &z));
            prop_assert!(xz <= xy + yz + 1e-9 * (xy + yz));
        }

        #[test]
        fn symmetric_and_zero_only_on_identity(
            (x, y, _z) in (1usize..40).prop_flat_map(triple),
            p in prop::sample::select(vec![0.5, 1.0, 2.0, 3.0]),
        ) {
            let n = NormSpec::new(p).unwrap();
            prop_assert_eq!(n.distance(&x, &y), n.distance(&y, &x));
            prop_assert_eq!(n.distance(&x, &y) == 0.0, x == y);
        }

        #[test]
        fn bounded_sum_agrees_with_full_sum(
            (x, y, _z) in (1usize..80).prop_flat_map(triple),
            frac in 0.0f64..2.0,
        ) {
            let n = NormSpec::EUCLIDEAN;
            let full = n.pow_sum(&x, &y);
            let bound = full * frac;
            match n.pow_sum_within(&x, &y, bound) {
                Some(s) => { prop_assert_eq!(s, full); prop_assert!(s <= bound); }
                None => prop_assert!(full > bound),
            }
        }
    }
}
