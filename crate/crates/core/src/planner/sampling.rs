//! Informed sampling, steering and the detected-obstacle set.

use nalgebra::Vector2;
use rand::Rng;

use crate::geom::{point_segment_distance, Grid2};
use crate::world::Bounds;

/// Draws planner samples: uniform over the bounds until a solution exists,
/// then uniform over the ellipse `|s - start| + |s - goal| <= best_len`
/// intersected with the bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InformedSampler {
    pub bounds: Bounds,
    pub start: Vector2<f64>,
    pub goal: Vector2<f64>,
}

const MAX_REJECTIONS: usize = 1000;

impl InformedSampler {
    pub fn new(bounds: Bounds, start: Vector2<f64>, goal: Vector2<f64>) -> Self {
        Self { bounds, start, goal }
    }

    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> Vector2<f64> {
        let b = &self.bounds;
        Vector2::new(rng.random_range(b.min[0]..=b.max[0]), rng.random_range(b.min[1]..=b.max[1]))
    }

    /// Uniform sample from the informed ellipse for an incumbent of 2D length
    /// `best_len`. Lengths at or below the focal distance give points on the
    /// start-goal segment.
    pub fn sample_ellipse<R: Rng>(&self, rng: &mut R, best_len: f64) -> Vector2<f64> {
        let c = (self.goal - self.start).norm();
        let center = 0.5 * (self.start + self.goal);
        let axis = if c > 0.0 { (self.goal - self.start) / c } else { Vector2::x() };
        let a = 0.5 * best_len.max(c);
        let b = 0.5 * (best_len * best_len - c * c).max(0.0).sqrt();
        let mut last = center;
        for _ in 0..MAX_REJECTIONS {
            // Uniform in the unit disk, then stretched.
            let r = rng.random::<f64>().sqrt();
            let th = rng.random_range(0.0..std::f64::consts::TAU);
            let (u, v) = (a * r * th.cos(), b * r * th.sin());
            let p = center + axis * u + Vector2::new(-axis.y, axis.x) * v;
            if self.bounds.contains(p.x, p.y) {
                return p;
            }
            last = p;
        }
        Vector2::new(
            last.x.clamp(self.bounds.min[0], self.bounds.max[0]),
            last.y.clamp(self.bounds.min[1], self.bounds.max[1]),
        )
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, best_len: Option<f64>) -> Vector2<f64> {
        match best_len {
            Some(l) => self.sample_ellipse(rng, l),
            None => self.sample_uniform(rng),
        }
    }
}

/// Point at distance `min(step, |to - from|)` from `from` toward `to`.
pub fn steer(from: &Vector2<f64>, to: &Vector2<f64>, step: f64) -> Vector2<f64> {
    let d = to - from;
    let len = d.norm();
    if len <= step {
        *to
    } else {
        from + d * (step / len)
    }
}

/// Centers of nodes found to be obstacles, in detection order.
#[derive(Debug, Clone)]
pub struct ObstacleSet {
    centers: Vec<Vector2<f64>>,
    index: Grid2<usize>,
}

impl Default for ObstacleSet {
    fn default() -> Self {
        Self::new()
    }
}

impl ObstacleSet {
    pub fn new() -> Self {
        Self { centers: Vec::new(), index: Grid2::new(0.25) }
    }

    pub fn insert(&mut self, p: Vector2<f64>) {
        self.index.insert(p, self.centers.len());
        self.centers.push(p);
    }

    pub fn centers(&self) -> &[Vector2<f64>] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Whether any center lies within `r` (inclusive) of `q`.
    pub fn any_within(&self, q: &Vector2<f64>, r: f64) -> bool {
        let mut hit = false;
        self.index.for_each_within(q, slack(r), |c, _| hit |= (c - q).norm() <= r);
        hit
    }

    /// Whether the segment `a -> b` keeps strictly more than `r` from every center.
    pub fn segment_clear(&self, a: &Vector2<f64>, b: &Vector2<f64>, r: f64) -> bool {
        let mid = 0.5 * (a + b);
        let reach = slack(0.5 * (b - a).norm() + r);
        let mut clear = true;
        self.index.for_each_within(&mid, reach, |c, _| {
            if point_segment_distance(c, a, b) <= r {
                clear = false;
            }
        });
        clear
    }
}

// Widens grid prefilters so that rounding in squared distances never hides a
// point the exact test would accept.
fn slack(r: f64) -> f64 {
    r * (1.0 + 1e-9) + 1e-12
}

/// True iff `q` is strictly farther than `r` from every detected obstacle.
pub fn inflation_check(q: &Vector2<f64>, obs: &ObstacleSet, r: f64) -> bool {
    !obs.any_within(q, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sampler() -> InformedSampler {
        InformedSampler::new(Bounds::new([0.0, 0.0], [10.0, 10.0]), Vector2::new(1.0, 1.0), Vector2::new(8.0, 5.0))
    }

    #[test]
    fn steer_examples() {
        let a = Vector2::new(1.0, 1.0);
        assert_eq!(steer(&a, &Vector2::new(1.3, 1.4), 0.5), Vector2::new(1.3, 1.4));
        let s = steer(&a, &Vector2::new(1.0, 2.0), 0.5);
        assert_abs_diff_eq!(s, Vector2::new(1.0, 1.5), epsilon = 1e-15);
    }

    #[test]
    fn degenerate_ellipse_is_the_segment() {
        let s = sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = (s.goal - s.start).norm();
        for _ in 0..1000 {
            let p = s.sample_ellipse(&mut rng, c);
            assert!(point_segment_distance(&p, &s.start, &s.goal) < 1e-9);
        }
    }

    #[test]
    fn ellipse_samples_respect_focal_sum() {
        let s = sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let l = 1.3 * (s.goal - s.start).norm();
        for _ in 0..5000 {
            let p = s.sample_ellipse(&mut rng, l);
            assert!((p - s.start).norm() + (p - s.goal).norm() <= l + 1e-9);
            assert!(s.bounds.contains(p.x, p.y));
        }
    }

    #[test]
    fn inflation_boundary_is_exclusive() {
        let mut obs = ObstacleSet::new();
        assert!(inflation_check(&Vector2::zeros(), &obs, 0.25));
        obs.insert(Vector2::new(0.25, 0.0));
        assert!(!inflation_check(&Vector2::zeros(), &obs, 0.25));
        assert!(inflation_check(&Vector2::new(-1e-9, 0.0), &obs, 0.25));
    }

    proptest! {
        #[test]
        fn steer_stays_on_segment(ax in -5.0f64..5.0, ay in -5.0f64..5.0, bx in -5.0f64..5.0, by in -5.0f64..5.0, step in 0.01f64..3.0) {
            let (a, b) = (Vector2::new(ax, ay), Vector2::new(bx, by));
            prop_assume!((b - a).norm() > 1e-6);
            let s = steer(&a, &b, step);
            prop_assert!(point_segment_distance(&s, &a, &b) < 1e-12);
            prop_assert!(((s - a).norm() - step.min((b - a).norm())).abs() < 1e-12);
        }

        #[test]
        fn inflation_matches_brute_force(
            pts in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 0..40),
            qx in -3.0f64..3.0, qy in -3.0f64..3.0, r in 0.0f64..1.5,
        ) {
            let mut obs = ObstacleSet::new();
            for (x, y) in &pts {
                obs.insert(Vector2::new(*x, *y));
            }
            let q = Vector2::new(qx, qy);
            let brute = pts.iter().all(|(x, y)| (Vector2::new(*x, *y) - q).norm() > r);
            prop_assert_eq!(inflation_check(&q, &obs, r), brute);
        }

        #[test]
        fn segment_clear_matches_brute_force(
            pts in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 0..30),
            ax in -3.0f64..3.0, ay in -3.0f64..3.0, bx in -3.0f64..3.0, by in -3.0f64..3.0, r in 0.0f64..1.0,
        ) {
            let mut obs = ObstacleSet::new();
            for (x, y) in &pts {
                obs.insert(Vector2::new(*x, *y));
            }
            let (a, b) = (Vector2::new(ax, ay), Vector2::new(bx, by));
            let brute = pts.iter().all(|(x, y)| point_segment_distance(&Vector2::new(*x, *y), &a, &b) > r);
            prop_assert_eq!(obs.segment_clear(&a, &b, r), brute);
        }
    }
}
