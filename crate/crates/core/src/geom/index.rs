//! Uniform 2D grid hashing for fixed-radius and nearest-neighbour queries.

use std::collections::HashMap;

use nalgebra::{Vector2, Vector3};

type Cell = (i64, i64);

/// Items bucketed by the grid cell of their (x, y) position.
///
/// Query results are produced by walking cells in a fixed row-major order, so
/// they are deterministic for a given insertion history.
#[derive(Debug, Clone)]
pub struct Grid2<T> {
    cell: f64,
    buckets: HashMap<Cell, Vec<(Vector2<f64>, T)>>,
    len: usize,
}

impl<T: Copy + PartialEq> Grid2<T> {
    pub fn new(cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "grid cell size must be positive");
        Self { cell, buckets: HashMap::new(), len: 0 }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn cell_of(&self, p: &Vector2<f64>) -> Cell {
        ((p.x / self.cell).floor() as i64, (p.y / self.cell).floor() as i64)
    }

    pub fn insert(&mut self, p: Vector2<f64>, item: T) {
        let key = self.cell_of(&p);
        self.buckets.entry(key).or_default().push((p, item));
        self.len += 1;
    }

    /// Removes one entry equal to `item` stored at `p`. Returns whether it existed.
    pub fn remove(&mut self, p: &Vector2<f64>, item: T) -> bool {
        let key = self.cell_of(p);
        let Some(bucket) = self.buckets.get_mut(&key) else {
            return false;
        };
        let Some(pos) = bucket.iter().position(|(_, t)| *t == item) else {
            return false;
        };
        bucket.swap_remove(pos);
        if bucket.is_empty() {
            self.buckets.remove(&key);
        }
        self.len -= 1;
        true
    }

    /// Calls `f` for every item within 2D distance `<= radius` of `center`.
    pub fn for_each_within(&self, center: &Vector2<f64>, radius: f64, mut f: impl FnMut(&Vector2<f64>, T)) {
        if radius < 0.0 || self.len == 0 {
            return;
        }
        let r2 = radius * radius;
        let (x0, y0) = self.cell_of(&Vector2::new(center.x - radius, center.y - radius));
        let (x1, y1) = self.cell_of(&Vector2::new(center.x + radius, center.y + radius));
        // Large radii would walk many empty cells; fall back to a bucket scan.
        let span = (x1 - x0 + 1).saturating_mul(y1 - y0 + 1);
        if span as usize > 4 * self.buckets.len() + 16 {
            let mut keys: Vec<&Cell> = self.buckets.keys().collect();
            keys.sort_unstable();
            for k in keys {
                for (p, t) in &self.buckets[k] {
                    if (p - center).norm_squared() <= r2 {
                        f(p, *t);
                    }
                }
            }
            return;
        }
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                if let Some(bucket) = self.buckets.get(&(cx, cy)) {
                    for (p, t) in bucket {
                        if (p - center).norm_squared() <= r2 {
                            f(p, *t);
                        }
                    }
                }
            }
        }
    }

    pub fn within(&self, center: &Vector2<f64>, radius: f64) -> Vec<T> {
        let mut out = Vec::new();
        self.for_each_within(center, radius, |_, t| out.push(t));
        out
    }

    /// Nearest item by 2D distance; ties go to the first item met in cell order.
    pub fn nearest(&self, center: &Vector2<f64>) -> Option<(T, f64)> {
        if self.len == 0 {
            return None;
        }
        let (cx, cy) = self.cell_of(center);
        let mut best: Option<(T, f64)> = None;
        let mut ring: i64 = 0;
        let max_ring = self.max_ring(cx, cy);
        loop {
            for (x, y) in ring_cells(cx, cy, ring) {
                if let Some(bucket) = self.buckets.get(&(x, y)) {
                    for (p, t) in bucket {
                        let d = (p - center).norm();
                        if best.is_none_or(|(_, bd)| d < bd) {
                            best = Some((*t, d));
                        }
                    }
                }
            }
            // Everything outside ring `k` is at least `k * cell` away.
            if let Some((_, bd)) = best {
                if bd <= ring as f64 * self.cell {
                    return best;
                }
            }
            if ring >= max_ring {
                return best;
            }
            ring += 1;
        }
    }

    fn max_ring(&self, cx: i64, cy: i64) -> i64 {
        self.buckets.keys().map(|(x, y)| (x - cx).abs().max((y - cy).abs())).max().unwrap_or(0)
    }
}

fn ring_cells(cx: i64, cy: i64, ring: i64) -> Vec<Cell> {
    if ring == 0 {
        return vec![(cx, cy)];
    }
    let mut cells = Vec::with_capacity(8 * ring as usize);
    for x in cx - ring..=cx + ring {
        cells.push((x, cy - ring));
        cells.push((x, cy + ring));
    }
    for y in cy - ring + 1..cy + ring {
        cells.push((cx - ring, y));
        cells.push((cx + ring, y));
    }
    cells
}

/// Registered map points indexed on their horizontal coordinates.
#[derive(Debug, Clone)]
pub struct PointCloudIndex {
    points: Vec<Vector3<f64>>,
    grid: Grid2<u32>,
}

impl PointCloudIndex {
    /// Default cell size, matching the usual plane-fitting radius.
    pub const DEFAULT_CELL: f64 = 0.15;

    pub fn new(points: Vec<Vector3<f64>>) -> Self {
        Self::with_cell_size(points, Self::DEFAULT_CELL)
    }

    pub fn with_cell_size(points: Vec<Vector3<f64>>, cell: f64) -> Self {
        let mut grid = Grid2::new(cell);
        for (i, p) in points.iter().enumerate() {
            grid.insert(p.xy(), i as u32);
        }
        Self { points, grid }
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points whose horizontal distance to `center` is `<= radius`.
    pub fn radius_query(&self, center: &Vector2<f64>, radius: f64) -> Vec<Vector3<f64>> {
        let mut out = Vec::new();
        self.grid.for_each_within(center, radius, |_, i| out.push(self.points[i as usize]));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Vector3<f64>], c: &Vector2<f64>, r: f64) -> Vec<Vector3<f64>> {
        points.iter().filter(|p| (p.xy() - c).norm() <= r).copied().collect()
    }

    fn sorted(mut v: Vec<Vector3<f64>>) -> Vec<Vector3<f64>> {
        v.sort_by(|a, b| a.iter().partial_cmp(b.iter()).unwrap());
        v
    }

    #[test]
    fn empty_cloud_returns_nothing() {
        let idx = PointCloudIndex::new(Vec::new());
        assert!(idx.radius_query(&Vector2::zeros(), 1.0).is_empty());
    }

    #[test]
    fn single_point_at_center() {
        let p = Vector3::new(1.0, 2.0, 3.0);
        let idx = PointCloudIndex::new(vec![p]);
        assert_eq!(idx.radius_query(&Vector2::new(1.0, 2.0), 1e-6), vec![p]);
    }

    #[test]
    fn matches_brute_force_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..100 {
            let n = if trial == 0 { 1000 } else { rng.random_range(0..400) };
            let pts: Vec<_> = (0..n)
                .map(|_| Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random()))
                .collect();
            let idx = PointCloudIndex::with_cell_size(pts.clone(), rng.random_range(0.05..0.5));
            for _ in 0..5 {
                let c = Vector2::new(rng.random_range(-2.5..2.5), rng.random_range(-2.5..2.5));
                let r = if trial == 0 { 0.15 } else { rng.random_range(0.01..3.0) };
                assert_eq!(sorted(idx.radius_query(&c, r)), sorted(brute(&pts, &c, r)));
            }
        }
    }

    #[test]
    fn nearest_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let mut g = Grid2::new(rng.random_range(0.1..1.0));
            let pts: Vec<Vector2<f64>> = (0..rng.random_range(1..200))
                .map(|_| Vector2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)))
                .collect();
            for (i, p) in pts.iter().enumerate() {
                g.insert(*p, i);
            }
            // remove some
            for i in (0..pts.len()).step_by(3) {
                assert!(g.remove(&pts[i], i));
            }
            let q = Vector2::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0));
            let best = pts
                .iter()
                .enumerate()
                .filter(|(i, _)| i % 3 != 0)
                .map(|(_, p)| (p - q).norm())
                .fold(f64::INFINITY, f64::min);
            match g.nearest(&q) {
                Some((_, d)) => assert!((d - best).abs() < 1e-12),
                None => assert!(best.is_infinite()),
            }
        }
    }
}
