//! Fixed-radius neighbor queries over an incrementally growing point set.

use std::collections::HashMap;

use crate::points::Points;
use crate::scalar::{squared_distance, Scalar};

/// Grids are used up to this dimension (3^d cells per query); above it every
/// inserted point is scanned.
const MAX_GRID_DIM: usize = 4;

/// Points are inserted one by one; queries return inserted points within
/// `radius` (inclusive) of a query point.
pub(crate) struct RadiusIndex<'a, T> {
    points: &'a Points<T>,
    radius_sq: T,
    inv_cell: f64,
    origin: Vec<f64>,
    grid: Option<HashMap<Vec<i64>, Vec<usize>>>,
    inserted: Vec<usize>,
}

impl<'a, T: Scalar> RadiusIndex<'a, T> {
    pub(crate) fn new(points: &'a Points<T>, radius: T) -> Self {
        let dim = points.dim();
        let mut origin = vec![f64::INFINITY; dim];
        for p in points.rows() {
            for (o, &x) in origin.iter_mut().zip(p) {
                *o = o.min(x.as_f64());
            }
        }
        let r = radius.as_f64();
        let use_grid = dim <= MAX_GRID_DIM && r > 0.0 && r.is_finite();
        Self {
            points,
            radius_sq: radius * radius,
            // Cells are slightly wider than r so rounding never hides a neighbor.
            inv_cell: if use_grid {
                1.0 / (r * (1.0 + 1e-9))
            } else {
                0.0
            },
            origin,
            grid: use_grid.then(HashMap::new),
            inserted: Vec::new(),
        }
    }

    fn cell(&self, p: &[T]) -> Vec<i64> {
        p.iter()
            .zip(&self.origin)
            .map(|(&x, &o)| ((x.as_f64() - o) * self.inv_cell).floor() as i64)
            .collect()
    }

    pub(crate) fn insert(&mut self, index: usize) {
        let key = self
            .grid
            .as_ref()
            .map(|_| self.cell(self.points.row(index)));
        match (&mut self.grid, key) {
            (Some(grid), Some(key)) => grid.entry(key).or_default().push(index),
            _ => self.inserted.push(index),
        }
    }

    /// Calls `visit` for every inserted point within the radius of `index`
    /// (excluding `index` itself).
    pub(crate) fn for_each_neighbor(&self, index: usize, mut visit: impl FnMut(usize)) {
        let p = self.points.row(index);
        let mut check = |q: usize| {
            if q != index && squared_distance(p, self.points.row(q)) <= self.radius_sq {
                visit(q);
            }
        };
        match &self.grid {
            None => self.inserted.iter().for_each(|&q| check(q)),
            Some(grid) => {
                let base = self.cell(p);
                let dim = base.len();
                let mut offset = vec![-1i64; dim];
                loop {
                    let key: Vec<i64> = base
                        .iter()
                        .zip(&offset)
                        .map(|(b, o)| b.saturating_add(*o))
                        .collect();
                    if let Some(bucket) = grid.get(&key) {
                        bucket.iter().for_each(|&q| check(q));
                    }
                    // Odometer over {-1, 0, 1}^d.
                    let mut d = 0;
                    while d < dim {
                        offset[d] += 1;
                        if offset[d] <= 1 {
                            break;
                        }
                        offset[d] = -1;
                        d += 1;
                    }
                    if d == dim {
                        break;
                    }
                }
            }
        }
    }
}
