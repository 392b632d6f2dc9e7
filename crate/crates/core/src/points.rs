//! Dense row-major storage for a set of points in `R^d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `n` points of dimension `dim`, stored contiguously row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Points<T> {
    data: Vec<T>,
    dim: usize,
}

impl<T: Scalar> Points<T> {
    /// An empty set of `dim`-dimensional points.
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput(
                "point dimension must be at least 1".into(),
            ));
        }
        Ok(Self {
            data: Vec::new(),
            dim,
        })
    }

    pub fn with_capacity(dim: usize, capacity: usize) -> Result<Self> {
        let mut points = Self::new(dim)?;
        points.data.reserve(capacity * dim);
        Ok(points)
    }

    /// Builds from a flat row-major buffer whose length must be a multiple of `dim`.
    pub fn from_flat(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput(
                "point dimension must be at least 1".into(),
            ));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(format!(
                "flat buffer of length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { data, dim })
    }

    /// Builds from nested rows; every row must have the same non-zero length.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::InvalidInput("cannot infer dimension from zero rows".into()))?;
        let mut points = Self::with_capacity(dim, rows.len())?;
        for row in rows {
            points.push(row.as_ref())?;
        }
        Ok(points)
    }

    pub fn push(&mut self, row: &[T]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn rows_mut(&mut self) -> impl Iterator<Item = &mut [T]> + '_ {
        self.data.chunks_exact_mut(self.dim)
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    /// Copies the rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            data,
            dim: self.dim,
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.rows().map(<[T]>::to_vec).collect()
    }

    /// Arithmetic mean of all rows; `None` when empty.
    pub fn mean(&self) -> Option<Vec<T>> {
        if self.is_empty() {
            return None;
        }
        let mut acc = vec![T::zero(); self.dim];
        for row in self.rows() {
            for (a, &x) in acc.iter_mut().zip(row) {
                *a = *a + x;
            }
        }
        let n = T::of_usize(self.len());
        acc.iter_mut().for_each(|a| *a = *a / n);
        Some(acc)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_and_select() {
        let p = Points::from_rows(&[[1.0f64, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.row(1), &[3.0, 4.0]);
        let s = p.select(&[2, 0]);
        assert_eq!(s.to_rows(), vec![vec![5.0, 6.0], vec![1.0, 2.0]]);
        assert_eq!(p.mean().unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(matches!(
            Points::from_rows(&rows),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 1
            })
        ));
        assert!(Points::<f64>::new(0).is_err());
        assert!(Points::<f64>::from_flat(2, vec![1.0, 2.0, 3.0]).is_err());
    }
}
