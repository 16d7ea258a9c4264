use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A sequence of equal-length feature frames stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frames<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> Frames<T> {
    pub fn new(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("frame dimension must be positive"));
        }
        if data.len() % dim != 0 {
            return Err(Error::Dimension { expected: dim, got: data.len() % dim });
        }
        Ok(Self { dim, data })
    }

    pub fn with_capacity(dim: usize, frames: usize) -> Self {
        Self { dim, data: Vec::with_capacity(dim * frames) }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or_else(|| Error::config("no frames"))?;
        let mut out = Self::with_capacity(dim, rows.len());
        for row in rows {
            out.push(row)?;
        }
        Ok(out)
    }

    pub fn push(&mut self, frame: &[T]) -> Result<()> {
        if frame.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: frame.len() });
        }
        self.data.extend_from_slice(frame);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, T> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.rows().map(<[T]>::to_vec).collect()
    }

    /// Per-dimension mean and (population) variance.
    pub fn summary(&self) -> FrameSummary {
        let n = self.len().max(1) as f64;
        let mut mean = vec![0.0; self.dim];
        for row in self.rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v.as_f64();
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut variance = vec![0.0; self.dim];
        for row in self.rows() {
            for ((s, &v), m) in variance.iter_mut().zip(row).zip(&mean) {
                let d = v.as_f64() - m;
                *s += d * d;
            }
        }
        variance.iter_mut().for_each(|s| *s /= n);
        FrameSummary { frames: self.len(), dim: self.dim, mean, variance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSummary {
    pub frames: usize,
    pub dim: usize,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}
