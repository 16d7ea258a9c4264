//! Alignment of the semantic layer with externally supplied teacher features.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::codebook::RvqStack;
use crate::error::{Error, Result};
use crate::frames::Frames;
use crate::scalar::Scalar;

/// Linear map from feature space (dimension `input_dim`) into teacher space
/// (dimension `output_dim`), stored row-major as `output_dim x input_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection<T> {
    output_dim: usize,
    input_dim: usize,
    weights: Vec<T>,
}

impl<T: Scalar> Projection<T> {
    pub fn new(output_dim: usize, input_dim: usize, weights: Vec<T>) -> Result<Self> {
        if weights.len() != output_dim * input_dim {
            return Err(Error::Dimension { expected: output_dim * input_dim, got: weights.len() });
        }
        Ok(Self { output_dim, input_dim, weights })
    }

    pub fn identity(dim: usize) -> Self {
        let mut weights = vec![T::zero(); dim * dim];
        for i in 0..dim {
            weights[i * dim + i] = T::one();
        }
        Self { output_dim: dim, input_dim: dim, weights }
    }

    /// Seeded random projection with orthonormal rows (when `output_dim <= input_dim`)
    /// or orthonormal columns (otherwise), via Gram-Schmidt on a Gaussian matrix.
    pub fn random_orthonormal(output_dim: usize, input_dim: usize, seed: u64) -> Result<Self> {
        if output_dim == 0 || input_dim == 0 {
            return Err(Error::config("projection dimensions must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (vectors, len) = if output_dim <= input_dim { (output_dim, input_dim) } else { (input_dim, output_dim) };
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors);
        while basis.len() < vectors {
            let mut v: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                basis.push(v.into_iter().map(|x| x / norm).collect());
            }
        }
        let mut weights = vec![T::zero(); output_dim * input_dim];
        for (i, b) in basis.iter().enumerate() {
            for (j, &x) in b.iter().enumerate() {
                let (row, col) = if output_dim <= input_dim { (i, j) } else { (j, i) };
                weights[row * input_dim + col] = T::of(x);
            }
        }
        Ok(Self { output_dim, input_dim, weights })
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn apply(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.input_dim {
            return Err(Error::Dimension { expected: self.input_dim, got: v.len() });
        }
        Ok(self
            .weights
            .chunks_exact(self.input_dim)
            .map(|row| row.iter().zip(v).fold(T::zero(), |acc, (&w, &x)| acc + w * x))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentLoss {
    /// Mean of `1 - cos` over frames; in `[0, 2]`.
    pub loss: f64,
    /// Frames where either vector had zero norm; each contributed 1.
    pub zero_norm_frames: usize,
}

/// Mean cosine distance between projected layer-0 reconstructions and teacher frames.
pub fn semantic_alignment_loss<T: Scalar>(
    stack: &RvqStack<T>,
    frames: &Frames<T>,
    teacher: &Frames<T>,
    projection: &Projection<T>,
) -> Result<AlignmentLoss> {
    if frames.len() != teacher.len() {
        return Err(Error::Dimension { expected: frames.len(), got: teacher.len() });
    }
    if frames.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if projection.input_dim() != stack.dim() {
        return Err(Error::Dimension { expected: stack.dim(), got: projection.input_dim() });
    }
    if projection.output_dim() != teacher.dim() {
        return Err(Error::Dimension { expected: teacher.dim(), got: projection.output_dim() });
    }
    if teacher.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::config("teacher frames must be finite"));
    }

    let semantic = stack.semantic();
    let mut total = 0.0;
    let mut zero_norm_frames = 0;
    for (frame, target) in frames.rows().zip(teacher.rows()) {
        let (code, _) = semantic.nearest(frame)?;
        let projected = projection.apply(semantic.entry(code))?;
        match cosine(&projected, target) {
            Some(c) => total += 1.0 - c,
            None => {
                total += 1.0;
                zero_norm_frames += 1;
            }
        }
    }
    Ok(AlignmentLoss { loss: total / frames.len() as f64, zero_norm_frames })
}

fn cosine<T: Scalar>(a: &[T], b: &[T]) -> Option<f64> {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x.as_f64(), y.as_f64());
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_rows() {
        let p = Projection::<f64>::random_orthonormal(3, 5, 7).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..5).map(|c| p.weights[i * 5 + c] * p.weights[j * 5 + c]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn orthonormal_columns_when_expanding() {
        let p = Projection::<f64>::random_orthonormal(6, 2, 1).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let dot: f64 = (0..6).map(|r| p.weights[r * 2 + i] * p.weights[r * 2 + j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn seeded_projection_is_reproducible() {
        let a = Projection::<f32>::random_orthonormal(4, 8, 42).unwrap();
        let b = Projection::<f32>::random_orthonormal(4, 8, 42).unwrap();
        assert_eq!(a, b);
    }
}
