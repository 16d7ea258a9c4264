use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Number of quantizer layers in a full stack: one semantic layer followed by
/// fifteen acoustic layers.
pub const NUM_LAYERS: usize = 16;
pub const NUM_ACOUSTIC_LAYERS: usize = NUM_LAYERS - 1;
pub const DEFAULT_CODEBOOK_SIZE: usize = 2048;
pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_FRAME_RATE_HZ: f64 = 12.5;

/// Squared Euclidean distance, accumulated left to right.
#[inline]
pub fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

#[inline]
pub fn energy<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x)
}

/// One quantizer layer: `size` centroids of dimension `dim`, stored row-major,
/// plus the EMA statistics used while training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook<T> {
    pub layer_index: usize,
    size: usize,
    dim: usize,
    entries: Vec<T>,
    pub(crate) usage_counts: Vec<T>,
    pub(crate) ema_sums: Vec<T>,
    /// Entry 0 is held at the origin and never updated.
    pub(crate) null_entry: bool,
}

impl<T: Scalar> Codebook<T> {
    /// Builds a codebook from row-major centroids.
    pub fn from_entries(layer_index: usize, size: usize, dim: usize, entries: Vec<T>) -> Result<Self> {
        if size == 0 || dim == 0 {
            return Err(Error::config("codebook size and dimension must be positive"));
        }
        if size > u16::MAX as usize + 1 {
            return Err(Error::config(format!("codebook size {size} exceeds the u16 code range")));
        }
        if entries.len() != size * dim {
            return Err(Error::Dimension { expected: size * dim, got: entries.len() });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("codebook entries must be finite"));
        }
        Ok(Self {
            layer_index,
            size,
            dim,
            entries,
            usage_counts: vec![T::zero(); size],
            ema_sums: vec![T::zero(); size * dim],
            null_entry: false,
        })
    }

    pub fn from_rows(layer_index: usize, rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        let mut entries = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::Dimension { expected: dim, got: row.len() });
            }
            entries.extend_from_slice(row);
        }
        Self::from_entries(layer_index, rows.len(), dim, entries)
    }

    pub fn zeros(layer_index: usize, size: usize, dim: usize) -> Result<Self> {
        Self::from_entries(layer_index, size, dim, vec![T::zero(); size * dim])
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, index: usize) -> &[T] {
        &self.entries[index * self.dim..(index + 1) * self.dim]
    }

    pub(crate) fn entry_mut(&mut self, index: usize) -> &mut [T] {
        &mut self.entries[index * self.dim..(index + 1) * self.dim]
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn usage_counts(&self) -> &[T] {
        &self.usage_counts
    }

    pub fn ema_sums(&self) -> &[T] {
        &self.ema_sums
    }

    pub fn has_null_entry(&self) -> bool {
        self.null_entry
    }

    /// Index and squared distance of the nearest entry. Ties go to the lowest index.
    pub fn nearest(&self, vector: &[T]) -> Result<(usize, T)> {
        if vector.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: vector.len() });
        }
        Ok(self.nearest_unchecked(vector))
    }

    pub(crate) fn nearest_unchecked(&self, vector: &[T]) -> (usize, T) {
        let mut best = 0;
        let mut best_dist = T::infinity();
        for (i, row) in self.entries.chunks_exact(self.dim).enumerate() {
            let d = squared_distance(vector, row);
            // strict comparison keeps the lowest index on ties
            if d < best_dist {
                best = i;
                best_dist = d;
            }
        }
        (best, best_dist)
    }

    pub(crate) fn check_code(&self, index: usize) -> Result<()> {
        if index >= self.size {
            return Err(Error::CodeRange { layer: self.layer_index, index, size: self.size });
        }
        Ok(())
    }
}

/// Nearest-entry quantization of one vector against one layer.
///
/// Returns the chosen index and `vector - entry[index]`.
pub fn quantize_layer<T: Scalar>(vector: &[T], codebook: &Codebook<T>) -> Result<(usize, Vec<T>)> {
    let (index, _) = codebook.nearest(vector)?;
    let residual = vector.iter().zip(codebook.entry(index)).map(|(&x, &c)| x - c).collect();
    Ok((index, residual))
}

/// Per-frame code indices, layer 0 first. Entries past the encoded depth are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CodeFrame {
    pub codes: [u16; NUM_LAYERS],
}

impl CodeFrame {
    pub fn new(codes: [u16; NUM_LAYERS]) -> Self {
        Self { codes }
    }

    pub fn semantic(&self) -> u16 {
        self.codes[0]
    }

    pub fn acoustic(&self) -> &[u16] {
        &self.codes[1..]
    }

    pub fn prefix(&self, depth: usize) -> &[u16] {
        &self.codes[..depth.min(NUM_LAYERS)]
    }
}

/// Result of encoding one frame: its codes and the residual energy left after
/// each encoded layer.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedFrame<T> {
    pub codes: CodeFrame,
    pub residual_energy: Vec<T>,
}

/// An ordered stack of quantizer layers. Layer 0 is the semantic layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RvqStack<T> {
    layers: Vec<Codebook<T>>,
    pub frame_rate_hz: f64,
    dim: usize,
}

impl<T: Scalar> RvqStack<T> {
    /// Builds a stack of 1..=16 layers sharing one dimension.
    pub fn new(layers: Vec<Codebook<T>>, frame_rate_hz: f64) -> Result<Self> {
        if layers.is_empty() || layers.len() > NUM_LAYERS {
            return Err(Error::config(format!("a stack holds 1..={NUM_LAYERS} layers, got {}", layers.len())));
        }
        if !(frame_rate_hz > 0.0) {
            return Err(Error::config("frame rate must be positive"));
        }
        let dim = layers[0].dim();
        let mut layers = layers;
        for (i, layer) in layers.iter_mut().enumerate() {
            if layer.dim() != dim {
                return Err(Error::Dimension { expected: dim, got: layer.dim() });
            }
            layer.layer_index = i;
        }
        Ok(Self { layers, frame_rate_hz, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of layers present in this stack.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Codebook<T>] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &Codebook<T> {
        &self.layers[i]
    }

    pub fn semantic(&self) -> &Codebook<T> {
        &self.layers[0]
    }

    pub fn acoustic(&self) -> &[Codebook<T>] {
        &self.layers[1..]
    }

    fn check_depth(&self, depth: usize) -> Result<()> {
        if depth == 0 || depth > self.layers.len() {
            return Err(Error::config(format!("depth {depth} outside 1..={}", self.layers.len())));
        }
        Ok(())
    }

    /// Greedy residual encoding of one frame through the first `depth` layers.
    pub fn encode_frame(&self, frame: &[T], depth: usize) -> Result<EncodedFrame<T>> {
        self.check_depth(depth)?;
        if frame.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: frame.len() });
        }
        let mut codes = [0u16; NUM_LAYERS];
        let mut residual = frame.to_vec();
        let mut residual_energy = Vec::with_capacity(depth);
        for (layer, code) in self.layers[..depth].iter().zip(codes.iter_mut()) {
            let (index, dist) = layer.nearest_unchecked(&residual);
            for (r, &c) in residual.iter_mut().zip(layer.entry(index)) {
                *r = *r - c;
            }
            *code = index as u16;
            residual_energy.push(dist);
        }
        Ok(EncodedFrame { codes: CodeFrame { codes }, residual_energy })
    }

    /// Sum of the selected centroids of layers `0..depth`.
    pub fn decode_frame(&self, codes: &CodeFrame, depth: usize) -> Result<Vec<T>> {
        self.check_depth(depth)?;
        let mut out = vec![T::zero(); self.dim];
        for (layer, &code) in self.layers[..depth].iter().zip(codes.codes.iter()) {
            layer.check_code(code as usize)?;
            for (o, &c) in out.iter_mut().zip(layer.entry(code as usize)) {
                *o = *o + c;
            }
        }
        Ok(out)
    }

    pub fn validate_codes(&self, codes: &CodeFrame, depth: usize) -> Result<()> {
        self.check_depth(depth)?;
        for (layer, &code) in self.layers[..depth].iter().zip(codes.codes.iter()) {
            layer.check_code(code as usize)?;
        }
        Ok(())
    }
}
