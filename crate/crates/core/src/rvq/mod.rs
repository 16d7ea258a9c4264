//! Residual vector quantization: one semantic layer followed by acoustic
//! layers, each quantizing what the previous layers left behind.

mod align;
mod codebook;
mod train;

pub use align::{semantic_alignment_loss, AlignmentLoss, Projection};
pub use codebook::{
    energy, quantize_layer, squared_distance, CodeFrame, Codebook, EncodedFrame, RvqStack, DEFAULT_CODEBOOK_SIZE,
    DEFAULT_DIM, DEFAULT_FRAME_RATE_HZ, NUM_ACOUSTIC_LAYERS, NUM_LAYERS,
};
pub use train::{kmeans_pp_init, train_codebooks, LayerReport, TrainConfig, TrainedStack};

use crate::error::Result;
use crate::frames::Frames;
use crate::scalar::Scalar;

impl<T: Scalar> RvqStack<T> {
    /// Encodes every frame at `depth`.
    pub fn encode_all(&self, frames: &Frames<T>, depth: usize) -> Result<Vec<CodeFrame>> {
        frames.rows().map(|f| self.encode_frame(f, depth).map(|e| e.codes)).collect()
    }

    pub fn decode_all(&self, codes: &[CodeFrame], depth: usize) -> Result<Frames<T>> {
        let mut out = Frames::with_capacity(self.dim(), codes.len());
        for c in codes {
            out.push(&self.decode_frame(c, depth)?)?;
        }
        Ok(out)
    }
}
