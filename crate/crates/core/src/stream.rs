//! Frame-by-frame causal encode/decode around an [`RvqStack`].
//!
//! Encoding has no lookahead: each frame is quantized as soon as it arrives.
//! Decoding dequantizes and then runs a short causal FIR over the decoded
//! frames, standing in for a small causal convolutional decoder. Its receptive
//! field (taps) is a placeholder, not a measured value.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::Frames;
use crate::rvq::{CodeFrame, RvqStack};
use crate::scalar::Scalar;

/// Causal FIR applied independently to every feature dimension:
/// `y[n] = sum_j taps[j] * x[n - j]`, with `x[m] = 0` for `m < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirFilter<T> {
    taps: Vec<T>,
}

impl<T: Scalar> FirFilter<T> {
    pub fn new(taps: Vec<T>) -> Result<Self> {
        let first = *taps.first().ok_or_else(|| Error::config("FIR needs at least one tap"))?;
        if !(first > T::zero()) {
            return Err(Error::config("FIR tap 0 must be positive"));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::config("FIR taps must be finite"));
        }
        let sum = taps.iter().fold(0.0, |acc, t| acc + t.as_f64());
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::config(format!("FIR taps must sum to 1, got {sum}")));
        }
        Ok(Self { taps })
    }

    pub fn identity() -> Self {
        Self { taps: vec![T::one()] }
    }

    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    /// Number of past frames the filter reads.
    pub fn history_len(&self) -> usize {
        self.taps.len() - 1
    }
}

impl<T: Scalar> Default for FirFilter<T> {
    fn default() -> Self {
        Self { taps: [0.4, 0.3, 0.2, 0.1].into_iter().map(T::of).collect() }
    }
}

/// Per-session streaming state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamState<T> {
    pub frames_encoded: u64,
    pub frames_decoded: u64,
    /// Most recent decoded (pre-filter) frames, newest first.
    history: VecDeque<Vec<T>>,
    filter: FirFilter<T>,
    depth: usize,
    pub frame_rate_hz: f64,
}

impl<T: Scalar> StreamState<T> {
    pub fn new(filter: FirFilter<T>, depth: usize, frame_rate_hz: f64) -> Result<Self> {
        if depth == 0 || depth > crate::rvq::NUM_LAYERS {
            return Err(Error::config(format!("depth {depth} out of range")));
        }
        if !(frame_rate_hz > 0.0) {
            return Err(Error::config("frame rate must be positive"));
        }
        Ok(Self {
            frames_encoded: 0,
            frames_decoded: 0,
            history: VecDeque::with_capacity(filter.history_len()),
            filter,
            depth,
            frame_rate_hz,
        })
    }

    /// State matching a stack's depth and frame rate.
    pub fn for_stack(stack: &RvqStack<T>, filter: FirFilter<T>) -> Result<Self> {
        Self::new(filter, stack.depth(), stack.frame_rate_hz)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn filter(&self) -> &FirFilter<T> {
        &self.filter
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    /// Milliseconds of audio represented by one frame.
    pub fn frame_ms(&self) -> f64 {
        1000.0 / self.frame_rate_hz
    }

    pub fn reset(&mut self) {
        self.frames_encoded = 0;
        self.frames_decoded = 0;
        self.history.clear();
    }

    /// Quantizes one frame and returns its codes immediately.
    pub fn push_encode(&mut self, stack: &RvqStack<T>, frame: &[T]) -> Result<CodeFrame> {
        let encoded = stack.encode_frame(frame, self.depth)?;
        self.frames_encoded += 1;
        Ok(encoded.codes)
    }

    /// Dequantizes one code frame and filters it against past frames only.
    pub fn push_decode(&mut self, stack: &RvqStack<T>, codes: &CodeFrame) -> Result<Vec<T>> {
        let current = stack.decode_frame(codes, self.depth)?;
        let taps = self.filter.taps();
        let mut out: Vec<T> = current.iter().map(|&x| taps[0] * x).collect();
        for (tap, past) in taps[1..].iter().zip(self.history.iter()) {
            for (o, &x) in out.iter_mut().zip(past) {
                *o = *o + *tap * x;
            }
        }
        if self.filter.history_len() > 0 {
            if self.history.len() == self.filter.history_len() {
                self.history.pop_back();
            }
            self.history.push_front(current);
        }
        self.frames_decoded += 1;
        Ok(out)
    }
}

/// Offline decode of a whole code sequence through the same causal filter.
pub fn decode_offline<T: Scalar>(
    stack: &RvqStack<T>,
    codes: &[CodeFrame],
    depth: usize,
    filter: &FirFilter<T>,
) -> Result<Frames<T>> {
    let dequantized = stack.decode_all(codes, depth)?;
    let taps = filter.taps();
    let mut out = Frames::with_capacity(stack.dim(), codes.len());
    for n in 0..dequantized.len() {
        let mut y: Vec<T> = dequantized.row(n).iter().map(|&x| taps[0] * x).collect();
        for (j, tap) in taps.iter().enumerate().skip(1) {
            if j > n {
                break;
            }
            for (o, &x) in y.iter_mut().zip(dequantized.row(n - j)) {
                *o = *o + *tap * x;
            }
        }
        out.push(&y)?;
    }
    Ok(out)
}
