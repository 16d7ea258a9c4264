//! Codec evaluation: SNR per depth, multi-scale spectral loss over feature
//! sequences, and per-layer code perplexity.
//!
//! The spectral loss treats each feature dimension as a time series and
//! compares magnitude spectra of non-overlapping windows (the last window is
//! zero-padded). It adapts a mel-domain reconstruction loss to feature
//! sequences, since no waveform is synthesized here.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::Frames;
use crate::latency::check_major;
use crate::rvq::{CodeFrame, RvqStack};
use crate::scalar::Scalar;

pub const SNR_CAP_DB: f64 = 120.0;
pub const SPECTRAL_WINDOWS: [usize; 3] = [32, 64, 128];
pub const EVAL_SCHEMA_VERSION: &str = "1.0";

/// `10 log10(signal / error)`, capped at [`SNR_CAP_DB`] (exact reconstruction included).
pub fn snr_db(signal_energy: f64, error_energy: f64) -> f64 {
    if error_energy <= 0.0 {
        return SNR_CAP_DB;
    }
    (10.0 * (signal_energy / error_energy).log10()).min(SNR_CAP_DB)
}

/// Corpus SNR at every depth `1..=stack.depth()`.
///
/// Reconstructions are accumulated layer by layer in the same order as
/// [`RvqStack::decode_frame`], so depth `d` equals decoding at depth `d`.
pub fn snr_by_depth<T: Scalar>(stack: &RvqStack<T>, frames: &Frames<T>) -> Result<Vec<f64>> {
    let depth = stack.depth();
    let mut signal = 0.0;
    let mut error = vec![0.0; depth];
    for frame in frames.rows() {
        let codes = stack.encode_frame(frame, depth)?.codes;
        signal += frame.iter().map(|v| v.as_f64().powi(2)).sum::<f64>();
        let mut recon = vec![T::zero(); stack.dim()];
        for (d, layer) in stack.layers().iter().enumerate() {
            for (r, &c) in recon.iter_mut().zip(layer.entry(codes.codes[d] as usize)) {
                *r = *r + c;
            }
            error[d] += frame.iter().zip(&recon).map(|(&x, &y)| (x - y).as_f64().powi(2)).sum::<f64>();
        }
    }
    Ok(error.into_iter().map(|e| snr_db(signal, e)).collect())
}

/// Mean absolute difference of magnitude spectra at one window size.
pub fn spectral_loss<T: Scalar>(original: &Frames<T>, reconstructed: &Frames<T>, window: usize) -> Result<f64> {
    if original.dim() != reconstructed.dim() {
        return Err(Error::Dimension { expected: original.dim(), got: reconstructed.dim() });
    }
    if original.len() != reconstructed.len() {
        return Err(Error::Dimension { expected: original.len(), got: reconstructed.len() });
    }
    if window == 0 {
        return Err(Error::config("window must be positive"));
    }
    if original.is_empty() {
        return Ok(0.0);
    }
    let n = original.len();
    let segments = n.div_ceil(window);
    let bins = window / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window);
    let mut a = vec![Complex::new(0.0, 0.0); window];
    let mut b = vec![Complex::new(0.0, 0.0); window];
    let mut total = 0.0;
    for dim in 0..original.dim() {
        for seg in 0..segments {
            for t in 0..window {
                let idx = seg * window + t;
                let (x, y) = if idx < n {
                    (original.row(idx)[dim].as_f64(), reconstructed.row(idx)[dim].as_f64())
                } else {
                    (0.0, 0.0)
                };
                a[t] = Complex::new(x, 0.0);
                b[t] = Complex::new(y, 0.0);
            }
            fft.process(&mut a);
            fft.process(&mut b);
            total += a[..bins].iter().zip(&b[..bins]).map(|(p, q)| (p.norm() - q.norm()).abs()).sum::<f64>();
        }
    }
    Ok(total / (original.dim() * segments * bins) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowLoss {
    pub window: usize,
    pub loss: f64,
}

pub fn multiscale_spectral_loss<T: Scalar>(
    original: &Frames<T>,
    reconstructed: &Frames<T>,
    windows: &[usize],
) -> Result<Vec<WindowLoss>> {
    windows
        .iter()
        .map(|&window| Ok(WindowLoss { window, loss: spectral_loss(original, reconstructed, window)? }))
        .collect()
}

/// `exp(entropy)` of the empirical code distribution of one layer; in `[1, K]`.
pub fn perplexity(codes: impl IntoIterator<Item = u16>, codebook_size: usize) -> f64 {
    let mut counts = vec![0usize; codebook_size];
    let mut total = 0usize;
    for c in codes {
        if let Some(slot) = counts.get_mut(c as usize) {
            *slot += 1;
            total += 1;
        }
    }
    if total == 0 {
        return 1.0;
    }
    let entropy: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum();
    entropy.exp().clamp(1.0, codebook_size as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: String,
    pub frames: usize,
    pub depth: usize,
    /// SNR in dB at depths 1..=depth.
    pub snr_db: Vec<f64>,
    /// Spectral loss at full depth per window size.
    pub multiscale_spectral_loss: Vec<WindowLoss>,
    pub perplexity: Vec<f64>,
}

impl EvalReport {
    pub fn from_json(s: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s)?;
        let version = value.get("schema_version").and_then(|v| v.as_str()).unwrap_or("");
        check_major("eval report", version, EVAL_SCHEMA_VERSION)?;
        Ok(serde_json::from_value(value)?)
    }
}

pub fn eval_codec<T: Scalar>(stack: &RvqStack<T>, corpus: &Frames<T>) -> Result<EvalReport> {
    if corpus.dim() != stack.dim() {
        return Err(Error::Dimension { expected: stack.dim(), got: corpus.dim() });
    }
    let depth = stack.depth();
    let snr = snr_by_depth(stack, corpus)?;
    let codes: Vec<CodeFrame> = stack.encode_all(corpus, depth)?;
    let recon = stack.decode_all(&codes, depth)?;
    let spectral = multiscale_spectral_loss(corpus, &recon, &SPECTRAL_WINDOWS)?;
    let perplexity =
        (0..depth).map(|layer| perplexity(codes.iter().map(|c| c.codes[layer]), stack.layer(layer).size())).collect();
    Ok(EvalReport {
        schema_version: EVAL_SCHEMA_VERSION.into(),
        frames: corpus.len(),
        depth,
        snr_db: snr,
        multiscale_spectral_loss: spectral,
        perplexity,
    })
}
