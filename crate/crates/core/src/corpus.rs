//! Seeded synthetic feature corpora: Gaussian mixtures, and log filterbank
//! energies of synthetic drifting tones.

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{FrameSummary, Frames};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Isotropic standard deviation.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneParams {
    pub sample_rate: u32,
    pub frame_rate_hz: f64,
    /// Simultaneous sinusoids.
    pub voices: usize,
    pub noise_std: f64,
}

impl Default for ToneParams {
    fn default() -> Self {
        Self { sample_rate: 16_000, frame_rate_hz: 12.5, voices: 3, noise_std: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorpusKind {
    GaussianMixture { components: Vec<MixtureComponent> },
    FilterbankOfSyntheticTones(ToneParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpusSpec {
    pub kind: CorpusKind,
    pub frames: usize,
    pub dim: usize,
    pub seed: u64,
}

impl SyntheticCorpusSpec {
    /// A mixture of `components` equally weighted clusters whose means are
    /// drawn from `N(0, spread^2)` using `seed`.
    pub fn random_mixture(components: usize, frames: usize, dim: usize, spread: f64, std: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d69_7874_7572_6573);
        let components = (0..components)
            .map(|_| MixtureComponent {
                weight: 1.0,
                mean: (0..dim).map(|_| spread * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect(),
                std,
            })
            .collect();
        Self { kind: CorpusKind::GaussianMixture { components }, frames, dim, seed }
    }

    pub fn tones(frames: usize, dim: usize, params: ToneParams, seed: u64) -> Self {
        Self { kind: CorpusKind::FilterbankOfSyntheticTones(params), frames, dim, seed }
    }
}

#[derive(Debug, Clone)]
pub struct Corpus<T> {
    pub frames: Frames<T>,
    /// Mixture component of each frame (empty for tone corpora).
    pub labels: Vec<usize>,
    pub summary: FrameSummary,
}

pub fn gen_corpus<T: Scalar>(spec: &SyntheticCorpusSpec) -> Result<Corpus<T>> {
    if spec.frames == 0 {
        return Err(Error::config("corpus needs at least one frame"));
    }
    if spec.dim == 0 {
        return Err(Error::config("corpus dimension must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (frames, labels) = match &spec.kind {
        CorpusKind::GaussianMixture { components } => mixture(components, spec, &mut rng)?,
        CorpusKind::FilterbankOfSyntheticTones(params) => (tones(params, spec, &mut rng)?, Vec::new()),
    };
    let summary = frames.summary();
    Ok(Corpus { frames, labels, summary })
}

fn mixture<T: Scalar>(
    components: &[MixtureComponent],
    spec: &SyntheticCorpusSpec,
    rng: &mut ChaCha8Rng,
) -> Result<(Frames<T>, Vec<usize>)> {
    if components.is_empty() {
        return Err(Error::config("mixture needs at least one component"));
    }
    for c in components {
        if c.mean.len() != spec.dim {
            return Err(Error::Dimension { expected: spec.dim, got: c.mean.len() });
        }
        if !(c.std >= 0.0) || !c.std.is_finite() {
            return Err(Error::config("component std must be finite and non-negative"));
        }
    }
    let weights = WeightedIndex::new(components.iter().map(|c| c.weight))
        .map_err(|e| Error::config(format!("mixture weights: {e}")))?;
    let mut frames = Frames::with_capacity(spec.dim, spec.frames);
    let mut labels = Vec::with_capacity(spec.frames);
    let mut row = vec![T::zero(); spec.dim];
    for _ in 0..spec.frames {
        let k = weights.sample(rng);
        let c = &components[k];
        for (v, &m) in row.iter_mut().zip(&c.mean) {
            let z: f64 = StandardNormal.sample(rng);
            *v = T::of(m + c.std * z);
        }
        frames.push(&row)?;
        labels.push(k);
    }
    Ok((frames, labels))
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the mel scale, as `[filter][bin]` weights.
fn mel_filters(dim: usize, n_fft: usize, sample_rate: f64) -> Vec<Vec<f64>> {
    let bins = n_fft / 2 + 1;
    let max_mel = hz_to_mel(sample_rate / 2.0);
    let edges: Vec<f64> = (0..dim + 2).map(|i| mel_to_hz(max_mel * i as f64 / (dim + 1) as f64)).collect();
    let bin_hz = sample_rate / n_fft as f64;
    (0..dim)
        .map(|f| {
            let (lo, mid, hi) = (edges[f], edges[f + 1], edges[f + 2]);
            (0..bins)
                .map(|b| {
                    let hz = b as f64 * bin_hz;
                    if hz <= lo || hz >= hi {
                        0.0
                    } else if hz <= mid {
                        (hz - lo) / (mid - lo)
                    } else {
                        (hi - hz) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

fn tones<T: Scalar>(params: &ToneParams, spec: &SyntheticCorpusSpec, rng: &mut ChaCha8Rng) -> Result<Frames<T>> {
    if params.sample_rate == 0 || !(params.frame_rate_hz > 0.0) || params.voices == 0 {
        return Err(Error::config("tone corpus needs positive sample rate, frame rate and voice count"));
    }
    let sr = params.sample_rate as f64;
    let hop = (sr / params.frame_rate_hz).round() as usize;
    if hop == 0 {
        return Err(Error::config("frame rate exceeds sample rate"));
    }
    let n_fft = hop.next_power_of_two();
    let total = spec.frames * hop + n_fft;

    // Each voice follows a log-frequency random walk updated once per hop.
    let mut freq: Vec<f64> = (0..params.voices).map(|_| 100.0 * 2f64.powf(rng.random::<f64>() * 5.0)).collect();
    let mut amp: Vec<f64> = (0..params.voices).map(|_| 0.2 + 0.8 * rng.random::<f64>()).collect();
    let mut phase = vec![0.0f64; params.voices];
    let nyquist = sr / 2.0;
    let mut wave = Vec::with_capacity(total);
    for s in 0..total {
        if s % hop == 0 {
            for v in 0..params.voices {
                let step: f64 = StandardNormal.sample(rng);
                freq[v] = (freq[v] * 2f64.powf(0.1 * step)).clamp(50.0, nyquist * 0.9);
                amp[v] = (amp[v] + 0.05 * Distribution::<f64>::sample(&StandardNormal, rng)).clamp(0.05, 1.0);
            }
        }
        let mut x = 0.0;
        for v in 0..params.voices {
            phase[v] += 2.0 * std::f64::consts::PI * freq[v] / sr;
            x += amp[v] * phase[v].sin();
        }
        let noise: f64 = StandardNormal.sample(rng);
        wave.push(x + params.noise_std * noise);
    }

    let filters = mel_filters(spec.dim, n_fft, sr);
    let window: Vec<f64> =
        (0..n_fft).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n_fft as f64).cos()).collect();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let mut frames = Frames::with_capacity(spec.dim, spec.frames);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut row = vec![T::zero(); spec.dim];
    for n in 0..spec.frames {
        let seg = &wave[n * hop..n * hop + n_fft];
        for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..n_fft / 2 + 1].iter().map(|c| c.norm_sqr()).collect();
        for (v, filt) in row.iter_mut().zip(&filters) {
            let e: f64 = filt.iter().zip(&power).map(|(w, p)| w * p).sum();
            *v = T::of((1e-6 + e).ln());
        }
        frames.push(&row)?;
    }
    Ok(frames)
}
