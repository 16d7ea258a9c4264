//! Test-only oracles. Nothing here calls into the code paths it checks.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stream_tts::frames::Frames;
use stream_tts::rvq::{train_codebooks, RvqStack, TrainConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_frames(n: usize, dim: usize, scale: f64, seed: u64) -> Frames<f64> {
    let mut r = rng(seed);
    Frames::new(dim, (0..n * dim).map(|_| scale * (2.0 * r.random::<f64>() - 1.0)).collect()).unwrap()
}

/// Box-Muller normal sample.
pub fn normal(r: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = r.random::<f64>().max(1e-300);
    let u2: f64 = r.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn two_clusters(n: usize, dim: usize, separation: f64, sigma: f64, seed: u64) -> (Frames<f64>, [Vec<f64>; 2]) {
    let means = [vec![-separation / 2.0; dim], vec![separation / 2.0; dim]];
    let mut r = rng(seed);
    let mut data = Vec::with_capacity(n * dim);
    for i in 0..n {
        let m = &means[i % 2];
        for &mu in m {
            data.push(mu + sigma * normal(&mut r));
        }
    }
    (Frames::new(dim, data).unwrap(), means)
}

pub fn sq(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s
}

/// Plain Lloyd's k-means: farthest-point init, iterate until assignments stop changing.
pub fn lloyd(points: &[Vec<f64>], k: usize, max_iter: usize) -> (Vec<Vec<f64>>, f64) {
    let mut centers = vec![points[0].clone()];
    while centers.len() < k {
        let mut best = (0, -1.0);
        for (i, p) in points.iter().enumerate() {
            let d = centers.iter().map(|c| sq(p, c)).fold(f64::INFINITY, f64::min);
            if d > best.1 {
                best = (i, d);
            }
        }
        centers.push(points[best.0].clone());
    }
    let mut assign = vec![usize::MAX; points.len()];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut bi = 0;
            for c in 1..k {
                if sq(p, &centers[c]) < sq(p, &centers[bi]) {
                    bi = c;
                }
            }
            if assign[i] != bi {
                assign[i] = bi;
                changed = true;
            }
        }
        for c in 0..k {
            let members: Vec<&Vec<f64>> = points.iter().zip(&assign).filter(|(_, &a)| a == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            let dim = points[0].len();
            let mut m = vec![0.0; dim];
            for p in &members {
                for j in 0..dim {
                    m[j] += p[j];
                }
            }
            for v in &mut m {
                *v /= members.len() as f64;
            }
            centers[c] = m;
        }
        if !changed {
            break;
        }
    }
    let distortion = points.iter().map(|p| centers.iter().map(|c| sq(p, c)).fold(f64::INFINITY, f64::min)).sum::<f64>()
        / points.len() as f64;
    (centers, distortion)
}

/// Window rule applied pair by pair.
pub fn window_allows(q: usize, k: usize, lookback: usize, lookahead: usize) -> bool {
    k + lookback >= q && k <= q + lookahead
}

/// Direct DFT magnitudes of the first `n/2 + 1` bins.
pub fn dft_magnitudes(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n / 2 + 1)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}

pub fn trained_stack(k: usize, depth: usize, frames: usize, dim: usize, seed: u64) -> RvqStack<f64> {
    let corpus = uniform_frames(frames, dim, 1.0, seed);
    let cfg = TrainConfig { codebook_size: k, depth, seed, epochs: 20, ..Default::default() };
    train_codebooks(&corpus, &cfg).unwrap().stack
}
