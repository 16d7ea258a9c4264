//! EMA k-means training of a residual quantizer stack.
//!
//! Layers are trained one after another: layer `i` sees the residuals left by
//! layers `0..i`. Each layer is seeded with k-means++ and refined with
//! exponential-moving-average centroid updates over full-corpus epochs.
//! Assignments are computed in parallel; every reduction runs sequentially in
//! frame order, so results do not depend on the worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::codebook::{squared_distance, Codebook, RvqStack, DEFAULT_FRAME_RATE_HZ, NUM_LAYERS};
use crate::error::{Error, Result};
use crate::frames::Frames;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub codebook_size: usize,
    pub depth: usize,
    /// Upper bound on EMA epochs per layer.
    pub epochs: usize,
    pub ema_decay: f64,
    /// Entries whose EMA usage falls below `dead_code_factor * frames / codebook_size`
    /// are moved onto the worst-quantized frames.
    pub dead_code_factor: f64,
    pub seed: u64,
    /// Pin entry 0 of every acoustic layer to the origin, so a layer can
    /// always leave the residual untouched.
    pub acoustic_null_entry: bool,
    /// Stop once assignments are stable and no centroid moved by more than
    /// this (squared distance).
    pub tolerance: f64,
    pub frame_rate_hz: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            codebook_size: super::DEFAULT_CODEBOOK_SIZE,
            depth: NUM_LAYERS,
            epochs: 50,
            ema_decay: 0.99,
            dead_code_factor: 1e-3,
            seed: 0,
            acoustic_null_entry: true,
            tolerance: 1e-12,
            frame_rate_hz: DEFAULT_FRAME_RATE_HZ,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.codebook_size == 0 || self.codebook_size > u16::MAX as usize + 1 {
            return Err(Error::config(format!("codebook size {} out of range", self.codebook_size)));
        }
        if self.depth == 0 || self.depth > NUM_LAYERS {
            return Err(Error::config(format!("depth {} outside 1..={NUM_LAYERS}", self.depth)));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(Error::config("ema decay must lie in [0, 1)"));
        }
        if self.epochs == 0 {
            return Err(Error::config("at least one epoch is required"));
        }
        if self.acoustic_null_entry && self.depth > 1 && self.codebook_size < 2 {
            return Err(Error::config("a null entry needs codebook size >= 2"));
        }
        Ok(())
    }
}

/// Training outcome for one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub layer: usize,
    pub epochs_run: usize,
    /// Mean squared quantization error over the corpus, measured at the
    /// initial centroids and after every epoch.
    pub distortion_history: Vec<f64>,
    pub final_distortion: f64,
    pub dead_codes_reassigned: usize,
}

#[derive(Debug, Clone)]
pub struct TrainedStack<T> {
    pub stack: RvqStack<T>,
    pub layers: Vec<LayerReport>,
}

impl<T> TrainedStack<T> {
    pub fn final_distortion(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.final_distortion).collect()
    }
}

/// Trains a stack of `config.depth` layers on `corpus`.
pub fn train_codebooks<T: Scalar>(corpus: &Frames<T>, config: &TrainConfig) -> Result<TrainedStack<T>> {
    config.validate()?;
    if corpus.len() < config.codebook_size {
        return Err(Error::InsufficientData { needed: config.codebook_size, got: corpus.len() });
    }
    if corpus.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::config("corpus contains non-finite values"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut residuals = corpus.clone();
    let mut layers = Vec::with_capacity(config.depth);
    let mut reports = Vec::with_capacity(config.depth);

    for layer_index in 0..config.depth {
        let null_entry = config.acoustic_null_entry && layer_index > 0;
        let mut codebook = kmeans_pp_init(&residuals, config.codebook_size, layer_index, null_entry, &mut rng)?;
        let report = ema_refine(&mut codebook, &residuals, config);

        let assignment = assign(&codebook, &residuals);
        for (i, &code) in assignment.codes.iter().enumerate() {
            let entry = codebook.entry(code as usize).to_vec();
            for (r, c) in residuals.row_mut(i).iter_mut().zip(entry) {
                *r = *r - c;
            }
        }
        reports.push(report);
        layers.push(codebook);
    }

    Ok(TrainedStack { stack: RvqStack::new(layers, config.frame_rate_hz)?, layers: reports })
}

/// k-means++ seeding. With `null_entry`, entry 0 is the origin and counts as
/// an already-chosen center.
pub fn kmeans_pp_init<T: Scalar>(
    data: &Frames<T>,
    k: usize,
    layer_index: usize,
    null_entry: bool,
    rng: &mut impl Rng,
) -> Result<Codebook<T>> {
    let n = data.len();
    if n == 0 {
        return Err(Error::InsufficientData { needed: k, got: 0 });
    }
    let dim = data.dim();
    let mut codebook = Codebook::zeros(layer_index, k, dim)?;
    codebook.null_entry = null_entry;

    let mut nearest: Vec<f64>;
    let start = if null_entry {
        let zero = vec![T::zero(); dim];
        nearest = data.rows().map(|r| squared_distance(r, &zero).as_f64()).collect();
        1
    } else {
        let first = rng.random_range(0..n);
        codebook.entry_mut(0).copy_from_slice(data.row(first));
        let c = data.row(first).to_vec();
        nearest = data.rows().map(|r| squared_distance(r, &c).as_f64()).collect();
        1
    };

    for slot in start..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 && total.is_finite() {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in nearest.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave the target just past the final sum
            chosen.unwrap_or_else(|| nearest.iter().rposition(|&w| w > 0.0).unwrap_or(n - 1))
        } else {
            rng.random_range(0..n)
        };
        let c = data.row(pick).to_vec();
        codebook.entry_mut(slot).copy_from_slice(&c);
        nearest.par_iter_mut().zip(data.as_slice().par_chunks_exact(dim)).for_each(|(d, row)| {
            let nd = squared_distance(row, &c).as_f64();
            if nd < *d {
                *d = nd;
            }
        });
    }
    Ok(codebook)
}

pub(crate) struct Assignment<T> {
    pub codes: Vec<u32>,
    pub errors: Vec<T>,
}

impl<T: Scalar> Assignment<T> {
    pub fn mean_error(&self) -> f64 {
        let total = self.errors.iter().fold(T::zero(), |a, &e| a + e);
        total.as_f64() / self.errors.len().max(1) as f64
    }
}

pub(crate) fn assign<T: Scalar>(codebook: &Codebook<T>, data: &Frames<T>) -> Assignment<T> {
    let (codes, errors) = data
        .as_slice()
        .par_chunks_exact(data.dim())
        .map(|row| {
            let (i, d) = codebook.nearest_unchecked(row);
            (i as u32, d)
        })
        .unzip();
    Assignment { codes, errors }
}

fn ema_refine<T: Scalar>(codebook: &mut Codebook<T>, data: &Frames<T>, config: &TrainConfig) -> LayerReport {
    let k = codebook.size();
    let dim = codebook.dim();
    let decay = T::of(config.ema_decay);
    let fresh = T::one() - decay;
    let threshold = T::of(config.dead_code_factor * data.len() as f64 / k as f64);
    let first_trainable = usize::from(codebook.null_entry);

    let mut history = Vec::with_capacity(config.epochs + 1);
    let mut assignment = assign(codebook, data);
    history.push(assignment.mean_error());
    let mut reassigned_total = 0;
    let mut epochs_run = 0;

    for _ in 0..config.epochs {
        epochs_run += 1;
        let mut counts = vec![0usize; k];
        let mut sums = vec![T::zero(); k * dim];
        for (row, &code) in data.rows().zip(&assignment.codes) {
            let c = code as usize;
            counts[c] += 1;
            for (s, &v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(row) {
                *s = *s + v;
            }
        }

        let mut max_shift = T::zero();
        for i in first_trainable..k {
            if counts[i] == 0 {
                // no fresh mass: usage decays, the centroid stays put
                codebook.usage_counts[i] = decay * codebook.usage_counts[i];
                for m in &mut codebook.ema_sums[i * dim..(i + 1) * dim] {
                    *m = decay * *m;
                }
                continue;
            }
            // Equivalent to `ema_sums / usage`, written as a step from the old
            // centroid toward the batch mean so a centroid already at the mean
            // stays bit-identical.
            let n_i = T::from_usize(counts[i]).unwrap();
            let old_usage = codebook.usage_counts[i];
            let usage = decay * old_usage + fresh * n_i;
            let keep = decay * old_usage / usage;
            let mean: Vec<T> = sums[i * dim..(i + 1) * dim].iter().map(|&s| s / n_i).collect();
            let updated: Vec<T> = if keep == T::zero() {
                mean
            } else {
                codebook.entry(i).iter().zip(&mean).map(|(&e, &m)| e + (T::one() - keep) * (m - e)).collect()
            };
            max_shift = max_shift.max(squared_distance(codebook.entry(i), &updated));
            codebook.usage_counts[i] = usage;
            for (m, &e) in codebook.ema_sums[i * dim..(i + 1) * dim].iter_mut().zip(&updated) {
                *m = e * usage;
            }
            codebook.entry_mut(i).copy_from_slice(&updated);
        }

        let reassigned = reassign_dead(codebook, data, &assignment, threshold, first_trainable);
        reassigned_total += reassigned;

        let next = assign(codebook, data);
        history.push(next.mean_error());
        let stable = next.codes == assignment.codes;
        assignment = next;
        if stable && reassigned == 0 && max_shift.as_f64() <= config.tolerance {
            break;
        }
    }

    LayerReport {
        layer: codebook.layer_index,
        epochs_run,
        final_distortion: *history.last().unwrap(),
        distortion_history: history,
        dead_codes_reassigned: reassigned_total,
    }
}

/// Moves under-used entries onto the frames with the largest current error,
/// one distinct frame per dead entry. Returns the number of moved entries.
fn reassign_dead<T: Scalar>(
    codebook: &mut Codebook<T>,
    data: &Frames<T>,
    assignment: &Assignment<T>,
    threshold: T,
    first_trainable: usize,
) -> usize {
    let dead: Vec<usize> =
        (first_trainable..codebook.size()).filter(|&i| codebook.usage_counts[i] < threshold).collect();
    if dead.is_empty() {
        return 0;
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    // descending error, lower frame index first on ties
    order.sort_by(|&a, &b| {
        assignment.errors[b].partial_cmp(&assignment.errors[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let dim = codebook.dim();
    for (&entry, &frame) in dead.iter().zip(order.iter()) {
        let row = data.row(frame).to_vec();
        codebook.entry_mut(entry).copy_from_slice(&row);
        codebook.usage_counts[entry] = threshold;
        for (m, &v) in codebook.ema_sums[entry * dim..(entry + 1) * dim].iter_mut().zip(&row) {
            *m = v * threshold;
        }
    }
    dead.len().min(order.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(n: usize, dim: usize, seed: u64) -> Frames<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        Frames::new(dim, data).unwrap()
    }

    #[test]
    fn insufficient_data() {
        let c = corpus(3, 2, 1);
        let cfg = TrainConfig { codebook_size: 4, depth: 1, ..Default::default() };
        assert!(matches!(train_codebooks(&c, &cfg), Err(Error::InsufficientData { needed: 4, got: 3 })));
    }

    #[test]
    fn exactly_k_points_single_layer() {
        let c = corpus(8, 3, 2);
        let cfg = TrainConfig { codebook_size: 8, depth: 1, ..Default::default() };
        let trained = train_codebooks(&c, &cfg).unwrap();
        assert_eq!(trained.layers[0].final_distortion, 0.0);
        // every point is its own centroid
        for row in c.rows() {
            let (_, d) = trained.stack.semantic().nearest(row).unwrap();
            assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn null_entry_pinned() {
        let c = corpus(200, 4, 3);
        let cfg = TrainConfig { codebook_size: 8, depth: 3, seed: 9, ..Default::default() };
        let trained = train_codebooks(&c, &cfg).unwrap();
        assert!(!trained.stack.layer(0).has_null_entry());
        for layer in trained.stack.acoustic() {
            assert!(layer.has_null_entry());
            assert!(layer.entry(0).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let c = corpus(600, 5, 4);
        let cfg = TrainConfig { codebook_size: 16, depth: 4, seed: 11, ..Default::default() };
        let a = train_codebooks(&c, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| train_codebooks(&c, &cfg).unwrap());
        assert_eq!(a.stack, b.stack);
        assert_eq!(a.layers, b.layers);
    }

    #[test]
    fn distortion_non_increasing_per_epoch() {
        for seed in 0..6 {
            let c = corpus(400, 3, 100 + seed);
            let cfg = TrainConfig { codebook_size: 16, depth: 3, seed, epochs: 30, ..Default::default() };
            let trained = train_codebooks(&c, &cfg).unwrap();
            for layer in &trained.layers {
                for w in layer.distortion_history.windows(2) {
                    assert!(
                        w[1] <= w[0] * (1.0 + 1e-12),
                        "layer {} history {:?}",
                        layer.layer,
                        layer.distortion_history
                    );
                }
            }
        }
    }

    #[test]
    fn invalid_configs() {
        let c = corpus(50, 2, 5);
        for cfg in [
            TrainConfig { codebook_size: 0, ..Default::default() },
            TrainConfig { codebook_size: 4, depth: 17, ..Default::default() },
            TrainConfig { codebook_size: 4, ema_decay: 1.0, ..Default::default() },
            TrainConfig { codebook_size: 4, epochs: 0, ..Default::default() },
        ] {
            assert!(matches!(train_codebooks(&c, &cfg), Err(Error::Config(_))));
        }
    }
}
