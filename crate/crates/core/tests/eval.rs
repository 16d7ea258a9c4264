mod common;

use common::*;
use stream_tts::corpus::{gen_corpus, CorpusKind, MixtureComponent, SyntheticCorpusSpec};
use stream_tts::frames::Frames;
use stream_tts::metrics::*;
use stream_tts::rvq::{Codebook, RvqStack};

/// Direct recomputation: zero-padded non-overlapping windows, DFT magnitudes, mean L1.
fn oracle_loss(a: &Frames<f64>, b: &Frames<f64>, window: usize) -> f64 {
    let n = a.len();
    let segments = n.div_ceil(window);
    let mut total = 0.0;
    let mut count = 0;
    for d in 0..a.dim() {
        for s in 0..segments {
            let take = |f: &Frames<f64>| -> Vec<f64> {
                (0..window).map(|t| if s * window + t < n { f.row(s * window + t)[d] } else { 0.0 }).collect()
            };
            let (ma, mb) = (dft_magnitudes(&take(a)), dft_magnitudes(&take(b)));
            for (x, y) in ma.iter().zip(&mb) {
                total += (x - y).abs();
                count += 1;
            }
        }
    }
    total / count as f64
}

#[test]
fn two_frame_spectral_loss_matches_direct_dft() {
    let a = Frames::from_rows(&[vec![1.0, -0.5, 2.0], vec![0.25, 0.75, -1.0]]).unwrap();
    let b = Frames::from_rows(&[vec![0.9, -0.4, 2.2], vec![0.0, 1.0, -1.5]]).unwrap();
    for w in multiscale_spectral_loss(&a, &b, &SPECTRAL_WINDOWS).unwrap() {
        let want = oracle_loss(&a, &b, w.window);
        assert!((w.loss - want).abs() < 1e-12, "window {}: {} vs {want}", w.window, w.loss);
    }
}

#[test]
fn longer_sequences_match_direct_dft() {
    let a = uniform_frames(150, 2, 1.0, 1);
    let b = uniform_frames(150, 2, 1.0, 2);
    for window in [32, 64] {
        let got = spectral_loss(&a, &b, window).unwrap();
        assert!((got - oracle_loss(&a, &b, window)).abs() < 1e-9);
    }
}

#[test]
fn mixture_frequencies_within_three_sigma() {
    let weights = [0.3, 0.7];
    let spec = SyntheticCorpusSpec {
        kind: CorpusKind::GaussianMixture {
            components: weights
                .iter()
                .enumerate()
                .map(|(i, &w)| MixtureComponent { weight: w, mean: vec![i as f64 * 4.0; 3], std: 1.0 })
                .collect(),
        },
        frames: 10_000,
        dim: 3,
        seed: 8,
    };
    let corpus = gen_corpus::<f64>(&spec).unwrap();
    let n = corpus.labels.len() as f64;
    for (k, &w) in weights.iter().enumerate() {
        let count = corpus.labels.iter().filter(|&&l| l == k).count() as f64;
        let sigma = (n * w * (1.0 - w)).sqrt();
        assert!((count - n * w).abs() <= 3.0 * sigma, "component {k}: {count} vs {}", n * w);
    }
}

#[test]
fn exact_centroid_corpus_hits_snr_cap() {
    let l0 = Codebook::from_rows(0, &[vec![1.0, 2.0], vec![-3.0, 0.5], vec![4.0, 4.0]]).unwrap();
    let l1 = Codebook::from_rows(1, &[vec![0.0, 0.0], vec![0.1, -0.1]]).unwrap();
    let stack = RvqStack::new(vec![l0, l1], 12.5).unwrap();
    let corpus = Frames::from_rows(&[vec![1.0, 2.0], vec![4.0, 4.0], vec![-3.0, 0.5]]).unwrap();
    let report = eval_codec(&stack, &corpus).unwrap();
    assert_eq!(report.snr_db, vec![SNR_CAP_DB, SNR_CAP_DB]);
    assert!(report.multiscale_spectral_loss.iter().all(|w| w.loss == 0.0));
    assert!((report.perplexity[0] - 3.0).abs() < 1e-12);
    assert_eq!(report.perplexity[1], 1.0);
}

#[test]
fn eval_report_properties_on_trained_stack() {
    let corpus = gen_corpus::<f64>(&SyntheticCorpusSpec::random_mixture(4, 600, 6, 3.0, 0.5, 3)).unwrap().frames;
    let stack = stream_tts::rvq::train_codebooks(
        &corpus,
        &stream_tts::rvq::TrainConfig { codebook_size: 16, depth: 16, seed: 1, epochs: 20, ..Default::default() },
    )
    .unwrap()
    .stack;
    let report = eval_codec(&stack, &corpus).unwrap();
    assert_eq!(report.snr_db.len(), 16);
    for w in report.snr_db.windows(2) {
        assert!(w[1] >= w[0]);
    }
    assert!(report.snr_db[15] > report.snr_db[0]);
    for (p, layer) in report.perplexity.iter().zip(stack.layers()) {
        assert!(*p >= 1.0 && *p <= layer.size() as f64);
    }
    let json = serde_json::to_string(&report).unwrap();
    assert_eq!(EvalReport::from_json(&json).unwrap(), report);
}
