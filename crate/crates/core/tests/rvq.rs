mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use stream_tts::frames::Frames;
use stream_tts::rvq::*;
use stream_tts::Error;

fn random_codebook(layer: usize, k: usize, dim: usize, r: &mut rand_chacha::ChaCha8Rng) -> Codebook<f64> {
    let rows: Vec<Vec<f64>> = (0..k).map(|_| (0..dim).map(|_| 2.0 * r.random::<f64>() - 1.0).collect()).collect();
    Codebook::from_rows(layer, &rows).unwrap()
}

#[test]
fn greedy_two_stage_matches_exhaustive_oracle() {
    let mut r = rng(31);
    for trial in 0..200 {
        let l0 = random_codebook(0, 8, 3, &mut r);
        let l1 = random_codebook(1, 8, 3, &mut r);
        let x: Vec<f64> = (0..3).map(|_| 2.0 * r.random::<f64>() - 1.0).collect();

        // enumerate all 64 pairs
        let mut first_best = (usize::MAX, f64::INFINITY);
        for i in 0..8 {
            let d = sq(&x, l0.entry(i));
            if d < first_best.1 {
                first_best = (i, d);
            }
        }
        let mut greedy = (usize::MAX, usize::MAX, f64::INFINITY);
        let mut joint = f64::INFINITY;
        for i in 0..8 {
            for j in 0..8 {
                let recon: Vec<f64> = (0..3).map(|c| l0.entry(i)[c] + l1.entry(j)[c]).collect();
                let err = sq(&x, &recon);
                joint = joint.min(err);
                if i == first_best.0 && err < greedy.2 {
                    greedy = (i, j, err);
                }
            }
        }

        let stack = RvqStack::new(vec![l0, l1], 12.5).unwrap();
        let enc = stack.encode_frame(&x, 2).unwrap();
        assert_eq!((enc.codes.codes[0] as usize, enc.codes.codes[1] as usize), (greedy.0, greedy.1), "trial {trial}");
        let recon = stack.decode_frame(&enc.codes, 2).unwrap();
        assert!((sq(&x, &recon) - greedy.2).abs() < 1e-12);
        assert!(greedy.2 >= joint);
    }
}

#[test]
fn encode_depth_one_on_semantic_centroid() {
    let mut r = rng(3);
    let stack =
        RvqStack::new(vec![random_codebook(0, 16, 4, &mut r), random_codebook(1, 16, 4, &mut r)], 12.5).unwrap();
    let x = stack.semantic().entry(5).to_vec();
    let enc = stack.encode_frame(&x, 1).unwrap();
    assert_eq!(enc.codes.codes[0], 5);
    assert_eq!(enc.residual_energy, vec![0.0]);
}

#[test]
fn alignment_loss_extremes() {
    let stack = trained_stack(8, 2, 64, 4, 5);
    let frames = uniform_frames(12, 4, 1.0, 6);
    let proj = Projection::<f64>::random_orthonormal(6, 4, 99).unwrap();
    let mut same = Frames::with_capacity(6, 12);
    let mut negated = Frames::with_capacity(6, 12);
    for f in frames.rows() {
        let (code, _) = stack.semantic().nearest(f).unwrap();
        let p = proj.apply(stack.semantic().entry(code)).unwrap();
        same.push(&p).unwrap();
        negated.push(&p.iter().map(|v| -v).collect::<Vec<_>>()).unwrap();
    }
    let a = semantic_alignment_loss(&stack, &frames, &same, &proj).unwrap();
    assert!(a.loss.abs() < 1e-12);
    let b = semantic_alignment_loss(&stack, &frames, &negated, &proj).unwrap();
    assert!((b.loss - 2.0).abs() < 1e-12);
}

#[test]
fn alignment_loss_matches_scalar_loop() {
    let stack = trained_stack(16, 1, 80, 5, 8);
    let frames = uniform_frames(10, 5, 1.0, 9);
    let teacher = uniform_frames(10, 7, 1.0, 10);
    let proj = Projection::<f64>::random_orthonormal(7, 5, 3).unwrap();

    let w = proj.weights();
    let mut expected = 0.0;
    for (f, t) in frames.rows().zip(teacher.rows()) {
        let mut best = 0;
        for i in 1..stack.semantic().size() {
            if sq(f, stack.semantic().entry(i)) < sq(f, stack.semantic().entry(best)) {
                best = i;
            }
        }
        let c = stack.semantic().entry(best);
        let mut p = vec![0.0; 7];
        for row in 0..7 {
            for col in 0..5 {
                p[row] += w[row * 5 + col] * c[col];
            }
        }
        let dot: f64 = (0..7).map(|i| p[i] * t[i]).sum();
        let np: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nt: f64 = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        expected += 1.0 - dot / (np * nt);
    }
    expected /= 10.0;
    let got = semantic_alignment_loss(&stack, &frames, &teacher, &proj).unwrap();
    assert!((got.loss - expected).abs() < 1e-12, "{} vs {expected}", got.loss);
    assert_eq!(got.zero_norm_frames, 0);
    assert!((0.0..=2.0).contains(&got.loss));
}

#[test]
fn alignment_loss_zero_norm_convention() {
    let l0 = Codebook::from_rows(0, &[vec![0.0, 0.0], vec![5.0, 5.0]]).unwrap();
    let stack = RvqStack::new(vec![l0], 12.5).unwrap();
    let frames = Frames::from_rows(&[vec![0.1, 0.0], vec![4.0, 4.0]]).unwrap();
    let teacher = Frames::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
    let got = semantic_alignment_loss(&stack, &frames, &teacher, &Projection::identity(2)).unwrap();
    assert_eq!(got.zero_norm_frames, 1);
    assert!((got.loss - 0.5).abs() < 1e-12);
}

#[test]
fn alignment_loss_length_mismatch() {
    let stack = trained_stack(4, 1, 16, 2, 1);
    let err = semantic_alignment_loss(
        &stack,
        &uniform_frames(3, 2, 1.0, 1),
        &uniform_frames(4, 2, 1.0, 2),
        &Projection::identity(2),
    )
    .unwrap_err();
    assert!(matches!(err, Error::Dimension { .. }));
}

#[test]
fn two_cluster_centroids_near_true_means() {
    let (corpus, means) = two_clusters(1000, 3, 10.0, 0.5, 12);
    let cfg = TrainConfig { codebook_size: 2, depth: 1, seed: 4, epochs: 200, ..Default::default() };
    let trained = train_codebooks(&corpus, &cfg).unwrap();
    let cb = trained.stack.semantic();
    for m in &means {
        let closest = (0..2).map(|i| sq(cb.entry(i), m).sqrt()).fold(f64::INFINITY, f64::min);
        assert!(closest < 0.5, "centroid {closest} away from {m:?}");
    }
}

#[test]
fn same_seed_bit_identical() {
    let corpus = uniform_frames(300, 4, 1.0, 77);
    let cfg = TrainConfig { codebook_size: 8, depth: 5, seed: 123, ..Default::default() };
    let a = train_codebooks(&corpus, &cfg).unwrap();
    let b = train_codebooks(&corpus, &cfg).unwrap();
    assert_eq!(a.stack, b.stack);
    let bits = |s: &RvqStack<f64>| -> Vec<u64> {
        s.layers().iter().flat_map(|l| l.entries().iter().map(|v| v.to_bits())).collect()
    };
    assert_eq!(bits(&a.stack), bits(&b.stack));
    let c = train_codebooks(&corpus, &TrainConfig { seed: 124, ..cfg }).unwrap();
    assert_ne!(a.stack, c.stack);
}

#[test]
fn dead_codes_get_reassigned() {
    // 4 distinct points repeated, K = 8: at most 4 entries can be used
    let rows: Vec<Vec<f64>> = (0..400).map(|i| vec![(i % 4) as f64, 0.0]).collect();
    let corpus = Frames::from_rows(&rows).unwrap();
    let cfg = TrainConfig { codebook_size: 8, depth: 1, seed: 2, epochs: 5, ..Default::default() };
    let trained = train_codebooks(&corpus, &cfg).unwrap();
    assert!(trained.layers[0].dead_codes_reassigned > 0);
    assert_eq!(trained.layers[0].final_distortion, 0.0);
    assert!(trained.stack.semantic().usage_counts().iter().all(|&u| u >= 0.0));
}

/// Stack whose layer scales shrink fast enough that greedy encoding of any
/// centroid sum recovers the exact code chain.
fn separated_stack(depth: usize, dim: usize, seed: u64) -> RvqStack<f64> {
    let mut r = rng(seed);
    let layers = (0..depth)
        .map(|l| {
            let scale = 10f64.powi(-(l as i32));
            let mut rows: Vec<Vec<f64>> = Vec::new();
            if l > 0 {
                rows.push(vec![0.0; dim]);
            }
            while rows.len() < 6 {
                let v: Vec<f64> = (0..dim).map(|_| scale * (r.random_range(-2i32..=2) as f64)).collect();
                if !rows.contains(&v) {
                    rows.push(v);
                }
            }
            Codebook::from_rows(l, &rows).unwrap()
        })
        .collect();
    RvqStack::new(layers, 12.5).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prefix_stability(seed in 0u64..1000, d1 in 1usize..16, extra in 1usize..16) {
        let stack = trained_stack(4, 16, 32, 3, seed % 7);
        let x = uniform_frames(1, 3, 2.0, seed).row(0).to_vec();
        let d2 = (d1 + extra).min(16);
        let a = stack.encode_frame(&x, d1).unwrap();
        let b = stack.encode_frame(&x, d2).unwrap();
        prop_assert_eq!(a.codes.prefix(d1), b.codes.prefix(d1));
        prop_assert_eq!(&a.residual_energy[..], &b.residual_energy[..d1]);
    }

    #[test]
    fn deeper_decode_never_worse(seed in 0u64..1000) {
        let stack = trained_stack(8, 16, 64, 4, seed % 5);
        let x = uniform_frames(1, 4, 1.5, seed + 10_000).row(0).to_vec();
        let codes = stack.encode_frame(&x, 16).unwrap().codes;
        let e1 = sq(&x, &stack.decode_frame(&codes, 1).unwrap());
        let e16 = sq(&x, &stack.decode_frame(&codes, 16).unwrap());
        prop_assert!(e16 <= e1);
    }

    #[test]
    fn chosen_entry_is_argmin(seed in 0u64..1000) {
        let stack = trained_stack(16, 4, 64, 3, seed % 3);
        let x = uniform_frames(1, 3, 1.0, seed).row(0).to_vec();
        let enc = stack.encode_frame(&x, 4).unwrap();
        let mut residual = x.clone();
        for (l, layer) in stack.layers().iter().enumerate() {
            let chosen = enc.codes.codes[l] as usize;
            for i in 0..layer.size() {
                prop_assert!(sq(&residual, layer.entry(chosen)) <= sq(&residual, layer.entry(i)));
            }
            for (r, c) in residual.iter_mut().zip(layer.entry(chosen)) {
                *r -= c;
            }
        }
    }

    #[test]
    fn encode_inverts_decode_on_centroid_sums(seed in 0u64..500, raw in proptest::collection::vec(0u16..6, 6)) {
        let stack = separated_stack(6, 3, seed);
        let codes = CodeFrame::new(std::array::from_fn(|i| if i < 6 { raw[i] } else { 0 }));
        let x = stack.decode_frame(&codes, 6).unwrap();
        prop_assert_eq!(stack.encode_frame(&x, 6).unwrap().codes, codes);
    }
}
