mod common;

use common::*;
use rand::Rng;
use stream_tts::rvq::CodeFrame;
use stream_tts::stream::{decode_offline, FirFilter, StreamState};

#[test]
fn streaming_encode_matches_offline() {
    let stack = trained_stack(8, 16, 64, 4, 1);
    let frames = uniform_frames(10, 4, 1.0, 2);
    let mut state = StreamState::for_stack(&stack, FirFilter::default()).unwrap();
    for (n, f) in frames.rows().enumerate() {
        let streamed = state.push_encode(&stack, f).unwrap();
        // emitted on the push that delivered the frame: zero frames of delay
        assert_eq!(state.frames_encoded, n as u64 + 1);
        assert_eq!(streamed, stack.encode_frame(f, 16).unwrap().codes);
    }
}

#[test]
fn appending_never_changes_emitted_codes() {
    let stack = trained_stack(8, 8, 64, 3, 4);
    let frames = uniform_frames(30, 3, 1.0, 5);
    let encode = |n: usize| -> Vec<CodeFrame> {
        let mut s = StreamState::for_stack(&stack, FirFilter::identity()).unwrap();
        frames.rows().take(n).map(|f| s.push_encode(&stack, f).unwrap()).collect()
    };
    let full = encode(30);
    for n in [1, 7, 15, 29] {
        assert_eq!(encode(n), full[..n].to_vec());
    }
}

#[test]
fn identity_filter_equals_dequantization() {
    let stack = trained_stack(16, 16, 64, 4, 6);
    let codes = stack.encode_all(&uniform_frames(12, 4, 1.0, 7), 16).unwrap();
    let mut state = StreamState::for_stack(&stack, FirFilter::identity()).unwrap();
    for c in &codes {
        assert_eq!(state.push_decode(&stack, c).unwrap(), stack.decode_frame(c, 16).unwrap());
    }
}

#[test]
fn streaming_decode_matches_offline_bitwise() {
    let stack = trained_stack(16, 16, 64, 4, 8);
    let codes = stack.encode_all(&uniform_frames(50, 4, 1.0, 9), 16).unwrap();
    let taps = FirFilter::new(vec![0.55, 0.25, 0.15, 0.05]).unwrap();
    let offline = decode_offline(&stack, &codes, 16, &taps).unwrap();
    let mut state = StreamState::for_stack(&stack, taps).unwrap();
    for (n, c) in codes.iter().enumerate() {
        let y = state.push_decode(&stack, c).unwrap();
        let bits: Vec<u64> = y.iter().map(|v| v.to_bits()).collect();
        let want: Vec<u64> = offline.row(n).iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits, want, "frame {n}");
    }
}

#[test]
fn future_perturbation_leaves_past_untouched() {
    let stack = trained_stack(16, 16, 64, 4, 10);
    let mut r = rng(11);
    let codes = stack.encode_all(&uniform_frames(20, 4, 1.0, 12), 16).unwrap();
    for n in 0..19 {
        let mut altered = codes.clone();
        for l in 0..16 {
            altered[n + 1].codes[l] = r.random_range(0..16);
        }
        let run = |cs: &[CodeFrame]| -> Vec<Vec<f64>> {
            let mut s = StreamState::for_stack(&stack, FirFilter::default()).unwrap();
            cs.iter().map(|c| s.push_decode(&stack, c).unwrap()).collect()
        };
        let (a, b) = (run(&codes), run(&altered));
        assert_eq!(a[..=n], b[..=n]);
    }
}

#[test]
fn fir_first_frames_use_zero_history() {
    let stack = trained_stack(4, 1, 16, 2, 13);
    let c = CodeFrame::default();
    let x = stack.decode_frame(&c, 1).unwrap();
    let mut s = StreamState::for_stack(&stack, FirFilter::default()).unwrap();
    let y0 = s.push_decode(&stack, &c).unwrap();
    let y1 = s.push_decode(&stack, &c).unwrap();
    for d in 0..2 {
        assert!((y0[d] - 0.4 * x[d]).abs() < 1e-12);
        assert!((y1[d] - 0.7 * x[d]).abs() < 1e-12);
    }
}
