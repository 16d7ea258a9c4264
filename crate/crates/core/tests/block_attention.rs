mod common;

use common::window_allows;
use num_rational::Ratio;
use stream_tts::block_attention::*;

type Ms = Ratio<i64>;

#[test]
fn block_mask_matches_double_loop() {
    for chunk in [1usize, 2, 3, 8] {
        for blocks in 1..=64usize {
            for tokens in [blocks * chunk, blocks * chunk - (chunk - 1)] {
                let p = BlockPartition::new(chunk, tokens).unwrap();
                assert_eq!(p.num_blocks(), blocks);
                let m = build_mask(&p);
                for q in 0..blocks {
                    for k in 0..blocks {
                        assert_eq!(m.allow(q, k), window_allows(q, k, 3, 1), "chunk {chunk} blocks {blocks} ({q},{k})");
                    }
                }
            }
        }
    }
}

#[test]
fn token_mask_matches_token_oracle() {
    let p = BlockPartition::new(3, 29).unwrap();
    let t = build_mask(&p).to_token_mask(&p);
    for q in 0..29 {
        for k in 0..29 {
            assert_eq!(t.allow(q, k), window_allows(q / 3, k / 3, 3, 1));
        }
    }
}

#[test]
fn custom_window() {
    let w = BlockWindow { lookback: 1, lookahead: 2 };
    let p = BlockPartition::with_window(4, 40, w).unwrap();
    let m = build_mask(&p);
    for q in 0..10 {
        for k in 0..10 {
            assert_eq!(m.allow(q, k), window_allows(q, k, 1, 2));
        }
    }
    assert_eq!(first_decodable(&p), 12);
}

/// First token count at which every key token visible to chunk `c` has arrived.
fn replay_ready(p: &BlockPartition, c: usize) -> usize {
    let mask = build_mask(p).to_token_mask(p);
    let queries = p.block_tokens(c);
    (1..=p.num_tokens)
        .find(|&arrived| queries.clone().all(|q| (0..p.num_tokens).filter(|&k| mask.allow(q, k)).all(|k| k < arrived)))
        .unwrap()
}

#[test]
fn chunk_one_ready_after_24_tokens() {
    let p = BlockPartition::new(8, 64).unwrap();
    assert_eq!(replay_ready(&p, 1), 24);
    assert_eq!(replay_ready(&p, 0), first_decodable(&p));
}

#[test]
fn ready_counts_agree_with_replay_and_step_by_chunk() {
    for (chunk, tokens) in [(8, 64), (8, 61), (3, 30), (1, 12)] {
        let p = BlockPartition::new(chunk, tokens).unwrap();
        let s = schedule_chunks(&p, Ms::from_integer(40), Ms::from_integer(0)).unwrap();
        for e in &s.entries {
            assert_eq!(e.ready_at_token, replay_ready(&p, e.chunk), "chunk {chunk}/{tokens} entry {}", e.chunk);
        }
        // strictly increasing by chunk_size until the end of the stream caps it
        for w in s.entries.windows(2) {
            if w[1].ready_at_token < tokens {
                assert_eq!(w[1].ready_at_token - w[0].ready_at_token, chunk);
            }
        }
    }
}

#[test]
fn schedule_cumulative_audio() {
    let p = BlockPartition::new(8, 40).unwrap();
    let s = schedule_chunks(&p, Ms::from_integer(40), Ms::from_integer(130)).unwrap();
    assert_eq!(s.entries.len(), 5);
    let mut total = Ms::from_integer(0);
    for e in &s.entries {
        total += e.audio_ms;
    }
    assert_eq!(total, Ms::from_integer(5 * 320 - 130));
    assert_eq!(s.entries[0].lookahead_debt_ms, Ms::from_integer(130));
    assert!(s.entries[1..].iter().all(|e| e.lookahead_debt_ms == Ms::from_integer(0)));
}

#[test]
fn partial_final_chunk_flushes() {
    let p = BlockPartition::new(8, 20).unwrap();
    let s = schedule_chunks(&p, Ms::from_integer(40), Ms::from_integer(130)).unwrap();
    let last = s.entries.last().unwrap();
    assert_eq!(last.tokens, 4);
    assert_eq!(last.audio_ms, Ms::from_integer(160));
    assert_eq!(last.ready_at_token, 20);
}
