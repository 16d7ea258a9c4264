//! Sliding-window block attention and chunked detokenizer scheduling.
//!
//! Tokens are grouped into fixed-size blocks. A query block `q` may attend to
//! key blocks `q - lookback ..= q + lookahead` (clamped to the sequence). The
//! default window is three blocks back and one ahead, i.e. five block indices
//! in total even though the receptive field is often described as four blocks.
//!
//! Chunk `c` can be decoded once every token of its lookahead blocks exists.
//! At end of stream, the trailing chunks are decodable with whatever tokens
//! arrived, including a final partial chunk.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::TimeScalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockWindow {
    pub lookback: usize,
    pub lookahead: usize,
}

impl Default for BlockWindow {
    fn default() -> Self {
        Self { lookback: 3, lookahead: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    pub chunk_size: usize,
    pub num_tokens: usize,
    pub window: BlockWindow,
}

impl BlockPartition {
    pub fn new(chunk_size: usize, num_tokens: usize) -> Result<Self> {
        Self::with_window(chunk_size, num_tokens, BlockWindow::default())
    }

    pub fn with_window(chunk_size: usize, num_tokens: usize, window: BlockWindow) -> Result<Self> {
        if chunk_size == 0 {
            return Err(Error::config("chunk size must be at least 1"));
        }
        if num_tokens == 0 {
            return Err(Error::config("a partition needs at least one token"));
        }
        Ok(Self { chunk_size, num_tokens, window })
    }

    pub fn num_blocks(&self) -> usize {
        self.num_tokens.div_ceil(self.chunk_size)
    }

    pub fn block_of(&self, token: usize) -> usize {
        token / self.chunk_size
    }

    /// Token index range `[start, end)` of a block.
    pub fn block_tokens(&self, block: usize) -> std::ops::Range<usize> {
        let start = block * self.chunk_size;
        start..((block + 1) * self.chunk_size).min(self.num_tokens)
    }

    /// Key blocks visible from query block `q`, clamped to the partition.
    pub fn visible_blocks(&self, q: usize) -> RangeInclusive<usize> {
        let lo = q.saturating_sub(self.window.lookback);
        let hi = (q + self.window.lookahead).min(self.num_blocks() - 1);
        lo..=hi
    }
}

/// Block-level attention mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockMask {
    num_blocks: usize,
    allowed: Vec<bool>,
}

impl BlockMask {
    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn allow(&self, q_block: usize, k_block: usize) -> bool {
        self.allowed[q_block * self.num_blocks + k_block]
    }

    /// Expands to a token-level mask: `(q, k)` is allowed iff their blocks are.
    pub fn to_token_mask(&self, partition: &BlockPartition) -> TokenMask {
        let n = partition.num_tokens;
        let mut allowed = vec![false; n * n];
        for q in 0..n {
            let qb = partition.block_of(q);
            for k in 0..n {
                allowed[q * n + k] = self.allow(qb, partition.block_of(k));
            }
        }
        TokenMask { num_tokens: n, allowed }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenMask {
    num_tokens: usize,
    allowed: Vec<bool>,
}

impl TokenMask {
    pub fn num_tokens(&self) -> usize {
        self.num_tokens
    }

    pub fn allow(&self, q: usize, k: usize) -> bool {
        self.allowed[q * self.num_tokens + k]
    }

    pub fn row(&self, q: usize) -> &[bool] {
        &self.allowed[q * self.num_tokens..(q + 1) * self.num_tokens]
    }

    /// Plain (ASCII) PBM; `1` marks an allowed pair.
    pub fn to_pbm(&self) -> String {
        let n = self.num_tokens;
        let mut out = String::with_capacity(n * (2 * n + 1) + 32);
        out.push_str(&format!("P1\n# token attention mask, 1 = attend\n{n} {n}\n"));
        for q in 0..n {
            let line: Vec<&str> = self.row(q).iter().map(|&a| if a { "1" } else { "0" }).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

pub fn build_mask(partition: &BlockPartition) -> BlockMask {
    let b = partition.num_blocks();
    let mut allowed = vec![false; b * b];
    for q in 0..b {
        for k in partition.visible_blocks(q) {
            allowed[q * b + k] = true;
        }
    }
    BlockMask { num_blocks: b, allowed }
}

/// Tokens needed before the first chunk can be decoded: the chunk itself plus
/// its lookahead blocks.
pub fn first_decodable(partition: &BlockPartition) -> usize {
    partition.chunk_size * (1 + partition.window.lookahead)
}

/// Token count after which chunk `c` becomes decodable in a live stream.
/// Chunks whose lookahead runs past the end of a finished stream are ready
/// once the stream ends.
pub fn ready_at_token(partition: &BlockPartition, chunk: usize) -> usize {
    ((chunk + 1 + partition.window.lookahead) * partition.chunk_size).min(partition.num_tokens)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkEntry<T> {
    pub chunk: usize,
    pub first_token: usize,
    pub tokens: usize,
    pub ready_at_token: usize,
    pub audio_ms: T,
    /// Audio withheld from this chunk for vocoder right context.
    pub lookahead_debt_ms: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkSchedule<T> {
    pub chunk_size: usize,
    pub token_ms: T,
    pub entries: Vec<ChunkEntry<T>>,
}

impl<T: TimeScalar> ChunkSchedule<T> {
    pub fn total_audio_ms(&self) -> T {
        self.entries.iter().fold(T::zero(), |acc, e| acc + e.audio_ms)
    }

    /// `chunk,first_token,ready_at_token,audio_ms` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("chunk,first_token,ready_at_token,audio_ms\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{},{}\n", e.chunk, e.first_token, e.ready_at_token, e.audio_ms));
        }
        out
    }
}

/// Per-chunk readiness and emitted audio. The first chunk gives up
/// `vocoder_lookahead_ms` of audio; later chunks carry their full length.
pub fn schedule_chunks<T: TimeScalar>(
    partition: &BlockPartition,
    token_ms: T,
    vocoder_lookahead_ms: T,
) -> Result<ChunkSchedule<T>> {
    if !(token_ms > T::zero()) {
        return Err(Error::config("token duration must be positive"));
    }
    if vocoder_lookahead_ms < T::zero() {
        return Err(Error::config("vocoder lookahead must be non-negative"));
    }
    let chunk_audio = T::from_count(partition.chunk_size) * token_ms;
    if vocoder_lookahead_ms >= chunk_audio {
        return Err(Error::config(format!(
            "vocoder lookahead {vocoder_lookahead_ms} ms leaves an empty first packet (chunk audio {chunk_audio} ms)"
        )));
    }
    let entries = (0..partition.num_blocks())
        .map(|c| {
            let tokens = partition.block_tokens(c).len();
            let debt = if c == 0 { vocoder_lookahead_ms } else { T::zero() };
            let full = T::from_count(tokens) * token_ms;
            // a short final first chunk cannot owe more than it holds
            let debt = if debt > full { full } else { debt };
            ChunkEntry {
                chunk: c,
                first_token: c * partition.chunk_size,
                tokens,
                ready_at_token: ready_at_token(partition, c),
                audio_ms: full - debt,
                lookahead_debt_ms: debt,
            }
        })
        .collect();
    Ok(ChunkSchedule { chunk_size: partition.chunk_size, token_ms, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    type Ms = Ratio<i64>;

    fn ms(v: i64) -> Ms {
        Ms::from_integer(v)
    }

    #[test]
    fn window_in_the_middle() {
        let p = BlockPartition::new(8, 48).unwrap();
        let m = build_mask(&p);
        let allowed: Vec<usize> = (0..6).filter(|&k| m.allow(3, k)).collect();
        assert_eq!(allowed, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn window_clamped_at_start_and_end() {
        let p = BlockPartition::new(8, 48).unwrap();
        let m = build_mask(&p);
        assert_eq!((0..6).filter(|&k| m.allow(0, k)).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!((0..6).filter(|&k| m.allow(5, k)).collect::<Vec<_>>(), vec![2, 3, 4, 5]);
    }

    #[test]
    fn zero_sizes_rejected() {
        assert!(matches!(BlockPartition::new(0, 8), Err(Error::Config(_))));
        assert!(matches!(BlockPartition::new(8, 0), Err(Error::Config(_))));
    }

    #[test]
    fn partial_final_block() {
        let p = BlockPartition::new(8, 20).unwrap();
        assert_eq!(p.num_blocks(), 3);
        assert_eq!(p.block_tokens(2), 16..20);
        assert_eq!(p.block_of(19), 2);
    }

    #[test]
    fn first_decodable_counts() {
        assert_eq!(first_decodable(&BlockPartition::new(8, 64).unwrap()), 16);
        assert_eq!(first_decodable(&BlockPartition::new(1, 64).unwrap()), 2);
    }

    #[test]
    fn token_mask_expands_blocks() {
        let p = BlockPartition::new(2, 9).unwrap();
        let b = build_mask(&p);
        let t = b.to_token_mask(&p);
        for q in 0..9 {
            for k in 0..9 {
                assert_eq!(t.allow(q, k), b.allow(q / 2, k / 2));
            }
        }
        let pbm = t.to_pbm();
        assert!(pbm.starts_with("P1\n"));
        assert_eq!(pbm.lines().count(), 3 + 9);
    }

    #[test]
    fn schedule_first_packet() {
        let p = BlockPartition::new(8, 40).unwrap();
        let s = schedule_chunks(&p, ms(40), ms(130)).unwrap();
        assert_eq!(s.entries[0].audio_ms, ms(190));
        assert_eq!(s.entries[0].ready_at_token, 16);
        assert!(s.entries[1..].iter().all(|e| e.audio_ms == ms(320)));
        assert_eq!(s.total_audio_ms(), ms(5 * 320 - 130));
    }

    #[test]
    fn schedule_without_lookahead() {
        let p = BlockPartition::new(8, 16).unwrap();
        let s = schedule_chunks(&p, ms(40), ms(0)).unwrap();
        assert_eq!(s.entries[0].audio_ms, ms(320));
    }

    #[test]
    fn schedule_rejects_full_lookahead() {
        let p = BlockPartition::new(8, 16).unwrap();
        assert!(schedule_chunks(&p, ms(40), ms(320)).is_err());
        assert!(schedule_chunks(&p, ms(0), ms(0)).is_err());
    }

    #[test]
    fn schedule_csv() {
        let p = BlockPartition::new(8, 24).unwrap();
        let csv = schedule_chunks(&p, 40.0, 130.0).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "chunk,first_token,ready_at_token,audio_ms");
        assert_eq!(lines[1], "0,0,16,190");
        assert_eq!(lines[2], "1,8,24,320");
        assert_eq!(lines[3], "2,16,24,320");
    }
}
