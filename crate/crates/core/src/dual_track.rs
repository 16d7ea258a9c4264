//! Dual-track step scheduling: at every autoregressive step one text-channel
//! symbol (a real token or pad) is paired with exactly one acoustic frame.
//! The frame's zeroth code comes from a backbone step; the remaining fifteen
//! come from a multi-token-prediction step conditioned on that zeroth code.
//!
//! The step models here are deterministic toys that exercise the scheduling
//! contract; no language model is involved.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rvq::{CodeFrame, NUM_ACOUSTIC_LAYERS, NUM_LAYERS};

pub const PAD_SYMBOL: &str = "<pad>";
pub const DEFAULT_CONTEXT_FRAMES: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TextSymbol {
    Token(String),
    Pad,
}

impl TextSymbol {
    pub fn as_str(&self) -> &str {
        match self {
            TextSymbol::Token(t) => t,
            TextSymbol::Pad => PAD_SYMBOL,
        }
    }

    pub fn is_pad(&self) -> bool {
        matches!(self, TextSymbol::Pad)
    }
}

/// Whitespace tokenization.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

/// FNV-1a, stable across platforms and toolchains.
pub fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Per-layer mean code index over the most recent frames (floored).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContextSummary {
    pub mean_codes: [u16; NUM_LAYERS],
    pub frames: usize,
}

impl ContextSummary {
    pub fn from_frames(frames: &[CodeFrame]) -> Self {
        if frames.is_empty() {
            return Self::default();
        }
        let mut mean_codes = [0u16; NUM_LAYERS];
        for (layer, m) in mean_codes.iter_mut().enumerate() {
            let total: u64 = frames.iter().map(|f| f.codes[layer] as u64).sum();
            *m = (total / frames.len() as u64) as u16;
        }
        Self { mean_codes, frames: frames.len() }
    }
}

/// Everything one step sees: the text symbol at this index and the recent
/// frame history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepInput {
    pub step: usize,
    pub text: TextSymbol,
    /// Up to `window` previous frames, oldest first.
    pub history: Vec<CodeFrame>,
    pub context: ContextSummary,
}

pub fn assemble_step(step: usize, text: Option<&str>, prev_frames: &[CodeFrame], window: usize) -> StepInput {
    let start = prev_frames.len().saturating_sub(window);
    let history = prev_frames[start..].to_vec();
    StepInput {
        step,
        text: text.map_or(TextSymbol::Pad, |t| TextSymbol::Token(t.to_owned())),
        context: ContextSummary::from_frames(&history),
        history,
    }
}

/// Per-step code generator.
pub trait StepModel {
    fn codebook_size(&self) -> usize;

    /// Zeroth (semantic) code for this step.
    fn backbone(&self, context: &ContextSummary, text: &TextSymbol) -> u32;

    /// Residual codes for layers 1..16 given the zeroth code.
    fn mtp(&self, context: &ContextSummary, zeroth: u16) -> [u32; NUM_ACOUSTIC_LAYERS];
}

pub fn generate_frame<M: StepModel + ?Sized>(model: &M, input: &StepInput) -> Result<CodeFrame> {
    let k = model.codebook_size();
    let check = |layer: usize, code: u32| -> Result<u16> {
        if (code as usize) < k && k <= u16::MAX as usize + 1 {
            Ok(code as u16)
        } else {
            Err(Error::ModelContract(format!(
                "layer {layer} code {code} at step {} outside codebook of size {k}",
                input.step
            )))
        }
    };
    let mut codes = [0u16; NUM_LAYERS];
    codes[0] = check(0, model.backbone(&input.context, &input.text))?;
    for (i, c) in model.mtp(&input.context, codes[0]).into_iter().enumerate() {
        codes[i + 1] = check(i + 1, c)?;
    }
    Ok(CodeFrame { codes })
}

/// Emits the same frame every step.
#[derive(Debug, Clone)]
pub struct ConstantModel {
    pub size: usize,
    pub frame: CodeFrame,
}

impl StepModel for ConstantModel {
    fn codebook_size(&self) -> usize {
        self.size
    }

    fn backbone(&self, _: &ContextSummary, _: &TextSymbol) -> u32 {
        self.frame.codes[0] as u32
    }

    fn mtp(&self, _: &ContextSummary, _: u16) -> [u32; NUM_ACOUSTIC_LAYERS] {
        std::array::from_fn(|i| self.frame.codes[i + 1] as u32)
    }
}

/// Zeroth code is a hash of the text symbol; residuals are a fixed function
/// of the zeroth code.
#[derive(Debug, Clone)]
pub struct EchoModel {
    pub size: usize,
}

impl StepModel for EchoModel {
    fn codebook_size(&self) -> usize {
        self.size
    }

    fn backbone(&self, _: &ContextSummary, text: &TextSymbol) -> u32 {
        (stable_hash(text.as_str()) % self.size as u64) as u32
    }

    fn mtp(&self, _: &ContextSummary, zeroth: u16) -> [u32; NUM_ACOUSTIC_LAYERS] {
        std::array::from_fn(|i| {
            let mixed = (zeroth as u64 + 1).wrapping_mul(2_654_435_761).wrapping_add(i as u64 * 40_503);
            (mixed % self.size as u64) as u32
        })
    }
}

/// Seeded order-1 Markov tables. The backbone transitions from the context's
/// mean zeroth code under a text bucket; each residual layer looks up the
/// zeroth code offset by that layer's context mean.
#[derive(Debug, Clone)]
pub struct MarkovModel {
    size: usize,
    text_buckets: usize,
    transitions: Vec<u16>,
    residual_tables: Vec<u16>,
}

impl MarkovModel {
    pub fn new(size: usize, text_buckets: usize, seed: u64) -> Result<Self> {
        if size == 0 || size > u16::MAX as usize + 1 || text_buckets == 0 {
            return Err(Error::config("Markov model needs 1..=65536 codes and at least one text bucket"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let transitions = (0..size * text_buckets).map(|_| rng.random_range(0..size) as u16).collect();
        let residual_tables = (0..NUM_ACOUSTIC_LAYERS * size).map(|_| rng.random_range(0..size) as u16).collect();
        Ok(Self { size, text_buckets, transitions, residual_tables })
    }
}

impl StepModel for MarkovModel {
    fn codebook_size(&self) -> usize {
        self.size
    }

    fn backbone(&self, context: &ContextSummary, text: &TextSymbol) -> u32 {
        let prev = context.mean_codes[0] as usize % self.size;
        let bucket = (stable_hash(text.as_str()) % self.text_buckets as u64) as usize;
        self.transitions[prev * self.text_buckets + bucket] as u32
    }

    fn mtp(&self, context: &ContextSummary, zeroth: u16) -> [u32; NUM_ACOUSTIC_LAYERS] {
        std::array::from_fn(|i| {
            let idx = (zeroth as usize + context.mean_codes[i + 1] as usize) % self.size;
            self.residual_tables[i * self.size + idx] as u32
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopCondition {
    /// Stop before step `n`.
    AtStep(usize),
    /// Run every text step, then this many pad steps.
    AfterText { pad_steps: usize },
    /// Stop after emitting a frame whose zeroth code equals this value.
    StopCode(u16),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRule {
    pub condition: StopCondition,
    /// Hard guard; reaching it before `condition` fires is an error.
    pub max_steps: usize,
}

/// Timing of the text channel and of one generation step, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionClock {
    /// Arrival spacing of streamed text tokens; 0 means all text is available up front.
    pub text_interval_ms: f64,
    pub step_ms: f64,
}

impl Default for SessionClock {
    fn default() -> Self {
        Self { text_interval_ms: 0.0, step_ms: 1.0 }
    }
}

/// One transcript line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    pub step: usize,
    /// `None` on pad steps.
    pub text_token: Option<String>,
    pub codes: [u16; NUM_LAYERS],
    pub t_text_in: f64,
    pub t_frame_out: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker: Option<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub frames: Vec<CodeFrame>,
    pub events: Vec<StepEvent>,
}

impl Session {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn read_transcript<R: BufRead>(r: R) -> Result<Vec<StepEvent>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct SessionOptions {
    pub clock: SessionClock,
    pub context_frames: Option<usize>,
    /// Opaque speaker embedding copied into every event.
    pub speaker: Option<Vec<f32>>,
}

/// Runs one streaming session: each step consumes one text symbol, then emits one frame.
pub fn run_session<M: StepModel + ?Sized>(
    text: &[String],
    model: &M,
    stop: StopRule,
    options: &SessionOptions,
) -> Result<Session> {
    let window = options.context_frames.unwrap_or(DEFAULT_CONTEXT_FRAMES);
    let mut frames: Vec<CodeFrame> = Vec::new();
    let mut events = Vec::new();
    let mut last_out = 0.0f64;
    let mut step = 0;
    loop {
        let done = match stop.condition {
            StopCondition::AtStep(n) => step >= n,
            StopCondition::AfterText { pad_steps } => step >= text.len() + pad_steps,
            StopCondition::StopCode(code) => frames.last().is_some_and(|f| f.codes[0] == code),
        };
        if done {
            break;
        }
        if step >= stop.max_steps {
            return Err(Error::MaxStepsExceeded(stop.max_steps));
        }

        let token = text.get(step).map(String::as_str);
        let input = assemble_step(step, token, &frames, window);
        let arrival = if token.is_some() { step as f64 * options.clock.text_interval_ms } else { 0.0 };
        let t_text_in = arrival.max(last_out);
        let frame = generate_frame(model, &input)?;
        let t_frame_out = t_text_in + options.clock.step_ms;
        last_out = t_frame_out;

        events.push(StepEvent {
            step,
            text_token: token.map(str::to_owned),
            codes: frame.codes,
            t_text_in,
            t_frame_out,
            speaker: options.speaker.clone(),
        });
        frames.push(frame);
        step += 1;
    }
    Ok(Session { frames, events })
}
