use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use stream_tts::block_attention::{build_mask, schedule_chunks, BlockPartition, BlockWindow};
use stream_tts::corpus::{gen_corpus, SyntheticCorpusSpec, ToneParams};
use stream_tts::dual_track::{
    read_transcript, run_session, tokenize, ConstantModel, EchoModel, MarkovModel, SessionClock, SessionOptions,
    StepModel, StopCondition, StopRule,
};
use stream_tts::formats::*;
use stream_tts::latency::*;
use stream_tts::metrics::eval_codec;
use stream_tts::rvq::{train_codebooks, CodeFrame, RvqStack, TrainConfig};
use stream_tts::stream::{decode_offline, FirFilter, StreamState};
use stream_tts::{Frames, TimeScalar};

use crate::manifest::{sha256_hex, Run};
use crate::{RunOpts, Settings, UsageError};

macro_rules! settings {
    ($ty:ty, $name:literal) => {
        impl Settings for $ty {
            const NAME: &'static str = $name;
            fn seed(&self) -> Option<u64> {
                self.seed
            }
            fn run_opts(&self) -> &RunOpts {
                &self.run
            }
            fn execute(self, run: &mut Run) -> anyhow::Result<()> {
                self.exec(run)
            }
        }
    };
}

fn required<'a, T>(value: &'a Option<T>, flag: &str) -> anyhow::Result<&'a T> {
    value.as_ref().ok_or_else(|| UsageError(format!("missing required setting --{flag}")).into())
}

/// Millisecond value kept exact; accepts integers, decimals and `p/q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ms(pub ExactMs);

impl FromStr for Ms {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ExactMs::parse_ms(s).map(Ms).ok_or_else(|| format!("'{s}' is not a millisecond value"))
    }
}

impl Serialize for Ms {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_integer() {
            s.serialize_i64(self.0.to_integer())
        } else {
            s.serialize_str(&format!("{}/{}", self.0.numer(), self.0.denom()))
        }
    }
}

impl<'de> Deserialize<'de> for Ms {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) => s,
            serde_json::Value::Number(n) => n.to_string(),
            other => return Err(serde::de::Error::custom(format!("expected milliseconds, got {other}"))),
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

fn write_or_print(run: &mut Run, out: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(path) => run.write(path, bytes),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn json_bytes<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn load_stack(run: &mut Run, path: &Path) -> anyhow::Result<RvqStack<f64>> {
    let bytes = run.read(path)?;
    let side = sidecar_path(path);
    let sidecar = if side.exists() { Some(CodebookSidecar::from_json(&run.read_to_string(&side)?)?) } else { None };
    let (stack, _) =
        decode_codebooks(&bytes, sidecar.as_ref()).with_context(|| format!("reading {}", path.display()))?;
    Ok(stack)
}

fn load_features(run: &mut Run, path: &Path) -> anyhow::Result<Frames<f64>> {
    let bytes = run.read(path)?;
    decode_features(&bytes).with_context(|| format!("reading {}", path.display()))
}

fn check_depth(depth: Option<usize>, available: usize) -> anyhow::Result<usize> {
    let depth = depth.unwrap_or(available);
    if depth == 0 || depth > available {
        return Err(UsageError(format!("depth must be in 1..={available}, got {depth}")).into());
    }
    Ok(depth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusChoice {
    Mixture,
    Tones,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GenCorpus {
    /// Output feature file; summary statistics go to `<out>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<CorpusChoice>,
    /// [default: 4096]
    #[arg(long)]
    frames: Option<usize>,
    /// [default: 64]
    #[arg(long)]
    dim: Option<usize>,
    /// Mixture components [default: 8]
    #[arg(long)]
    components: Option<usize>,
    /// Standard deviation of the mixture means [default: 3.0]
    #[arg(long)]
    spread: Option<f64>,
    /// Within-component standard deviation [default: 1.0]
    #[arg(long)]
    std: Option<f64>,
    /// Tone corpus sample rate [default: 16000]
    #[arg(long)]
    sample_rate: Option<u32>,
    /// Tone corpus simultaneous voices [default: 3]
    #[arg(long)]
    voices: Option<usize>,
    /// Tone corpus noise level [default: 0.01]
    #[arg(long)]
    noise_std: Option<f64>,
    /// [default: 12.5]
    #[arg(long)]
    frame_rate_hz: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    #[serde(skip)]
    run: RunOpts,
}
settings!(GenCorpus, "gen-corpus");

#[derive(Serialize)]
struct CorpusSidecar<'a> {
    schema_version: &'static str,
    spec: &'a SyntheticCorpusSpec,
    summary: &'a stream_tts::frames::FrameSummary,
    component_counts: Vec<usize>,
}

impl GenCorpus {
    fn exec(self, run: &mut Run) -> anyhow::Result<()> {
        let out = required(&self.out, "out")?;
        let (frames, dim, seed) = (self.frames.unwrap_or(4096), self.dim.unwrap_or(64), self.seed.unwrap_or(0));
        let spec = match self.kind.unwrap_or(CorpusChoice::Mixture) {
            CorpusChoice::Mixture => SyntheticCorpusSpec::random_mixture(
                self.components.unwrap_or(8),
                frames,
                dim,
                self.spread.unwrap_or(3.0),
                self.std.unwrap_or(1.0),
                seed,
            ),
            CorpusChoice::Tones => {
                let d = ToneParams::default();
                let params = ToneParams {
                    sample_rate: self.sample_rate.unwrap_or(d.sample_rate),
                    frame_rate_hz: self.frame_rate_hz.unwrap_or(d.frame_rate_hz),
                    voices: self.voices.unwrap_or(d.voices),
                    noise_std: self.noise_std.unwrap_or(d.noise_std),
                };
                SyntheticCorpusSpec::tones(frames, dim, params, seed)
            }
        };
        let corpus = gen_corpus::<f64>(&spec)?;
        run.write(out, &encode_features(&corpus.frames))?;
        let mut counts = Vec::new();
        for &l in &corpus.labels {
            if l >= counts.len() {
                counts.resize(l + 1, 0);
            }
            counts[l] += 1;
        }
        let side =
            CorpusSidecar { schema_version: "1.0", spec: &spec, summary: &corpus.summary, component_counts: counts };
        run.write(&sidecar_path(out), &json_bytes(&side)?)
    }
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainCodebook {
    /// Feature file to train on.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Output codebook file; training metadata goes to `<out>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Entries per layer [default: 2048]
    #[arg(long)]
    codebook_size: Option<usize>,
    /// Layers to train, 1 to 16 [default: 16]
    #[arg(long)]
    depth: Option<usize>,
    /// [default: 50]
    #[arg(long)]
    epochs: Option<usize>,
    /// [default: 0.99]
    #[arg(long)]
    ema_decay: Option<f64>,
    /// [default: 0.001]
    #[arg(long)]
    dead_code_factor: Option<f64>,
    /// Pin entry 0 of acoustic layers to zero [default: true]
    #[arg(long)]
    acoustic_null_entry: Option<bool>,
    /// [default: 1e-12]
    #[arg(long)]
    tolerance: Option<f64>,
    /// [default: 12.5]
    #[arg(long)]
    frame_rate_hz: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    #[serde(skip)]
    run: RunOpts,
}
settings!(TrainCodebook, "train-codebook");

impl TrainCodebook {
    fn exec(self, run: &mut Run) -> anyhow::Result<()> {
        let (corpus_path, out) = (required(&self.corpus, "corpus")?, required(&self.out, "out")?);
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            codebook_size: self.codebook_size.unwrap_or(d.codebook_size),
            depth: self.depth.unwrap_or(d.depth),
            epochs: self.epochs.unwrap_or(d.epochs),
            ema_decay: self.ema_decay.unwrap_or(d.ema_decay),
            dead_code_factor: self.dead_code_factor.unwrap_or(d.dead_code_factor),
            seed: self.seed.unwrap_or(d.seed),
            acoustic_null_entry: self.acoustic_null_entry.unwrap_or(d.acoustic_null_entry),
            tolerance: self.tolerance.unwrap_or(d.tolerance),
            frame_rate_hz: self.frame_rate_hz.unwrap_or(d.frame_rate_hz),
        };
        let raw = run.read(corpus_path)?;
        let corpus: Frames<f64> = decode_features(&raw)?;
        let trained = train_codebooks(&corpus, &cfg)?;
        run.write(out, &encode_codebooks(&trained.stack, cfg.seed)?)?;
        let mut side = CodebookSidecar::for_stack(&trained.stack);
        side.corpus_sha256 = Some(sha256_hex(&raw));
        side.train_config = Some(cfg);
        side.layers = trained.layers;
        run.write(&sidecar_path(out), &json_bytes(&side)?)
    }
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Encode {
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// Feature file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output token stream.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Layers to use [default: all trained layers]
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    #[serde(skip)]
    run: RunOpts,
}
settings!(Encode, "encode");

impl Encode {
    fn exec(self, run: &mut Run) -> anyhow::Result<()> {
        let stack = load_stack(run, required(&self.codebook, "codebook")?)?;
        let frames = load_features(run, required(&self.input, "input")?)?;
        let depth = check_depth(self.depth, stack.depth())?;
        let codes = stack.encode_all(&frames, depth)?;
        let header =
            TokenHeader { depth: depth as u32, frame_rate_hz: stack.frame_rate_hz, frame_count: codes.len() as u64 };
        run.write(required(&self.out, "out")?, &encode_tokens(&header, &codes)?)
    }
}

fn filter_from(taps: &Option<Vec<f64>>, default: FirFilter<f64>) -> anyhow::Result<FirFilter<f64>> {
    match taps {
        Some(t) => FirFilter::new(t.clone()).map_err(|e| UsageError(format!("--taps: {e}")).into()),
        None => Ok(default),
    }
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Decode {
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// Token stream.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output feature file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Layers to use [default: the token stream's depth]
    #[arg(long)]
    depth: Option<usize>,
    /// Causal post-filter taps, comma separated [default: 1 (plain dequantization)]
    #[arg(long, value_delimiter = ',')]
    taps: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    #[serde(skip)]
    run: RunOpts,
}
settings!(Decode, "decode");

impl Decode {
    fn exec(self, run: &mut Run) -> anyhow::Result<()> {
        let stack = load_stack(run, required(&self.codebook, "codebook")?)?;
        let (header, codes) = decode_tokens(&run.read(required(&self.input, "input")?)?)?;
        let depth = check_depth(self.depth.or(Some(header.depth as usize)), stack.depth().min(header.depth as usize))?;
        let filter = filter_from(&self.taps, FirFilter::identity())?;
        let frames = decode_offline(&stack, &codes, depth, &filter)?;
        run.write(required(&self.out, "out")?, &encode_features(&frames))
    }
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct StreamDecode {
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// Token stream, read one frame at a time.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Framed output `{u64 index, dim x f32}`; `-` for stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Layers to use [default: the token stream's depth]
    #[arg(long)]
    depth: Option<usize>,
    /// Causal post-filter taps, comma separated [default: 0.4,0.3,0.2,0.1]
    #[arg(long, value_delimiter = ',')]
    taps: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    #[serde(skip)]
    run: RunOpts,
}
settings!(StreamDecode, "stream-decode");

impl StreamDecode {
    fn exec(self, run: &mut Run) -> anyhow::Result<()> {
        let stack = load_stack(run, required(&self.codebook, "codebook")?)?;
        let input = required(&self.input, "input")?;
        let out = required(&self.out, "out")?;
        let mut reader =
            TokenStreamReader::new(BufReader::new(File::open(input).with_context(|| input.display().to_string())?))?;
        let depth = check_depth(
            self.depth.or(Some(reader.header.depth as usize)),
            stack.depth().min(reader.header.depth as usize),
        )?;
        let mut state = StreamState::new(filter_from(&self.taps, FirFilter::default())?, depth, stack.frame_rate_hz)?;

        let mut pump = |mut w: &mut dyn Write, reader: &mut TokenStreamReader<_>| -> anyhow::Result<()> {
            let mut index = 0u64;
            while let Some(frame) = reader.next_frame()? {
                let y = state.push_decode(&stack, &frame)?;
                write_pipe_frame(&mut w, index, &y)?;
                w.flush()?;
                index += 1;
            }
            Ok(())
        };
        if out.as_os_str() == "-" {
            pump(&mut std::io::stdout().lock(), &mut reader)?;
        } else {
            let tmp = temp_beside(out)?;
            pump(&mut BufWriter::new(tmp.as_file()), &mut reader)?;
            tmp.as_file().sync_all()?;
            tmp.persist(out)?;
            run.record_output(out)?;
        }
        let bytes = std::fs::read(input)?;
        run.inputs.push(crate::manifest::FileRecord {
            path: input.clone(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskDump {
    /// Tokens per block [default: 8]
    #[arg(long)]
    chunk_size: Option<usize>,
    /// Sequence length in tokens [default: 64]
    #[arg(long)]
    tokens: Option<usize>,
    /// Blocks visible behind the query block [default: 3]
    #[arg(long)]
    lookback: Option<usize>,
    /// Blocks visible ahead of the query block [default: 1]
    #[arg(long)]
    lookahead: Option<usize>,
    /// Audio per token [default: 40]
    #[arg(long)]
    token_ms: Option<Ms>,
    /// Audio held back from the first chunk [default: 130]
    #[arg(long)]
    vocoder_lookahead_ms: Option<Ms>,
    /// Token-level mask as a plain PBM bitmap (1 = may attend).
    #[arg(long)]
    pbm: Option<PathBuf>,
    /// Chunk schedule CSV; printed to stdout when neither output is given.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    #[serde(skip)]
    run: RunOpts,
}
settings!(MaskDump, "mask-dump");

impl MaskDump {
    fn exec(self, run: &mut Run) -> anyhow::Result<()> {
        let d = BlockWindow::default();
        let window = BlockWindow {
            lookback: self.lookback.unwrap_or(d.lookback),
            lookahead: self.lookahead.unwrap_or(d.lookahead),
        };
        let p = BlockPartition::with_window(self.chunk_size.unwrap_or(8), self.tokens.unwrap_or(64), window)?;
        let token_ms = self.token_ms.map_or(ExactMs::from_integer(40), |m| m.0);
        let lookahead = self.vocoder_lookahead_ms.map_or(ExactMs::from_integer(130), |m| m.0);
        let schedule = schedule_chunks(&p, token_ms, lookahead)?;
        if let Some(path) = &self.pbm {
            run.write(path, build_mask(&p).to_token_mask(&p).to_pbm().as_bytes())?;
        }
        if self.csv.is_some() || self.pbm.is_none() {
            write_or_print(run, self.csv.as_deref(), schedule.to_csv().as_bytes())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelChoice {
    Constant,
    Echo,
    Markov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopChoice {
    AfterText,
    AtStep,
    StopCode,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Session {
    /// Input text, split on whitespace.
    #[arg(long, conflicts_with = "text_file")]
    text: Option<String>,
    #[arg(long)]
    text_file: Option<PathBuf>,
    /// [default: markov]
    #[arg(long, value_enum)]
    model: Option<ModelChoice>,
    /// [default: 2048]
    #[arg(long)]
    codebook_size: Option<usize>,
    /// Markov text buckets [default: 64]
    #[arg(long)]
    buckets: Option<usize>,
    /// [default: after-text]
    #[arg(long, value_enum)]
    stop: Option<StopChoice>,
    /// Pad steps after the text runs out [default: 4]
    #[arg(long)]
    pad_steps: Option<usize>,
    /// Step count for `--stop at-step`.
    #[arg(long)]
    steps: Option<usize>,
    /// Zeroth code that ends the session for `--stop stop-code`.
    #[arg(long)]
    stop_code: Option<u16>,
    /// [default: 10000]
    #[arg(long)]
    max_steps: Option<usize>,
    /// Arrival spacing of text tokens [default: 0]
    #[arg(long)]
    text_interval_ms: Option<f64>,
    /// Compute time per step [default: 1]
    #[arg(long)]
    step_ms: Option<f64>,
    /// Previous frames summarised into each step [default: 4]
    #[arg(long)]
    context_frames: Option<usize>,
    /// JSON-lines transcript; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    #[serde(skip)]
    run: RunOpts,
}
settings!(Session, "session");

impl Session {
    fn exec(self, run: &mut Run) -> anyhow::Result<()> {
        let text = match (&self.text, &self.text_file) {
            (Some(t), None) => t.clone(),
            (None, Some(p)) => run.read_to_string(p)?,
            (Some(_), Some(_)) => return Err(UsageError("give --text or --text-file, not both".into()).into()),
            (None, None) => return Err(UsageError("missing required setting --text or --text-file".into()).into()),
        };
        let size = self.codebook_size.unwrap_or(2048);
        let seed = self.seed.unwrap_or(0);
        let model: Box<dyn StepModel> = match self.model.unwrap_or(ModelChoice::Markov) {
            ModelChoice::Constant => Box::new(ConstantModel {
                size,
                frame: CodeFrame::new(std::array::from_fn(|i| ((seed as usize).wrapping_add(i) % size.max(1)) as u16)),
            }),
            ModelChoice::Echo => Box::new(EchoModel { size }),
            ModelChoice::Markov => Box::new(MarkovModel::new(size, self.buckets.unwrap_or(64), seed)?),
        };
        let condition = match self.stop.unwrap_or(StopChoice::AfterText) {
            StopChoice::AfterText => StopCondition::AfterText { pad_steps: self.pad_steps.unwrap_or(4) },
            StopChoice::AtStep => StopCondition::AtStep(*required(&self.steps, "steps")?),
            StopChoice::StopCode => StopCondition::StopCode(*required(&self.stop_code, "stop-code")?),
        };
        let d = SessionClock::default();
        let options = SessionOptions {
            clock: SessionClock {
                text_interval_ms: self.text_interval_ms.unwrap_or(d.text_interval_ms),
                step_ms: self.step_ms.unwrap_or(d.step_ms),
            },
            context_frames: self.context_frames,
            speaker: None,
        };
        let stop = StopRule { condition, max_steps: self.max_steps.unwrap_or(10_000) };
        let session = run_session(&tokenize(&text), model.as_ref(), stop, &options)?;
        let mut buf = Vec::new();
        session.write_jsonl(&mut buf)?;
        write_or_print(run, self.out.as_deref(), &buf)
    }
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Simulate {
    /// 25hz or 12hz [default: 12hz]
    #[arg(long)]
    pipeline: Option<Pipeline>,
    /// LM time to the first decodable tokens [default: first bundled profile of the pipeline]
    #[arg(long)]
    ttfp_ms: Option<Ms>,
    /// LM time per packet [default: first bundled profile of the pipeline]
    #[arg(long)]
    lm_tpp_ms: Option<Ms>,
    /// Decoder time per packet [default: first bundled profile of the pipeline]
    #[arg(long)]
    decode_tpp_ms: Option<Ms>,
    /// Tokens generated [default: enough for 20 packets]
    #[arg(long, conflicts_with = "transcript")]
    tokens: Option<usize>,
    /// Replay a session transcript; one token per frame.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// pipelined or serial [default: pipelined]
    #[arg(long)]
    overlap: Option<OverlapMode>,
    /// JSON-lines event trace.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    #[serde(skip)]
    run: RunOpts,
}
settings!(Simulate, "simulate");

fn bundled_profiles() -> anyhow::Result<Vec<SweepInput<ExactMs>>> {
    Ok(parse_sweep_csv(TABLE5_CSV.as_bytes(), OverlapMode::Pipelined)?)
}

impl Simulate {
    fn exec(self, run: &mut Run) -> anyhow::Result<()> {
        let pipeline = self.pipeline.unwrap_or(Pipeline::Hz12);
        let base = bundled_profiles()?
            .into_iter()
            .find(|p| p.config.pipeline == pipeline)
            .context("bundled profiles lack this pipeline")?
            .config;
        let config = PipelineConfig::for_pipeline(
            pipeline,
            self.ttfp_ms.map_or(base.lm_ttfp_ms, |m| m.0),
            self.lm_tpp_ms.map_or(base.lm_tpp_ms, |m| m.0),
            self.decode_tpp_ms.map_or(base.decode_tpp_ms, |m| m.0),
        )
        .with_overlap(self.overlap.unwrap_or_default());
        let sim = match (&self.transcript, self.tokens) {
            (Some(_), Some(_)) => return Err(UsageError("give --tokens or --transcript, not both".into()).into()),
            (Some(path), None) => {
                let events = read_transcript(BufReader::new(run.read(path)?.as_slice()))?;
                replay_transcript(&config, &events)?
            }
            (None, tokens) => {
                let tokens =
                    tokens.unwrap_or(config.first_decodable_tokens + (DEFAULT_PACKETS - 1) * config.packet_tokens);
                simulate(&config, tokens)?
            }
        };
        if let Some(path) = &self.trace_out {
            let mut buf = Vec::new();
            sim.write_trace_jsonl(&mut buf)?;
            run.write(path, &buf)?;
        }
        write_or_print(run, self.out.as_deref(), &json_bytes(&sim.report.to_document())?)
    }
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Sweep {
    /// Cost-profile CSV [default: the bundled twelve-row table]
    input: Option<PathBuf>,
    /// Report CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// pipelined or serial [default: pipelined]
    #[arg(long)]
    overlap: Option<OverlapMode>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    #[serde(skip)]
    run: RunOpts,
}
settings!(Sweep, "sweep");

impl Sweep {
    fn exec(self, run: &mut Run) -> anyhow::Result<()> {
        let overlap = self.overlap.unwrap_or_default();
        let inputs: Vec<SweepInput<ExactMs>> = match &self.input {
            Some(path) => parse_sweep_csv(run.read(path)?.as_slice(), overlap)?,
            None => parse_sweep_csv(TABLE5_CSV.as_bytes(), overlap)?,
        };
        let rows = sweep(&inputs)?;
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf)?;
        write_or_print(run, self.out.as_deref(), &buf)
    }
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Eval {
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// Feature file to evaluate on.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    #[serde(skip)]
    run: RunOpts,
}
settings!(Eval, "eval");

impl Eval {
    fn exec(self, run: &mut Run) -> anyhow::Result<()> {
        let stack = load_stack(run, required(&self.codebook, "codebook")?)?;
        let corpus = load_features(run, required(&self.corpus, "corpus")?)?;
        let report = eval_codec(&stack, &corpus)?;
        write_or_print(run, self.out.as_deref(), &json_bytes(&report)?)
    }
}
