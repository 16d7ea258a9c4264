use serde::{Deserialize, Serialize};

use super::{LatencyReport, OverlapMode, PipelineConfig};
use crate::dual_track::StepEvent;
use crate::error::{Error, Result};
use crate::scalar::TimeScalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceKind {
    TokenDone { token: usize },
    DecodeStart { packet: usize },
    DecodeEnd { packet: usize },
    AudioEmit { packet: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent<T> {
    pub t_ms: T,
    pub kind: TraceKind,
    /// Audio carried by an `AudioEmit` event; zero otherwise.
    pub audio_ms: T,
}

#[derive(Debug, Serialize)]
struct TraceLine {
    t_ms: f64,
    #[serde(flatten)]
    kind: TraceKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    audio_ms: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Simulation<T> {
    pub report: LatencyReport<T>,
    pub trace: Vec<TraceEvent<T>>,
    /// Per packet: tokens required, decode start, decode end, audio.
    pub packets: Vec<PacketTiming<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacketTiming<T> {
    pub required_tokens: usize,
    pub tokens_ready_ms: T,
    pub decode_start_ms: T,
    pub decode_end_ms: T,
    pub audio_ms: T,
}

impl<T: TimeScalar> Simulation<T> {
    pub fn write_trace_jsonl<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        for e in &self.trace {
            let line = TraceLine {
                t_ms: e.t_ms.as_f64(),
                kind: e.kind,
                audio_ms: matches!(e.kind, TraceKind::AudioEmit { .. }).then(|| e.audio_ms.as_f64()),
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Simulates one streaming session of `total_tokens` LM tokens.
///
/// Packet 0 needs `first_decodable_tokens`; packet `i` needs `packet_tokens`
/// more per index. Tokens beyond the last full packet are generated but not
/// decoded. The first `first_decodable_tokens` complete together at TTFP;
/// later tokens complete evenly spaced at `lm_tpp_ms / packet_tokens`. In
/// serial mode the LM stalls while a packet decodes.
pub fn simulate<T: TimeScalar>(config: &PipelineConfig<T>, total_tokens: usize) -> Result<Simulation<T>> {
    config.validate()?;
    let fd = config.first_decodable_tokens;
    if total_tokens < fd {
        return Err(Error::NoPacket { needed: fd, got: total_tokens });
    }
    let p = config.packet_tokens;
    let n_packets = 1 + (total_tokens - fd) / p;
    let per_token = config.lm_tpp_ms / T::from_count(p);

    let mut token_done: Vec<T> = Vec::with_capacity(total_tokens);
    token_done.extend(std::iter::repeat_n(config.lm_ttfp_ms, fd));
    let mut packets: Vec<PacketTiming<T>> = Vec::with_capacity(n_packets);
    let mut decoder_free = T::zero();

    for i in 0..n_packets {
        let required = fd + i * p;
        if i > 0 {
            // LM segment producing tokens for packet i
            let segment_start = match config.overlap {
                OverlapMode::Pipelined => *token_done.last().unwrap(),
                OverlapMode::Serial => packets[i - 1].decode_end_ms,
            };
            push_segment(&mut token_done, segment_start, per_token, p);
        }
        let ready = token_done[required - 1];
        let start = T::max_of(ready, decoder_free);
        let end = start + config.decode_tpp_ms;
        decoder_free = end;
        let audio =
            if i == 0 { config.packet_audio_ms() - config.vocoder_lookahead_ms } else { config.packet_audio_ms() };
        packets.push(PacketTiming {
            required_tokens: required,
            tokens_ready_ms: ready,
            decode_start_ms: start,
            decode_end_ms: end,
            audio_ms: audio,
        });
    }
    let leftover = total_tokens - token_done.len();
    if leftover > 0 {
        let segment_start = match config.overlap {
            OverlapMode::Pipelined => *token_done.last().unwrap(),
            OverlapMode::Serial => packets.last().unwrap().decode_end_ms,
        };
        push_segment(&mut token_done, segment_start, per_token, leftover);
    }

    let mut trace = Vec::with_capacity(total_tokens + 3 * n_packets);
    for (token, &t) in token_done.iter().enumerate() {
        trace.push(TraceEvent { t_ms: t, kind: TraceKind::TokenDone { token }, audio_ms: T::zero() });
    }
    for (packet, pk) in packets.iter().enumerate() {
        trace.push(TraceEvent {
            t_ms: pk.decode_start_ms,
            kind: TraceKind::DecodeStart { packet },
            audio_ms: T::zero(),
        });
        trace.push(TraceEvent { t_ms: pk.decode_end_ms, kind: TraceKind::DecodeEnd { packet }, audio_ms: T::zero() });
        trace.push(TraceEvent { t_ms: pk.decode_end_ms, kind: TraceKind::AudioEmit { packet }, audio_ms: pk.audio_ms });
    }
    // stable: ties keep token completions ahead of decode events
    trace.sort_by(|a, b| a.t_ms.partial_cmp(&b.t_ms).unwrap_or(std::cmp::Ordering::Equal));

    let emit: Vec<T> = packets.iter().map(|p| p.decode_end_ms).collect();
    let steady = if emit.len() >= 2 {
        emit[emit.len() - 1] - emit[emit.len() - 2]
    } else {
        match config.overlap {
            OverlapMode::Pipelined => T::max_of(config.lm_tpp_ms, config.decode_tpp_ms),
            OverlapMode::Serial => config.lm_tpp_ms + config.decode_tpp_ms,
        }
    };
    let audio_out = packets.iter().fold(T::zero(), |acc, p| acc + p.audio_ms);
    let total_compute = trace.last().map(|e| e.t_ms).unwrap_or_else(T::zero);
    let report = LatencyReport {
        name: config.name.clone(),
        pipeline: config.pipeline,
        tokens: total_tokens,
        packets: n_packets,
        first_packet_latency_ms: packets[0].decode_end_ms,
        first_packet_audio_ms: packets[0].audio_ms,
        steady_packet_period_ms: steady,
        real_time_capable: steady <= config.packet_audio_ms(),
        total_compute_ms: total_compute,
        audio_out_ms: audio_out,
        rtf: total_compute.as_f64() / audio_out.as_f64(),
    };
    Ok(Simulation { report, trace, packets })
}

fn push_segment<T: TimeScalar>(token_done: &mut Vec<T>, start: T, per_token: T, count: usize) {
    for j in 1..=count {
        token_done.push(start + per_token * T::from_count(j));
    }
}

/// Simulates the frames of a recorded dual-track session as LM tokens.
pub fn replay_transcript<T: TimeScalar>(config: &PipelineConfig<T>, events: &[StepEvent]) -> Result<Simulation<T>> {
    for (i, e) in events.iter().enumerate() {
        if e.step != i {
            return Err(Error::format(format!("transcript step {} at position {i}", e.step)));
        }
    }
    simulate(config, events.len())
}
