//! Discrete-event model of streaming first-packet latency and packet cadence.
//!
//! All timing is generic over [`TimeScalar`]; use [`ExactMs`] (a 64-bit
//! rational) when sums must be exact.

mod sim;
mod sweep;

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::TimeScalar;

pub use sim::{replay_transcript, simulate, Simulation, TraceEvent, TraceKind};
pub use sweep::{parse_sweep_csv, sweep, write_sweep_csv, SweepInput, SweepRow, DEFAULT_PACKETS, TABLE5_CSV};

pub type ExactMs = Ratio<i64>;

pub const REPORT_SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    /// 25 Hz single-codebook tokens, chunked decode with lookahead.
    #[serde(rename = "25hz")]
    Hz25,
    /// 12.5 Hz multi-codebook tokens, causal decode.
    #[serde(rename = "12hz")]
    Hz12,
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "25hz" | "25" => Ok(Pipeline::Hz25),
            "12hz" | "12.5hz" | "12" | "12.5" => Ok(Pipeline::Hz12),
            other => Err(Error::config(format!("unknown pipeline '{other}' (expected 25hz or 12hz)"))),
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pipeline::Hz25 => "25hz",
            Pipeline::Hz12 => "12hz",
        })
    }
}

/// Whether packet decode may run while the LM produces the next packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapMode {
    #[default]
    Pipelined,
    Serial,
}

impl FromStr for OverlapMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pipelined" | "overlap" | "overlapped" => Ok(OverlapMode::Pipelined),
            "serial" => Ok(OverlapMode::Serial),
            other => Err(Error::config(format!("unknown overlap mode '{other}'"))),
        }
    }
}

/// Timing constants of one pipeline variant under one cost profile.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig<T> {
    pub name: String,
    pub pipeline: Pipeline,
    pub token_rate_hz: T,
    pub token_ms: T,
    pub packet_tokens: usize,
    pub vocoder_lookahead_ms: T,
    pub first_decodable_tokens: usize,
    /// LM time until the first decodable group of tokens exists (prefill included).
    pub lm_ttfp_ms: T,
    /// Steady-state LM time per packet of tokens.
    pub lm_tpp_ms: T,
    /// Tokenizer decode time per packet.
    pub decode_tpp_ms: T,
    pub overlap: OverlapMode,
}

impl<T: TimeScalar> PipelineConfig<T> {
    /// 25 Hz: 40 ms tokens, 8-token chunks, 16 tokens before the first chunk, 130 ms vocoder lookahead.
    pub fn hz25(lm_ttfp_ms: T, lm_tpp_ms: T, decode_tpp_ms: T) -> Self {
        Self {
            name: "25hz".into(),
            pipeline: Pipeline::Hz25,
            token_rate_hz: T::from_count(25),
            token_ms: T::from_count(40),
            packet_tokens: 8,
            vocoder_lookahead_ms: T::from_count(130),
            first_decodable_tokens: 16,
            lm_ttfp_ms,
            lm_tpp_ms,
            decode_tpp_ms,
            overlap: OverlapMode::Pipelined,
        }
    }

    /// 12.5 Hz: 80 ms tokens, 4-token packets, no lookahead.
    pub fn hz12(lm_ttfp_ms: T, lm_tpp_ms: T, decode_tpp_ms: T) -> Self {
        Self {
            name: "12hz".into(),
            pipeline: Pipeline::Hz12,
            token_rate_hz: T::from_count(25) / T::from_count(2),
            token_ms: T::from_count(80),
            packet_tokens: 4,
            vocoder_lookahead_ms: T::zero(),
            first_decodable_tokens: 4,
            lm_ttfp_ms,
            lm_tpp_ms,
            decode_tpp_ms,
            overlap: OverlapMode::Pipelined,
        }
    }

    pub fn for_pipeline(pipeline: Pipeline, lm_ttfp_ms: T, lm_tpp_ms: T, decode_tpp_ms: T) -> Self {
        match pipeline {
            Pipeline::Hz25 => Self::hz25(lm_ttfp_ms, lm_tpp_ms, decode_tpp_ms),
            Pipeline::Hz12 => Self::hz12(lm_ttfp_ms, lm_tpp_ms, decode_tpp_ms),
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_overlap(mut self, overlap: OverlapMode) -> Self {
        self.overlap = overlap;
        self
    }

    pub fn packet_audio_ms(&self) -> T {
        T::from_count(self.packet_tokens) * self.token_ms
    }

    pub fn validate(&self) -> Result<()> {
        let zero = T::zero();
        if self.packet_tokens == 0 {
            return Err(Error::config("packet must hold at least one token"));
        }
        if self.first_decodable_tokens < self.packet_tokens {
            return Err(Error::config("first decodable token count must cover one packet"));
        }
        if !(self.token_ms > zero) || !(self.token_rate_hz > zero) {
            return Err(Error::config("token duration and rate must be positive"));
        }
        for (what, v) in [
            ("lm_ttfp_ms", self.lm_ttfp_ms),
            ("lm_tpp_ms", self.lm_tpp_ms),
            ("decode_tpp_ms", self.decode_tpp_ms),
            ("vocoder_lookahead_ms", self.vocoder_lookahead_ms),
        ] {
            if v < zero {
                return Err(Error::config(format!("{what} must be non-negative, got {v}")));
            }
        }
        if self.vocoder_lookahead_ms >= self.packet_audio_ms() {
            return Err(Error::config("vocoder lookahead leaves an empty first packet"));
        }
        Ok(())
    }
}

/// LM time to the first decodable tokens plus one packet of tokenizer decode.
pub fn first_packet_latency<T: TimeScalar>(config: &PipelineConfig<T>) -> T {
    config.lm_ttfp_ms + config.decode_tpp_ms
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport<T> {
    pub name: String,
    pub pipeline: Pipeline,
    pub tokens: usize,
    pub packets: usize,
    pub first_packet_latency_ms: T,
    pub first_packet_audio_ms: T,
    pub steady_packet_period_ms: T,
    pub real_time_capable: bool,
    /// Session makespan: time of the last simulated event.
    pub total_compute_ms: T,
    pub audio_out_ms: T,
    pub rtf: f64,
}

/// Serializable view of a report with plain numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: String,
    pub name: String,
    pub pipeline: Pipeline,
    pub tokens: usize,
    pub packets: usize,
    pub first_packet_latency_ms: f64,
    pub first_packet_audio_ms: f64,
    pub steady_packet_period_ms: f64,
    pub real_time_capable: bool,
    pub total_compute_ms: f64,
    pub audio_out_ms: f64,
    pub rtf: f64,
}

impl<T: TimeScalar> LatencyReport<T> {
    pub fn to_document(&self) -> ReportDocument {
        ReportDocument {
            schema_version: REPORT_SCHEMA_VERSION.into(),
            name: self.name.clone(),
            pipeline: self.pipeline,
            tokens: self.tokens,
            packets: self.packets,
            first_packet_latency_ms: self.first_packet_latency_ms.as_f64(),
            first_packet_audio_ms: self.first_packet_audio_ms.as_f64(),
            steady_packet_period_ms: self.steady_packet_period_ms.as_f64(),
            real_time_capable: self.real_time_capable,
            total_compute_ms: self.total_compute_ms.as_f64(),
            audio_out_ms: self.audio_out_ms.as_f64(),
            rtf: self.rtf,
        }
    }
}

impl ReportDocument {
    /// Parses a report, rejecting unknown major schema versions.
    pub fn from_json(s: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s)?;
        let version = value.get("schema_version").and_then(|v| v.as_str()).unwrap_or("");
        check_major("latency report", version, REPORT_SCHEMA_VERSION)?;
        Ok(serde_json::from_value(value)?)
    }
}

/// Accepts `found` when its major component equals `supported`'s.
pub fn check_major(what: &'static str, found: &str, supported: &str) -> Result<()> {
    let major = |v: &str| v.split('.').next().map(str::to_owned);
    if found.is_empty() || major(found) != major(supported) {
        return Err(Error::UnsupportedVersion { what, found: found.into(), supported: supported.into() });
    }
    Ok(())
}

/// Formats a time value as an integer when it is one, else as a decimal.
pub fn format_ms<T: TimeScalar>(v: T) -> String {
    let f = v.as_f64();
    if f.fract() == 0.0 && f.abs() < 1e15 {
        format!("{}", f as i64)
    } else {
        format!("{f}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(v: i64) -> ExactMs {
        ExactMs::from_integer(v)
    }

    #[test]
    fn first_packet_sums() {
        assert_eq!(first_packet_latency(&PipelineConfig::hz12(ms(97), ms(21), ms(4))), ms(101));
        assert_eq!(first_packet_latency(&PipelineConfig::hz25(ms(125), ms(56), ms(25))), ms(150));
        assert_eq!(first_packet_latency(&PipelineConfig::hz25(ms(0), ms(0), ms(0))), ms(0));
    }

    #[test]
    fn pipeline_constants() {
        let c = PipelineConfig::<ExactMs>::hz12(ms(1), ms(1), ms(1));
        assert_eq!(c.token_rate_hz, ExactMs::new(25, 2));
        assert_eq!(c.token_ms * c.token_rate_hz, ms(1000));
        assert_eq!(c.packet_audio_ms(), ms(320));
        let c = PipelineConfig::<ExactMs>::hz25(ms(1), ms(1), ms(1));
        assert_eq!(c.token_ms * c.token_rate_hz, ms(1000));
        assert_eq!(c.packet_audio_ms(), ms(320));
    }

    #[test]
    fn validation() {
        let mut c = PipelineConfig::<ExactMs>::hz25(ms(1), ms(1), ms(1));
        assert!(c.validate().is_ok());
        c.decode_tpp_ms = ms(-1);
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::<ExactMs>::hz25(ms(1), ms(1), ms(1));
        c.first_decodable_tokens = 4;
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::<ExactMs>::hz25(ms(1), ms(1), ms(1));
        c.vocoder_lookahead_ms = ms(320);
        assert!(c.validate().is_err());
    }

    #[test]
    fn version_gate() {
        assert!(check_major("x", "1.3", "1.0").is_ok());
        assert!(check_major("x", "2.0", "1.0").is_err());
        assert!(check_major("x", "", "1.0").is_err());
    }

    #[test]
    fn ms_formatting() {
        assert_eq!(format_ms(ms(150)), "150");
        assert_eq!(format_ms(ExactMs::new(21, 4)), "5.25");
    }
}
