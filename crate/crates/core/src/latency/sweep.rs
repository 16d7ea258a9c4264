//! Batch evaluation of many cost profiles, read from and written to CSV.
//!
//! Input schema (header row required, `#` starts a comment line):
//!
//! ```text
//! name,pipeline,concurrency,lm_ttfp_ms,decode_tpp_ms,lm_tpp_ms,tokens,reference_first_packet_ms,reference_rtf
//! ```
//!
//! `pipeline` is `25hz` or `12hz`. `concurrency`, `tokens` and the two
//! `reference_*` columns are optional; missing `tokens` means twenty packets.

use std::io::{Read, Write};

use super::{format_ms, simulate, LatencyReport, OverlapMode, Pipeline, PipelineConfig};
use crate::error::{Error, Result};
use crate::scalar::TimeScalar;

/// The twelve published streaming-efficiency measurements.
pub const TABLE5_CSV: &str = include_str!("../../data/table5.csv");

/// Packets simulated when a sweep row gives no token count.
pub const DEFAULT_PACKETS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepInput<T> {
    pub config: PipelineConfig<T>,
    pub concurrency: Option<u32>,
    pub tokens: usize,
    pub reference_first_packet_ms: Option<T>,
    pub reference_rtf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T> {
    pub input: SweepInput<T>,
    pub report: LatencyReport<T>,
}

impl<T: TimeScalar> SweepRow<T> {
    /// `Some(true)` when a reference first-packet value is present and equals the simulated one.
    pub fn matches_reference(&self) -> Option<bool> {
        self.input.reference_first_packet_ms.map(|r| r == self.report.first_packet_latency_ms)
    }
}

pub fn parse_sweep_csv<T: TimeScalar, R: Read>(reader: R, overlap: OverlapMode) -> Result<Vec<SweepInput<T>>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| col(name).ok_or_else(|| Error::format(format!("sweep CSV lacks column '{name}'")));
    let (c_name, c_pipe) = (required("name")?, required("pipeline")?);
    let (c_ttfp, c_dec, c_tpp) = (required("lm_ttfp_ms")?, required("decode_tpp_ms")?, required("lm_tpp_ms")?);
    let (c_conc, c_tok) = (col("concurrency"), col("tokens"));
    let (c_ref_fp, c_ref_rtf) = (col("reference_first_packet_ms"), col("reference_rtf"));

    let mut out = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("").trim();
        let optional = |c: Option<usize>| c.map(field).filter(|s| !s.is_empty());
        let time = |c: usize| {
            T::parse_ms(field(c))
                .ok_or_else(|| Error::format(format!("row {}: bad time value '{}'", line + 1, field(c))))
        };
        let pipeline: Pipeline = field(c_pipe).parse()?;
        let config = PipelineConfig::for_pipeline(pipeline, time(c_ttfp)?, time(c_tpp)?, time(c_dec)?)
            .named(field(c_name))
            .with_overlap(overlap);
        config.validate()?;
        let tokens = match optional(c_tok) {
            Some(s) => s.parse().map_err(|_| Error::format(format!("row {}: bad token count '{s}'", line + 1)))?,
            None => config.first_decodable_tokens + (DEFAULT_PACKETS - 1) * config.packet_tokens,
        };
        let concurrency = optional(c_conc)
            .map(|s| s.parse().map_err(|_| Error::format(format!("row {}: bad concurrency '{s}'", line + 1))))
            .transpose()?;
        let reference_first_packet_ms = optional(c_ref_fp)
            .map(|s| T::parse_ms(s).ok_or_else(|| Error::format(format!("row {}: bad reference '{s}'", line + 1))))
            .transpose()?;
        let reference_rtf = optional(c_ref_rtf)
            .map(|s| s.parse().map_err(|_| Error::format(format!("row {}: bad reference rtf '{s}'", line + 1))))
            .transpose()?;
        out.push(SweepInput { config, concurrency, tokens, reference_first_packet_ms, reference_rtf });
    }
    Ok(out)
}

pub fn sweep<T: TimeScalar>(inputs: &[SweepInput<T>]) -> Result<Vec<SweepRow<T>>> {
    if inputs.is_empty() {
        return Err(Error::config("sweep needs at least one configuration"));
    }
    inputs
        .iter()
        .map(|input| {
            let sim = simulate(&input.config, input.tokens)?;
            Ok(SweepRow { input: input.clone(), report: sim.report })
        })
        .collect()
}

pub fn write_sweep_csv<T: TimeScalar, W: Write>(rows: &[SweepRow<T>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "name",
        "pipeline",
        "concurrency",
        "tokens",
        "packets",
        "lm_ttfp_ms",
        "decode_tpp_ms",
        "lm_tpp_ms",
        "first_packet_latency_ms",
        "first_packet_audio_ms",
        "steady_packet_period_ms",
        "real_time_capable",
        "total_compute_ms",
        "audio_out_ms",
        "rtf_simulated",
        "reference_first_packet_ms",
        "first_packet_matches_reference",
        "reference_rtf",
    ])?;
    for row in rows {
        let (c, r) = (&row.input.config, &row.report);
        w.write_record([
            r.name.clone(),
            r.pipeline.to_string(),
            row.input.concurrency.map(|v| v.to_string()).unwrap_or_default(),
            r.tokens.to_string(),
            r.packets.to_string(),
            format_ms(c.lm_ttfp_ms),
            format_ms(c.decode_tpp_ms),
            format_ms(c.lm_tpp_ms),
            format_ms(r.first_packet_latency_ms),
            format_ms(r.first_packet_audio_ms),
            format_ms(r.steady_packet_period_ms),
            r.real_time_capable.to_string(),
            format_ms(r.total_compute_ms),
            format_ms(r.audio_out_ms),
            format!("{:.6}", r.rtf),
            row.input.reference_first_packet_ms.map(format_ms).unwrap_or_default(),
            row.matches_reference().map(|m| m.to_string()).unwrap_or_default(),
            row.input.reference_rtf.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
