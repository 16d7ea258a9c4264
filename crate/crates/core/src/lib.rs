//! Streaming speech-tokenizer core.
//!
//! * [`rvq`]: residual vector quantization (one semantic + fifteen acoustic
//!   layers), EMA k-means training, teacher alignment loss.
//! * [`stream`]: zero-lookahead frame-by-frame encode/decode.
//! * [`block_attention`]: sliding-window block masks and chunk scheduling.
//! * [`dual_track`]: text/audio step scheduling with toy step models.
//! * [`latency`]: discrete-event first-packet latency simulation.
//! * [`corpus`], [`metrics`], [`formats`]: synthetic data, evaluation, files.
//!
//! Feature math is generic over [`Scalar`] (`f32`, `f64`); timing math over
//! [`TimeScalar`] (`f64`, or exact [`latency::ExactMs`]).

pub mod block_attention;
pub mod corpus;
pub mod dual_track;
pub mod error;
pub mod formats;
pub mod frames;
pub mod latency;
pub mod metrics;
pub mod rvq;
pub mod scalar;
pub mod stream;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use frames::Frames;
pub use scalar::{Scalar, TimeScalar};

pub type Codebook32 = rvq::Codebook<f32>;
pub type Codebook64 = rvq::Codebook<f64>;
pub type RvqStack32 = rvq::RvqStack<f32>;
pub type RvqStack64 = rvq::RvqStack<f64>;
pub type Frames32 = frames::Frames<f32>;
pub type Frames64 = frames::Frames<f64>;
pub type StreamState32 = stream::StreamState<f32>;
pub type StreamState64 = stream::StreamState<f64>;
pub type ExactPipelineConfig = latency::PipelineConfig<latency::ExactMs>;
pub type ExactLatencyReport = latency::LatencyReport<latency::ExactMs>;
pub type ExactChunkSchedule = block_attention::ChunkSchedule<latency::ExactMs>;
