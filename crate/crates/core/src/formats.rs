//! Binary file formats. All integers and floats are little-endian.
//!
//! | file          | layout                                                                 |
//! |---------------|------------------------------------------------------------------------|
//! | features      | `FTR1`, dim u32, frames u64, frames x dim f32                           |
//! | codebooks     | `RVQ1`, K u32, D u32, depth u32, seed u64, depth x K x D f32           |
//! | token stream  | `TOK1`, depth u32, frame_rate_hz f64, frames u64, frames x 16 u16      |
//! | decoded pipe  | repeated {frame_index u64, D x f32}                                    |
//!
//! The trailing digit of each magic is the major format version; readers
//! reject any other version. Codebook files carry a JSON sidecar
//! (`<path>.json`) with training metadata.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::Frames;
use crate::latency::check_major;
use crate::rvq::{CodeFrame, Codebook, LayerReport, RvqStack, TrainConfig, NUM_LAYERS};
use crate::scalar::Scalar;

pub const FEATURE_MAGIC: &[u8; 4] = b"FTR1";
pub const CODEBOOK_MAGIC: &[u8; 4] = b"RVQ1";
pub const TOKEN_MAGIC: &[u8; 4] = b"TOK1";
pub const SIDECAR_SCHEMA_VERSION: &str = "1.0";

/// Creates a temporary file next to `path`, ready to be persisted over it.
pub fn temp_beside(path: &Path) -> Result<tempfile::NamedTempFile> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut builder = tempfile::Builder::new();
    builder.prefix(".tmp");
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(fs::Permissions::from_mode(0o644));
    }
    Ok(builder.tempfile_in(dir)?)
}

/// Writes through a temporary file in the destination directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = temp_beside(path)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn check_magic(found: &[u8; 4], expected: &[u8; 4], what: &'static str) -> Result<()> {
    if found == expected {
        return Ok(());
    }
    if found[..3] == expected[..3] {
        return Err(Error::UnsupportedVersion {
            what,
            found: String::from_utf8_lossy(&found[3..]).into_owned(),
            supported: String::from_utf8_lossy(&expected[3..]).into_owned(),
        });
    }
    Err(Error::format(format!("not a {what} file (magic {:?})", String::from_utf8_lossy(found))))
}

struct Cursor<'a> {
    buf: &'a [u8],
    what: &'static str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::format(format!("truncated {} file", self.what)));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn finish(&self) -> Result<()> {
        if !self.buf.is_empty() {
            return Err(Error::format(format!("{} trailing bytes in {} file", self.buf.len(), self.what)));
        }
        Ok(())
    }
}

pub fn encode_features<T: Scalar>(frames: &Frames<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + frames.as_slice().len() * 4);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&(frames.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(frames.len() as u64).to_le_bytes());
    for v in frames.as_slice() {
        out.extend_from_slice(&v.as_f32().to_le_bytes());
    }
    out
}

pub fn decode_features<T: Scalar>(bytes: &[u8]) -> Result<Frames<T>> {
    let mut c = Cursor { buf: bytes, what: "feature" };
    check_magic(&c.array()?, FEATURE_MAGIC, "feature")?;
    let dim = c.u32()? as usize;
    let count = c.u64()? as usize;
    let values = dim
        .checked_mul(count)
        .filter(|&n| n.checked_mul(4) == Some(c.buf.len()))
        .ok_or_else(|| Error::format("feature payload size does not match header"))?;
    let mut data = Vec::with_capacity(values);
    for _ in 0..values {
        data.push(T::of(c.f32()? as f64));
    }
    c.finish()?;
    Frames::new(dim, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodebookHeader {
    pub size: u32,
    pub dim: u32,
    pub depth: u32,
    pub seed: u64,
}

/// Training metadata stored next to a codebook file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookSidecar {
    pub schema_version: String,
    pub frame_rate_hz: f64,
    pub null_entry: Vec<bool>,
    #[serde(default)]
    pub train_config: Option<TrainConfig>,
    #[serde(default)]
    pub layers: Vec<LayerReport>,
    #[serde(default)]
    pub corpus_sha256: Option<String>,
}

impl CodebookSidecar {
    pub fn for_stack<T: Scalar>(stack: &RvqStack<T>) -> Self {
        Self {
            schema_version: SIDECAR_SCHEMA_VERSION.into(),
            frame_rate_hz: stack.frame_rate_hz,
            null_entry: stack.layers().iter().map(Codebook::has_null_entry).collect(),
            train_config: None,
            layers: Vec::new(),
            corpus_sha256: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s)?;
        let version = value.get("schema_version").and_then(|v| v.as_str()).unwrap_or("");
        check_major("codebook sidecar", version, SIDECAR_SCHEMA_VERSION)?;
        Ok(serde_json::from_value(value)?)
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn encode_codebooks<T: Scalar>(stack: &RvqStack<T>, seed: u64) -> Result<Vec<u8>> {
    let k = stack.layer(0).size();
    if stack.layers().iter().any(|l| l.size() != k) {
        return Err(Error::format("codebook files require one codebook size across layers"));
    }
    let mut out = Vec::with_capacity(24 + stack.depth() * k * stack.dim() * 4);
    out.extend_from_slice(CODEBOOK_MAGIC);
    out.extend_from_slice(&(k as u32).to_le_bytes());
    out.extend_from_slice(&(stack.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(stack.depth() as u32).to_le_bytes());
    out.extend_from_slice(&seed.to_le_bytes());
    for layer in stack.layers() {
        for v in layer.entries() {
            out.extend_from_slice(&v.as_f32().to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses a codebook container. Frame rate and null-entry flags come from the
/// sidecar when one is given.
pub fn decode_codebooks<T: Scalar>(
    bytes: &[u8],
    sidecar: Option<&CodebookSidecar>,
) -> Result<(RvqStack<T>, CodebookHeader)> {
    let mut c = Cursor { buf: bytes, what: "codebook" };
    check_magic(&c.array()?, CODEBOOK_MAGIC, "codebook")?;
    let header = CodebookHeader { size: c.u32()?, dim: c.u32()?, depth: c.u32()?, seed: c.u64()? };
    let (k, d, depth) = (header.size as usize, header.dim as usize, header.depth as usize);
    if depth == 0 || depth > NUM_LAYERS {
        return Err(Error::format(format!("codebook depth {depth} out of range")));
    }
    if k.checked_mul(d).and_then(|n| n.checked_mul(depth)).and_then(|n| n.checked_mul(4)) != Some(c.buf.len()) {
        return Err(Error::format("codebook payload size does not match header"));
    }
    let mut layers = Vec::with_capacity(depth);
    for i in 0..depth {
        let mut entries = Vec::with_capacity(k * d);
        for _ in 0..k * d {
            entries.push(T::of(c.f32()? as f64));
        }
        let mut layer = Codebook::from_entries(i, k, d, entries)?;
        if let Some(flag) = sidecar.and_then(|s| s.null_entry.get(i)) {
            layer.null_entry = *flag;
        }
        layers.push(layer);
    }
    c.finish()?;
    let rate = sidecar.map_or(crate::rvq::DEFAULT_FRAME_RATE_HZ, |s| s.frame_rate_hz);
    Ok((RvqStack::new(layers, rate)?, header))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenHeader {
    pub depth: u32,
    pub frame_rate_hz: f64,
    pub frame_count: u64,
}

pub const TOKEN_HEADER_LEN: usize = 4 + 4 + 8 + 8;
pub const TOKEN_FRAME_LEN: usize = NUM_LAYERS * 2;

pub fn encode_token_header(header: &TokenHeader) -> [u8; TOKEN_HEADER_LEN] {
    let mut out = [0u8; TOKEN_HEADER_LEN];
    out[..4].copy_from_slice(TOKEN_MAGIC);
    out[4..8].copy_from_slice(&header.depth.to_le_bytes());
    out[8..16].copy_from_slice(&header.frame_rate_hz.to_le_bytes());
    out[16..24].copy_from_slice(&header.frame_count.to_le_bytes());
    out
}

pub fn decode_token_header(bytes: &[u8]) -> Result<TokenHeader> {
    let mut c = Cursor { buf: bytes, what: "token stream" };
    check_magic(&c.array()?, TOKEN_MAGIC, "token stream")?;
    let header = TokenHeader { depth: c.u32()?, frame_rate_hz: c.f64()?, frame_count: c.u64()? };
    if header.depth == 0 || header.depth as usize > NUM_LAYERS {
        return Err(Error::format(format!("token depth {} out of range", header.depth)));
    }
    Ok(header)
}

pub fn encode_token_frame(frame: &CodeFrame) -> [u8; TOKEN_FRAME_LEN] {
    let mut out = [0u8; TOKEN_FRAME_LEN];
    for (chunk, code) in out.chunks_exact_mut(2).zip(frame.codes) {
        chunk.copy_from_slice(&code.to_le_bytes());
    }
    out
}

pub fn decode_token_frame(bytes: &[u8]) -> Result<CodeFrame> {
    let mut c = Cursor { buf: bytes, what: "token stream" };
    let mut codes = [0u16; NUM_LAYERS];
    for code in &mut codes {
        *code = c.u16()?;
    }
    Ok(CodeFrame { codes })
}

pub fn encode_tokens(header: &TokenHeader, frames: &[CodeFrame]) -> Result<Vec<u8>> {
    if header.frame_count as usize != frames.len() {
        return Err(Error::format("token header frame count does not match frames"));
    }
    let mut out = Vec::with_capacity(TOKEN_HEADER_LEN + frames.len() * TOKEN_FRAME_LEN);
    out.extend_from_slice(&encode_token_header(header));
    for f in frames {
        out.extend_from_slice(&encode_token_frame(f));
    }
    Ok(out)
}

pub fn decode_tokens(bytes: &[u8]) -> Result<(TokenHeader, Vec<CodeFrame>)> {
    if bytes.len() < TOKEN_HEADER_LEN {
        return Err(Error::format("truncated token stream file"));
    }
    let header = decode_token_header(&bytes[..TOKEN_HEADER_LEN])?;
    let body = &bytes[TOKEN_HEADER_LEN..];
    if (header.frame_count as usize).checked_mul(TOKEN_FRAME_LEN) != Some(body.len()) {
        return Err(Error::format("token payload size does not match header"));
    }
    let frames = body.chunks_exact(TOKEN_FRAME_LEN).map(decode_token_frame).collect::<Result<_>>()?;
    Ok((header, frames))
}

/// Reads a token stream frame by frame in fixed-size reads.
pub struct TokenStreamReader<R> {
    inner: R,
    pub header: TokenHeader,
    remaining: u64,
}

impl<R: Read> TokenStreamReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut head = [0u8; TOKEN_HEADER_LEN];
        inner.read_exact(&mut head).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => Error::format("truncated token stream file"),
            _ => Error::Io(e),
        })?;
        let header = decode_token_header(&head)?;
        Ok(Self { inner, remaining: header.frame_count, header })
    }

    pub fn next_frame(&mut self) -> Result<Option<CodeFrame>> {
        if self.remaining == 0 {
            return Ok(None);
        }
        let mut buf = [0u8; TOKEN_FRAME_LEN];
        self.inner.read_exact(&mut buf).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => Error::format("token stream ended before its frame count"),
            _ => Error::Io(e),
        })?;
        self.remaining -= 1;
        decode_token_frame(&buf).map(Some)
    }
}

pub fn write_pipe_frame<W: Write, T: Scalar>(w: &mut W, frame_index: u64, frame: &[T]) -> Result<()> {
    let mut buf = Vec::with_capacity(8 + frame.len() * 4);
    buf.extend_from_slice(&frame_index.to_le_bytes());
    for v in frame {
        buf.extend_from_slice(&v.as_f32().to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Parses a complete decoded-frame pipe for frames of dimension `dim`.
pub fn read_pipe_frames(bytes: &[u8], dim: usize) -> Result<Vec<(u64, Vec<f32>)>> {
    let record = 8 + dim * 4;
    if dim == 0 || bytes.len() % record != 0 {
        return Err(Error::format("pipe length is not a whole number of frames"));
    }
    bytes
        .chunks_exact(record)
        .map(|chunk| {
            let mut c = Cursor { buf: chunk, what: "pipe" };
            let idx = c.u64()?;
            let frame = (0..dim).map(|_| c.f32()).collect::<Result<Vec<_>>>()?;
            Ok((idx, frame))
        })
        .collect()
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}
