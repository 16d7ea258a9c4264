mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use commands::*;
use manifest::{FileRecord, Manifest, Run, MANIFEST_SCHEMA_VERSION};

/// Bad arguments or config; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(
    name = "stream-tts",
    version,
    about = "Streaming speech-token codec and latency toolkit",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options every subcommand accepts besides `--seed`.
#[derive(Args, Debug, Default, Clone)]
pub struct RunOpts {
    /// TOML or JSON settings file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Where to write the run manifest [default: run-manifest.json].
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic feature corpus.
    GenCorpus(GenCorpus),
    /// Train residual-VQ codebooks on a feature corpus.
    TrainCodebook(TrainCodebook),
    /// Quantize a feature file into a token stream.
    Encode(Encode),
    /// Reconstruct features from a token stream.
    Decode(Decode),
    /// Decode a token stream frame by frame into a framed pipe.
    StreamDecode(StreamDecode),
    /// Dump the block-attention mask (PBM) and chunk schedule (CSV).
    MaskDump(MaskDump),
    /// Run a dual-track session with a toy step model.
    Session(Session),
    /// Simulate first-packet latency for one cost profile.
    Simulate(Simulate),
    /// Simulate every row of a cost-profile CSV.
    Sweep(Sweep),
    /// Report SNR, spectral loss and perplexity of a codebook on a corpus.
    Eval(Eval),
}

trait Settings: Serialize + DeserializeOwned {
    const NAME: &'static str;
    fn seed(&self) -> Option<u64>;
    fn run_opts(&self) -> &RunOpts;
    fn execute(self, run: &mut Run) -> anyhow::Result<()>;
}

fn dispatch<S: Settings>(cli: S) -> anyhow::Result<()> {
    let opts = cli.run_opts().clone();
    let mut run = Run::default();
    let config_file = match &opts.config {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
            Some(FileRecord { path: path.clone(), bytes: bytes.len() as u64, sha256: manifest::sha256_hex(&bytes) })
        }
        None => None,
    };
    let (settings, value) = config::resolve(&cli, opts.config.as_deref(), S::NAME)?;
    let seed = settings.seed();
    settings.execute(&mut run)?;

    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        tool: env!("CARGO_PKG_NAME"),
        tool_version: env!("CARGO_PKG_VERSION"),
        core_version: stream_tts::VERSION,
        command: S::NAME,
        argv: std::env::args().skip(1).collect(),
        seed,
        config_file,
        settings: value,
        inputs: &run.inputs,
        outputs: &run.outputs,
    };
    let path = opts.manifest.unwrap_or_else(|| PathBuf::from("run-manifest.json"));
    let mut body = serde_json::to_vec_pretty(&manifest)?;
    body.push(b'\n');
    stream_tts::formats::write_atomic(&path, &body)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match cli.command {
        Command::GenCorpus(a) => dispatch(a),
        Command::TrainCodebook(a) => dispatch(a),
        Command::Encode(a) => dispatch(a),
        Command::Decode(a) => dispatch(a),
        Command::StreamDecode(a) => dispatch(a),
        Command::MaskDump(a) => dispatch(a),
        Command::Session(a) => dispatch(a),
        Command::Simulate(a) => dispatch(a),
        Command::Sweep(a) => dispatch(a),
        Command::Eval(a) => dispatch(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            eprintln!("run `stream-tts help` for usage");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
