mod args;
mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;
use sqztomo_core::rng::SEED_SCHEME;
use sqztomo_core::Error;

use args::{Cli, Command, Global};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

/// A failed run: message plus its stable exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidDimension { .. }
            | Error::InvalidParameter(_)
            | Error::ContractViolation(_) => EXIT_USAGE,
            Error::DimMismatch { .. }
            | Error::InsufficientData(_)
            | Error::MalformedFile { .. }
            | Error::VersionMismatch { .. }
            | Error::Checksum { .. }
            | Error::Io(_)
            | Error::Json(_) => EXIT_DATA,
            Error::TruncationOverflow { .. }
            | Error::NumericFailure(_)
            | Error::DegenerateFactor
            | Error::Diverged { .. } => EXIT_NUMERIC,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

/// Per-run bookkeeping shared by the commands.
pub struct Context {
    pub global: Global,
    pub threads: usize,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Context {
    /// Registers an input path (used as given).
    pub fn input(&mut self, path: &Path) -> PathBuf {
        self.inputs.push(path.to_path_buf());
        path.to_path_buf()
    }

    /// Resolves an output path against `--out-dir`, creates its parent and
    /// registers it.
    pub fn output(&mut self, path: &Path) -> CmdResult<PathBuf> {
        let p = self.resolve(path);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(Error::from)?;
        }
        self.outputs.push(p.clone());
        Ok(p)
    }

    /// Output directory resolved against `--out-dir` (created).
    pub fn output_dir(&mut self, path: &Path) -> CmdResult<PathBuf> {
        let p = self.resolve(path);
        std::fs::create_dir_all(&p).map_err(Error::from)?;
        self.outputs.push(p.clone());
        Ok(p)
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.global.out_dir.join(path)
        }
    }
}

#[derive(Debug, Serialize)]
struct FileRef {
    path: String,
    /// CRC-32 of the file contents (absent for directories).
    crc32: Option<String>,
    bytes: Option<u64>,
}

impl FileRef {
    fn of(path: &Path) -> Self {
        let (crc32, bytes) = match std::fs::read(path) {
            Ok(b) if path.is_file() => (
                Some(format!("{:08x}", crc32fast::hash(&b))),
                Some(b.len() as u64),
            ),
            _ => (None, None),
        };
        Self {
            path: path.display().to_string(),
            crc32,
            bytes,
        }
    }
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    argv: Vec<String>,
    config: serde_json::Value,
    global: &'a Global,
    seed: u64,
    seed_scheme: &'a str,
    threads: usize,
    inputs: Vec<FileRef>,
    outputs: Vec<FileRef>,
    tool_version: &'a str,
    success: bool,
    exit_code: u8,
    error: Option<String>,
    wall_time_ms: f64,
}

fn configure_threads(requested: Option<usize>) -> CmdResult<usize> {
    match requested {
        Some(0) => Err(Failure::usage("--threads must be at least 1")),
        Some(n) => {
            // a second initialization (tests, embedding) keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
            Ok(n)
        }
        None => Ok(rayon::current_num_threads()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let start = Instant::now();
    let threads = match configure_threads(cli.global.threads) {
        Ok(t) => t,
        Err(f) => {
            eprintln!("error: {}", f.message);
            return ExitCode::from(f.code);
        }
    };
    let mut ctx = Context {
        global: cli.global.clone(),
        threads,
        inputs: vec![],
        outputs: vec![],
    };
    let name = cli.command.name();
    let (config, result) = match &cli.command {
        Command::Simulate(a) => (to_value(a), commands::simulate(&mut ctx, a)),
        Command::GenCorpus(a) => (to_value(a), commands::gen_corpus(&mut ctx, a)),
        Command::ReconstructMle(a) => (to_value(a), commands::reconstruct_mle(&mut ctx, a)),
        Command::Train(a) => (to_value(a), commands::train(&mut ctx, a)),
        Command::ReconstructNn(a) => (to_value(a), commands::reconstruct_nn(&mut ctx, a)),
        Command::Evaluate(a) => (to_value(a), commands::evaluate(&mut ctx, a)),
        Command::Wigner(a) => (to_value(a), commands::wigner(&mut ctx, a)),
        Command::FitDegradation(a) => (to_value(a), commands::fit_degradation(&mut ctx, a)),
        Command::Compare(a) => (to_value(a), commands::compare(&mut ctx, a)),
    };
    let (exit_code, error) = match &result {
        Ok(()) => (0, None),
        Err(f) => (f.code, Some(f.message.clone())),
    };
    let manifest = RunManifest {
        command: name,
        argv: std::env::args().collect(),
        config,
        global: &ctx.global,
        seed: ctx.global.seed,
        seed_scheme: SEED_SCHEME,
        threads: ctx.threads,
        inputs: ctx.inputs.iter().map(|p| FileRef::of(p)).collect(),
        outputs: ctx.outputs.iter().map(|p| FileRef::of(p)).collect(),
        tool_version: env!("CARGO_PKG_VERSION"),
        success: result.is_ok(),
        exit_code,
        error,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    let manifest_path = ctx
        .global
        .manifest
        .clone()
        .unwrap_or_else(|| ctx.global.out_dir.join(format!("{name}.manifest.json")));
    let written = manifest_path
        .parent()
        .map_or(Ok(()), std::fs::create_dir_all)
        .map_err(Error::from)
        .and_then(|()| sqztomo_core::io::write_json(&manifest_path, &manifest));
    if let Err(e) = written {
        eprintln!("error: cannot write manifest: {e}");
        if result.is_ok() {
            return ExitCode::from(EXIT_DATA);
        }
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}
