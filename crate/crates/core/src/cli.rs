//! Command-line front end.
//!
//! Periods go to stdout one per line, ascending. Two passes need a regular
//! file because the stream is read twice; a single pass also reads stdin
//! given `--length`.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corpus;
use crate::error::{Error, Result};
use crate::mismatch_sketch::Backend;
use crate::one_pass::run_one_pass_with_stats;
use crate::oracle::brute_force_period_set;
use crate::report::{EngineOptions, PeriodReport, SpaceStats};
use crate::two_pass::{run_two_pass_with_stats, Replayable, VerifyMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "kperiod", version, about = "Report the k-mismatch periods of a byte stream")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    All,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Exact,
    Sketch,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Exact => Backend::Exact,
            BackendArg::Sketch => Backend::ResidueFamily,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Mismatch budget.
    #[arg(long, default_value_t = 0)]
    pub k: usize,
    /// 1 reports periods up to n/2 only.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub passes: u8,
    #[arg(long, value_enum, default_value_t = Mode::All)]
    pub mode: Mode,
    #[arg(long, value_enum, default_value_t = BackendArg::Sketch)]
    pub backend: BackendArg,
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
    /// Write space statistics as JSON.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Compare against brute force; exits with code 4 on disagreement.
    #[arg(long)]
    pub oracle_check: bool,
    /// Stream length, required when reading stdin.
    #[arg(long)]
    pub length: Option<usize>,
    /// Input file; stdin when absent or `-`.
    pub input: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a generated string as raw bytes.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
        /// Output file; stdout when absent.
        #[arg(long, short, global = true)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum GenKind {
    /// `block` repeated to length n with planted mismatch positions.
    Planted {
        #[arg(long)]
        block: String,
        #[arg(long)]
        n: usize,
        /// Comma-separated 1-based positions.
        #[arg(long, value_delimiter = ',')]
        mismatches: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Prefix of 1 0 11 00 111 000 …
    Nu {
        #[arg(long)]
        len: usize,
    },
    /// x y x x with x, y sampled near the nu prefix.
    Lb {
        /// Length of each quarter.
        #[arg(long)]
        len: usize,
        #[arg(long)]
        k: usize,
        /// Put k/2 + 1 flips between x and y.
        #[arg(long)]
        extra: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Uniform over the first `sigma` lowercase letters.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        sigma: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// A regular file read once per pass.
struct FileSource {
    path: PathBuf,
    len: usize,
}

impl Replayable for FileSource {
    fn len(&self) -> usize {
        self.len
    }

    fn replay(&self, sink: &mut dyn FnMut(u8) -> Result<()>) -> Result<()> {
        let mut reader = BufReader::with_capacity(1 << 16, File::open(&self.path)?);
        let mut buf = [0u8; 1 << 16];
        loop {
            let got = reader.read(&mut buf)?;
            if got == 0 {
                return Ok(());
            }
            buf[..got].iter().try_for_each(|&b| sink(b))?;
        }
    }
}

enum Failure {
    Usage(String),
    Engine(Error),
    Verification { engine: Vec<usize>, oracle: Vec<usize> },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Engine(Error::Io(e))
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with<I, T>(args: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Some(Command::Gen { kind, out }) => generate(kind, out.as_deref(), stdout),
        None => run(&cli.run, stdin, stdout),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "kperiod: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Engine(e)) => {
            let _ = writeln!(stderr, "kperiod: {e}");
            match e {
                Error::Io(_) => EXIT_IO,
                _ => EXIT_FAILURE,
            }
        }
        Err(Failure::Verification { engine, oracle }) => {
            let _ = writeln!(stderr, "kperiod: engine reported {engine:?}, brute force {oracle:?}");
            EXIT_VERIFICATION
        }
    }
}

fn run(args: &RunArgs, stdin: &mut dyn Read, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    let opts = EngineOptions::new(args.k, args.seed, args.backend.into());
    let path = args.input.as_deref().filter(|p| *p != Path::new("-"));
    // the oracle needs the whole input anyway
    let mut kept: Option<Vec<u8>> = None;
    let (report, stats) = match (path, args.passes) {
        (Some(path), passes) => {
            let meta = std::fs::metadata(path)?;
            if passes == 2 && !meta.is_file() {
                return Err(Failure::Usage(format!(
                    "{} cannot be read twice; use --passes 1",
                    path.display()
                )));
            }
            if let Some(len) = args.length.filter(|&l| meta.is_file() && l as u64 != meta.len()) {
                return Err(Failure::Usage(format!("--length {len} but the file has {} bytes", meta.len())));
            }
            if passes == 2 {
                let source = FileSource {
                    path: path.to_owned(),
                    len: meta.len() as usize,
                };
                if args.oracle_check {
                    kept = Some(std::fs::read(path)?);
                }
                run_two_pass_with_stats(&source, opts, VerifyMode::Compressed)?
            } else {
                let bytes = std::fs::read(path)?;
                let out = run_one_pass_with_stats(bytes.iter().copied(), bytes.len(), opts)?;
                kept = Some(bytes);
                out
            }
        }
        (None, 2) => {
            return Err(Failure::Usage("stdin cannot be read twice; use --passes 1 or a file".into()));
        }
        (None, _) => {
            let n = args
                .length
                .ok_or_else(|| Failure::Usage("--length is required when reading stdin".into()))?;
            one_pass_stream(stdin, n, opts, args.oracle_check, &mut kept)?
        }
    };

    if let Some(bytes) = kept.filter(|_| args.oracle_check) {
        let mut oracle = brute_force_period_set(&bytes, args.k);
        if args.passes == 1 {
            oracle.retain(|&p| p <= bytes.len() / 2);
        }
        if oracle != report.period_values() {
            return Err(Failure::Verification {
                engine: report.period_values(),
                oracle,
            });
        }
    }
    if let Some(path) = &args.stats {
        let file = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(file, &stats).map_err(Error::from)?;
    }
    print_periods(&report, args.mode, stdout)?;
    Ok(())
}

fn one_pass_stream(
    stdin: &mut dyn Read,
    n: usize,
    opts: EngineOptions,
    keep: bool,
    kept: &mut Option<Vec<u8>>,
) -> std::result::Result<(PeriodReport, SpaceStats), Failure> {
    let mut failed: Option<io::Error> = None;
    let mut seen = Vec::new();
    let bytes = BufReader::new(stdin).bytes().map_while(|b| match b {
        Ok(b) => {
            if keep {
                seen.push(b);
            }
            Some(b)
        }
        Err(e) => {
            failed = Some(e);
            None
        }
    });
    let out = run_one_pass_with_stats(bytes, n, opts);
    if let Some(e) = failed {
        return Err(e.into());
    }
    if keep {
        *kept = Some(seen);
    }
    Ok(out?)
}

fn print_periods(report: &PeriodReport, mode: Mode, out: &mut dyn Write) -> io::Result<()> {
    let periods = report.period_values();
    let chosen: Vec<usize> = match mode {
        Mode::All => periods,
        Mode::Min => periods.first().copied().into_iter().collect(),
        Mode::Max => periods.last().copied().into_iter().collect(),
    };
    for p in chosen {
        writeln!(out, "{p}")?;
    }
    out.flush()
}

fn generate(kind: GenKind, out: Option<&Path>, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    let bytes = match kind {
        GenKind::Planted {
            block,
            n,
            mismatches,
            seed,
        } => corpus::gen_planted(block.as_bytes(), n, &mismatches, seed)?,
        GenKind::Nu { len } => corpus::gen_nu_prefix(len),
        GenKind::Lb { len, k, extra, seed } => {
            let (x, y) = corpus::sample_lb_pair(len, k, extra, seed)?;
            corpus::gen_lb_instance(&x, &y)?
        }
        GenKind::Random { n, sigma, seed } => corpus::gen_random(n, sigma, seed),
    };
    match out {
        Some(path) => std::fs::write(path, bytes)?,
        None => {
            stdout.write_all(&bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}
