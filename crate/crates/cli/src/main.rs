//! `synthdeid`: generate, parse, synthesize, train, tag and evaluate.

mod commands;
mod config;
mod error;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use synthdeid::features::ContextMode;

use crate::config::{given, resolve, Common, RunManifest};
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "synthdeid", version, about = "Synthetic identification and CRF de-identification pipeline")]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Shared {
    /// Random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 1 is the bit-reproducible reference.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Unmapped placeholders are errors (default).
    #[arg(long, global = true, conflicts_with = "lenient")]
    strict: bool,
    /// Unmapped placeholders become ID with a warning.
    #[arg(long, global = true)]
    lenient: bool,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON options file or run manifest; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

impl Shared {
    fn flags(&self) -> Map<String, Value> {
        let mut map = Map::new();
        if let Some(seed) = self.seed {
            map.insert("seed".into(), seed.into());
        }
        if let Some(threads) = self.threads {
            map.insert("threads".into(), threads.into());
        }
        if self.strict || self.lenient {
            map.insert("strict".into(), self.strict.into());
        }
        if let Some(out) = &self.out {
            map.insert("out".into(), out.to_string_lossy().into_owned().into());
        }
        map
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate placeholder-annotated notes from sentence templates.
    Gen(GenArgs),
    /// Replace placeholders with sentinels and PHI spans.
    Parse(ParseArgs),
    /// Substitute surrogates and derive gold token labels.
    Synth(SynthArgs),
    /// Per-category PHI distribution report.
    Stats(StatsArgs),
    /// Train a CRF tagger on a labeled corpus.
    Train(TrainArgs),
    /// Tag a corpus with a trained model.
    Tag(TagArgs),
    /// Score predictions against gold labels.
    Eval(EvalArgs),
    /// Learning curve over nested training subsets.
    Curve(CurveArgs),
}

#[derive(Args, Debug, Serialize)]
struct GenArgs {
    /// Number of notes.
    #[arg(long)]
    notes: Option<usize>,
    /// Expected placeholders per 100 tokens.
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    min_lines: Option<usize>,
    #[arg(long)]
    max_lines: Option<usize>,
    /// Template bank replacing the bundled one.
    #[arg(long)]
    templates: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ParseArgs {
    /// Raw notes (JSONL).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Placeholder category mapping replacing the bundled one.
    #[arg(long)]
    mapping: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SynthArgs {
    /// Parsed corpus (JSONL).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Directory of lexicon files replacing the bundled lexicons.
    #[arg(long)]
    lexicons: Option<PathBuf>,
    /// Reuse surrogates for identical placeholders within a note.
    #[arg(long)]
    consistent: bool,
}

#[derive(Args, Debug, Serialize)]
struct StatsArgs {
    /// Corpus (JSONL).
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct TrainArgs {
    /// Labeled corpus (JSONL).
    #[arg(long)]
    input: Option<PathBuf>,
    /// L2 penalty.
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Relative objective change tolerance.
    #[arg(long)]
    tol_obj: Option<f64>,
    /// Gradient infinity-norm tolerance.
    #[arg(long)]
    tol_grad: Option<f64>,
    /// Directory of dictionary lists replacing the bundled gazetteer.
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    /// Context features: positional or merged.
    #[arg(long)]
    context: Option<ContextMode>,
}

#[derive(Args, Debug, Serialize)]
struct TagArgs {
    /// Model file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Corpus to tag (JSONL).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Must match the gazetteer the model was trained with.
    #[arg(long)]
    gazetteer: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct EvalArgs {
    /// Gold labeled corpus (JSONL).
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Predictions (JSONL).
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct CurveArgs {
    /// Training pool (labeled JSONL).
    #[arg(long)]
    pool: Option<PathBuf>,
    /// Test set (labeled JSONL).
    #[arg(long)]
    test: Option<PathBuf>,
    /// Training sizes, comma separated and increasing.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol_obj: Option<f64>,
    #[arg(long)]
    tol_grad: Option<f64>,
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    #[arg(long)]
    context: Option<ContextMode>,
}

type Body<O> = fn(&Common, &O, &mut RunManifest) -> Result<(), CliError>;

fn execute<O>(name: &str, shared: &Shared, args: impl Serialize, body: Body<O>) -> Result<(), CliError>
where
    O: Serialize + DeserializeOwned,
{
    let start = Instant::now();
    let (common, opts) = resolve::<O>(name, shared.config.as_deref(), shared.flags(), given(args))?;
    fs::create_dir_all(&common.out).map_err(|e| CliError::io(&common.out, e))?;
    let mut manifest = RunManifest::new(name, &common, &opts);
    body(&common, &opts, &mut manifest)?;
    manifest.write(&common.out, start.elapsed())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let s = &cli.shared;
    match cli.command {
        Command::Gen(a) => execute("gen", s, a, commands::gen),
        Command::Parse(a) => execute("parse", s, a, commands::parse),
        Command::Synth(a) => execute("synth", s, a, commands::synth),
        Command::Stats(a) => execute("stats", s, a, commands::stats),
        Command::Train(a) => execute("train", s, a, commands::train),
        Command::Tag(a) => execute("tag", s, a, commands::tag),
        Command::Eval(a) => execute("eval", s, a, commands::evaluate),
        Command::Curve(a) => execute("curve", s, a, commands::curve),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("run with --help for usage");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
