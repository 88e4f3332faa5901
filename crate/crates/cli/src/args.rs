use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use udrefine_core::refine::RefineMode;
use udrefine_core::{Genre, Strategy};

#[derive(Debug, Parser)]
#[command(name = "udrefine", version, about = "Retrieval-augmented refinement and adjudication of UD parses")]
pub struct Cli {
    /// Log at debug level (RUST_LOG overrides).
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Retrieve the top-k knowledge-base sentences for each query.
    Retrieve(RetrieveArgs),
    /// LenDiff / POSOverlap table for every strategy over one or more query sets.
    EvalRetrieval(EvalRetrievalArgs),
    /// Refine a baseline parse with an LLM backend.
    Refine(RefineArgs),
    /// LAS / CLAS with and without subtypes, per genre.
    EvalParse(EvalParseArgs),
    /// Build a double-blind annotation campaign from gold/system divergences.
    Adjudicate(AdjudicateArgs),
    /// Serve a campaign over HTTP.
    Serve(ServeArgs),
    /// Agreement, consensus and taxonomy tables for a campaign.
    Report(ReportArgs),
}

#[derive(Debug, Args, serde::Serialize)]
pub struct KbArgs {
    /// Knowledge-base treebank (CoNLL-U).
    #[arg(long)]
    pub kb: PathBuf,
    /// Feature cache: loaded when present and matching, written otherwise.
    #[arg(long)]
    pub kb_cache: Option<PathBuf>,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct RetrieveArgs {
    #[command(flatten)]
    pub kb: KbArgs,
    #[arg(long)]
    pub queries: PathBuf,
    /// tfidf, morphological (morph) or structural.
    #[arg(long, default_value = "structural")]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Never return a KB sentence with the query's own sent_id.
    #[arg(long)]
    pub exclude_self: bool,
    /// Hits as JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct EvalRetrievalArgs {
    #[command(flatten)]
    pub kb: KbArgs,
    /// Query set as NAME=FILE; repeatable.
    #[arg(long = "queries", required = true, value_parser = parse_dataset)]
    pub datasets: Vec<(String, PathBuf)>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long)]
    pub exclude_self: bool,
    /// Report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

fn parse_dataset(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(format!("expected NAME=FILE, got {s:?}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    GuidelinesOnly,
    WithRetrieval,
}

impl From<ModeArg> for RefineMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::GuidelinesOnly => RefineMode::GuidelinesOnly,
            ModeArg::WithRetrieval => RefineMode::WithRetrieval,
        }
    }
}

#[derive(Debug, Args, serde::Serialize)]
pub struct RefineArgs {
    /// Automatic parse to refine (CoNLL-U).
    #[arg(long)]
    pub baseline: PathBuf,
    /// Sentence columns to send; defaults to the baseline file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// Knowledge base, required with --mode with-retrieval.
    #[arg(long)]
    pub kb: Option<PathBuf>,
    #[arg(long)]
    pub kb_cache: Option<PathBuf>,
    /// Annotation guidelines text file.
    #[arg(long)]
    pub guidelines: PathBuf,
    /// mock:echo, mock:garbage, mock:<script.json>, or http.
    #[arg(long)]
    pub backend: String,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long, default_value = "UDREFINE_API_KEY")]
    pub api_key_env: String,
    /// Write redacted request/response records here.
    #[arg(long)]
    pub audit_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 120)]
    pub timeout_secs: u64,
    #[arg(long, default_value_t = udrefine_core::refine::DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = udrefine_core::refine::DEFAULT_MAX_RETRIES)]
    pub max_retries: usize,
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    /// Refined treebank (CoNLL-U).
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to <out>.manifest.json.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GenreArg {
    Poetry,
    Prose,
    Other,
}

impl From<GenreArg> for Genre {
    fn from(g: GenreArg) -> Self {
        match g {
            GenreArg::Poetry => Genre::Poetry,
            GenreArg::Prose => Genre::Prose,
            GenreArg::Other => Genre::Other,
        }
    }
}

/// Paired gold/system files; the n-th --genre labels the n-th pair.
#[derive(Debug, Args, serde::Serialize)]
pub struct PairArgs {
    #[arg(long, required = true)]
    pub gold: Vec<PathBuf>,
    #[arg(long, required = true)]
    pub system: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub genre: Vec<GenreArg>,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct EvalParseArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Functional relations excluded from CLAS, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub functional: Vec<String>,
    /// Print JSON instead of the text table.
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct AdjudicateArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Number of divergent sentences to sample.
    #[arg(long)]
    pub n: usize,
    /// Seed for sampling and A/B assignment.
    #[arg(long)]
    pub seed: u64,
    /// Seed for the presentation order; defaults to --seed.
    #[arg(long)]
    pub order_seed: Option<u64>,
    #[arg(long)]
    pub per_annotator_shuffle: bool,
    /// ID:TOKEN, exactly twice.
    #[arg(long = "annotator", required = true, value_parser = parse_annotator)]
    #[serde(skip)]
    pub annotators: Vec<(String, String)>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn parse_annotator(s: &str) -> Result<(String, String), String> {
    match s.split_once(':') {
        Some((id, token)) if !id.is_empty() && !token.is_empty() => Ok((id.to_string(), token.to_string())),
        _ => Err(format!("expected ID:TOKEN, got {s:?}")),
    }
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub campaign_dir: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Built UI bundle served at /.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct ReportArgs {
    #[arg(long)]
    pub campaign_dir: PathBuf,
    /// Report over items answered by both annotators so far.
    #[arg(long)]
    pub partial: bool,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}
