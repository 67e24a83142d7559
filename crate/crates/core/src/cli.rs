//! Command-line front end: `fetch`, `score` and `compare`.
//!
//! Exit codes: 0 success, 1 environment or configuration error, 2 domain
//! error (empty or unknown studio, too little overlap to compare, ...).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisError;
use crate::flexibility::{FlexError, TextGranularity};
use crate::ingest::{fetch_studio, Endpoints, FetchOptions, FetchStatus, HttpClient, IngestError};
use crate::pipeline::{
    compare_files, score_studio, write_comparison, write_outputs, EmbeddingSource, PipelineError,
    ScoreOptions, COMPARISON_JSON,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ENV: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;

const DEFAULT_SEED: u64 = 42;
const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Parser)]
#[command(name = "ccs", version, about = "Creativity scores for Scratch 3 studios")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download a studio's projects into a local cache directory.
    Fetch(FetchArgs),
    /// Score every project of a local studio directory.
    Score(ScoreArgs),
    /// Compare CCS ranks with an external metric.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    pub studio_id: String,
    pub dest: PathBuf,
    /// Fetch at most this many projects [default: all]
    #[arg(long)]
    pub limit: Option<usize>,
    /// Concurrent downloads
    #[arg(long, default_value_t = 4)]
    pub parallelism: usize,
    /// Serve every endpoint from this base URL (mirrors, local servers)
    #[arg(long, conflicts_with = "endpoints")]
    pub base_url: Option<String>,
    /// JSON file with endpoint templates [default: public Scratch API]
    #[arg(long)]
    pub endpoints: Option<PathBuf>,
    /// Extra request header as NAME:VALUE
    #[arg(long)]
    pub header: Option<String>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Studio directory of .sb3 files or unpacked project folders
    #[arg(long)]
    pub studio: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON run configuration; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Clustering seed [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Visual clusters [default: clamp(round(sqrt(n/2)), 2, 50) for n images]
    #[arg(long)]
    pub k_visual: Option<usize>,
    /// Text clusters [default: clamp(round(sqrt(n/2)), 2, 50) for n documents]
    #[arg(long)]
    pub k_text: Option<usize>,
    /// builtin | import:PATH [default: builtin]
    #[arg(long)]
    pub embedding: Option<EmbeddingSource>,
    /// element | project [default: element]
    #[arg(long)]
    pub text_granularity: Option<TextGranularity>,
    /// External project_id,score CSV to compare against after scoring
    #[arg(long)]
    pub external: Option<PathBuf>,
    /// Rows in the comparison tables [default: 5]
    #[arg(long)]
    pub top_k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// scores.json written by `score`
    #[arg(long)]
    pub scores: PathBuf,
    /// External project_id,score CSV
    #[arg(long)]
    pub external: PathBuf,
    /// Rows in the comparison tables
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    pub top_k: usize,
    /// Where to write the JSON report [default: comparison.json next to --scores]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Name of the external metric in reports
    #[arg(long, default_value = "external")]
    pub metric_name: String,
}

/// Run configuration file. Every key is optional; unknown keys are an error.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub studio_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub k_visual: Option<usize>,
    pub k_text: Option<usize>,
    pub embedding: Option<EmbeddingSource>,
    pub external_scores: Option<PathBuf>,
    pub top_k: Option<usize>,
    pub text_granularity: Option<TextGranularity>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Values set on the command line win over the file.
    pub fn merge_args(mut self, args: &ScoreArgs) -> Self {
        fn pick<T: Clone>(flag: &Option<T>, file: &mut Option<T>) {
            if flag.is_some() {
                file.clone_from(flag);
            }
        }
        pick(&args.studio, &mut self.studio_dir);
        pick(&args.out, &mut self.output_dir);
        pick(&args.seed, &mut self.seed);
        pick(&args.k_visual, &mut self.k_visual);
        pick(&args.k_text, &mut self.k_text);
        pick(&args.embedding, &mut self.embedding);
        pick(&args.external, &mut self.external_scores);
        pick(&args.top_k, &mut self.top_k);
        pick(&args.text_granularity, &mut self.text_granularity);
        self
    }
}

/// A fully resolved score run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreRun {
    pub studio_dir: PathBuf,
    pub output_dir: PathBuf,
    pub options: ScoreOptions,
    pub external_scores: Option<PathBuf>,
    pub top_k: usize,
}

impl TryFrom<RunConfig> for ScoreRun {
    type Error = String;

    fn try_from(c: RunConfig) -> Result<Self, String> {
        for (name, k) in [("k_visual", c.k_visual), ("k_text", c.k_text)] {
            if matches!(k, Some(k) if k < 2) {
                return Err(format!("{name} must be at least 2"));
            }
        }
        if c.top_k == Some(0) {
            return Err("top_k must be at least 1".into());
        }
        Ok(ScoreRun {
            studio_dir: c.studio_dir.ok_or("missing studio directory (--studio)")?,
            output_dir: c.output_dir.ok_or("missing output directory (--out)")?,
            options: ScoreOptions {
                seed: c.seed.unwrap_or(DEFAULT_SEED),
                k_visual: c.k_visual,
                k_text: c.k_text,
                embedding: c.embedding.unwrap_or_default(),
                text_granularity: c.text_granularity.unwrap_or_default(),
            },
            external_scores: c.external_scores,
            top_k: c.top_k.unwrap_or(DEFAULT_TOP_K),
        })
    }
}

/// Exit code for a failed run.
pub fn exit_code(err: &PipelineError) -> i32 {
    match err {
        PipelineError::Ingest(e) => ingest_exit_code(e),
        PipelineError::Flex(
            FlexError::Import(_)
            | FlexError::MissingEmbedding(_)
            | FlexError::DimensionMismatch { .. }
            | FlexError::NonFiniteValue(_)
            | FlexError::BadK { .. },
        ) => EXIT_ENV,
        PipelineError::Analysis(AnalysisError::ExternalScores(_)) => EXIT_ENV,
        PipelineError::Io { .. } | PipelineError::Format { .. } => EXIT_ENV,
        _ => EXIT_DOMAIN,
    }
}

fn ingest_exit_code(err: &IngestError) -> i32 {
    match err {
        IngestError::EmptyStudio(_) | IngestError::StudioNotFound(_) => EXIT_DOMAIN,
        _ => EXIT_ENV,
    }
}

/// Runs the score command.
pub fn cmd_score(run: &ScoreRun) -> Result<(), PipelineError> {
    let scores = score_studio(&run.studio_dir, &run.options)?;
    write_outputs(&run.output_dir, &scores)?;
    for f in &scores.failures {
        eprintln!("skipped {}: {}", f.source, f.error);
    }
    println!(
        "scored {} projects into {}",
        scores.cards.len(),
        run.output_dir.display()
    );
    if let Some(external) = &run.external_scores {
        let report = compare_files(
            &run.output_dir.join(crate::pipeline::SCORES_JSON),
            external,
            "external",
            run.top_k,
        )?;
        write_comparison(&run.output_dir.join(COMPARISON_JSON), &report, run.top_k)?;
        print!("{}", report.render_text());
    }
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<(), PipelineError> {
    let report = compare_files(&args.scores, &args.external, &args.metric_name, args.top_k)?;
    let out = args.out.clone().unwrap_or_else(|| {
        args.scores
            .parent()
            .unwrap_or(Path::new("."))
            .join(COMPARISON_JSON)
    });
    write_comparison(&out, &report, args.top_k)?;
    print!("{}", report.render_text());
    Ok(())
}

fn fetch_options(args: &FetchArgs) -> Result<FetchOptions, String> {
    let mut endpoints = match (&args.base_url, &args.endpoints) {
        (Some(base), _) => Endpoints::with_base(base),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        (None, None) => Endpoints::default(),
    };
    if let Some(h) = &args.header {
        let (name, value) = h
            .split_once(':')
            .ok_or_else(|| format!("header {h:?} is not NAME:VALUE"))?;
        endpoints.header = Some((name.trim().to_string(), value.trim().to_string()));
    }
    if args.parallelism == 0 {
        return Err("parallelism must be at least 1".into());
    }
    Ok(FetchOptions {
        endpoints,
        limit: args.limit,
        parallelism: args.parallelism,
        ..FetchOptions::default()
    })
}

/// Runs `fetch` against `client`. Succeeds when at least one project is
/// fetched or already cached.
pub fn cmd_fetch(client: &dyn HttpClient, args: &FetchArgs, opts: &FetchOptions) -> i32 {
    match fetch_studio(client, &args.studio_id, &args.dest, opts) {
        Ok(manifest) => {
            let fetched = manifest.count(FetchStatus::Fetched);
            let cached = manifest.count(FetchStatus::Cached);
            let failed = manifest.count(FetchStatus::Failed);
            println!("fetched {fetched}, cached {cached}, failed {failed}");
            for e in manifest.entries.iter().filter(|e| e.status == FetchStatus::Failed) {
                eprintln!("failed {}: {}", e.project_id, e.error.as_deref().unwrap_or("unknown error"));
            }
            if fetched + cached > 0 {
                EXIT_OK
            } else {
                EXIT_DOMAIN
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ingest_exit_code(&e)
        }
    }
}

#[cfg(feature = "net")]
fn run_fetch(args: &FetchArgs) -> i32 {
    let opts = match fetch_options(args) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ENV;
        }
    };
    match crate::ingest::ReqwestClient::new(&opts.endpoints) {
        Ok(client) => cmd_fetch(&client, args, &opts),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ENV
        }
    }
}

#[cfg(not(feature = "net"))]
fn run_fetch(args: &FetchArgs) -> i32 {
    if let Err(e) = fetch_options(args) {
        eprintln!("error: {e}");
    } else {
        eprintln!("error: built without network support");
    }
    EXIT_ENV
}

fn report(result: Result<(), PipelineError>) -> i32 {
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ENV } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match &cli.command {
        Command::Fetch(args) => run_fetch(args),
        Command::Score(args) => {
            let config = match &args.config {
                Some(path) => match RunConfig::load(path) {
                    Ok(c) => c,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return EXIT_ENV;
                    }
                },
                None => RunConfig::default(),
            };
            match ScoreRun::try_from(config.merge_args(args)) {
                Ok(run) => report(cmd_score(&run)),
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_ENV
                }
            }
        }
        Command::Compare(args) => report(cmd_compare(args)),
    }
}
