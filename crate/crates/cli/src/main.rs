mod config;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use langflow::ErrorClass;

/// Partially labeled topic models and language-flow analytics for
/// multi-label document corpora.
#[derive(Debug, Parser)]
#[command(name = "langflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tokenize, stem and prune raw records into a corpus bundle.
    Preprocess(PreprocessArgs),
    /// Cluster subject codes and cut the dendrogram into areas.
    ClusterSubjects(ClusterArgs),
    /// Train a PLDA model on a labeled corpus bundle.
    Train(TrainArgs),
    /// Attribute every document's words to the model's labels.
    Infer(InferArgs),
    /// Incorporation matrices, flow series, pair verdicts and net source scores.
    Analyze(AnalyzeArgs),
    /// Correlate inter-area borrowing across a family of models.
    Validate(ValidateArgs),
    /// Write a planted synthetic corpus as raw records.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat `key = value` file of flags; flags on the command line win.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads (1 is the determinism reference).
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct PreprocessArgs {
    #[command(flatten)]
    pub common: Common,
    /// Line-delimited JSON records.
    #[arg(long)]
    pub input: PathBuf,
    /// Stopword list, one term per line.
    #[arg(long)]
    pub stopwords: PathBuf,
    /// Output corpus bundle directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub min_df: u32,
    /// Inclusive year window, `FIRST-LAST`.
    #[arg(long, default_value = "1980-2010")]
    pub years: String,
    /// Use the abstract only.
    #[arg(long)]
    pub no_title: bool,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub common: Common,
    /// Corpus bundle whose subject codes are clustered.
    #[arg(long, required_unless_present = "dendrogram", conflicts_with = "dendrogram")]
    pub corpus: Option<PathBuf>,
    /// Re-cut an existing dendrogram instead of clustering.
    #[arg(long)]
    pub dendrogram: Option<PathBuf>,
    /// Output directory for dendrogram.tsv and taxonomy.tsv.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of areas to cut into.
    #[arg(long)]
    pub areas: usize,
    /// Manual overrides applied after the cut.
    #[arg(long)]
    pub curation: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    pub eta: f64,
    #[arg(long, default_value_t = 12)]
    pub topics_per_label: usize,
    #[arg(long, default_value_t = 1)]
    pub background_topics: usize,
    /// Per-label topic count, `LABEL=K`; repeatable.
    #[arg(long, value_name = "LABEL=K")]
    pub topic_override: Vec<String>,
    #[arg(long, default_value_t = 1000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 500)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 10)]
    pub lag: usize,
    #[arg(long, default_value_t = 200)]
    pub infer_sweeps: usize,
    #[arg(long, default_value_t = 100)]
    pub infer_burn_in: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Label tier used for training: subject or area.
    #[arg(long, default_value = "area")]
    pub tier: String,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub taxonomy: PathBuf,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write each label's top terms here.
    #[arg(long)]
    pub top_terms_out: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub top_n: usize,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct InferArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Output attribution file (line-delimited JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the model's inference sweeps.
    #[arg(long)]
    pub sweeps: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Overrides the model's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run even if the corpus is not the one the model was trained on.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct ScopeArgs {
    /// Time buckets: annual, 5y, decade, all, or custom:Y1-Y2,...
    #[arg(long, default_value = "decade")]
    pub buckets: String,
    /// Average over tokens or documents.
    #[arg(long, default_value = "tokens")]
    pub weighting: String,
    /// Whether areas under the professional broad areas are analyzed.
    #[arg(long, default_value = "exclude", value_parser = ["include", "exclude"])]
    pub professional_areas: String,
    #[arg(long, default_value = "Education,Business,Law,Health", value_delimiter = ',')]
    pub professional_broad_areas: Vec<String>,
    /// Analyze only these areas.
    #[arg(long, value_delimiter = ',')]
    pub areas: Vec<String>,
    /// Leave these areas out.
    #[arg(long, value_delimiter = ',')]
    pub exclude_areas: Vec<String>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub scope: ScopeArgs,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub taxonomy: PathBuf,
    #[arg(long)]
    pub attribution: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Flow series to emit, `SOURCE:TARGET` or `all`; repeatable.
    #[arg(long, value_name = "SOURCE:TARGET")]
    pub series: Vec<String>,
    /// Periods for verdicts and scores: `all` (whole period) or `buckets`.
    #[arg(long, default_value = "all", value_parser = ["all", "buckets"])]
    pub score_buckets: String,
    /// Chord edges at or below this weight are dropped.
    #[arg(long, default_value_t = 0.0)]
    pub chord_floor: f64,
    /// Run even if input digests disagree with the attribution's provenance.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub scope: ScopeArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub taxonomy: PathBuf,
    /// Existing attribution files to compare; repeatable.
    #[arg(long, required_unless_present = "family")]
    pub attribution: Vec<PathBuf>,
    /// Train and compare one model per topics-per-label value, e.g. 2,4,8.
    #[arg(long, value_delimiter = ',', conflicts_with = "attribution")]
    pub family: Vec<usize>,
    /// Output consistency table.
    #[arg(long)]
    pub out: PathBuf,
    /// Run even if input digests disagree with an attribution's provenance.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Output directory for records.jsonl, stopwords.txt and taxonomy.tsv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub areas: usize,
    #[arg(long, default_value_t = 50)]
    pub terms_per_area: usize,
    #[arg(long, default_value_t = 0)]
    pub background_terms: usize,
    #[arg(long, default_value_t = 200)]
    pub docs_per_area: usize,
    #[arg(long, default_value_t = 100)]
    pub tokens_per_doc: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub background_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub zipf_exponent: f64,
    #[arg(long, default_value = "1980-2009")]
    pub years: String,
    #[arg(long, default_value_t = 1)]
    pub broad_areas: usize,
    /// Planted borrowing, `SOURCE:TARGET:RATE` or `SOURCE:TARGET:R0-R1`; repeatable.
    #[arg(long, value_name = "SOURCE:TARGET:RATE")]
    pub inject: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();

    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => return fail(e.class(), &e.to_string()),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.to_string();
            let line = rendered.lines().next().unwrap_or("invalid arguments");
            return fail(ErrorClass::Config, line.trim_start_matches("error: "));
        }
    };

    let result = match cli.command {
        Command::Preprocess(a) => stages::preprocess(a),
        Command::ClusterSubjects(a) => stages::cluster_subjects(a),
        Command::Train(a) => stages::train(a),
        Command::Infer(a) => stages::infer(a),
        Command::Analyze(a) => stages::analyze(a),
        Command::Validate(a) => stages::validate(a),
        Command::Synth(a) => stages::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.class(), &e.to_string()),
    }
}

fn fail(class: ErrorClass, message: &str) -> ExitCode {
    eprintln!("error[{}]: {}", class.as_str(), message.replace('\n', " "));
    ExitCode::from(class.exit_code())
}
