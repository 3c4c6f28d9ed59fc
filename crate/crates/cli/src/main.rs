mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use newsaug::eval::Arm;
use newsaug::features::FeatureMethod;
use newsaug::models::ClassifierKind;
use serde::Serialize;

/// Headline classification with embedding-based data augmentation.
#[derive(Parser, Debug)]
#[command(name = "newsaug", version)]
struct Cli {
    /// Flat `key = value` file of subcommand options; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for data-parallel stages.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train skip-gram word vectors, or PV-DBOW document vectors.
    TrainEmbeddings(TrainEmbeddingsArgs),
    /// Write augmented copies of a labeled dataset.
    Augment(AugmentArgs),
    /// Fit a featurizer on a dataset and dump its feature matrix.
    Featurize(FeaturizeArgs),
    /// Fit a featurizer and classifier and save both.
    Train(TrainArgs),
    /// Cross-validate arms × features × classifiers.
    Evaluate(EvaluateArgs),
    /// Print the nearest neighbors of a word.
    Neighbors(NeighborsArgs),
    /// Generate a synthetic labeled dataset and companion corpus.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Skipgram,
    Pvdbow,
}

fn parse_feature(s: &str) -> Result<FeatureMethod, String> {
    s.parse().map_err(|e: newsaug::Error| e.to_string())
}

fn parse_classifier(s: &str) -> Result<ClassifierKind, String> {
    s.parse().map_err(|e: newsaug::Error| e.to_string())
}

fn parse_arm(s: &str) -> Result<Arm, String> {
    s.parse().map_err(|e: newsaug::Error| e.to_string())
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
struct TrainEmbeddingsArgs {
    /// Plain-text corpus, one sentence per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Word vectors in word2vec text format.
    #[arg(long)]
    out: PathBuf,
    /// Document model (pvdbow mode); defaults to `<out>.doc.json`.
    #[arg(long)]
    doc_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "skipgram")]
    mode: ModeArg,
    #[arg(long, default_value_t = 50)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    lr: f64,
    #[arg(long, default_value_t = 5)]
    min_count: u64,
    /// Frequent-word subsampling threshold; 0 disables it.
    #[arg(long, default_value_t = 1e-4)]
    subsample: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
struct AugmentArgs {
    /// Labeled `label<TAB>text` file.
    #[arg(long)]
    data: PathBuf,
    /// Augmented dataset, originals first.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    word_model: PathBuf,
    #[arg(long)]
    doc_model: Option<PathBuf>,
    /// Augmented copies per record.
    #[arg(long, default_value_t = 20)]
    copies: usize,
    /// Keep only variants whose document-vector similarity exceeds the threshold.
    #[arg(long)]
    quality: bool,
    #[arg(long, default_value_t = 0.8, allow_negative_numbers = true)]
    threshold: f64,
    /// Attempts per copy.
    #[arg(long, default_value_t = 10)]
    run: usize,
    /// Neighbors considered per word.
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Diagnostics JSON; defaults to `<out>.diag.json`.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
struct FeaturizeArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_feature, default_value = "tfidf")]
    method: FeatureMethod,
    #[arg(long, default_value_t = 20_000)]
    max_features: usize,
    /// Word vectors for the w2v-* methods.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Sparse methods: `rows cols nnz` then `row col value` lines. Dense: CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_feature, default_value = "tfidf")]
    feature: FeatureMethod,
    #[arg(long, value_parser = parse_classifier, default_value = "logreg")]
    classifier: ClassifierKind,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 20_000)]
    max_features: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Model bundle (featurizer + classifier) as JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    /// Report directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = parse_arm, value_delimiter = ',', default_value = "orig,aug,aug-qual")]
    arms: Vec<Arm>,
    #[arg(long, value_parser = parse_feature, value_delimiter = ',', default_value = "tfidf")]
    features: Vec<FeatureMethod>,
    #[arg(long, value_parser = parse_classifier, value_delimiter = ',', default_value = "logreg")]
    classifiers: Vec<ClassifierKind>,
    /// Word vectors for augmentation and, unless --embeddings is set, w2v features.
    #[arg(long)]
    word_model: Option<PathBuf>,
    #[arg(long)]
    doc_model: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    copies: usize,
    #[arg(long, default_value_t = 0.8, allow_negative_numbers = true)]
    threshold: f64,
    #[arg(long, default_value_t = 10)]
    run: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 20_000)]
    max_features: usize,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
struct NeighborsArgs {
    /// Word vectors in word2vec text format.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    word: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
struct SynthArgs {
    /// Receives dataset.tsv, corpus.txt and synth.meta.json.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    categories: usize,
    #[arg(long, default_value_t = 20)]
    per_category: usize,
    #[arg(long, default_value_t = 30)]
    vocab_per_category: usize,
    #[arg(long, default_value_t = 0.1)]
    overlap: f64,
    #[arg(long, default_value_t = 5000)]
    corpus_lines: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

/// Raised for option combinations clap cannot express; exits with 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cmd = Cli::command();
    let args = match config::expand(&cmd, std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => e.exit(),
    };
    let cli = match cmd.try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if cli.threads == 0 {
        eprintln!("error: --threads must be >= 1");
        return ExitCode::from(2);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
