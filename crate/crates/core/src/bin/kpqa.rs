use std::panic;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kpqa_metric::cli::{parse_metric_list, run, Command, OutputFormat, RunConfig, WeightSource};
use kpqa_metric::meta_eval::{AlphaLevel, FilterConfig, FilterMode, GroupKey};
use kpqa_metric::ngram::{Bleu1Mode, RougeMode};

#[derive(Parser)]
#[command(name = "kpqa", version, about = "Keyphrase-weighted QA evaluation metrics")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Score every sample with the requested metrics.
    Score(Common),
    /// Correlate metric scores with filtered human judgments.
    MetaEval(Common),
    /// Agreement of metric and human orderings between two models.
    RankPair(Common),
    /// Build an IDF table from the reference answers of a samples file.
    IdfBuild(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Uniform,
    Idf,
    KpwFile,
    KpFile,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum Bleu1 {
    Literal,
    Clipped,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rouge {
    Symmetric,
    Literal,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Interval,
    Ordinal,
}

#[derive(Clone, Copy, ValueEnum)]
enum Group {
    QuestionType,
    Model,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Keyphrase weights computed with the question.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Keyphrase weights computed without the question (ablation).
    #[arg(long)]
    kp_weights: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    judgments: Option<PathBuf>,
    /// Score table from a previous `score` run.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// IDF table from `idf-build`; defaults to fitting on the references.
    #[arg(long)]
    idf: Option<PathBuf>,
    /// Comma-separated metric names, optionally `name@source`.
    #[arg(long)]
    metrics: Option<String>,
    /// Weight source for keyphrase metrics without an explicit `@source`.
    #[arg(long, value_enum)]
    weight_source: Option<Source>,
    #[arg(long, default_value_t = 1.2)]
    beta: f64,
    #[arg(long, value_enum, default_value = "literal")]
    bleu1_mode: Bleu1,
    #[arg(long, value_enum, default_value = "symmetric")]
    rouge_mode: Rouge,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Scoring threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Ratings with |z| above this are treated as noise.
    #[arg(long, default_value_t = 1.0)]
    z_max: f64,
    #[arg(long, default_value_t = 5)]
    max_remove: usize,
    /// Recompute z-scores after each removal.
    #[arg(long)]
    iterative_filter: bool,
    #[arg(long, value_enum, default_value = "interval")]
    alpha_level: Level,
    #[arg(long, value_enum)]
    group_by: Option<Group>,
    /// Minimum human-score gap (1-5 scale) for rank-pair eligibility.
    #[arg(long, default_value_t = 2.0)]
    gap: f64,
}

fn config(command: Command, a: Common) -> Result<RunConfig, kpqa_metric::Error> {
    Ok(RunConfig {
        command,
        samples: a.samples,
        weights: a.weights,
        kp_weights: a.kp_weights,
        embeddings: a.embeddings,
        judgments: a.judgments,
        scores: a.scores,
        idf: a.idf,
        metrics: match a.metrics {
            Some(m) => parse_metric_list(&m)?,
            None => Vec::new(),
        },
        weight_source: a.weight_source.map(|s| match s {
            Source::Uniform => WeightSource::Uniform,
            Source::Idf => WeightSource::Idf,
            Source::KpwFile => WeightSource::KpwFile,
            Source::KpFile => WeightSource::KpFile,
        }),
        beta: a.beta,
        bleu1_mode: match a.bleu1_mode {
            Bleu1::Literal => Bleu1Mode::Literal,
            Bleu1::Clipped => Bleu1Mode::Clipped,
        },
        rouge_mode: match a.rouge_mode {
            Rouge::Symmetric => RougeMode::Symmetric,
            Rouge::Literal => RougeMode::Literal,
        },
        out: a.out,
        format: match a.format {
            Format::Csv => OutputFormat::Csv,
            Format::Jsonl => OutputFormat::Jsonl,
        },
        jobs: a.jobs,
        filter: FilterConfig {
            z_max: a.z_max,
            max_remove: a.max_remove,
            mode: if a.iterative_filter {
                FilterMode::Iterative
            } else {
                FilterMode::Batch
            },
        },
        alpha_level: match a.alpha_level {
            Level::Interval => AlphaLevel::Interval,
            Level::Ordinal => AlphaLevel::Ordinal,
        },
        group_by: a.group_by.map(|g| match g {
            Group::QuestionType => GroupKey::QuestionType,
            Group::Model => GroupKey::ModelTag,
        }),
        gap: a.gap,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();

    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (command, args) = match cli.command {
        Cmd::Score(a) => (Command::Score, a),
        Cmd::MetaEval(a) => (Command::MetaEval, a),
        Cmd::RankPair(a) => (Command::RankPair, a),
        Cmd::IdfBuild(a) => (Command::IdfBuild, a),
    };
    if args.beta.is_nan() || args.beta <= 0.0 {
        eprintln!("error: --beta must be positive");
        return ExitCode::from(1);
    }

    let outcome = panic::catch_unwind(|| config(command, args).and_then(|c| run(&c)));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(2),
    }
}
