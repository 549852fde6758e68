//! Command-line front end: argument parsing, configuration, and exit codes.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand};
use morphprobe::analysis::BoundaryAveraging;
use thiserror::Error;

mod commands;
pub mod config;

use config::{overlay, overlay_switch, RunConfig};

/// Exit status for each failure class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const DATA: i32 = 2;
    pub const ENDPOINT: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Endpoint(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => exit::USAGE,
            Self::Data(_) => exit::DATA,
            Self::Endpoint(_) => exit::ENDPOINT,
        }
    }
}

const GOLD_FORMAT: &str = "Gold file: UTF-8, one word per line as `surface<TAB>m1+m2+...`; \
a blank line ends a sentence; lines starting with `#` are comments.";

const TOKENS_FORMAT: &str = "Token file (--tokens-format tsv): UTF-8, one word per line as \
`surface<TAB>tok1<US>tok2...` where <US> is U+001F, paired line for line with the gold file. \
Token bytes that are not whole characters are written as `\\xHH`, a literal backslash as `\\\\`. \
With --tokens-format gold the token file is read as a gold file and its morphemes are the tokens.";

const REPORT_FORMAT: &str = "Report CSV: `dataset,system,fertility,tokens,morpheme_f1,boundary_p,\
boundary_r,boundary_f1,mcr,words,excluded`; scores are percentages with two decimals. Boundaries \
are character offsets; a zero denominator scores 0.";

const DATASET_FORMAT: &str = "Dataset file: UTF-8, one JSON object per line with exactly the \
fields root, template, base_form, prefix, suffix, full_form, has_affix (\"true\"/\"false\"), \
root_category (high_frequency | low_frequency | nonce).";

const PATTERN_FORMAT: &str = "Pattern file: one citation form per line, optionally \
`<TAB>policy=repeat3|require4` (how a second ل slot is filled).";

const RESULTS_FORMAT: &str = "Results file: one JSON object per line with instance_id, model, \
task, root, template, root_category, raw_output, normalized_output, target, correct, \
latency_ms (omitted with --omit-timing), attempt_count, failure (only when the endpoint never \
answered).";

const SCORE_FORMAT: &str = "Score CSV: `system,group,correct,total,failed,accuracy,\
accuracy_answered`; accuracy counts failures as wrong, accuracy_answered leaves them out.";

const MATRIX_FORMAT: &str = "Matrix CSV: `dataset,metric,task,n,r`, one row per alignment metric \
and task; r is NA when undefined (fewer than 2 systems or a constant column). Fertility is \
correlated as measured, not sign-flipped.";

const OUTPUT_NOTE: &str = "Every output file starts with a `#` line giving the tool version, \
seed, and configuration hash.";

#[derive(Debug, Parser)]
#[command(name = "morphprobe", version, about = "Morphological alignment metrics and templatic probes for Arabic")]
#[command(after_help = OUTPUT_NOTE)]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Strip diacritics from a gold file and drop non-Arabic words.
    #[command(after_help = GOLD_FORMAT)]
    Clean(CleanArgs),
    /// Score a tokenization against gold segmentations.
    #[command(after_help = format!("{GOLD_FORMAT}\n\n{TOKENS_FORMAT}\n\n{REPORT_FORMAT}"))]
    EvalTokenizer(EvalArgs),
    /// Generate nonce roots and pair them with patterns.
    #[command(after_help = format!("{PATTERN_FORMAT}\n\nLexicon file: one attested root per line.\n\n{DATASET_FORMAT}"))]
    MakeNonce(NonceArgs),
    /// Validate real (and optionally nonce) records into one dataset file.
    #[command(after_help = DATASET_FORMAT)]
    BuildDataset(BuildArgs),
    /// Write the prompt for every dataset record.
    #[command(after_help = format!("{DATASET_FORMAT}\n\nOutput: one JSON object per line, {{\"instance_id\", \"prompt\"}}."))]
    RenderPrompts(RenderArgs),
    /// Query a chat-completion endpoint on every record and score the answers.
    #[command(after_help = format!(
        "{DATASET_FORMAT}\n\n{RESULTS_FORMAT}\n\nThe API key is read from {}. Exit status 3 means \
         the endpoint refused credentials or never answered.",
        morphprobe::probe::API_KEY_ENV
    ))]
    Probe(ProbeArgs),
    /// Accuracy per model and group from results files.
    #[command(after_help = format!("{RESULTS_FORMAT}\n\n{SCORE_FORMAT}"))]
    Score(ScoreArgs),
    /// Correlate alignment metrics with task accuracies.
    #[command(after_help = format!("{REPORT_FORMAT}\n\n{SCORE_FORMAT}\n\n{MATRIX_FORMAT}"))]
    Correlate(CorrelateArgs),
    /// Write alignment, accuracy, and correlation tables.
    #[command(after_help = format!(
        "Writes alignment.{{csv,txt}}, accuracy.{{csv,txt}}, correlation.{{csv,txt}}, and one \
         wide correlation_<dataset>.csv per dataset.\n\n{REPORT_FORMAT}\n\n{SCORE_FORMAT}\n\n{MATRIX_FORMAT}"
    ))]
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CleanArgs {
    /// Gold segmentation file.
    #[arg(long, value_name = "FILE")]
    pub gold: Option<PathBuf>,
    /// Cleaned gold file to write.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Gold segmentation file.
    #[arg(long, value_name = "FILE")]
    pub gold: Option<PathBuf>,
    /// Tokenization of the same words.
    #[arg(long, value_name = "FILE")]
    pub tokens: Option<PathBuf>,
    /// Token file layout: tsv or gold.
    #[arg(long, value_name = "FORMAT")]
    pub tokens_format: Option<String>,
    /// Report CSV to write.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Dataset label for the report (default: gold file stem).
    #[arg(long)]
    pub dataset: Option<String>,
    /// System label for the report (default: token file stem).
    #[arg(long)]
    pub system: Option<String>,
    /// Boundary scores in the table: pooled (default) or per-word.
    #[arg(long, value_name = "MODE")]
    pub boundary_averaging: Option<BoundaryAveraging>,
}

#[derive(Debug, Args)]
pub struct NonceArgs {
    /// Number of roots.
    #[arg(long)]
    pub n: Option<usize>,
    /// Pattern file (default: the five built-in nonce patterns).
    #[arg(long, value_name = "FILE")]
    pub patterns: Option<PathBuf>,
    /// Random seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Attested roots to avoid.
    #[arg(long, value_name = "FILE")]
    pub lexicon: Option<PathBuf>,
    /// Permit roots with a repeated radical.
    #[arg(long)]
    pub allow_geminate: bool,
    /// Dataset file to write.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Real-root records.
    #[arg(long, value_name = "FILE")]
    pub real: Option<PathBuf>,
    /// Nonce records appended after the real ones.
    #[arg(long, value_name = "FILE")]
    pub nonce: Option<PathBuf>,
    /// Shape check: reference (13 patterns / 130 pairs / 3 forms each; nonce 5 / 100 / 1) or none.
    #[arg(long, value_name = "SHAPE")]
    pub expect: Option<String>,
    /// Dataset file to write.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PromptArgs {
    /// root-pattern or affix-build.
    #[arg(long)]
    pub task: Option<String>,
    /// Prompt language: en or ar.
    #[arg(long)]
    pub lang: Option<String>,
    /// 0 or 1 worked examples.
    #[arg(long)]
    pub shots: Option<u8>,
    /// Directory of replacement templates named `<lang>_[one_shot_]<task>.txt`.
    #[arg(long, value_name = "DIR")]
    pub templates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Dataset file.
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub prompt: PromptArgs,
    /// Output file (default: stdout).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// Dataset file.
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub prompt: PromptArgs,
    /// Model name sent to the endpoint and recorded in results.
    #[arg(long)]
    pub model: Option<String>,
    /// Chat-completion URL.
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,
    /// Answer in-process instead: oracle or root-echo.
    #[arg(long, value_name = "KIND")]
    pub mock: Option<String>,
    /// Sampling temperature (default 0.6).
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Completion budget (default 8 for GPT and ALLaM models, else 80).
    #[arg(long)]
    pub max_tokens: Option<u32>,
    /// Retries after the first attempt (default 4).
    #[arg(long)]
    pub retry_limit: Option<u32>,
    /// Requests in flight (default 4).
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// First retry delay in milliseconds; doubles each retry (default 500).
    #[arg(long, value_name = "MS")]
    pub backoff_ms: Option<u64>,
    /// Per-request timeout in milliseconds (default 60000).
    #[arg(long, value_name = "MS")]
    pub timeout_ms: Option<u64>,
    /// Rate limit (default unlimited).
    #[arg(long, value_name = "RPS")]
    pub requests_per_second: Option<f64>,
    /// Leave latency out of results so reruns are byte-identical.
    #[arg(long)]
    pub omit_timing: bool,
    /// Results file to write.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Results files (repeatable).
    #[arg(long, value_name = "FILE")]
    pub results: Vec<PathBuf>,
    /// Grouping: task (default), root_category, or template.
    #[arg(long)]
    pub by: Option<String>,
    /// Score CSV to write (default: stdout).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// Directory of report CSVs.
    #[arg(long, value_name = "DIR")]
    pub reports: Option<PathBuf>,
    /// Directory of score CSVs grouped by task.
    #[arg(long, value_name = "DIR")]
    pub scores: Option<PathBuf>,
    /// Matrix CSV to write.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory of report CSVs.
    #[arg(long, value_name = "DIR")]
    pub reports: Option<PathBuf>,
    /// Directory of score CSVs grouped by task.
    #[arg(long, value_name = "DIR")]
    pub scores: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

impl PromptArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        overlay(&mut cfg.probe.task, &self.task);
        overlay(&mut cfg.probe.lang, &self.lang);
        overlay(&mut cfg.probe.shots, &self.shots);
        overlay(&mut cfg.paths.templates, &self.templates);
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Clean(_) => "clean",
            Self::EvalTokenizer(_) => "eval-tokenizer",
            Self::MakeNonce(_) => "make-nonce",
            Self::BuildDataset(_) => "build-dataset",
            Self::RenderPrompts(_) => "render-prompts",
            Self::Probe(_) => "probe",
            Self::Score(_) => "score",
            Self::Correlate(_) => "correlate",
            Self::Report(_) => "report",
        }
    }

    /// Lay this command's flags over `cfg`.
    fn apply(&self, cfg: &mut RunConfig) {
        let p = &mut cfg.paths;
        match self {
            Self::Clean(a) => {
                overlay(&mut p.gold, &a.gold);
                overlay(&mut p.out, &a.out);
            }
            Self::EvalTokenizer(a) => {
                overlay(&mut p.gold, &a.gold);
                overlay(&mut p.tokens, &a.tokens);
                overlay(&mut p.out, &a.out);
                overlay(&mut cfg.metrics.tokens_format, &a.tokens_format);
                overlay(&mut cfg.metrics.dataset, &a.dataset);
                overlay(&mut cfg.metrics.system, &a.system);
                overlay(&mut cfg.metrics.boundary_averaging, &a.boundary_averaging);
            }
            Self::MakeNonce(a) => {
                overlay(&mut p.patterns, &a.patterns);
                overlay(&mut p.lexicon, &a.lexicon);
                overlay(&mut p.out, &a.out);
                overlay(&mut cfg.datagen.n, &a.n);
                overlay(&mut cfg.seed, &a.seed);
                overlay_switch(&mut cfg.datagen.allow_geminate, a.allow_geminate);
            }
            Self::BuildDataset(a) => {
                overlay(&mut p.real, &a.real);
                overlay(&mut p.nonce, &a.nonce);
                overlay(&mut p.out, &a.out);
                overlay(&mut cfg.datagen.expect, &a.expect);
            }
            Self::RenderPrompts(a) => {
                overlay(&mut p.dataset, &a.dataset);
                overlay(&mut p.out, &a.out);
                a.prompt.apply(cfg);
            }
            Self::Probe(a) => {
                overlay(&mut p.dataset, &a.dataset);
                overlay(&mut p.out, &a.out);
                let q = &mut cfg.probe;
                overlay(&mut q.model, &a.model);
                overlay(&mut q.endpoint, &a.endpoint);
                overlay(&mut q.mock, &a.mock);
                overlay(&mut q.temperature, &a.temperature);
                overlay(&mut q.max_tokens, &a.max_tokens);
                overlay(&mut q.retry_limit, &a.retry_limit);
                overlay(&mut q.concurrency, &a.concurrency);
                overlay(&mut q.backoff_ms, &a.backoff_ms);
                overlay(&mut q.timeout_ms, &a.timeout_ms);
                overlay(&mut q.requests_per_second, &a.requests_per_second);
                overlay_switch(&mut q.omit_timing, a.omit_timing);
                a.prompt.apply(cfg);
            }
            Self::Score(a) => {
                if !a.results.is_empty() {
                    p.results.clone_from(&a.results);
                }
                overlay(&mut p.out, &a.out);
                overlay(&mut cfg.metrics.group_by, &a.by);
            }
            Self::Correlate(a) => {
                overlay(&mut p.reports, &a.reports);
                overlay(&mut p.scores, &a.scores);
                overlay(&mut p.out, &a.out);
            }
            Self::Report(a) => {
                overlay(&mut p.reports, &a.reports);
                overlay(&mut p.scores, &a.scores);
                overlay(&mut p.out, &a.out);
            }
        }
    }
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        (false, 2) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
}

/// Run the tool on `args` (program name first) and return the exit status.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    init_logging(cli.verbose, cli.quiet);
    match run(&cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                let mut cmd = Cli::command();
                cmd.build();
                if let Some(sub) = cmd.find_subcommand_mut(cli.command.name()) {
                    eprintln!("\n{}", sub.render_usage());
                    eprintln!("For more information, try 'morphprobe {} --help'.", cli.command.name());
                }
            }
            e.exit_code()
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cli.command.apply(&mut cfg);
    if cli.dump_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    commands::run(&cli.command, &cfg)
}
