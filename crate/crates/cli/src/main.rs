mod commands;
mod config;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "gcd", version, about = "Contextual decomposition of LSTM language models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decompose one sentence and report inside/outside logit parts.
    Decompose(DecomposeArgs),
    /// Relative-contribution matrix for a sentence or averaged over a corpus.
    Matrix(MatrixArgs),
    /// Number-agreement accuracy per scoring mode.
    NaEval(NaEvalArgs),
    /// Pronoun preference per scoring mode, or per-slot preference cells.
    GenderEval(GenderEvalArgs),
    /// Generate a template corpus as JSON lines.
    GenCorpus(GenCorpusArgs),
    /// Print model dimensions and decoder intercepts of selected tokens.
    InspectModel(InspectArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Full,
    Fixed,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Warmup,
    Zero,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

/// Flags shared by every command that runs the model.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Checkpoint manifest, or "toy" for the built-in fixture.
    #[arg(long, default_value = "toy")]
    pub model: String,
    /// Interaction preset: default, in, intercept*, no-intercept, all.
    #[arg(long, default_value = "in")]
    pub interactions: String,
    /// Inline pair list "source:gate,..." replacing the preset's pairs.
    #[arg(long)]
    pub pairs: Option<String>,
    #[arg(long, value_enum, default_value_t = PolicyArg::Full)]
    pub policy: PolicyArg,
    /// Score without the decoder intercept b_d.
    #[arg(long)]
    pub no_decoder_bias: bool,
    #[arg(long, value_enum, default_value_t = InitArg::Warmup)]
    pub init: InitArg,
    /// Map out-of-vocabulary words to the checkpoint's unknown token.
    #[arg(long)]
    pub map_unknown: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Corpus source: a JSONL file or generation parameters.
#[derive(Args, Debug, Clone)]
pub struct CorpusSource {
    /// Read instances from a JSONL corpus file.
    #[arg(long)]
    pub corpus: Option<std::path::PathBuf>,
    /// Lexicon JSON; defaults to the lexicon bundled for the model.
    #[arg(long)]
    pub lexicon: Option<std::path::PathBuf>,
    /// Condition(s), comma separated, or "all".
    #[arg(long, default_value = "all")]
    pub condition: String,
    /// Instances per condition.
    #[arg(long, default_value_t = 500)]
    pub count: usize,
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Whitespace-tokenised sentence.
    pub sentence: String,
    /// Focus span "start:end" (end exclusive); repeat for several spans.
    #[arg(long)]
    pub focus: Vec<String>,
    /// Step whose next-word logits are reported; defaults to the last token.
    #[arg(long)]
    pub step: Option<usize>,
    /// Number of highest-logit words to report.
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
    /// Extra words to report, comma separated.
    #[arg(long)]
    pub words: Option<String>,
}

#[derive(Args, Debug)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub source: CorpusSource,
    /// A single sentence instead of a corpus.
    #[arg(long)]
    pub sentence: Option<String>,
    /// Extra target words scored at the step of the last target, comma separated.
    #[arg(long)]
    pub extra: Option<String>,
    /// Agreement task used when generating a corpus: simple, nounpp, namepp.
    #[arg(long)]
    pub task: Option<String>,
    /// Directory receiving one matrix per sentence.
    #[arg(long)]
    pub per_sentence: Option<std::path::PathBuf>,
}

#[derive(Args, Debug)]
pub struct NaEvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub source: CorpusSource,
    /// Task(s), comma separated, or "all".
    #[arg(long, default_value = "all")]
    pub task: String,
    /// Scoring modes, comma separated: "full" or "preset[:role]"; the preset
    /// "custom" uses --interactions and --pairs.
    #[arg(long, default_value = "full,in,intercept*,no-intercept")]
    pub modes: String,
    /// Per-instance outcomes as JSON lines.
    #[arg(long)]
    pub instances: Option<std::path::PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenderEvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub source: CorpusSource,
    /// Corpus kind(s): unambiguous, stereotypical or "all".
    #[arg(long, default_value = "all")]
    pub kind: String,
    /// Scoring modes, as for na-eval.
    #[arg(long, default_value = "full,in:subject,in:object,intercept*")]
    pub modes: String,
    /// Report mean relative-contribution differences per slot instead.
    #[arg(long)]
    pub preference: bool,
    #[arg(long)]
    pub instances: Option<std::path::PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenCorpusArgs {
    /// Checkpoint manifest (for its vocabulary), or "toy".
    #[arg(long, default_value = "toy")]
    pub model: String,
    #[arg(long)]
    pub lexicon: Option<std::path::PathBuf>,
    /// Agreement task: simple, nounpp, namepp.
    #[arg(long, conflicts_with = "kind")]
    pub task: Option<String>,
    /// Pronoun corpus kind: unambiguous, stereotypical.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub condition: String,
    #[arg(long, default_value_t = 500)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    #[arg(long, default_value = "toy")]
    pub model: String,
    /// Tokens whose decoder intercepts are printed.
    pub tokens: Vec<String>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Decompose(a) => commands::decompose(a),
        Command::Matrix(a) => commands::matrix(a),
        Command::NaEval(a) => commands::na_eval(a),
        Command::GenderEval(a) => commands::gender_eval(a),
        Command::GenCorpus(a) => commands::gen_corpus(a),
        Command::InspectModel(a) => commands::inspect_model(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
