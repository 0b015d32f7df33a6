//! `prsel`: corpus preparation, training, grounding, evaluation, and
//! ablation for personalized response selection.

mod commands;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "prsel", version, about = "Personalized response selection toolkit")]
pub(crate) struct Cli {
    /// Seed overriding config-file and default seeds.
    #[arg(long, global = true)]
    pub(crate) seed: Option<u64>,

    /// Config file (TOML); flags take precedence over its values.
    #[arg(long, global = true)]
    pub(crate) config: Option<PathBuf>,

    /// Run-directory root (falls back to $PRSEL_RUN_ROOT, then ./runs).
    #[arg(long, global = true)]
    pub(crate) run_root: Option<PathBuf>,

    #[command(subcommand)]
    pub(crate) command: Command,
}

#[derive(Subcommand)]
pub(crate) enum Command {
    /// Corpus conversion, sampling, and synthesis.
    Corpus {
        #[command(subcommand)]
        command: CorpusCommand,
    },
    /// Train a selection model (standard or prompted layout).
    Train(TrainArgs),
    /// Ground persona sentences against gold responses; optionally score
    /// grounding recall when labels are present.
    Ground(GroundArgs),
    /// Evaluate a method on a dataset and persist a run report.
    Eval(EvalArgs),
    /// Run an ablation grid from a spec file.
    Ablate(AblateArgs),
    /// Sequence-layout debugging.
    Seq {
        #[command(subcommand)]
        command: SeqCommand,
    },
    /// Inspect reports and defaults.
    Report(ReportArgs),
}

#[derive(Subcommand)]
pub(crate) enum CorpusCommand {
    /// Convert a raw distribution format into the normalized schema.
    Convert(ConvertArgs),
    /// Synthesize ranking instances from labeled dialogues by sampling
    /// context-tier and random negatives.
    SampleFocus(SampleFocusArgs),
    /// Generate a seeded synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Args)]
pub(crate) struct ConvertArgs {
    /// Raw format: personachat-txt | focus-json
    #[arg(long)]
    pub(crate) from: String,
    #[arg(long)]
    pub(crate) input: PathBuf,
    #[arg(long)]
    pub(crate) output: PathBuf,
    /// Persona wording carried by the raw file: original | revised
    #[arg(long, default_value = "original")]
    pub(crate) version: String,
    /// Which persona to attach: self | partner
    #[arg(long, default_value = "self")]
    pub(crate) persona_side: String,
}

#[derive(Args)]
pub(crate) struct SampleFocusArgs {
    /// Dialogue JSONL with persona and grounding labels.
    #[arg(long)]
    pub(crate) input: PathBuf,
    #[arg(long)]
    pub(crate) output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub(crate) seed: u64,
    #[arg(long, default_value_t = 2)]
    pub(crate) n_context: usize,
    #[arg(long, default_value_t = 17)]
    pub(crate) n_random: usize,
}

#[derive(Args)]
pub(crate) struct SynthArgs {
    /// personachat | focus | generic
    #[arg(long)]
    pub(crate) kind: String,
    #[arg(long)]
    pub(crate) output: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub(crate) n_dialogues: usize,
    #[arg(long, default_value_t = 3)]
    pub(crate) exchanges: usize,
    #[arg(long, default_value = "original")]
    pub(crate) persona: String,
    #[arg(long, default_value_t = 0.2)]
    pub(crate) small_talk: f64,
    #[arg(long, default_value_t = 0)]
    pub(crate) seed: u64,
}

#[derive(Args)]
pub(crate) struct TrainArgs {
    /// Sequence layout used for training examples: standard | prompted
    #[arg(long, default_value = "standard")]
    pub(crate) mode: String,
    /// Training instances (normalized JSONL), or dialogue JSONL with
    /// --format dialogues.
    #[arg(long)]
    pub(crate) train: PathBuf,
    /// Validation instances; defaults to a seeded holdout from --train.
    #[arg(long)]
    pub(crate) val: Option<PathBuf>,
    /// Input format: instances | dialogues
    #[arg(long, default_value = "instances")]
    pub(crate) format: String,
    /// Negatives per positive when --format dialogues.
    #[arg(long, default_value_t = 10)]
    pub(crate) n_negatives: usize,
    /// Persona version of the instance files.
    #[arg(long, default_value = "original")]
    pub(crate) persona: String,
    /// Checkpoint output directory.
    #[arg(long)]
    pub(crate) out: PathBuf,
    #[arg(long)]
    pub(crate) learning_rate: Option<f64>,
    #[arg(long)]
    pub(crate) epochs: Option<usize>,
    #[arg(long)]
    pub(crate) batch_size: Option<usize>,
    /// Encoder checkpoint id (e.g. lexical-64).
    #[arg(long)]
    pub(crate) backend: Option<String>,
    /// Subsample this many negatives per positive instance.
    #[arg(long)]
    pub(crate) neg_per_pos: Option<usize>,
    /// Accept candidate lists that are not exactly 20 long.
    #[arg(long, default_value_t = false)]
    pub(crate) allow_variable_candidates: bool,
}

#[derive(Args)]
pub(crate) struct GroundArgs {
    /// Normalized instance JSONL.
    #[arg(long)]
    pub(crate) input: PathBuf,
    #[arg(long, default_value = "original")]
    pub(crate) persona: String,
    #[arg(long)]
    pub(crate) k: Option<usize>,
    /// Similarity backend: contrastive | nli (or an explicit id).
    #[arg(long)]
    pub(crate) sim: Option<String>,
    /// Also report grounding recall for k = 1..=N (requires labels).
    #[arg(long)]
    pub(crate) recall_max: Option<usize>,
    /// Hit rule for recall: any | all
    #[arg(long, default_value = "any")]
    pub(crate) rule: String,
    /// Where to write grounded-persona dumps (JSONL). Optional.
    #[arg(long)]
    pub(crate) output: Option<PathBuf>,
    /// Persona-embedding cache file to load/save.
    #[arg(long)]
    pub(crate) cache: Option<PathBuf>,
    #[arg(long, default_value_t = false)]
    pub(crate) allow_variable_candidates: bool,
}

#[derive(Args)]
pub(crate) struct EvalArgs {
    /// srs | p5 | p5-zero | p5-finetuned | sop
    #[arg(long)]
    pub(crate) method: String,
    /// Normalized instance JSONL.
    #[arg(long)]
    pub(crate) dataset: PathBuf,
    /// original | revised | none
    #[arg(long, default_value = "original")]
    pub(crate) persona: String,
    /// Trained checkpoint directory (omit to use an untrained stub backend).
    #[arg(long)]
    pub(crate) checkpoint: Option<PathBuf>,
    /// Backend id when no checkpoint is given (smoke runs).
    #[arg(long, default_value = "stub-hash-16")]
    pub(crate) backend: String,
    #[arg(long)]
    pub(crate) k: Option<usize>,
    #[arg(long)]
    pub(crate) alpha: Option<f64>,
    #[arg(long)]
    pub(crate) question: Option<String>,
    /// ascending | descending
    #[arg(long)]
    pub(crate) order: Option<String>,
    #[arg(long)]
    pub(crate) sim: Option<String>,
    /// Turn persona input off (plug-and-play off state).
    #[arg(long)]
    pub(crate) persona_enabled: Option<bool>,
    #[arg(long, default_value_t = false)]
    pub(crate) allow_variable_candidates: bool,
    /// Repeat the run N times under seeds seed..seed+N-1 and add
    /// mean/std rows (single-run reporting is the default).
    #[arg(long, default_value_t = 1)]
    pub(crate) repeats: usize,
    /// Experimental: only include grounded persona sentences whose
    /// similarity is at least this value.
    #[arg(long)]
    pub(crate) sim_threshold: Option<f64>,
}

#[derive(Args)]
pub(crate) struct AblateArgs {
    /// Ablation spec file (TOML).
    #[arg(long)]
    pub(crate) spec: PathBuf,
}

#[derive(Subcommand)]
pub(crate) enum SeqCommand {
    /// Print the segment layout for a context/response (optionally with a
    /// prompt question and persona sentences).
    Render(SeqRenderArgs),
}

#[derive(Args)]
pub(crate) struct SeqRenderArgs {
    /// Context utterances in order, "A:text" or "B:text".
    #[arg(long = "utterance")]
    pub(crate) utterances: Vec<String>,
    #[arg(long)]
    pub(crate) response: String,
    #[arg(long, default_value = "")]
    pub(crate) question: String,
    /// Persona sentences, already in prompt order.
    #[arg(long = "persona")]
    pub(crate) personas: Vec<String>,
    #[arg(long, default_value_t = false)]
    pub(crate) json: bool,
}

#[derive(Args)]
pub(crate) struct ReportArgs {
    /// Print the complete default configuration as TOML.
    #[arg(long, default_value_t = false)]
    pub(crate) show_defaults: bool,
    /// Print the report stored in a run directory.
    #[arg(long)]
    pub(crate) from: Option<PathBuf>,
    /// Emit CSV instead of the text table.
    #[arg(long, default_value_t = false)]
    pub(crate) csv: bool,
    /// Recompute metrics from the run's ranking dumps and compare.
    #[arg(long, default_value_t = false)]
    pub(crate) verify: bool,
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Corpus { ref command } => match command {
            CorpusCommand::Convert(args) => commands::convert(&cli, args),
            CorpusCommand::SampleFocus(args) => commands::sample_focus(&cli, args),
            CorpusCommand::Synth(args) => commands::synth(&cli, args),
        },
        Command::Train(ref args) => commands::train(&cli, args),
        Command::Ground(ref args) => commands::ground(&cli, args),
        Command::Eval(ref args) => commands::eval(&cli, args),
        Command::Ablate(ref args) => commands::ablate(&cli, args),
        Command::Seq { ref command } => match command {
            SeqCommand::Render(args) => commands::seq_render(&cli, args),
        },
        Command::Report(ref args) => commands::report(&cli, args),
    };
    if let Err(err) = outcome {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
