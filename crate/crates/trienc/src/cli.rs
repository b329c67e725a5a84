use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use trienc_core::eval::{
    additivity_analysis, eval_planning, eval_sequence_modeling, AdditivityConfig, AdditivityMode,
    ComponentScorer, PlanningConfig, Planner, SeqEvalConfig, SeqScorer,
};
use trienc_core::synth::{gen_synthetic_corpus, Structure, SyntheticCorpusConfig};
use trienc_core::targets::TargetMode;
use trienc_core::trainer::{train, Optimizer, Stage, TrainConfig};
use trienc_core::{Corpus, Tag, UttId};

use crate::bench::{bench_csv, run_bench, BenchConfig};
use crate::corpus_io::{dialogs_to_ids, read_dialogs_file, save_corpus};
use crate::report::{additivity_csv, seq_csv, to_json, PlanningSummary, SeqSummary};
use crate::store_io::{load_store, save_store};
use crate::verify::run_checks;

#[derive(Debug, Parser)]
#[command(name = "trienc", version, about = "Train, score and evaluate triple-encoder embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus as line-delimited JSON.
    GenSynth(GenSynthArgs),
    /// Train lookup-table encoders and save them as an embedding store.
    Train(TrainArgs),
    /// Rank each next utterance among the utterances seen at the same depth.
    EvalSeq(EvalSeqArgs),
    /// Rank the true utterance by how well it leads to a later goal.
    EvalPlan(EvalPlanArgs),
    /// Per-position correct-minus-random similarity table.
    AnalyzeAdditivity(AdditivityArgs),
    /// Per-turn pair growth and wall time of the incremental state.
    Bench(BenchArgs),
    /// Run the oracle checks; fails if any disagree.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StructureArg {
    Markov,
    Xor,
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    #[arg(long, value_enum, default_value = "xor")]
    pub structure: StructureArg,
    #[arg(long, default_value_t = 20)]
    pub vocab: usize,
    #[arg(long, default_value_t = 500)]
    pub dialogs: usize,
    #[arg(long = "len", default_value_t = 4)]
    pub dialog_len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StageArg {
    CclPretrain,
    C3l,
    C3lFromScratch,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TargetsArg {
    Curved,
    HardPositive,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output store directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "c3l")]
    pub stage: StageArg,
    #[arg(long, value_enum, default_value = "curved")]
    pub targets: TargetsArg,
    #[arg(long, default_value_t = 5)]
    pub w: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long)]
    pub no_parity: bool,
    #[arg(long, value_enum, default_value = "sgd")]
    pub optimizer: OptimizerArg,
    /// Triple phase uses [B2] pair positives with triple negatives.
    #[arg(long)]
    pub bi_pos_triple_neg: bool,
    /// Validation corpus for per-epoch model selection.
    #[arg(long)]
    pub valid: Option<PathBuf>,
    /// Write the per-epoch loss trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Bi,
    TripleAvg,
    TripleLastL,
    Maxsim,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BiTagArg {
    B,
    B1,
    B2,
}

impl BiTagArg {
    fn tag(self) -> Tag {
        match self {
            BiTagArg::B => Tag::B,
            BiTagArg::B1 => Tag::B1,
            BiTagArg::B2 => Tag::B2,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalSeqArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value = "triple-avg")]
    pub variant: VariantArg,
    /// Rows kept by triple-last-l.
    #[arg(long, default_value_t = 1)]
    pub l: usize,
    /// Ignore context utterances more than this many turns before the candidate.
    #[arg(long)]
    pub max_distance: Option<usize>,
    /// One of triple, triple-plus-bi-b2, direct-neighbors, bi-b1-plus-bi-b2,
    /// mean-b2-only, bi-b2, mean-b1-only; overrides --variant.
    #[arg(long)]
    pub component_scorer: Option<String>,
    /// Before space used by --variant bi.
    #[arg(long, value_enum, default_value = "b")]
    pub bi_tag: BiTagArg,
    #[arg(long, default_value_t = 2)]
    pub min_depth: usize,
    /// Write a JSON summary here.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PlannerArg {
    Bi,
    Triple,
}

#[derive(Debug, Args)]
pub struct EvalPlanArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub history_len: usize,
    #[arg(long, default_value_t = 1)]
    pub goal_distance: usize,
    #[arg(long, value_enum, default_value = "triple")]
    pub planner: PlannerArg,
    /// Line-delimited JSON `{"dialog": <index>, "candidates": [...]}`.
    #[arg(long)]
    pub candidates_file: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub distractors: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Bi,
    Triple,
}

#[derive(Debug, Args)]
pub struct AdditivityArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub context_len: usize,
    #[arg(long, value_enum, default_value = "triple")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "b")]
    pub bi_tag: BiTagArg,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 10)]
    pub turns: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 100)]
    pub candidates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run<W: Write>(cli: Cli, out: &mut W) -> anyhow::Result<()> {
    match cli.command {
        Command::GenSynth(a) => gen_synth(a),
        Command::Train(a) => train_cmd(a, out),
        Command::EvalSeq(a) => eval_seq(a, out),
        Command::EvalPlan(a) => eval_plan(a, out),
        Command::AnalyzeAdditivity(a) => additivity(a, out),
        Command::Bench(a) => {
            let rows = run_bench(&BenchConfig {
                turns: a.turns,
                dim: a.dim,
                candidates: a.candidates,
                seed: a.seed,
            })?;
            out.write_all(bench_csv(&rows).as_bytes())?;
            Ok(())
        }
        Command::Verify(a) => {
            let checks = run_checks(a.seed);
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
            }
            if failed > 0 {
                bail!("{failed} of {} oracle checks failed", checks.len());
            }
            Ok(())
        }
    }
}

fn gen_synth(a: GenSynthArgs) -> anyhow::Result<()> {
    let structure = match a.structure {
        StructureArg::Markov => Structure::Markov,
        StructureArg::Xor => Structure::XorCooccurrence,
    };
    let corpus = gen_synthetic_corpus(&SyntheticCorpusConfig {
        vocab_size: a.vocab,
        dialog_count: a.dialogs,
        dialog_len: a.dialog_len,
        structure,
        seed: a.seed,
    })?;
    save_corpus(&corpus, &a.out)?;
    Ok(())
}

fn train_cmd<W: Write>(a: TrainArgs, out: &mut W) -> anyhow::Result<()> {
    let train_dialogs = read_dialogs_file(&a.corpus)?;
    let n_train = train_dialogs.len();
    let mut corpus = Corpus::from_dialogs(&train_dialogs)?;
    let valid = match &a.valid {
        Some(path) => {
            for d in read_dialogs_file(path)? {
                corpus.push_dialog(&d)?;
            }
            Some(corpus.split_off(n_train))
        }
        None => None,
    };
    let cfg = TrainConfig {
        dim: a.dim,
        w: a.w,
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed: a.seed,
        stage: match a.stage {
            StageArg::CclPretrain => Stage::CclPretrain,
            StageArg::C3l => Stage::C3l,
            StageArg::C3lFromScratch => Stage::C3lFromScratch,
        },
        target_mode: match a.targets {
            TargetsArg::Curved => TargetMode::Curved,
            TargetsArg::HardPositive => TargetMode::HardPositive,
        },
        parity: !a.no_parity,
        optimizer: match a.optimizer {
            OptimizerArg::Sgd => Optimizer::Sgd,
            OptimizerArg::Adam => Optimizer::Adam,
        },
        bi_pos_triple_neg: a.bi_pos_triple_neg,
    };
    let outcome = train(&corpus, valid.as_deref(), &cfg)?;
    save_store(&outcome.params.to_store()?, &a.out)?;
    if let Some(path) = &a.trace {
        let mut csv = String::from("phase,epoch,train_loss,valid_loss\n");
        for s in &outcome.trace {
            let valid = s.valid_loss.map(|v| format!("{v:.8}")).unwrap_or_default();
            let phase = match s.phase {
                trienc_core::trainer::Phase::Bi => "bi",
                trienc_core::trainer::Phase::Triple => "triple",
            };
            csv.push_str(&format!("{phase},{},{:.8},{valid}\n", s.epoch, s.train_loss));
        }
        fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(last) = outcome.trace.last() {
        writeln!(out, "trained {} epochs, final train loss {:.6}", outcome.trace.len(), last.train_loss)?;
    }
    Ok(())
}

fn eval_seq<W: Write>(a: EvalSeqArgs, out: &mut W) -> anyhow::Result<()> {
    let store = load_store(&a.store)?;
    let dialogs = dialogs_to_ids(&read_dialogs_file(&a.corpus)?, &store)?;
    let (scorer, name) = match &a.component_scorer {
        Some(name) => {
            let c = ComponentScorer::parse(name).with_context(|| format!("unknown component scorer {name:?}"))?;
            (SeqScorer::Component(c), c.as_str().to_owned())
        }
        None => match a.variant {
            VariantArg::Bi => (SeqScorer::Bi { tag: a.bi_tag.tag() }, format!("bi-{}", a.bi_tag.tag())),
            VariantArg::TripleAvg => (SeqScorer::TripleAvg, "triple-avg".to_owned()),
            VariantArg::TripleLastL => (SeqScorer::TripleLastL { l: a.l }, format!("triple-last-{}", a.l)),
            VariantArg::Maxsim => (SeqScorer::MaxSim, "maxsim".to_owned()),
        },
    };
    let cfg = SeqEvalConfig {
        scorer,
        max_distance: a.max_distance,
        min_depth: a.min_depth,
    };
    let result = eval_sequence_modeling(&dialogs, &store, &cfg)?;
    out.write_all(seq_csv(&result).as_bytes())?;
    if let Some(path) = &a.json {
        fs::write(path, to_json(&SeqSummary::new(&name, &result)))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct CandidateRecord {
    dialog: usize,
    candidates: Vec<String>,
}

fn read_candidates(path: &PathBuf, store: &trienc_core::EmbeddingStore) -> anyhow::Result<BTreeMap<usize, Vec<UttId>>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CandidateRecord =
            serde_json::from_str(&line).with_context(|| format!("{} line {}", path.display(), idx + 1))?;
        let ids = dialogs_to_ids(&[rec.candidates], store)?.remove(0);
        map.insert(rec.dialog, ids);
    }
    Ok(map)
}

fn eval_plan<W: Write>(a: EvalPlanArgs, out: &mut W) -> anyhow::Result<()> {
    let store = load_store(&a.store)?;
    let dialogs = dialogs_to_ids(&read_dialogs_file(&a.corpus)?, &store)?;
    let provided = match &a.candidates_file {
        Some(p) => Some(read_candidates(p, &store)?),
        None => None,
    };
    let mut pool: Vec<UttId> = dialogs.iter().flatten().copied().collect();
    pool.sort_unstable();
    pool.dedup();
    let (planner, name) = match a.planner {
        PlannerArg::Bi => (Planner::Bi, "bi"),
        PlannerArg::Triple => (Planner::Triple, "triple"),
    };
    let cfg = PlanningConfig {
        history_len: a.history_len,
        goal_distance: a.goal_distance,
        planner,
        distractors: a.distractors,
        seed: a.seed,
    };
    let result = eval_planning(&dialogs, &store, &pool, &cfg, provided.as_ref())?;
    out.write_all(to_json(&PlanningSummary::new(name, a.history_len, a.goal_distance, &result)).as_bytes())?;
    Ok(())
}

fn additivity<W: Write>(a: AdditivityArgs, out: &mut W) -> anyhow::Result<()> {
    let store = load_store(&a.store)?;
    let dialogs = dialogs_to_ids(&read_dialogs_file(&a.corpus)?, &store)?;
    let mut pool: Vec<UttId> = dialogs.iter().flatten().copied().collect();
    pool.sort_unstable();
    pool.dedup();
    let mode = match a.mode {
        ModeArg::Bi => AdditivityMode::Bi { tag: a.bi_tag.tag() },
        ModeArg::Triple => AdditivityMode::Triple,
    };
    let rows = additivity_analysis(
        &dialogs,
        &store,
        &pool,
        &AdditivityConfig {
            context_len: a.context_len,
            mode,
            samples: a.samples,
            seed: a.seed,
        },
    )?;
    out.write_all(additivity_csv(&rows).as_bytes())?;
    Ok(())
}
