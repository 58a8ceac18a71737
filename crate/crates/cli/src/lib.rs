//! Command-line front end: `ingest`, `stats`, `split`, `train`, `eval`,
//! `behave` and `report`, each writing its artifacts atomically next to a
//! run manifest.

pub mod config;
pub mod io;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mindgauge::analysis::{corpus_stats, keyword_cooccurrence, post_similarity};
use mindgauge::behave::{perturb_posts, run_suite, PerturbationMode, SuiteConfig};
use mindgauge::corpus::{curate, read_curated, read_raw_posts, split_dataset, write_jsonl, DatasetSplit, SplitManifest};
use mindgauge::eval::{aggregate_report, class_report, confusion_matrix, ClassReport};
use mindgauge::model::Checkpoint;
use mindgauge::train::{encode_posts, train_model};
use mindgauge::{CuratedPost, InputKind, ModelConfig, ModelKind, RootFormSet};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::io::{resolve, sidecar, RunManifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("input file not found: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] mindgauge::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::MissingInput(_) => 3,
            CliError::Config(_) | CliError::Core(_) => 1,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::MissingInput(_) => "missing_input",
            CliError::Config(_) => "invalid_config",
            CliError::Core(e) => e.code(),
        }
    }

    /// One JSON object on one line.
    pub fn line(&self) -> String {
        serde_json::json!({ "error": self.code(), "message": self.to_string() }).to_string()
    }
}

#[derive(Debug, Parser)]
#[command(name = "mindgauge", version, about = "Mental-health post classification pipeline")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
struct Common {
    /// Flat TOML config; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for every stochastic stage
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Label, scrub and filter a raw JSON-lines dump
    Ingest {
        #[arg(long = "in", default_value = "raw.jsonl")]
        input: PathBuf,
        #[arg(long, default_value = "curated.jsonl")]
        out: PathBuf,
        /// Defaults to rejects.jsonl beside --out
        #[arg(long)]
        rejects: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Per-class statistics and keyword co-occurrence
    Stats {
        #[arg(long = "in", default_value = "curated.jsonl")]
        input: PathBuf,
        #[arg(long, default_value = "stats")]
        out: PathBuf,
        /// Two post ids, comma separated, to compare by TF-IDF cosine
        #[arg(long, value_delimiter = ',')]
        cosine: Option<Vec<String>>,
        #[command(flatten)]
        common: Common,
    },
    /// Stratified train/validation/test split
    Split {
        #[arg(long = "in", default_value = "curated.jsonl")]
        input: PathBuf,
        #[arg(long, default_value = "split.json")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train a classifier
    Train {
        #[arg(long = "in", default_value = "curated.jsonl")]
        input: PathBuf,
        /// Split manifest; without it the corpus is split with --seed
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long, default_value = "model")]
        out: PathBuf,
        #[arg(long)]
        model: Option<ModelKind>,
        #[arg(long = "input-kind")]
        input_kind: Option<InputKind>,
        #[command(flatten)]
        common: Common,
    },
    /// Score a checkpoint on the test split (or on every post in --in)
    Eval {
        #[arg(long, default_value = "model/model.json")]
        checkpoint: PathBuf,
        #[arg(long = "in", default_value = "curated.jsonl")]
        input: PathBuf,
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long, default_value = "eval")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Behavioral perturbation suite
    Behave {
        #[arg(long, default_value = "model/model.json")]
        checkpoint: PathBuf,
        #[arg(long = "in", default_value = "curated.jsonl")]
        input: PathBuf,
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long, default_value = "behave")]
        out: PathBuf,
        /// Comma separated; empty for the clean baseline only
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        modes: Option<Vec<PerturbationMode>>,
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
        /// Also write every perturbed set as JSON lines
        #[arg(long)]
        dump: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Comparison grid over eval reports
    Report {
        #[arg(long = "in", required = true, value_delimiter = ',')]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
}

/// Runs one command; `argv` excludes the program name.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = std::iter::once(OsString::from("mindgauge")).chain(argv.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    0
                }
                _ => {
                    let _ = e.print();
                    2
                }
            };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(&resolve(p))?,
        None => RunConfig::default(),
    };
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    Ok(cfg)
}

fn parse_curated(bytes: &[u8]) -> Result<Vec<CuratedPost>, CliError> {
    Ok(read_curated(bytes)?)
}

fn load_split(
    manifest: &mut RunManifest,
    posts: &[CuratedPost],
    split: Option<&Path>,
    cfg: &RunConfig,
) -> Result<DatasetSplit, CliError> {
    match split {
        Some(p) => {
            let p = resolve(p);
            let bytes = manifest.read(&p)?;
            let m: SplitManifest = serde_json::from_slice(&bytes).map_err(mindgauge::Error::from)?;
            Ok(DatasetSplit::from_manifest(&m, posts)?)
        }
        None => Ok(split_dataset(posts, cfg.ratios(), cfg.seed())?),
    }
}

fn json_line(v: &impl Serialize) -> Result<Vec<u8>, CliError> {
    let mut b = serde_json::to_vec_pretty(v).map_err(mindgauge::Error::from)?;
    b.push(b'\n');
    Ok(b)
}

/// What `eval` writes and `report` reads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub model: ModelKind,
    pub input_kind: InputKind,
    pub report: ClassReport,
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest {
            input,
            out,
            rejects,
            common,
        } => {
            let cfg = load_config(&common)?;
            let (input, out) = (resolve(&input), resolve(&out));
            let rejects = rejects
                .map(|r| resolve(&r))
                .unwrap_or_else(|| out.with_file_name("rejects.jsonl"));
            let mut m = RunManifest::new("ingest", &cfg, None);
            let raw = read_raw_posts(&m.read(&input)?[..])?;
            let c = curate(&raw, cfg.min_upvotes(), cfg.min_tokens())?;
            m.write(&out, &write_jsonl(&c.curated)?)?;
            m.write(&rejects, &write_jsonl(&c.rejects)?)?;
            m.save(&sidecar(&out))?;
            println!("{} curated, {} rejected", c.curated.len(), c.rejects.len());
        }
        Command::Stats {
            input,
            out,
            cosine,
            common,
        } => {
            let cfg = load_config(&common)?;
            let (input, out) = (resolve(&input), resolve(&out));
            let mut m = RunManifest::new("stats", &cfg, None);
            let posts = parse_curated(&m.read(&input)?)?;
            m.write(&out.join("stats.csv"), corpus_stats(&posts)?.to_csv().as_bytes())?;
            let co = keyword_cooccurrence(&posts, &RootFormSet::default())?;
            m.write(&out.join("cooccurrence.csv"), co.to_csv().as_bytes())?;
            if let Some(ids) = cosine {
                if ids.len() != 2 {
                    return Err(CliError::Usage("--cosine takes exactly two ids".into()));
                }
                let sim = post_similarity(&posts, &ids[0], &ids[1])?;
                let v = serde_json::json!({ "a": ids[0], "b": ids[1], "cosine": sim });
                m.write(&out.join("cosine.json"), &json_line(&v)?)?;
                println!("{v}");
            }
            m.save(&out.join("manifest.json"))?;
        }
        Command::Split { input, out, common } => {
            let cfg = load_config(&common)?;
            let (input, out) = (resolve(&input), resolve(&out));
            let mut m = RunManifest::new("split", &cfg, Some(cfg.seed()));
            let posts = parse_curated(&m.read(&input)?)?;
            let split = split_dataset(&posts, cfg.ratios(), cfg.seed())?;
            m.write(&out, &json_line(&split.manifest())?)?;
            m.save(&sidecar(&out))?;
            println!(
                "train {}, validation {}, test {}",
                split.train.len(),
                split.validation.len(),
                split.test.len()
            );
        }
        Command::Train {
            input,
            split,
            out,
            model,
            input_kind,
            common,
        } => {
            let mut cfg = load_config(&common)?;
            cfg.model = model.or(cfg.model);
            cfg.input_kind = input_kind.or(cfg.input_kind);
            let (input, out) = (resolve(&input), resolve(&out));
            let mc = cfg.model_config();
            let tc = cfg.train_config();
            // the vocabulary size is only known after the corpus is read
            ModelConfig { vocab_size: 1, ..mc.clone() }.validate()?;
            tc.validate()?;
            let snapshot = serde_json::json!({ "model": mc, "train": tc, "input_kind": cfg.input(), "min_frequency": cfg.min_frequency() });
            let mut m = RunManifest::new("train", snapshot, Some(tc.seed));
            let posts = parse_curated(&m.read(&input)?)?;
            let split = load_split(&mut m, &posts, split.as_deref(), &cfg)?;
            let trained = train_model(&split, cfg.input(), cfg.min_frequency(), &mc, &tc)?;
            let ck = Checkpoint::new(&trained.outcome.best, &trained.vocab, cfg.input());
            m.write(&out.join("model.json"), &ck.to_json()?)?;
            m.write(&out.join("history.csv"), trained.outcome.history_csv().as_bytes())?;
            m.save(&out.join("manifest.json"))?;
            let best = &trained.outcome.history[trained.outcome.best_epoch - 1];
            println!("best epoch {} val_acc {:.4}", best.epoch, best.val_acc);
        }
        Command::Eval {
            checkpoint,
            input,
            split,
            out,
            common,
        } => {
            let cfg = load_config(&common)?;
            let (checkpoint, input, out) = (resolve(&checkpoint), resolve(&input), resolve(&out));
            let mut m = RunManifest::new("eval", &cfg, None);
            let ck = Checkpoint::from_json(&m.read(&checkpoint)?)?;
            let (model, vocab, kind) = ck.into_parts()?;
            let posts = parse_curated(&m.read(&input)?)?;
            let test = match split {
                Some(_) => load_split(&mut m, &posts, split.as_deref(), &cfg)?.test,
                None => posts,
            };
            let examples = encode_posts(&test, kind, &vocab, &model.config)?;
            let (preds, truths) = mindgauge::eval::predict_all(&model, &examples)?;
            let report = class_report(&confusion_matrix(&preds, &truths)?)?;
            let record = EvalRecord {
                model: model.config.kind,
                input_kind: kind,
                report,
            };
            m.write(&out.join("report.json"), &json_line(&record)?)?;
            m.write(&out.join("confusion.csv"), record.report.confusion.to_csv().as_bytes())?;
            let mut summary = format!("model {} / {}\n", record.model, record.input_kind);
            summary.push_str(&record.report.summary());
            for w in &record.report.warnings {
                writeln!(summary, "warning: {w}").unwrap();
            }
            m.write(&out.join("summary.txt"), summary.as_bytes())?;
            m.save(&out.join("manifest.json"))?;
            print!("{summary}");
        }
        Command::Behave {
            checkpoint,
            input,
            split,
            out,
            modes,
            fractions,
            dump,
            common,
        } => {
            let mut cfg = load_config(&common)?;
            if modes.is_some() {
                cfg.modes = modes;
            }
            if fractions.is_some() {
                cfg.fractions = fractions;
            }
            let (checkpoint, input, out) = (resolve(&checkpoint), resolve(&input), resolve(&out));
            let mut m = RunManifest::new("behave", &cfg, Some(cfg.seed()));
            let ck = Checkpoint::from_json(&m.read(&checkpoint)?)?;
            let (model, vocab, kind) = ck.into_parts()?;
            let posts = parse_curated(&m.read(&input)?)?;
            let test = match split {
                Some(_) => load_split(&mut m, &posts, split.as_deref(), &cfg)?.test,
                None => posts,
            };
            let suite = SuiteConfig::new(cfg.modes(), cfg.fractions(), cfg.seed());
            let report = run_suite(&model, &vocab, kind, &test, &suite)?;
            m.write(&out.join("behavior_report.csv"), report.to_csv().as_bytes())?;
            m.write(&out.join("behavior_report.json"), &json_line(&report)?)?;
            if dump {
                let mut all = Vec::new();
                for &mode in &suite.modes {
                    for &f in &suite.fractions {
                        all.extend(perturb_posts(&test, mode, f, &suite)?);
                    }
                }
                m.write(&out.join("perturbed.jsonl"), &write_jsonl(&all)?)?;
            }
            m.save(&out.join("manifest.json"))?;
            print!("{}", report.to_csv());
        }
        Command::Report { inputs, out } => {
            let out = resolve(&out);
            let mut m = RunManifest::new("report", serde_json::Value::Null, None);
            let mut reports = Vec::new();
            for p in &inputs {
                let p = resolve(p);
                let rec: EvalRecord = serde_json::from_slice(&m.read(&p)?).map_err(mindgauge::Error::from)?;
                reports.push((rec.model.to_string(), rec.input_kind, rec.report));
            }
            let grid = aggregate_report(&reports);
            m.write(&out.join("table.txt"), grid.render().as_bytes())?;
            m.write(&out.join("table.csv"), grid.to_csv().as_bytes())?;
            m.save(&out.join("manifest.json"))?;
            print!("{}", grid.render());
        }
    }
    Ok(())
}
