//! Suite orchestration: corpus setup, helper loading, RDH/RdI runs, training and ablations.

pub mod config;
pub mod corpus;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{AblationConfig, BenchConfig, DataConfig, HelperSpec};
pub use corpus::{generate_worlds, load_worlds, save_worlds, Corpus};

use crate::dialog::{run_rdh_episode, run_rdi_episode, DialogError, EpisodeResult, Protocol, Responder};
use crate::helper::{
    build_samples, build_vocab, EchoHelper, EmptyHelper, HelperError, HelperModel, ModelHelper, OracleHelper,
    TrainConfig, TrainLogEntry, Trainer,
};
use crate::metrics::{render_table, MetricError, MetricReport, SplitSummary};
use crate::parse_step::Backend;
use crate::performer::{Performer, PerformerConfig};
use crate::tasks::{seed_from_key, TaskError, TaskInstance};
use crate::world::WorldError;

pub const SPLITS: [&str; 3] = ["train", "val_seen", "val_unseen"];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid dataset: {0}")]
    Data(String),
    #[error("missing checkpoint {0}")]
    MissingCheckpoint(String),
    #[error(transparent)]
    Helper(#[from] HelperError),
    #[error(transparent)]
    Dialog(#[from] DialogError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Builds the responder named by `spec`.
pub fn load_responder(spec: &HelperSpec) -> Result<Box<dyn Responder>, BenchError> {
    Ok(match spec {
        HelperSpec::Oracle => Box::new(OracleHelper),
        HelperSpec::Empty => Box::new(EmptyHelper),
        HelperSpec::Echo => Box::new(EchoHelper),
        HelperSpec::Checkpoint { path } => {
            if !path.exists() {
                return Err(BenchError::MissingCheckpoint(path.display().to_string()));
            }
            let model = HelperModel::<f32>::load(path)?;
            let label = path.file_stem().map_or_else(|| "model".to_string(), |s| s.to_string_lossy().into_owned());
            Box::new(ModelHelper::new(label, model))
        }
    })
}

/// Per-episode performer seed derived from the run seed and task id.
pub fn episode_seed(seed: u64, task_id: &str) -> u64 {
    seed_from_key(&format!("{seed}/{task_id}"))
}

/// Runs one episode per task under `protocol`.
pub fn run_episodes(
    cfg: &BenchConfig,
    corpus: &Corpus,
    tasks: &[TaskInstance],
    helper: &dyn Responder,
    seed: u64,
) -> Result<Vec<EpisodeResult>, BenchError> {
    tasks
        .par_iter()
        .map(|task| {
            let g = corpus.world(&task.world_id)?;
            let pcfg = PerformerConfig { seed: episode_seed(seed, &task.task_id), ..cfg.performer.clone() };
            let mut performer =
                Performer::new(pcfg, cfg.episode.labels.clone()).map_err(|e| BenchError::Config(e.to_string()))?;
            let ep = match cfg.protocol {
                Protocol::Rdh => {
                    let last = task.oracle_dialog.len().saturating_sub(1);
                    let turn = cfg.rdh_turn.map_or(last, |t| t.min(last));
                    run_rdh_episode(task, turn, helper, &mut performer, g, &cfg.episode)?
                }
                Protocol::Rdi => run_rdi_episode(task, helper, &mut performer, g, &cfg.episode)?,
            };
            Ok(ep)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutput {
    pub report: MetricReport,
    pub episodes: Vec<EpisodeResult>,
}

fn protocol_name(p: Protocol) -> &'static str {
    match p {
        Protocol::Rdh => "rdh",
        Protocol::Rdi => "rdi",
    }
}

/// Every (split, seed, task) episode for one helper, aggregated per split.
pub fn run_suite_with(cfg: &BenchConfig, corpus: &Corpus, helper: &dyn Responder) -> Result<SuiteOutput, BenchError> {
    cfg.validate()?;
    let mut splits = Vec::new();
    let mut episodes = Vec::new();
    for split in &cfg.splits {
        let tasks = corpus.tasks(split)?;
        let mut eps = Vec::new();
        for &seed in &cfg.seeds {
            eps.extend(run_episodes(cfg, corpus, tasks, helper, seed)?);
        }
        splits.push(SplitSummary::from_episodes(split, &eps)?);
        episodes.extend(eps);
    }
    let report = MetricReport { helper: helper.name(), protocol: protocol_name(cfg.protocol).into(), splits };
    Ok(SuiteOutput { report, episodes })
}

/// Loads data and helper from the configuration, runs, and writes outputs.
pub fn run_suite(cfg: &BenchConfig) -> Result<SuiteOutput, BenchError> {
    cfg.validate()?;
    let corpus = Corpus::load_or_synthesize(&cfg.data)?;
    let helper = load_responder(&cfg.helper)?;
    let out = run_suite_with(cfg, &corpus, helper.as_ref())?;
    if let Some(dir) = &cfg.output_dir {
        write_suite(dir, &out)?;
    }
    Ok(out)
}

pub fn write_suite(dir: &Path, out: &SuiteOutput) -> Result<(), BenchError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), report_json(&out.report))?;
    std::fs::write(dir.join("report.txt"), render_table(std::slice::from_ref(&out.report)))?;
    let mut lines = String::new();
    for e in &out.episodes {
        lines.push_str(&serde_json::to_string(e).expect("episode serializes"));
        lines.push('\n');
    }
    std::fs::write(dir.join("episodes.jsonl"), lines)?;
    Ok(())
}

pub fn report_json(report: &MetricReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

/// Mean RDH goal progress of `model` on `tasks`.
pub fn model_gp(
    cfg: &BenchConfig,
    corpus: &Corpus,
    tasks: &[TaskInstance],
    model: &HelperModel<f32>,
) -> Result<f64, BenchError> {
    let eval_cfg = BenchConfig { protocol: Protocol::Rdh, ..cfg.clone() };
    let helper = ModelHelper::new("candidate", model.clone());
    let eps = run_episodes(&eval_cfg, corpus, tasks, &helper, cfg.seeds[0])?;
    Ok(SplitSummary::from_episodes("eval", &eps)?.gp)
}

#[derive(Debug)]
pub struct TrainedHelper {
    pub model: HelperModel<f32>,
    pub best_step: usize,
    pub best_seen_gp: Option<f64>,
    pub log: Vec<TrainLogEntry>,
    pub aborted: Option<String>,
}

/// Trains on the train split, choosing the snapshot with the best seen-split RDH GP.
pub fn train(cfg: &BenchConfig, corpus: &Corpus, tc: &TrainConfig) -> Result<TrainedHelper, BenchError> {
    tc.validate()?;
    let train_tasks = corpus.tasks("train")?;
    if train_tasks.is_empty() {
        return Err(BenchError::Data("training split is empty".into()));
    }
    let worlds = corpus.world_map();
    let samples = build_samples(
        train_tasks,
        &worlds,
        &cfg.episode.labels,
        tc.window,
        tc.model.t_frames,
        tc.parse_by_step,
        &Backend::rule(),
    )?;
    let vocab = build_vocab(&samples, &cfg.episode.labels, &tc.model);
    let model = HelperModel::<f32>::new(tc.model.clone(), vocab, tc.seed)?;
    let held_out = corpus.tasks("val_seen").ok().filter(|t| !t.is_empty());
    let mut trainer = Trainer::new(tc.clone(), &samples);
    if let Some(tasks) = held_out {
        trainer = trainer.with_eval(move |m| {
            model_gp(cfg, corpus, tasks, m).map_err(|e| HelperError::Data(format!("evaluation failed: {e}")))
        });
    }
    let out = trainer.run(model)?;
    Ok(TrainedHelper {
        model: out.model,
        best_step: out.best_step,
        best_seen_gp: out.best_score,
        log: out.log,
        aborted: out.aborted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub seed: u64,
    pub cos_mask: bool,
    pub parse_by_step: bool,
    pub best_step: usize,
    pub report: MetricReport,
}

/// Difference `on - off` for one factor with the other factor held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationDelta {
    pub seed: u64,
    pub factor: String,
    pub held: bool,
    pub split: String,
    pub gp: f64,
    pub sr: f64,
    pub spl: f64,
    pub bleu2: Option<f64>,
    pub rouge_l: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub cells: Vec<AblationCell>,
    pub deltas: Vec<AblationDelta>,
}

impl AblationReport {
    pub fn cell(&self, seed: u64, cos_mask: bool, parse_by_step: bool) -> Option<&AblationCell> {
        self.cells.iter().find(|c| c.seed == seed && c.cos_mask == cos_mask && c.parse_by_step == parse_by_step)
    }
}

fn opt_sub(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(a? - b?)
}

fn deltas(cells: &[AblationCell], splits: &[String]) -> Vec<AblationDelta> {
    let mut out = Vec::new();
    for on in cells {
        for off in cells {
            if on.seed != off.seed {
                continue;
            }
            let factor = if on.cos_mask && !off.cos_mask && on.parse_by_step == off.parse_by_step {
                ("cos_mask", on.parse_by_step)
            } else if on.parse_by_step && !off.parse_by_step && on.cos_mask == off.cos_mask {
                ("parse_by_step", on.cos_mask)
            } else {
                continue;
            };
            for split in splits {
                if let (Some(a), Some(b)) = (on.report.split(split), off.report.split(split)) {
                    out.push(AblationDelta {
                        seed: on.seed,
                        factor: factor.0.into(),
                        held: factor.1,
                        split: split.clone(),
                        gp: a.gp - b.gp,
                        sr: a.sr - b.sr,
                        spl: a.spl - b.spl,
                        bleu2: opt_sub(a.bleu2, b.bleu2),
                        rouge_l: opt_sub(a.rouge_l, b.rouge_l),
                    });
                }
            }
        }
    }
    out
}

/// Trains and evaluates every grid cell for every seed on identical task lists.
pub fn run_ablation_with(cfg: &BenchConfig, corpus: &Corpus) -> Result<AblationReport, BenchError> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &seed in &cfg.seeds {
        for &pbs in &cfg.ablation.parse_by_step {
            for &cos in &cfg.ablation.cos_mask {
                let mut tc = cfg.train.clone();
                tc.seed = seed;
                tc.parse_by_step = pbs;
                tc.model.cos_mask = cos;
                log::info!("ablation cell seed={seed} cos_mask={cos} parse_by_step={pbs}");
                let trained = train(cfg, corpus, &tc)?;
                let label = format!("helper[cos={cos},pbs={pbs},seed={seed}]");
                let helper = ModelHelper::new(label, trained.model);
                let suite_cfg = BenchConfig { seeds: vec![seed], ..cfg.clone() };
                let out = run_suite_with(&suite_cfg, corpus, &helper)?;
                cells.push(AblationCell {
                    seed,
                    cos_mask: cos,
                    parse_by_step: pbs,
                    best_step: trained.best_step,
                    report: out.report,
                });
            }
        }
    }
    let deltas = deltas(&cells, &cfg.splits);
    Ok(AblationReport { cells, deltas })
}

pub fn run_ablation(cfg: &BenchConfig) -> Result<AblationReport, BenchError> {
    cfg.validate()?;
    let corpus = Corpus::load_or_synthesize(&cfg.data)?;
    let report = run_ablation_with(cfg, &corpus)?;
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("ablation.json"), serde_json::to_string_pretty(&report).expect("report serializes"))?;
        let reports: Vec<MetricReport> = report.cells.iter().map(|c| c.report.clone()).collect();
        std::fs::write(dir.join("ablation.txt"), render_table(&reports))?;
    }
    Ok(report)
}
