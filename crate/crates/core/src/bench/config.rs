use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::dialog::{EpisodeOptions, Protocol};
use crate::helper::TrainConfig;
use crate::performer::PerformerConfig;
use crate::tasks::SynthOptions;
use crate::world::WorldParams;

/// Where tasks come from: a saved corpus directory or fresh synthesis.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    /// Load `worlds/`, `train.jsonl`, `val_seen.jsonl`, `val_unseen.jsonl` from here when set.
    pub dir: Option<PathBuf>,
    pub seed: u64,
    pub train_worlds: usize,
    /// Training worlds that also get held-out tasks.
    pub seen_worlds: usize,
    pub unseen_worlds: usize,
    pub tasks_per_world: usize,
    pub world: WorldParams,
    pub synth: SynthOptions,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dir: None,
            seed: 7,
            train_worlds: 40,
            seen_worlds: 5,
            unseen_worlds: 5,
            tasks_per_world: 20,
            world: WorldParams::default(),
            synth: SynthOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HelperSpec {
    #[default]
    Oracle,
    Empty,
    Echo,
    Checkpoint { path: PathBuf },
}

/// Grid values for the ablation; each list is one factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationConfig {
    pub cos_mask: Vec<bool>,
    pub parse_by_step: Vec<bool>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self { cos_mask: vec![true, false], parse_by_step: vec![true, false] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub data: DataConfig,
    pub helper: HelperSpec,
    pub performer: PerformerConfig,
    pub protocol: Protocol,
    pub splits: Vec<String>,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
    pub episode: EpisodeOptions,
    /// Recorded turn replaced in RDH; the last turn when unset.
    pub rdh_turn: Option<usize>,
    pub train: TrainConfig,
    pub ablation: AblationConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            helper: HelperSpec::default(),
            performer: PerformerConfig::default(),
            protocol: Protocol::Rdh,
            splits: vec!["val_seen".into(), "val_unseen".into()],
            seeds: vec![0],
            output_dir: None,
            episode: EpisodeOptions::default(),
            rdh_turn: None,
            train: TrainConfig::default(),
            ablation: AblationConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn from_toml(s: &str) -> Result<Self, BenchError> {
        let cfg: Self = toml::from_str(s).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.seeds.is_empty() {
            return Err(BenchError::Config("seeds must not be empty".into()));
        }
        if self.splits.is_empty() {
            return Err(BenchError::Config("splits must not be empty".into()));
        }
        for s in &self.splits {
            if !super::SPLITS.contains(&s.as_str()) {
                return Err(BenchError::Config(format!("unknown split {s:?}")));
            }
        }
        if self.episode.max_turns == 0 {
            return Err(BenchError::Config("max_turns must be at least 1".into()));
        }
        self.performer.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        self.train.validate()?;
        if self.ablation.cos_mask.is_empty() || self.ablation.parse_by_step.is_empty() {
            return Err(BenchError::Config("ablation factors need at least one value".into()));
        }
        let d = &self.data;
        if d.dir.is_none() && (d.train_worlds == 0 || d.unseen_worlds == 0 || d.tasks_per_world == 0) {
            return Err(BenchError::Config("synthesis needs train and unseen worlds and tasks".into()));
        }
        if d.seen_worlds > d.train_worlds {
            return Err(BenchError::Config("seen_worlds cannot exceed train_worlds".into()));
        }
        Ok(())
    }
}
