use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::DataConfig;
use super::{BenchError, SPLITS};
use crate::tasks::{load_dataset, save_dataset, synthesize_tasks, TaskInstance};
use crate::world::{generate_world, SplitTag, WorldGraph};

/// Worlds plus tasks per split.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub worlds: BTreeMap<String, WorldGraph>,
    pub splits: BTreeMap<String, Vec<TaskInstance>>,
}

const SEEN_TASK_SALT: u64 = 0x5345_454e;

/// `train_worlds` training worlds followed by `unseen_worlds` unseen ones.
pub fn generate_worlds(cfg: &DataConfig) -> Result<BTreeMap<String, WorldGraph>, BenchError> {
    let mut worlds = BTreeMap::new();
    for i in 0..cfg.train_worlds + cfg.unseen_worlds {
        let seed = cfg.seed.wrapping_mul(1000).wrapping_add(i as u64);
        let mut g = generate_world(seed, &cfg.world)?;
        if i >= cfg.train_worlds {
            g.split_tag = SplitTag::ValUnseen;
        }
        worlds.insert(g.world_id.clone(), g);
    }
    Ok(worlds)
}

pub fn save_worlds(dir: &Path, worlds: &BTreeMap<String, WorldGraph>) -> Result<(), BenchError> {
    std::fs::create_dir_all(dir)?;
    for (id, g) in worlds {
        g.save(&dir.join(format!("{id}.json")))?;
    }
    Ok(())
}

/// Every `*.json` world in `dir`.
pub fn load_worlds(dir: &Path) -> Result<BTreeMap<String, WorldGraph>, BenchError> {
    let mut worlds = BTreeMap::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let path = e.path();
        if path.extension().is_some_and(|x| x == "json") {
            let g = WorldGraph::load(&path)?;
            worlds.insert(g.world_id.clone(), g);
        }
    }
    Ok(worlds)
}

impl Corpus {
    /// Train worlds, held-out tasks on a sample of them, and disjoint unseen worlds.
    pub fn synthesize(cfg: &DataConfig) -> Result<Self, BenchError> {
        Self::with_tasks(generate_worlds(cfg)?, cfg)
    }

    /// Synthesizes tasks on `worlds`, split by each world's tag.
    pub fn with_tasks(worlds: BTreeMap<String, WorldGraph>, cfg: &DataConfig) -> Result<Self, BenchError> {
        let tagged = |tag: SplitTag| -> Vec<String> {
            worlds.values().filter(|g| g.split_tag == tag).map(|g| g.world_id.clone()).collect()
        };
        let train_ids = tagged(SplitTag::Train);
        let unseen_ids = tagged(SplitTag::ValUnseen);
        let mut seen_ids = train_ids.clone();
        seen_ids.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
        seen_ids.truncate(cfg.seen_worlds);
        seen_ids.sort();

        let n = cfg.tasks_per_world;
        let mut train = Vec::new();
        for id in &train_ids {
            train.extend(synthesize_tasks(&worlds[id], cfg.seed, n, &cfg.synth)?);
        }
        let mut val_seen = Vec::new();
        for id in &seen_ids {
            let used: HashSet<(String, String)> =
                train.iter().filter(|t| &t.world_id == id).map(|t| (t.start.clone(), t.goal.clone())).collect();
            let fresh: Vec<TaskInstance> = synthesize_tasks(&worlds[id], cfg.seed ^ SEEN_TASK_SALT, 4 * n, &cfg.synth)?
                .into_iter()
                .filter(|t| !used.contains(&(t.start.clone(), t.goal.clone())))
                .take(n)
                .enumerate()
                .map(|(k, mut t)| {
                    t.task_id = format!("{id}-s{k:03}");
                    t
                })
                .collect();
            val_seen.extend(fresh);
        }
        let mut val_unseen = Vec::new();
        for id in &unseen_ids {
            val_unseen.extend(synthesize_tasks(&worlds[id], cfg.seed, n, &cfg.synth)?);
        }
        let splits = BTreeMap::from([
            ("train".to_string(), train),
            ("val_seen".to_string(), val_seen),
            ("val_unseen".to_string(), val_unseen),
        ]);
        Ok(Self { worlds, splits })
    }

    pub fn load_or_synthesize(cfg: &DataConfig) -> Result<Self, BenchError> {
        match &cfg.dir {
            Some(dir) => Self::load(dir),
            None => Self::synthesize(cfg),
        }
    }

    pub fn tasks(&self, split: &str) -> Result<&[TaskInstance], BenchError> {
        self.splits.get(split).map(Vec::as_slice).ok_or_else(|| BenchError::Config(format!("unknown split {split:?}")))
    }

    pub fn world(&self, id: &str) -> Result<&WorldGraph, BenchError> {
        self.worlds.get(id).ok_or_else(|| BenchError::Data(format!("unknown world {id:?}")))
    }

    pub fn world_map(&self) -> HashMap<String, WorldGraph> {
        self.worlds.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    pub fn save(&self, dir: &Path) -> Result<(), BenchError> {
        save_worlds(&dir.join("worlds"), &self.worlds)?;
        for (split, tasks) in &self.splits {
            save_dataset(&dir.join(format!("{split}.jsonl")), tasks)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, BenchError> {
        let worlds = load_worlds(&dir.join("worlds"))?;
        let map: HashMap<String, WorldGraph> = worlds.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        let mut splits = BTreeMap::new();
        for s in SPLITS {
            let path = dir.join(format!("{s}.jsonl"));
            if path.exists() {
                splits.insert(s.to_string(), load_dataset(&path, &map)?);
            }
        }
        Ok(Self { worlds, splits })
    }
}
