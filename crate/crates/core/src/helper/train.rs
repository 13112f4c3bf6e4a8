//! MLM corruption, example construction and the training loop.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{HelperConfig, HelperModel, MlmExample};
use super::vocab::{Vocabulary, MSK_ID, SPECIALS};
use super::HelperError;
use crate::neuralcore::{AdamW, AdamWConfig, NeuralError, Scalar, Tape, Tensor};
use crate::parse_step::{training_target, Backend};
use crate::tasks::TaskInstance;
use crate::world::{LabelSet, ObservationSequence, WorldGraph, DEFAULT_WINDOW};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    #[serde(flatten)]
    pub model: HelperConfig,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub seed: u64,
    pub parse_by_step: bool,
    /// Steps between checkpoint evaluations; 0 evaluates only at the end.
    pub eval_every: usize,
    pub window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: HelperConfig::default(),
            lr: 1e-4,
            weight_decay: 1e-6,
            batch_size: 6,
            iterations: 5000,
            seed: 0,
            parse_by_step: true,
            eval_every: 1000,
            window: DEFAULT_WINDOW,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), HelperError> {
        self.model.validate()?;
        if self.batch_size == 0 {
            return Err(HelperError::Config("batch_size must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(HelperError::Config("lr must be positive".into()));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> AdamWConfig {
        AdamWConfig { lr: self.lr, weight_decay: self.weight_decay, ..AdamWConfig::default() }
    }
}

/// Raw text plus observations for one supervised turn.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub inquiry: String,
    pub target: String,
    pub obs: ObservationSequence,
}

/// One sample per recorded turn, observations taken at the turn's performer node.
pub fn build_samples(
    tasks: &[TaskInstance],
    worlds: &HashMap<String, WorldGraph>,
    labels: &LabelSet,
    window: usize,
    t_frames: usize,
    parse_by_step: bool,
    backend: &Backend,
) -> Result<Vec<TrainingSample>, HelperError> {
    let mut out = Vec::new();
    for task in tasks {
        let g =
            worlds.get(&task.world_id).ok_or_else(|| HelperError::Data(format!("unknown world {}", task.world_id)))?;
        let goal = task.goal_idx(g)?;
        for turn in &task.oracle_dialog.turns {
            let node = match &turn.performer_node {
                Some(id) => g.node_index(id)?,
                None => task.start_idx(g)?,
            };
            let obs = g.sample_observations(node, goal, window, t_frames, labels)?;
            let target = if parse_by_step {
                training_target(&turn.response, backend).map_err(|e| HelperError::Data(e.to_string()))?
            } else {
                turn.response.to_lowercase()
            };
            out.push(TrainingSample { inquiry: turn.inquiry.clone(), target, obs });
        }
    }
    Ok(out)
}

/// Vocabulary over sample text, every label and enumerators up to `k_max`.
pub fn build_vocab(samples: &[TrainingSample], labels: &LabelSet, config: &HelperConfig) -> Vocabulary {
    let mut extra: Vec<String> = labels.rooms.iter().chain(&labels.objects).cloned().collect();
    extra.extend((1..=config.k_max).map(|i| format!("{i}.")));
    let texts = samples.iter().flat_map(|s| [s.inquiry.as_str(), s.target.as_str()]);
    Vocabulary::build(texts, &extra, config.max_vocab)
}

/// Replaces `max(1, round(0.8 L))` positions with [MSK] and the next
/// `round(0.1 L)` (bounded by what is left) with random non-special ids,
/// positions drawn by a seeded shuffle. Returns the corrupted sequence and
/// `(position, original id)` labels.
pub fn mlm_corrupt(tokens: &[usize], vocab_len: usize, seed: u64) -> (Vec<usize>, Vec<(usize, usize)>) {
    let n = tokens.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_mask = ((0.8 * n as f64).round() as usize).max(1).min(n);
    let n_rand = ((0.1 * n as f64).round() as usize).min(n - n_mask);
    let mut out = tokens.to_vec();
    let mut labels = Vec::with_capacity(n_mask + n_rand);
    for &p in &order[..n_mask] {
        out[p] = MSK_ID;
        labels.push((p, tokens[p]));
    }
    let lo = SPECIALS.len();
    for &p in &order[n_mask..n_mask + n_rand] {
        out[p] = if vocab_len > lo { rng.gen_range(lo..vocab_len) } else { MSK_ID };
        labels.push((p, tokens[p]));
    }
    labels.sort_unstable();
    (out, labels)
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    x ^= x >> 33;
    x = x.wrapping_mul(0xff51_afd7_ed55_8ccd);
    x ^ (x >> 33)
}

/// Corrupted example for `sample`; `seed` fixes the corruption.
pub fn make_example<T: Scalar>(model: &HelperModel<T>, sample: &TrainingSample, seed: u64) -> MlmExample {
    let target = model.encode_target(&sample.target);
    let (response, labels) = mlm_corrupt(&target, model.vocab.len(), seed);
    MlmExample {
        inquiry: model.encode_inquiry(&sample.inquiry),
        response,
        labels,
        frames: sample.obs.frames.clone(),
        validity: sample.obs.validity.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalBatch {
    pub examples: Vec<MlmExample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub mlm: f64,
    pub sparse: f64,
}

/// Batch-mean losses and averaged parameter gradients.
pub fn batch_gradients<T: Scalar>(
    model: &HelperModel<T>,
    batch: &MultimodalBatch,
) -> Result<(StepLosses, Vec<Tensor<T>>), HelperError> {
    if batch.examples.is_empty() {
        return Err(HelperError::Data("empty batch".into()));
    }
    let per: Vec<Result<(f64, f64, Vec<Tensor<T>>), NeuralError>> = batch
        .examples
        .par_iter()
        .map(|ex| {
            let mut tape = Tape::new();
            let l = model.loss(&mut tape, ex)?;
            let mlm = tape.value(l.mlm).item().to_f64().unwrap_or(f64::NAN);
            let sparse = l.sparse.map_or(0.0, |s| tape.value(s).item().to_f64().unwrap_or(f64::NAN));
            if !(mlm.is_finite() && sparse.is_finite()) {
                return Err(NeuralError::NonFiniteLoss(format!("mlm {mlm}, sparse {sparse}")));
            }
            let grads = tape.backward(l.total)?;
            let mut acc = model.params.zeros_like();
            grads.accumulate_params(&mut acc);
            Ok((mlm, sparse, acc))
        })
        .collect();
    let n = batch.examples.len() as f64;
    let mut total = model.params.zeros_like();
    let (mut mlm, mut sparse) = (0.0, 0.0);
    for r in per {
        let (m, s, g) = r?;
        mlm += m;
        sparse += s;
        for (t, gi) in total.iter_mut().zip(&g) {
            t.add_assign(gi);
        }
    }
    let inv = T::c(1.0 / n);
    for t in &mut total {
        for x in &mut t.data {
            *x = *x * inv;
        }
    }
    Ok((StepLosses { mlm: mlm / n, sparse: sparse / n }, total))
}

/// Forward, backward and one optimizer update on the batch mean loss.
pub fn train_step<T: Scalar>(
    model: &mut HelperModel<T>,
    batch: &MultimodalBatch,
    opt: &mut AdamW<T>,
) -> Result<StepLosses, HelperError> {
    let (losses, grads) = batch_gradients(model, batch)?;
    opt.update(&mut model.params, &grads)?;
    Ok(losses)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub step: usize,
    pub mlm: f64,
    pub sparse: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_score: Option<f64>,
}

pub struct TrainOutcome<T> {
    /// Best-scoring snapshot (the final one when no evaluator is given).
    pub model: HelperModel<T>,
    pub best_step: usize,
    pub best_score: Option<f64>,
    pub log: Vec<TrainLogEntry>,
    /// Set when training stopped on a non-finite loss or gradient.
    pub aborted: Option<String>,
}

/// Minibatch trainer; `eval` scores snapshots, higher is better.
pub struct Trainer<'a, T> {
    pub config: TrainConfig,
    pub samples: &'a [TrainingSample],
    pub log_every: usize,
    pub eval: Option<Box<dyn FnMut(&HelperModel<T>) -> Result<f64, HelperError> + 'a>>,
}

impl<'a, T: Scalar> Trainer<'a, T> {
    pub fn new(config: TrainConfig, samples: &'a [TrainingSample]) -> Self {
        Self { config, samples, log_every: 100, eval: None }
    }

    pub fn with_eval(mut self, eval: impl FnMut(&HelperModel<T>) -> Result<f64, HelperError> + 'a) -> Self {
        self.eval = Some(Box::new(eval));
        self
    }

    pub fn sample_batch(&self, model: &HelperModel<T>, step: usize, rng: &mut ChaCha8Rng) -> MultimodalBatch {
        let examples = (0..self.config.batch_size)
            .map(|b| {
                let idx = rng.gen_range(0..self.samples.len());
                make_example(model, &self.samples[idx], mix(self.config.seed, step as u64, b as u64))
            })
            .collect();
        MultimodalBatch { examples }
    }

    pub fn run(mut self, mut model: HelperModel<T>) -> Result<TrainOutcome<T>, HelperError> {
        self.config.validate()?;
        if self.samples.is_empty() {
            return Err(HelperError::Data("no training samples".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.config.seed, 0x0074_7261_696e, 0));
        let mut opt = AdamW::new(self.config.optimizer(), &model.params);
        let mut log = Vec::new();
        let mut best: Option<(f64, usize, HelperModel<T>)> = None;
        let mut aborted = None;
        let iters = self.config.iterations;
        let mut last_step = 0;
        for step in 1..=iters {
            let batch = self.sample_batch(&model, step, &mut rng);
            let losses = match train_step(&mut model, &batch, &mut opt) {
                Ok(l) => l,
                Err(HelperError::Neural(e @ (NeuralError::NonFiniteLoss(_) | NeuralError::NanGradient(_)))) => {
                    log::warn!("training aborted at step {step}: {e}");
                    aborted = Some(format!("step {step}: {e}"));
                    break;
                }
                Err(e) => return Err(e),
            };
            last_step = step;
            let at_eval = (self.config.eval_every > 0 && step % self.config.eval_every == 0) || step == iters;
            let mut entry = None;
            if at_eval {
                if let Some(eval) = self.eval.as_mut() {
                    let score = eval(&model)?;
                    log::info!("step {step}: mlm {:.4} sparse {:.4} eval {score:.4}", losses.mlm, losses.sparse);
                    if best.as_ref().map_or(true, |(b, _, _)| score > *b) {
                        best = Some((score, step, model.clone()));
                    }
                    entry = Some(score);
                }
            }
            if entry.is_some() || step % self.log_every.max(1) == 0 || step == 1 {
                log.push(TrainLogEntry { step, mlm: losses.mlm, sparse: losses.sparse, eval_score: entry });
            }
        }
        Ok(match best {
            Some((score, step, m)) => TrainOutcome { model: m, best_step: step, best_score: Some(score), log, aborted },
            None => TrainOutcome { model, best_step: last_step, best_score: None, log, aborted },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corruption_counts() {
        let toks: Vec<usize> = (10..20).collect();
        let (out, labels) = mlm_corrupt(&toks, 40, 7);
        assert_eq!(out.iter().filter(|&&t| t == MSK_ID).count(), 8);
        assert_eq!(labels.len(), 9);
        let untouched = (0..10).filter(|p| !labels.iter().any(|(q, _)| q == p)).count();
        assert_eq!(untouched, 1);
        for &(p, id) in &labels {
            assert_eq!(toks[p], id);
        }
        assert_eq!(mlm_corrupt(&toks, 40, 7), (out, labels));
    }

    #[test]
    fn single_token_is_masked() {
        let (out, labels) = mlm_corrupt(&[9], 40, 1);
        assert_eq!(out, vec![MSK_ID]);
        assert_eq!(labels, vec![(0, 9)]);
    }
}
