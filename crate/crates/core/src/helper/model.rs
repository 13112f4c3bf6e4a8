//! Pre-LN multimodal transformer over `[inquiry | response | visual]`.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mask::{assemble_mask, CosAttentionMask, MaskVars};
use super::vocab::{Vocabulary, CLS_ID, EOS_ID, MSK_ID, SPECIALS};
use super::HelperError;
use crate::neuralcore::{Manifest, NeuralError, ParamStore, Result as NResult, Scalar, Tape, Tensor, Var};
use crate::world::{LabelSet, ObservationSequence, DEFAULT_T_FRAMES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HelperConfig {
    pub layers: usize,
    pub heads: usize,
    pub width: usize,
    pub ffn_mult: usize,
    pub t_frames: usize,
    pub obs_dim: usize,
    /// Inquiry positions including the trailing CLS.
    pub max_inquiry: usize,
    pub k_max: usize,
    pub lambda: f64,
    pub cos_mask: bool,
    pub init_std: f64,
    pub max_vocab: usize,
}

impl Default for HelperConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            heads: 4,
            width: 128,
            ffn_mult: 4,
            t_frames: DEFAULT_T_FRAMES,
            obs_dim: LabelSet::standard().obs_dim(),
            max_inquiry: 24,
            k_max: 32,
            lambda: 0.1,
            cos_mask: true,
            init_std: 0.02,
            max_vocab: 512,
        }
    }
}

impl HelperConfig {
    pub fn validate(&self) -> Result<(), HelperError> {
        let bad = |m: &str| Err(HelperError::Config(m.to_string()));
        if self.layers == 0 || self.heads == 0 || self.width == 0 || self.ffn_mult == 0 {
            return bad("layers, heads, width and ffn_mult must be positive");
        }
        if self.width % self.heads != 0 {
            return bad("width must be divisible by heads");
        }
        if self.t_frames == 0 || self.obs_dim == 0 || self.max_inquiry < 2 || self.k_max < 2 {
            return bad("t_frames, obs_dim must be positive; max_inquiry and k_max at least 2");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct LayerIds {
    ln1_g: usize,
    ln1_b: usize,
    wq: usize,
    bq: usize,
    wk: usize,
    bk: usize,
    wv: usize,
    bv: usize,
    wo: usize,
    bo: usize,
    ln2_g: usize,
    ln2_b: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone)]
struct ParamIds {
    tok: usize,
    q_pos: usize,
    r_pos: usize,
    vis_proj: usize,
    vis_pos: usize,
    layers: Vec<LayerIds>,
    lnf_g: usize,
    lnf_b: usize,
    out_w: usize,
    out_b: usize,
    cos_w1: usize,
    cos_b1: usize,
    cos_w2: usize,
    cos_b2: usize,
}

/// Token ids plus observation frames for one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ModelInput<'a> {
    /// Inquiry ids ending with CLS.
    pub inquiry: &'a [usize],
    pub response: &'a [usize],
    pub frames: &'a [Vec<f64>],
    pub validity: &'a [bool],
}

pub struct ForwardOut {
    /// Logits for the requested response positions, in request order.
    pub logits: Var,
    pub c: Option<Var>,
    pub mask: Var,
    pub ve: Var,
    /// Attention probabilities, `layers * heads` entries.
    pub attn: Vec<Var>,
}

#[derive(Debug, Clone)]
pub struct HelperModel<T> {
    pub config: HelperConfig,
    pub vocab: Vocabulary,
    pub params: ParamStore<T>,
    ids: ParamIds,
}

fn layout<T: Scalar>(cfg: &HelperConfig, vocab: usize, rng: &mut ChaCha8Rng) -> (ParamStore<T>, ParamIds) {
    let (w, s) = (cfg.width, cfg.init_std);
    let m = cfg.t_frames;
    let mut p = ParamStore::new();
    let mut rn = |p: &mut ParamStore<T>, name: &str, r: usize, c: usize| p.add(name, Tensor::randn(r, c, s, rng));
    let tok = rn(&mut p, "tok_emb", vocab, w);
    let q_pos = rn(&mut p, "inquiry_pos", cfg.max_inquiry, w);
    let r_pos = rn(&mut p, "response_pos", cfg.k_max, w);
    let vis_proj = rn(&mut p, "vis_proj", cfg.obs_dim, w);
    let vis_pos = rn(&mut p, "vis_pos", cfg.t_frames, w);
    let mut layers = Vec::new();
    for l in 0..cfg.layers {
        let n = |x: &str| format!("layer{l}.{x}");
        let f = w * cfg.ffn_mult;
        let ln1_g = p.add(&n("ln1.gamma"), Tensor::full(1, w, T::one()));
        let ln1_b = p.add(&n("ln1.beta"), Tensor::zeros(1, w));
        let wq = rn(&mut p, &n("attn.wq"), w, w);
        let bq = p.add(&n("attn.bq"), Tensor::zeros(1, w));
        let wk = rn(&mut p, &n("attn.wk"), w, w);
        let bk = p.add(&n("attn.bk"), Tensor::zeros(1, w));
        let wv = rn(&mut p, &n("attn.wv"), w, w);
        let bv = p.add(&n("attn.bv"), Tensor::zeros(1, w));
        let wo = rn(&mut p, &n("attn.wo"), w, w);
        let bo = p.add(&n("attn.bo"), Tensor::zeros(1, w));
        let ln2_g = p.add(&n("ln2.gamma"), Tensor::full(1, w, T::one()));
        let ln2_b = p.add(&n("ln2.beta"), Tensor::zeros(1, w));
        let w1 = rn(&mut p, &n("ffn.w1"), w, f);
        let b1 = p.add(&n("ffn.b1"), Tensor::zeros(1, f));
        let w2 = rn(&mut p, &n("ffn.w2"), f, w);
        let b2 = p.add(&n("ffn.b2"), Tensor::zeros(1, w));
        layers.push(LayerIds { ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2 });
    }
    let lnf_g = p.add("ln_f.gamma", Tensor::full(1, w, T::one()));
    let lnf_b = p.add("ln_f.beta", Tensor::zeros(1, w));
    let out_w = rn(&mut p, "out.w", w, vocab);
    let out_b = p.add("out.b", Tensor::zeros(1, vocab));
    let cos_w1 = rn(&mut p, "cos.w1", w, w);
    let cos_b1 = p.add("cos.b1", Tensor::zeros(1, w));
    let cos_w2 = rn(&mut p, "cos.w2", w, m * m);
    let cos_b2 = p.add("cos.b2", Tensor::zeros(1, m * m));
    let ids = ParamIds {
        tok,
        q_pos,
        r_pos,
        vis_proj,
        vis_pos,
        layers,
        lnf_g,
        lnf_b,
        out_w,
        out_b,
        cos_w1,
        cos_b1,
        cos_w2,
        cos_b2,
    };
    (p, ids)
}

const LN_EPS: f64 = 1e-5;

impl<T: Scalar> HelperModel<T> {
    pub fn new(config: HelperConfig, vocab: Vocabulary, seed: u64) -> Result<Self, HelperError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (params, ids) = layout(&config, vocab.len(), &mut rng);
        Ok(Self { config, vocab, params, ids })
    }

    /// Replaces parameters, keeping names and shapes.
    pub fn with_params(config: HelperConfig, vocab: Vocabulary, params: ParamStore<T>) -> Result<Self, HelperError> {
        let template = Self::new(config, vocab, 0)?;
        if template.params.names() != params.names()
            || template.params.tensors().iter().zip(params.tensors()).any(|(a, b)| a.shape() != b.shape())
        {
            return Err(HelperError::Config("parameter layout does not match the configuration".into()));
        }
        Ok(Self { params, ..template })
    }

    pub fn cast<U: Scalar>(&self) -> HelperModel<U> {
        HelperModel {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            params: self.params.cast(),
            ids: self.ids.clone(),
        }
    }

    /// Inquiry ids truncated to fit, with CLS appended.
    pub fn encode_inquiry(&self, inquiry: &str) -> Vec<usize> {
        let mut ids = self.vocab.encode(inquiry);
        ids.truncate(self.config.max_inquiry - 1);
        ids.push(CLS_ID);
        ids
    }

    /// Target ids truncated to `k_max - 1`, with EOS appended.
    pub fn encode_target(&self, target: &str) -> Vec<usize> {
        let mut ids = self.vocab.encode(target);
        ids.truncate(self.config.k_max - 1);
        ids.push(EOS_ID);
        ids
    }

    /// `frames @ vis_proj + vis_pos`; padded frames are zero so they reduce to the position term.
    pub fn encode_visual(&self, tape: &mut Tape<T>, pv: &[Var], frames: &[Vec<f64>]) -> NResult<Var> {
        let c = &self.config;
        if frames.len() != c.t_frames {
            return Err(NeuralError::Shape {
                op: "encode_visual",
                left: [frames.len(), 0],
                right: [c.t_frames, c.obs_dim],
            });
        }
        let mut data = Vec::with_capacity(c.t_frames * c.obs_dim);
        for f in frames {
            if f.len() != c.obs_dim {
                return Err(NeuralError::Shape { op: "encode_visual", left: [1, f.len()], right: [1, c.obs_dim] });
            }
            data.extend(f.iter().map(|&x| T::c(x)));
        }
        let x = tape.leaf(Tensor::from_vec(c.t_frames, c.obs_dim, data)?);
        let proj = pv[self.ids.vis_proj];
        let pos = pv[self.ids.vis_pos];
        let h = tape.matmul(x, proj)?;
        tape.add(h, pos)
    }

    /// Pre-sigmoid conditional-mask scores from the mean of valid VE rows.
    pub fn cos_logits(&self, tape: &mut Tape<T>, pv: &[Var], ve: Var, validity: &[bool]) -> NResult<Var> {
        let rows: Vec<usize> = validity.iter().enumerate().filter(|(_, v)| **v).map(|(i, _)| i).collect();
        let pooled = tape.mean_rows(ve, &rows)?;
        let (w1, b1) = (pv[self.ids.cos_w1], pv[self.ids.cos_b1]);
        let (w2, b2) = (pv[self.ids.cos_w2], pv[self.ids.cos_b2]);
        let h = tape.matmul(pooled, w1)?;
        let h = tape.add(h, b1)?;
        let h = tape.gelu(h);
        let z = tape.matmul(h, w2)?;
        let z = tape.add(z, b2)?;
        let m = self.config.t_frames;
        tape.reshape(z, m, m)
    }

    fn embed_tokens(&self, tape: &mut Tape<T>, pv: &[Var], table: Var, ids: &[usize], pos_id: usize) -> NResult<Var> {
        let e = tape.embedding(table, ids)?;
        let pos_all = pv[pos_id];
        let pos = tape.slice_rows(pos_all, 0, ids.len())?;
        tape.add(e, pos)
    }

    /// Registers every parameter on the tape, in id order.
    pub fn param_vars(&self, tape: &mut Tape<T>) -> Vec<Var> {
        (0..self.params.len()).map(|i| tape.param(&self.params, i)).collect()
    }

    pub fn forward(&self, tape: &mut Tape<T>, input: &ModelInput<'_>, out_rows: &[usize]) -> NResult<ForwardOut> {
        let pv = self.param_vars(tape);
        self.forward_with(tape, &pv, input, out_rows)
    }

    /// Forward pass reading parameters from `pv` (one var per parameter id).
    pub fn forward_with(
        &self,
        tape: &mut Tape<T>,
        pv: &[Var],
        input: &ModelInput<'_>,
        out_rows: &[usize],
    ) -> NResult<ForwardOut> {
        let c = &self.config;
        let (lq, lr) = (input.inquiry.len(), input.response.len());
        if lq > c.max_inquiry || lr > c.k_max {
            return Err(NeuralError::Shape { op: "forward", left: [lq, lr], right: [c.max_inquiry, c.k_max] });
        }
        let table = pv[self.ids.tok];
        let q = self.embed_tokens(tape, pv, table, input.inquiry, self.ids.q_pos)?;
        let ve = self.encode_visual(tape, pv, input.frames)?;
        let mut parts = vec![q];
        if lr > 0 {
            parts.push(self.embed_tokens(tape, pv, table, input.response, self.ids.r_pos)?);
        }
        parts.push(ve);
        let mut x = tape.concat_rows(&parts)?;

        let logits_c = if c.cos_mask { Some(self.cos_logits(tape, pv, ve, input.validity)?) } else { None };
        let MaskVars { mask, c: cvar } = assemble_mask(tape, lq, lr, input.validity, logits_c)?;

        let dh = c.width / c.heads;
        let scale = T::c(1.0 / (dh as f64).sqrt());
        let mut attn = Vec::with_capacity(c.layers * c.heads);
        for l in &self.ids.layers {
            let p = |id: usize| pv[id];
            let (g1, b1) = (p(l.ln1_g), p(l.ln1_b));
            let h = tape.layer_norm(x, g1, b1, LN_EPS)?;
            let proj = |tape: &mut Tape<T>, w: usize, b: usize| -> NResult<Var> {
                let (wv, bv) = (pv[w], pv[b]);
                let y = tape.matmul(h, wv)?;
                tape.add_row(y, bv)
            };
            let qh = proj(tape, l.wq, l.bq)?;
            let kh = proj(tape, l.wk, l.bk)?;
            let vh = proj(tape, l.wv, l.bv)?;
            let mut heads = Vec::with_capacity(c.heads);
            for hd in 0..c.heads {
                let qs = tape.slice_cols(qh, hd * dh, dh)?;
                let ks = tape.slice_cols(kh, hd * dh, dh)?;
                let vs = tape.slice_cols(vh, hd * dh, dh)?;
                let scores = tape.matmul_t(qs, false, ks, true)?;
                let scores = tape.scale(scores, scale);
                let probs = tape.softmax_masked(scores, Some(mask))?;
                attn.push(probs);
                heads.push(tape.matmul(probs, vs)?);
            }
            let cat = tape.concat_cols(&heads)?;
            let (wo, bo) = (p(l.wo), p(l.bo));
            let o = tape.matmul(cat, wo)?;
            let o = tape.add_row(o, bo)?;
            x = tape.add(x, o)?;

            let (g2, b2) = (p(l.ln2_g), p(l.ln2_b));
            let h2 = tape.layer_norm(x, g2, b2, LN_EPS)?;
            let (w1, bb1, w2, bb2) = (p(l.w1), p(l.b1), p(l.w2), p(l.b2));
            let f = tape.matmul(h2, w1)?;
            let f = tape.add_row(f, bb1)?;
            let f = tape.gelu(f);
            let f = tape.matmul(f, w2)?;
            let f = tape.add_row(f, bb2)?;
            x = tape.add(x, f)?;
        }
        let rows: Vec<usize> = out_rows.iter().map(|&r| lq + r).collect();
        if let Some(&bad) = out_rows.iter().find(|&&r| r >= lr) {
            return Err(NeuralError::Index { op: "forward", index: bad, len: lr });
        }
        let sel = tape.gather_rows(x, &rows)?;
        let (gf, bf) = (pv[self.ids.lnf_g], pv[self.ids.lnf_b]);
        let sel = tape.layer_norm(sel, gf, bf, LN_EPS)?;
        let (ow, ob) = (pv[self.ids.out_w], pv[self.ids.out_b]);
        let logits = tape.matmul(sel, ow)?;
        let logits = tape.add_row(logits, ob)?;
        Ok(ForwardOut { logits, c: cvar, mask, ve, attn })
    }
}

/// One corrupted training example.
#[derive(Debug, Clone, PartialEq)]
pub struct MlmExample {
    pub inquiry: Vec<usize>,
    pub response: Vec<usize>,
    /// `(response position, original id)` at every corrupted position.
    pub labels: Vec<(usize, usize)>,
    pub frames: Vec<Vec<f64>>,
    pub validity: Vec<bool>,
}

impl MlmExample {
    pub fn input(&self) -> ModelInput<'_> {
        ModelInput { inquiry: &self.inquiry, response: &self.response, frames: &self.frames, validity: &self.validity }
    }
}

/// Loss variables on the tape.
#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub total: Var,
    pub mlm: Var,
    pub sparse: Option<Var>,
}

impl<T: Scalar> HelperModel<T> {
    /// Mean cross-entropy over corrupted positions plus the sparsity term.
    pub fn loss(&self, tape: &mut Tape<T>, ex: &MlmExample) -> NResult<LossVars> {
        let pv = self.param_vars(tape);
        self.loss_with(tape, &pv, ex)
    }

    pub fn loss_with(&self, tape: &mut Tape<T>, pv: &[Var], ex: &MlmExample) -> NResult<LossVars> {
        let rows: Vec<usize> = ex.labels.iter().map(|&(p, _)| p).collect();
        let out = self.forward_with(tape, pv, &ex.input(), &rows)?;
        let targets: Vec<(usize, usize)> = ex.labels.iter().enumerate().map(|(i, &(_, id))| (i, id)).collect();
        let ce = tape.cross_entropy(out.logits, &targets)?;
        let mlm = tape.scale(ce, T::c(1.0 / targets.len().max(1) as f64));
        match out.c {
            Some(c) if self.config.lambda > 0.0 => {
                let sparse = super::mask::sparsity_loss(tape, c, self.config.lambda);
                let total = tape.add(mlm, sparse)?;
                Ok(LossVars { total, mlm, sparse: Some(sparse) })
            }
            _ => Ok(LossVars { total: mlm, mlm, sparse: None }),
        }
    }

    /// Greedy left-to-right fill of `k_max` [MSK] slots, stopping at EOS.
    pub fn generate_ids(&self, inquiry: &[usize], frames: &[Vec<f64>], validity: &[bool]) -> NResult<Vec<usize>> {
        let k = self.config.k_max;
        let mut response = vec![MSK_ID; k];
        let mut out = Vec::new();
        for i in 0..k {
            let mut tape = Tape::new();
            let input = ModelInput { inquiry, response: &response[..=i], frames, validity };
            let f = self.forward(&mut tape, &input, &[i])?;
            let logits = tape.value(f.logits);
            let mut best = EOS_ID;
            let mut best_v = logits.get(0, EOS_ID);
            for id in SPECIALS.len()..self.vocab.len() {
                let v = logits.get(0, id);
                if v > best_v {
                    best = id;
                    best_v = v;
                }
            }
            if best == EOS_ID {
                break;
            }
            response[i] = best;
            out.push(best);
        }
        Ok(out)
    }

    pub fn generate_response(&self, inquiry: &str, obs: &ObservationSequence) -> NResult<String> {
        let q = self.encode_inquiry(inquiry);
        let ids = self.generate_ids(&q, &obs.frames, &obs.validity)?;
        Ok(self.vocab.decode(&ids))
    }

    /// Dense additive mask and conditional submask for one input, in f64.
    pub fn build_cos_mask(&self, input: &ModelInput<'_>) -> NResult<CosAttentionMask> {
        let model = self.cast::<f64>();
        let mut tape = Tape::<f64>::new();
        let pv = model.param_vars(&mut tape);
        let ve = model.encode_visual(&mut tape, &pv, input.frames)?;
        let logits_c =
            if model.config.cos_mask { Some(model.cos_logits(&mut tape, &pv, ve, input.validity)?) } else { None };
        let (lq, lr) = (input.inquiry.len(), input.response.len());
        let mv = assemble_mask(&mut tape, lq, lr, input.validity, logits_c)?;
        Ok(CosAttentionMask {
            dense: tape.value(mv.mask).clone(),
            c: mv.c.map(|c| tape.value(c).clone()),
            lambda: self.config.lambda,
            lq,
            lr,
        })
    }

    pub fn to_manifest(&self) -> Manifest {
        let mut meta = serde_json::Map::new();
        meta.insert("config".into(), serde_json::to_value(&self.config).expect("config serializes"));
        meta.insert("vocab".into(), serde_json::to_value(self.vocab.tokens()).expect("vocab serializes"));
        Manifest::from_store(&self.params, meta)
    }

    pub fn from_manifest(m: &Manifest) -> Result<Self, HelperError> {
        let get = |k: &str| m.metadata.get(k).cloned().ok_or_else(|| HelperError::Checkpoint(format!("missing {k}")));
        let config: HelperConfig =
            serde_json::from_value(get("config")?).map_err(|e| HelperError::Checkpoint(e.to_string()))?;
        let tokens: Vec<String> =
            serde_json::from_value(get("vocab")?).map_err(|e| HelperError::Checkpoint(e.to_string()))?;
        let mut model = Self::new(config, Vocabulary::from_tokens(tokens), 0)?;
        m.load_into(&mut model.params)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), HelperError> {
        Ok(self.to_manifest().save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, HelperError> {
        Self::from_manifest(&Manifest::load(path)?)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::helper::train::{make_example, mlm_corrupt, train_step, MultimodalBatch, TrainingSample};
    use crate::neuralcore::{grad_check_sampled, AdamW, AdamWConfig};

    pub(crate) fn tiny_config() -> HelperConfig {
        HelperConfig {
            layers: 2,
            heads: 2,
            width: 8,
            ffn_mult: 2,
            t_frames: 4,
            obs_dim: 5,
            max_inquiry: 6,
            k_max: 6,
            ..HelperConfig::default()
        }
    }

    pub(crate) fn tiny_vocab() -> Vocabulary {
        Vocabulary::build(["where is the lamp ? go to the kitchen . stop"], &[], 64)
    }

    fn frames(seed: u64, cfg: &HelperConfig, valid: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = Tensor::<f64>::uniform(cfg.t_frames, cfg.obs_dim, -1.0, 1.0, &mut rng);
        let f = (0..cfg.t_frames).map(|r| if r < valid { t.row(r).to_vec() } else { vec![0.0; cfg.obs_dim] }).collect();
        (f, (0..cfg.t_frames).map(|r| r < valid).collect())
    }

    fn example(model: &HelperModel<f64>, seed: u64) -> MlmExample {
        let (frames, validity) = frames(seed, &model.config, 3);
        let target = model.encode_target("go to the kitchen");
        let (response, labels) = mlm_corrupt(&target, model.vocab.len(), seed);
        MlmExample { inquiry: model.encode_inquiry("where is the lamp?"), response, labels, frames, validity }
    }

    #[test]
    fn full_loss_gradient_check() {
        for cos in [true, false] {
            let cfg = HelperConfig { cos_mask: cos, init_std: 0.3, ..tiny_config() };
            let model = HelperModel::<f64>::new(cfg, tiny_vocab(), 11).unwrap();
            let ex = example(&model, 5);
            let inputs: Vec<Tensor<f64>> = model.params.tensors().to_vec();
            let report =
                grad_check_sampled(|tape, vars| Ok(model.loss_with(tape, vars, &ex)?.total), &inputs, 1e-5, 150, 9)
                    .unwrap();
            assert!(report.max_rel_error < 1e-4, "cos {cos}: {report:?}");
        }
    }

    #[test]
    fn zero_frame_embeds_to_position() {
        let cfg = tiny_config();
        let model = HelperModel::<f64>::new(cfg.clone(), tiny_vocab(), 1).unwrap();
        let (mut f, _) = frames(2, &cfg, 4);
        f[2] = vec![0.0; cfg.obs_dim];
        let mut tape = Tape::new();
        let pv = model.param_vars(&mut tape);
        let ve = model.encode_visual(&mut tape, &pv, &f).unwrap();
        let pos = model.params.get("vis_pos").unwrap();
        assert_eq!(tape.value(ve).row(2), pos.row(2));
        assert_eq!(tape.value(ve).shape(), [cfg.t_frames, cfg.width]);
        let bad = vec![vec![0.0; cfg.obs_dim + 1]; cfg.t_frames];
        assert!(model.encode_visual(&mut tape, &pv, &bad).is_err());
    }

    #[test]
    fn attention_zero_where_disallowed_and_causal() {
        let cfg = tiny_config();
        let model = HelperModel::<f64>::new(cfg.clone(), tiny_vocab(), 3).unwrap();
        let (f, v) = frames(4, &cfg, 2);
        let q = model.encode_inquiry("where is the lamp?");
        let r = model.encode_target("go to the kitchen");
        let input = ModelInput { inquiry: &q, response: &r, frames: &f, validity: &v };
        let rows: Vec<usize> = (0..r.len()).collect();
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, &input, &rows).unwrap();
        let (lq, lr) = (q.len(), r.len());
        for &a in &out.attn {
            let p = tape.value(a);
            for i in 0..p.rows {
                for j in 0..p.cols {
                    if !crate::helper::mask::allowed(lq, lr, &v, i, j) {
                        assert_eq!(p.get(i, j), 0.0);
                    }
                }
            }
        }
        let c = tape.value(out.c.unwrap());
        assert!(c.data.iter().all(|&x| x > 0.0 && x < 1.0));
        let base = tape.value(out.logits).clone();
        let mut r2 = r.clone();
        r2[3] = crate::helper::vocab::UNK_ID;
        let input2 = ModelInput { response: &r2, ..input };
        let mut tape2 = Tape::new();
        let out2 = model.forward(&mut tape2, &input2, &rows).unwrap();
        let pert = tape2.value(out2.logits);
        for i in 0..3 {
            assert_eq!(base.row(i), pert.row(i));
        }
        assert_ne!(base.row(3), pert.row(3));
    }

    #[test]
    fn overfit_single_example() {
        let cfg = HelperConfig { width: 32, heads: 2, ffn_mult: 2, ..tiny_config() };
        let vocab = tiny_vocab();
        let mut model = HelperModel::<f32>::new(cfg.clone(), vocab, 5).unwrap();
        let (frames, validity) = frames(6, &cfg, 3);
        let sample = TrainingSample {
            inquiry: "where is the lamp?".into(),
            target: "go to the kitchen".into(),
            obs: ObservationSequence { frames, validity, source_nodes: vec![] },
        };
        let mut opt = AdamW::new(AdamWConfig { lr: 3e-3, ..AdamWConfig::default() }, &model.params);
        let mut last = f64::INFINITY;
        for step in 0..200u64 {
            let batch = MultimodalBatch { examples: vec![make_example(&model, &sample, step)] };
            last = train_step(&mut model, &batch, &mut opt).unwrap().mlm;
        }
        assert!(last < 0.1, "final mlm {last}");
        let out = model.generate_response(&sample.inquiry, &sample.obs).unwrap();
        assert_eq!(out, "go to the kitchen");
    }

    #[test]
    fn eos_first_gives_empty_response() {
        let cfg = tiny_config();
        let mut model = HelperModel::<f64>::new(cfg.clone(), tiny_vocab(), 2).unwrap();
        let ob = model.params.id("out.b").unwrap();
        model.params.tensor_mut(ob).set(0, EOS_ID, 100.0);
        let (f, v) = frames(1, &cfg, 2);
        let obs = ObservationSequence { frames: f, validity: v, source_nodes: vec![] };
        assert_eq!(model.generate_response("where is the lamp?", &obs).unwrap(), "");
        model.params.tensor_mut(ob).set(0, EOS_ID, -100.0);
        let ids = model.generate_ids(&model.encode_inquiry("x"), &obs.frames, &obs.validity).unwrap();
        assert_eq!(ids.len(), cfg.k_max);
    }

    #[test]
    fn checkpoint_round_trip() {
        let model = HelperModel::<f32>::new(tiny_config(), tiny_vocab(), 8).unwrap();
        let back =
            HelperModel::<f32>::from_manifest(&Manifest::from_json(&model.to_manifest().to_json()).unwrap()).unwrap();
        assert_eq!(back.config, model.config);
        assert_eq!(back.vocab, model.vocab);
        assert_eq!(back.params.tensors(), model.params.tensors());
    }
}
