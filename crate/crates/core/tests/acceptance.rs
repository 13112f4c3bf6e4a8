//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line.
//!
//! The learning-signal check trains six full-size helpers and is ignored by
//! default; run it with
//! `cargo test -p r2h --test acceptance -- --ignored --nocapture learning_signal`.

use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use r2h::bench::{self, run_suite_with, BenchConfig, Corpus, DataConfig, HelperSpec};
use r2h::dialog::Protocol;
use r2h::helper::{
    allowed, build_samples, build_vocab, mlm_corrupt, sparsity_value, EmptyHelper, HelperConfig, HelperModel,
    MlmExample, ModelInput, OracleHelper, TrainConfig, Trainer, TrainingSample, Vocabulary,
};
use r2h::metrics::{
    bleu2, goal_progress, metric_tokens, rouge_l, spl, success, PathOutcome, SplitSummary, DEFAULT_SUCCESS_RADIUS,
};
use r2h::neuralcore::{grad_check, grad_check_sampled, Result as NResult, Tape, Tensor, Var};
use r2h::parse_step::{format_steps, parse_by_step, rule_parse, Backend, StepInstruction};
use r2h::world::{generate_world, WorldGraph, WorldParams};

fn verdict(name: &str, pass: bool, detail: impl std::fmt::Display, started: Instant) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] {name}: {detail} ({:.1}s)", started.elapsed().as_secs_f64());
    assert!(pass, "{name}: {detail}");
}

fn rand_t(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor<f64> {
    Tensor::uniform(r, c, -1.0, 1.0, rng)
}

/// Values bounded away from zero, for the `|x|` kink.
fn away_from_zero(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor<f64> {
    rand_t(rng, r, c).map(|v| v.signum() * (v.abs() + 0.2))
}

type OpFn = Box<dyn Fn(&mut Tape<f64>, &[Var]) -> NResult<Var>>;

fn op_cases(rng: &mut ChaCha8Rng) -> Vec<(&'static str, OpFn, Vec<Tensor<f64>>)> {
    let mut neg_mask = Tensor::zeros(3, 4);
    neg_mask.set(0, 1, f64::NEG_INFINITY);
    neg_mask.set(2, 3, f64::NEG_INFINITY);
    let scatter_base = neg_mask.clone();
    vec![
        ("matmul", Box::new(|t, v| t.matmul(v[0], v[1])), vec![rand_t(rng, 3, 4), rand_t(rng, 4, 2)]),
        ("matmul_t", Box::new(|t, v| t.matmul_t(v[0], true, v[1], true)), vec![rand_t(rng, 4, 3), rand_t(rng, 2, 4)]),
        ("add", Box::new(|t, v| t.add(v[0], v[1])), vec![rand_t(rng, 3, 3), rand_t(rng, 3, 3)]),
        ("mul", Box::new(|t, v| t.mul(v[0], v[1])), vec![rand_t(rng, 3, 3), rand_t(rng, 3, 3)]),
        ("add_row", Box::new(|t, v| t.add_row(v[0], v[1])), vec![rand_t(rng, 3, 4), rand_t(rng, 1, 4)]),
        ("scale", Box::new(|t, v| Ok(t.scale(v[0], -1.7))), vec![rand_t(rng, 2, 3)]),
        (
            "layer_norm",
            Box::new(|t, v| t.layer_norm(v[0], v[1], v[2], 1e-5)),
            vec![rand_t(rng, 3, 5), rand_t(rng, 1, 5), rand_t(rng, 1, 5)],
        ),
        ("gelu", Box::new(|t, v| Ok(t.gelu(v[0]))), vec![rand_t(rng, 3, 4).map(|x| 3.0 * x)]),
        ("sigmoid", Box::new(|t, v| Ok(t.sigmoid(v[0]))), vec![rand_t(rng, 3, 4).map(|x| 4.0 * x)]),
        ("log_sigmoid", Box::new(|t, v| Ok(t.log_sigmoid(v[0]))), vec![rand_t(rng, 3, 4).map(|x| 4.0 * x)]),
        ("softmax", Box::new(|t, v| t.softmax_masked(v[0], None)), vec![rand_t(rng, 3, 4)]),
        (
            "softmax_masked (learned mask)",
            Box::new(|t, v| t.softmax_masked(v[0], Some(v[1]))),
            vec![rand_t(rng, 3, 4), rand_t(rng, 3, 4)],
        ),
        (
            "softmax_masked (-inf mask)",
            Box::new(move |t, v| {
                let m = t.leaf(neg_mask.clone());
                t.softmax_masked(v[0], Some(m))
            }),
            vec![rand_t(rng, 3, 4)],
        ),
        ("embedding", Box::new(|t, v| t.embedding(v[0], &[2, 0, 2, 3])), vec![rand_t(rng, 5, 3)]),
        (
            "cross_entropy",
            Box::new(|t, v| t.cross_entropy(v[0], &[(0, 2), (1, 0), (2, 4), (0, 1)])),
            vec![rand_t(rng, 3, 5).map(|x| 2.0 * x)],
        ),
        ("gather_rows", Box::new(|t, v| t.gather_rows(v[0], &[3, 1, 1])), vec![rand_t(rng, 4, 3)]),
        ("slice_rows", Box::new(|t, v| t.slice_rows(v[0], 1, 2)), vec![rand_t(rng, 4, 3)]),
        ("slice_cols", Box::new(|t, v| t.slice_cols(v[0], 1, 2)), vec![rand_t(rng, 3, 4)]),
        ("concat_rows", Box::new(|t, v| t.concat_rows(&[v[0], v[1]])), vec![rand_t(rng, 2, 3), rand_t(rng, 1, 3)]),
        ("concat_cols", Box::new(|t, v| t.concat_cols(&[v[0], v[1]])), vec![rand_t(rng, 2, 3), rand_t(rng, 2, 2)]),
        ("mean_rows", Box::new(|t, v| t.mean_rows(v[0], &[0, 2, 3])), vec![rand_t(rng, 4, 3)]),
        ("sum", Box::new(|t, v| Ok(t.sum(v[0]))), vec![rand_t(rng, 3, 3)]),
        ("sum_abs", Box::new(|t, v| Ok(t.sum_abs(v[0]))), vec![away_from_zero(rng, 3, 3)]),
        ("reshape", Box::new(|t, v| t.reshape(v[0], 2, 6)), vec![rand_t(rng, 3, 4)]),
        ("scatter_block", Box::new(move |t, v| t.scatter_block(&scatter_base, v[0], 1, 1)), vec![rand_t(rng, 2, 3)]),
    ]
}

fn tiny_helper_config(cos: bool) -> HelperConfig {
    HelperConfig {
        layers: 2,
        heads: 2,
        width: 8,
        ffn_mult: 2,
        t_frames: 4,
        obs_dim: 5,
        max_inquiry: 6,
        k_max: 6,
        cos_mask: cos,
        init_std: 0.3,
        ..HelperConfig::default()
    }
}

fn tiny_vocab() -> Vocabulary {
    Vocabulary::build(["where is the lamp ? go to the kitchen . stop at hallway"], &[], 64)
}

fn random_frames(rng: &mut ChaCha8Rng, cfg: &HelperConfig) -> (Vec<Vec<f64>>, Vec<bool>) {
    let valid = rng.gen_range(1..=cfg.t_frames);
    let frames = (0..cfg.t_frames)
        .map(|r| {
            if r < valid {
                (0..cfg.obs_dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
            } else {
                vec![0.0; cfg.obs_dim]
            }
        })
        .collect();
    (frames, (0..cfg.t_frames).map(|r| r < valid).collect())
}

#[test]
fn gradient_soundness() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut points = 0;
    let mut failing = Vec::new();
    for (name, f, inputs) in op_cases(&mut rng) {
        let r = grad_check(f, &inputs, 1e-5).unwrap();
        if r.max_rel_error >= 1e-4 {
            failing.push(format!("{name} {:.2e}", r.max_rel_error));
        }
        worst = worst.max(r.max_rel_error);
        points += r.checked;
    }
    for cos in [true, false] {
        let model = HelperModel::<f64>::new(tiny_helper_config(cos), tiny_vocab(), 17).unwrap();
        let (frames, validity) = random_frames(&mut rng, &model.config);
        let target = model.encode_target("go to the kitchen . stop at the lamp");
        let (response, labels) = mlm_corrupt(&target, model.vocab.len(), 3);
        let ex =
            MlmExample { inquiry: model.encode_inquiry("where is the lamp ?"), response, labels, frames, validity };
        let inputs = model.params.tensors().to_vec();
        let r = grad_check_sampled(|t, v| Ok(model.loss_with(t, v, &ex)?.total), &inputs, 1e-5, 200, 31).unwrap();
        if r.max_rel_error >= 1e-4 {
            failing.push(format!("helper loss cos={cos} {:.2e}", r.max_rel_error));
        }
        worst = worst.max(r.max_rel_error);
        points += r.checked;
    }
    let pass = failing.is_empty() && points >= 100 && started.elapsed().as_secs() < 120;
    verdict(
        "gradient soundness",
        pass,
        format!("{points} coordinates, max rel error {worst:.2e}, failing {failing:?}"),
        started,
    );
}

#[test]
fn cos_mask_structure() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut problems = Vec::new();
    let mut batches = 0;
    for seed in 0..8u64 {
        let model = HelperModel::<f64>::new(tiny_helper_config(true), tiny_vocab(), seed).unwrap();
        let (frames, validity) = random_frames(&mut rng, &model.config);
        let q = model.encode_inquiry("where is the lamp ?");
        let r = model.encode_target("go to the kitchen . stop");
        let input = ModelInput { inquiry: &q, response: &r, frames: &frames, validity: &validity };
        let rows: Vec<usize> = (0..r.len()).collect();
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, &input, &rows).unwrap();
        for &a in &out.attn {
            let p = tape.value(a);
            for i in 0..p.rows {
                for j in 0..p.cols {
                    if !allowed(q.len(), r.len(), &validity, i, j) && p.get(i, j) != 0.0 {
                        problems.push(format!("seed {seed}: attention {} at ({i},{j})", p.get(i, j)));
                    }
                }
            }
        }
        let c = tape.value(out.c.unwrap()).clone();
        if !c.data.iter().all(|&x| x > 0.0 && x < 1.0) {
            problems.push(format!("seed {seed}: C outside (0,1)"));
        }

        let k = rng.gen_range(0..r.len());
        let mut r2 = r.clone();
        r2[k] = if r2[k] == 6 { 7 } else { 6 };
        let input2 = ModelInput { response: &r2, ..input };
        let mut tape2 = Tape::new();
        let out2 = model.forward(&mut tape2, &input2, &rows).unwrap();
        let (a, b) = (tape.value(out.logits), tape2.value(out2.logits));
        for i in 0..k {
            if a.row(i) != b.row(i) {
                problems.push(format!("seed {seed}: position {i} saw a change at {k}"));
            }
        }
        if a.row(k) == b.row(k) {
            problems.push(format!("seed {seed}: position {k} ignored its own token"));
        }

        let (resp, labels) = mlm_corrupt(&r, model.vocab.len(), seed);
        let ex = MlmExample {
            inquiry: q.clone(),
            response: resp,
            labels,
            frames: frames.clone(),
            validity: validity.clone(),
        };
        let mut lt = Tape::new();
        let lv = model.loss(&mut lt, &ex).unwrap();
        let on_tape = lt.value(lv.sparse.unwrap()).item();
        let mask = model.build_cos_mask(&ex.input()).unwrap();
        let closed = sparsity_value(&mask.c.unwrap().data, model.config.lambda);
        if (on_tape - closed).abs() > 1e-12 {
            problems.push(format!("seed {seed}: sparsity {on_tape} vs closed form {closed}"));
        }
        batches += 1;
    }
    let pass = problems.is_empty() && started.elapsed().as_secs() < 60;
    verdict("COS mask structure", pass, format!("{batches} random batches, problems {problems:?}"), started);
}

fn small_data() -> DataConfig {
    DataConfig { train_worlds: 12, seen_worlds: 2, unseen_worlds: 2, tasks_per_world: 10, ..DataConfig::default() }
}

fn mean_c(model: &HelperModel<f32>, samples: &[TrainingSample]) -> f64 {
    let mut total = 0.0;
    let mut n = 0;
    for s in samples {
        let q = model.encode_inquiry(&s.inquiry);
        let r = model.encode_target(&s.target);
        let input = ModelInput { inquiry: &q, response: &r, frames: &s.obs.frames, validity: &s.obs.validity };
        let mask = model.build_cos_mask(&input).unwrap();
        let c = mask.c.unwrap();
        let m = c.rows;
        for i in 0..m {
            for j in 0..m {
                if s.obs.validity[i] && s.obs.validity[j] {
                    total += c.get(i, j);
                    n += 1;
                }
            }
        }
    }
    total / n as f64
}

#[test]
fn sparsity_effect() {
    let started = Instant::now();
    let cfg = BenchConfig { data: small_data(), ..BenchConfig::default() };
    let corpus = Corpus::synthesize(&cfg.data).unwrap();
    let worlds: HashMap<String, WorldGraph> = corpus.world_map();
    let base = TrainConfig { iterations: 1000, eval_every: 0, ..TrainConfig::default() };
    let samples = build_samples(
        corpus.tasks("train").unwrap(),
        &worlds,
        &cfg.episode.labels,
        base.window,
        base.model.t_frames,
        true,
        &Backend::rule(),
    )
    .unwrap();
    let probe: Vec<TrainingSample> = samples.iter().step_by(samples.len() / 24).take(24).cloned().collect();
    let vocab = build_vocab(&samples, &cfg.episode.labels, &base.model);
    let mut rows = Vec::new();
    let mut all_lower = true;
    for seed in [0u64, 1, 2] {
        let mut means = [0.0; 2];
        for (slot, lambda) in [0.1, 0.0].into_iter().enumerate() {
            let mut tc = base.clone();
            tc.seed = seed;
            tc.model.lambda = lambda;
            let model = HelperModel::<f32>::new(tc.model.clone(), vocab.clone(), seed).unwrap();
            let out = Trainer::new(tc, &samples).run(model).unwrap();
            assert!(out.aborted.is_none(), "{:?}", out.aborted);
            means[slot] = mean_c(&out.model, &probe);
        }
        all_lower &= means[0] < means[1];
        rows.push(format!("seed {seed}: {:.4} vs {:.4}", means[0], means[1]));
    }
    let pass = all_lower && started.elapsed().as_secs() < 15 * 60;
    verdict("sparsity effect (mean C, lambda 0.1 vs 0)", pass, rows.join("; "), started);
}

/// Floyd-Warshall over the raw edge list.
fn all_pairs(g: &WorldGraph) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
        for &(j, w) in g.neighbors(i) {
            row[j] = row[j].min(w);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

#[test]
fn metric_oracles() {
    let started = Instant::now();
    let mut mismatches = Vec::new();
    let mut checked = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for gi in 0..20u64 {
        let params = WorldParams { node_count: rng.gen_range(2..=12), ..WorldParams::default() };
        let g = generate_world(900 + gi, &params).unwrap();
        let d = all_pairs(&g);
        let n = g.node_count();
        let mut outcomes = Vec::new();
        let mut expected_sum = 0.0;
        for start in 0..n {
            for goal in 0..n {
                if g.distance(start, goal).unwrap() != d[start][goal] {
                    mismatches.push(format!("graph {gi}: distance {start}->{goal}"));
                }
                for end in 0..n {
                    checked += 1;
                    let gp = goal_progress(&g, start, end, goal).unwrap();
                    if gp != d[start][goal] - d[end][goal] {
                        mismatches.push(format!("graph {gi}: gp {start},{end},{goal}"));
                    }
                    let ok = d[end][goal] <= DEFAULT_SUCCESS_RADIUS;
                    if success(&g, end, goal, DEFAULT_SUCCESS_RADIUS).unwrap() != ok {
                        mismatches.push(format!("graph {gi}: success {end},{goal}"));
                    }
                    if start != goal {
                        let (l, p) = (d[start][goal], d[start][end] + d[end][goal]);
                        outcomes.push(PathOutcome { success: ok, shortest: l, taken: p });
                        expected_sum += if ok { l / p.max(l) } else { 0.0 };
                    }
                }
            }
        }
        if !outcomes.is_empty() {
            let got = spl(&outcomes).unwrap();
            let want = expected_sum / outcomes.len() as f64;
            if got != want {
                mismatches.push(format!("graph {gi}: spl {got} vs {want}"));
            }
        }
    }

    let t = metric_tokens;
    let fixtures: [(&str, f64, f64); 4] = [
        (
            "bleu2 the cat sat on the mat | the cat is on the mat",
            bleu2(&t("the cat sat on the mat"), &[t("the cat is on the mat")]),
            0.5f64.sqrt(),
        ),
        ("bleu2 brevity", bleu2(&t("the cat"), &[t("the cat sat on the mat")]), (-2.0f64).exp()),
        ("rouge_l one substitution", rouge_l(&t("the cat sat on the mat"), &t("the cat is on the mat")), 5.0 / 6.0),
        ("rouge_l reordered", rouge_l(&t("police killed the gunman"), &t("the gunman was killed by police")), 0.4),
    ];
    for (name, got, want) in fixtures {
        if (got - want).abs() > 1e-6 {
            mismatches.push(format!("{name}: {got} vs {want}"));
        }
    }
    let pass = mismatches.is_empty() && started.elapsed().as_secs() < 120;
    verdict(
        "metric oracles",
        pass,
        format!("{checked} (start,end,goal) triples on 20 graphs, 4 text fixtures, mismatches {mismatches:?}"),
        started,
    );
}

#[test]
fn protocol_sanity() {
    let started = Instant::now();
    let mut cfg = BenchConfig { splits: vec!["val_unseen".into()], ..BenchConfig::default() };
    let corpus = Corpus::synthesize(&cfg.data).unwrap();
    let mut rows = Vec::new();
    let mut pass = corpus.tasks("val_unseen").unwrap().len() >= 100;
    for protocol in [Protocol::Rdh, Protocol::Rdi] {
        cfg.protocol = protocol;
        let oracle = run_suite_with(&cfg, &corpus, &OracleHelper).unwrap();
        let empty = run_suite_with(&cfg, &corpus, &EmptyHelper).unwrap();
        let (o, e) = (&oracle.report.splits[0], &empty.report.splits[0]);
        pass &= o.sr == 1.0 && o.spl == 1.0 && e.sr == 0.0 && e.gp == 0.0;
        rows.push(format!(
            "{protocol:?} n={}: oracle SR {} SPL {}, empty SR {} GP {}",
            o.episodes, o.sr, o.spl, e.sr, e.gp
        ));
    }
    pass &= started.elapsed().as_secs() < 300;
    verdict("protocol sanity", pass, rows.join("; "), started);
}

fn unseen_gp(cfg: &BenchConfig, corpus: &Corpus, helper: &dyn r2h::dialog::Responder) -> f64 {
    let cfg = BenchConfig { splits: vec!["val_unseen".into()], protocol: Protocol::Rdh, ..cfg.clone() };
    run_suite_with(&cfg, corpus, helper).unwrap().report.splits[0].gp
}

#[test]
#[ignore = "trains six helpers for 5k steps each"]
fn learning_signal() {
    let started = Instant::now();
    let cfg = BenchConfig::default();
    let corpus = Corpus::synthesize(&cfg.data).unwrap();
    let oracle = unseen_gp(&cfg, &corpus, &OracleHelper);
    let empty = unseen_gp(&cfg, &corpus, &EmptyHelper);
    let mut rows = Vec::new();
    let mut wins = 0;
    let mut on_fractions = Vec::new();
    for seed in [0u64, 1, 2] {
        let mut gp = [0.0; 2];
        for (slot, cos) in [true, false].into_iter().enumerate() {
            let mut tc = cfg.train.clone();
            tc.seed = seed;
            tc.model.cos_mask = cos;
            let trained = bench::train(&cfg, &corpus, &tc).unwrap();
            let helper = r2h::helper::ModelHelper::new("trained", trained.model);
            gp[slot] = unseen_gp(&cfg, &corpus, &helper);
            println!("seed {seed} cos_mask={cos}: best step {} unseen GP {:.4}", trained.best_step, gp[slot]);
        }
        let fraction = (gp[0] - empty) / (oracle - empty);
        on_fractions.push(fraction);
        if gp[0] > gp[1] {
            wins += 1;
        }
        rows.push(format!("seed {seed}: on {:.3} off {:.3}", gp[0], gp[1]));
    }
    let mean_fraction = on_fractions.iter().sum::<f64>() / on_fractions.len() as f64;
    let gap_ok = mean_fraction >= 0.5;
    let pass = gap_ok && wins >= 2 && started.elapsed().as_secs() < 2 * 3600;
    verdict(
        "learning signal",
        pass,
        format!(
            "oracle {oracle:.3}, empty {empty:.3}, cos-on gap fractions {on_fractions:.3?} (mean {mean_fraction:.3}), cos-on wins {wins}/3; {}",
            rows.join("; ")
        ),
        started,
    );
}

fn random_step(rng: &mut ChaCha8Rng) -> String {
    const VERBS: [&str; 6] = ["Go to", "Enter", "Walk through", "Turn toward", "Exit", "Stop at"];
    const OBJECTS: [&str; 8] =
        ["the kitchen", "the bedroom", "the hallway", "the lamp", "the stairs", "it", "the door", "the sofa"];
    const TAILS: [&str; 4] = ["", " on the left", " a little", " by the window"];
    format!(
        "{} {}{}.",
        VERBS[rng.gen_range(0..VERBS.len())],
        OBJECTS[rng.gen_range(0..OBJECTS.len())],
        TAILS[rng.gen_range(0..TAILS.len())]
    )
}

fn norm(steps: &[StepInstruction]) -> Vec<String> {
    steps.iter().map(|s| s.text.to_lowercase().trim_end_matches(['.', '!', '?']).to_string()).collect()
}

#[test]
fn parse_by_step_fixtures() {
    let started = Instant::now();
    let rows: [(&str, &[&str]); 4] = [
        (
            "Go into the bedroom and walk through it and exit it by using a door on the left.",
            &["Enter the bedroom.", "Walk through it.", "Exit by using a door on the left."],
        ),
        (
            "Yeah keep going around the outside till you get to the end. And sorry about the mixup at first.",
            &["Yeah.", "Keep going around the outside.", "Get to the end."],
        ),
        (
            "Go straight a little, then the right and go downstairs.",
            &["Go straight a little.", "Go right.", "Go downstairs."],
        ),
        ("I would go back.", &["Go back."]),
    ];
    let mut problems = Vec::new();
    for (input, want) in rows {
        let got = norm(&rule_parse(input));
        let want: Vec<String> = want.iter().map(|w| w.to_lowercase().trim_end_matches('.').to_string()).collect();
        if got != want {
            problems.push(format!("{input:?} -> {got:?}"));
        }
    }
    let backend = Backend::rule();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=5);
        let steps: Vec<String> = (0..n).map(|_| random_step(&mut rng)).collect();
        let formatted = if rng.gen_bool(0.5) {
            steps.iter().enumerate().map(|(i, s)| format!("{}. {s}", i + 1)).collect::<Vec<_>>().join(" ")
        } else {
            steps.join(" ")
        };
        let once = parse_by_step(&formatted, &backend).unwrap();
        let twice = parse_by_step(&format_steps(&once), &backend).unwrap();
        if once.len() != n || twice != once {
            problems.push(format!("{formatted:?} -> {:?}", format_steps(&once)));
            if problems.len() > 5 {
                break;
            }
        }
    }
    let pass = problems.is_empty() && started.elapsed().as_secs() < 60;
    verdict(
        "parse-by-step fixtures",
        pass,
        format!("4 table rows, 1000 random strings, problems {problems:?}"),
        started,
    );
}

#[test]
fn determinism() {
    let started = Instant::now();
    let data =
        DataConfig { train_worlds: 4, seen_worlds: 1, unseen_worlds: 2, tasks_per_world: 8, ..DataConfig::default() };
    let mut cfg = BenchConfig { data, seeds: vec![0, 1], ..BenchConfig::default() };
    cfg.performer.noise = 0.2;
    cfg.train.iterations = 40;
    cfg.train.eval_every = 20;
    cfg.train.model.width = 32;

    let mut outputs = Vec::new();
    for _ in 0..2 {
        let corpus = Corpus::synthesize(&cfg.data).unwrap();
        let mut run = Vec::new();
        for protocol in [Protocol::Rdh, Protocol::Rdi] {
            let c = BenchConfig { protocol, helper: HelperSpec::Oracle, ..cfg.clone() };
            run.push(bench::report_json(&run_suite_with(&c, &corpus, &OracleHelper).unwrap().report));
            let trained = bench::train(&c, &corpus, &c.train).unwrap();
            let helper = r2h::helper::ModelHelper::new("trained", trained.model);
            run.push(bench::report_json(&run_suite_with(&c, &corpus, &helper).unwrap().report));
        }
        outputs.push(run);
    }
    let same = outputs[0] == outputs[1];
    let summaries: Vec<SplitSummary> = serde_json::from_str::<serde_json::Value>(&outputs[0][1]).unwrap()["splits"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| serde_json::from_value(s.clone()).unwrap())
        .collect();
    verdict(
        "determinism",
        same,
        format!(
            "{} report pairs byte-identical: {same}; trained RDH GP {:?}",
            outputs[0].len(),
            summaries.iter().map(|s| s.gp).collect::<Vec<_>>()
        ),
        started,
    );
}
