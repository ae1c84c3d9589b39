//! End-to-end acceptance run. Every criterion prints one PASS/FAIL line to
//! stderr (uncaptured) and the test fails if any of them fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::HashMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use prefseq::autodiff::{check_gradients, Graph, Tensor, Var};
use prefseq::corpus::{self, Split, Vocab};
use prefseq::metrics::{bleu, lcs_len, rouge_l, weighted_reward, LabelSet, Lexicon, Objective, Reference, RewardVector, Scorer};
use prefseq::model::{sample, DecodeState, FusionMode, Model, ModelConfig, Strategy};
use prefseq::trainer::{enumerate_preference_grid, reinforce_surrogate};
use prefseq::{rng, PreferenceVector, Result as CoreResult};
use prefseq_cli::RunConfig;
use rand::Rng as _;
use support::{features_for, oracle, random_sentence, random_tensor, tiny_config, TabularPolicy};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn report(n: usize, title: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = f();
    let took = start.elapsed();
    let outcome = match (outcome, limit) {
        (Ok(_), Some(l)) if took > l => Err(format!("took {took:.1?}, limit {l:?}")),
        (o, _) => o,
    };
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    let line = format!("criterion {n} {tag}: {title} ({took:.1?}) {detail}\n");
    // Straight to the stream so the line survives libtest's capture.
    let _ = std::io::stderr().write_all(line.as_bytes());
    outcome.is_ok()
}

fn prefseq(args: &[&str]) -> std::result::Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_prefseq"))
        .args(args)
        .env_remove("PREFSEQ_THREADS")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("prefseq {args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

// Criterion 1

fn project(g: &mut Graph, x: Var, seed: u64) -> CoreResult<Var> {
    let (r, c) = g.value(x).dims("project")?;
    let mut rng = rng::seeded(seed);
    let a = g.constant(random_tensor(&mut rng, 1, r, 1.0));
    let b = g.constant(random_tensor(&mut rng, c, 1, 1.0));
    let ax = g.matmul(a, x)?;
    g.matmul(ax, b)
}

type OpFn = fn(&mut Graph, &[Var]) -> CoreResult<Var>;

fn gradient_correctness() -> Outcome {
    let ops: Vec<(&str, Vec<(usize, usize)>, OpFn)> = vec![
        ("matmul", vec![(3, 4), (4, 2)], |g, v| { let y = g.matmul(v[0], v[1])?; project(g, y, 1) }),
        ("matmul_bt", vec![(3, 4), (2, 4)], |g, v| { let y = g.matmul_bt(v[0], v[1])?; project(g, y, 2) }),
        ("transpose", vec![(3, 4)], |g, v| { let y = g.transpose(v[0])?; project(g, y, 3) }),
        ("add", vec![(3, 4), (3, 4)], |g, v| { let y = g.add(v[0], v[1])?; project(g, y, 4) }),
        ("add_row", vec![(3, 4), (1, 4)], |g, v| { let y = g.add_row(v[0], v[1])?; project(g, y, 5) }),
        ("mul_row", vec![(3, 4), (1, 4)], |g, v| { let y = g.mul_row(v[0], v[1])?; project(g, y, 6) }),
        ("scale", vec![(3, 4)], |g, v| { let y = g.scale(v[0], -1.7); project(g, y, 7) }),
        ("relu", vec![(3, 4)], |g, v| { let y = g.relu(v[0]); project(g, y, 8) }),
        ("softmax_rows", vec![(3, 5)], |g, v| { let y = g.softmax_rows(v[0])?; project(g, y, 9) }),
        ("causal_mask", vec![(4, 4)], |g, v| {
            let y = g.causal_mask(v[0])?;
            let y = g.softmax_rows(y)?;
            project(g, y, 10)
        }),
        ("concat_cols", vec![(3, 2), (3, 3)], |g, v| { let y = g.concat_cols(&[v[0], v[1]])?; project(g, y, 11) }),
        ("slice_cols", vec![(3, 5)], |g, v| { let y = g.slice_cols(v[0], 1, 4)?; project(g, y, 12) }),
        ("repeat_rows", vec![(1, 4)], |g, v| { let y = g.repeat_rows(v[0], 3)?; project(g, y, 13) }),
        ("embedding_lookup", vec![(5, 3)], |g, v| { let y = g.embedding_lookup(v[0], &[4, 0, 4, 2])?; project(g, y, 14) }),
        ("layer_norm", vec![(3, 5)], |g, v| { let y = g.layer_norm(v[0], 1e-5)?; project(g, y, 15) }),
        ("cross_entropy", vec![(3, 5)], |g, v| g.cross_entropy(v[0], &[0, 4, 2])),
        ("sum", vec![(3, 4)], |g, v| { let y = g.relu(v[0]); Ok(g.sum(y)) }),
    ];
    let mut worst = 0.0f64;
    for (name, shapes, f) in &ops {
        for seed in 0..20 {
            let mut r = rng::seeded(seed);
            let inputs: Vec<Tensor> = shapes.iter().map(|&(a, b)| random_tensor(&mut r, a, b, 2.0)).collect();
            let rep = check_gradients(&inputs, 1e-5, f).map_err(|e| e.to_string())?;
            check(rep.max_rel_error < 1e-4, || format!("{name} seed {seed}: {}", rep.max_rel_error))?;
            worst = worst.max(rep.max_rel_error);
        }
    }
    for seed in 0..20 {
        let mut c = tiny_config(7);
        if seed % 2 == 1 {
            c.fusion = FusionMode::Literal;
        }
        let model = Model::new(c.clone(), seed).map_err(|e| e.to_string())?;
        let mut r = rng::seeded(100 + seed);
        let x0 = features_for(&c, &mut r);
        let x1 = features_for(&c, &mut r);
        let p0 = PreferenceVector::new(vec![0.3, 0.7]).unwrap();
        let p1 = PreferenceVector::new(vec![1.0, 0.0]).unwrap();
        let inputs: Vec<Tensor> = model.params().tensors().to_vec();
        let rep = check_gradients(&inputs, 1e-5, |g, vars| {
            let b = model.bound_from_vars(vars.to_vec())?;
            let l0 = model.mle_loss(g, &b, &x0, &p0, &[4, 5, 6])?;
            let l1 = model.mle_loss(g, &b, &x1, &p1, &[6, 3])?;
            g.add(l0, l1)
        })
        .map_err(|e| e.to_string())?;
        check(rep.max_rel_error < 1e-4, || format!("model loss seed {seed}: {}", rep.max_rel_error))?;
        worst = worst.max(rep.max_rel_error);
    }
    Ok(format!("{} ops and the model loss over 20 seeds, worst rel err {worst:.2e}", ops.len()))
}

// Criterion 2

fn metric_oracles() -> Outcome {
    let mut r = rng::seeded(2024);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let vocab = 2 + case % 6;
        let cand = random_sentence(&mut r, 1, 12, vocab);
        let reference = random_sentence(&mut r, 1, 12, vocab);
        for n in 1..=4 {
            let d = (bleu(&cand, &reference, n).unwrap() - oracle::bleu(&cand, &reference, n)).abs();
            check(d < 1e-9, || format!("BLEU-{n} {cand:?} vs {reference:?} off by {d}"))?;
            worst = worst.max(d);
        }
        let d = (rouge_l(&cand, &reference, 1.2) - oracle::rouge_l(&cand, &reference, 1.2)).abs();
        check(d < 1e-9, || format!("ROUGE-L {cand:?} vs {reference:?} off by {d}"))?;
        worst = worst.max(d);
    }
    let clipped = bleu(&[0; 4], &[0, 1], 1).unwrap();
    check((clipped - 0.25).abs() < 1e-12, || format!("clipped BLEU-1 {clipped}"))?;
    check(lcs_len(&[0, 1, 2], &[0, 2, 3]) == 2, || "LCS of the worked case".into())?;
    let rl = rouge_l(&[0, 1, 2], &[0, 2, 3], 1.0);
    check((rl - 2.0 / 3.0).abs() < 1e-12, || format!("worked ROUGE-L {rl}"))?;
    Ok(format!("200 pairs, worst diff {worst:.1e}"))
}

// Criterion 3

fn reward_algebra() -> Outcome {
    let lex = Lexicon::default_chest();
    let spec = corpus::CorpusSpec {
        n_items: 50,
        ..corpus::CorpusSpec::default()
    };
    let splits = corpus::generate(&spec, &lex).map_err(|e| e.to_string())?;
    let vocab = Vocab::build(splits.all().map(|r| r.report.as_str()));
    let scorer = corpus::scorer(&lex, &vocab);
    let mut r = rng::seeded(8);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let ref_tokens = random_sentence(&mut r, 3, 18, vocab.len());
        let reference = Reference {
            labels: scorer.labels(&ref_tokens),
            tokens: ref_tokens,
        };
        let cand = random_sentence(&mut r, 1, 20, vocab.len());
        for o in Objective::ALL {
            let mut total = 0.0;
            for t in 1..=cand.len() {
                total += scorer.step_reward(o, &cand[..t], &cand[..t - 1], &reference).map_err(|e| e.to_string())?;
            }
            let d = (total - scorer.score(o, &cand, &reference)).abs();
            check(d < 1e-12, || format!("{o} telescopes off by {d}"))?;
            worst = worst.max(d);
        }
    }
    for _ in 0..1000 {
        let m = r.random_range(1..6);
        let raw: Vec<f64> = (0..m).map(|_| r.random::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        let pv = PreferenceVector::new(raw.iter().map(|x| x / s).collect()).map_err(|e| e.to_string())?;
        let rewards = RewardVector((0..m).map(|_| r.random::<f64>()).collect());
        let w = weighted_reward(&pv, &rewards).map_err(|e| e.to_string())?;
        let lo = rewards.values().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = rewards.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        check(lo - 1e-12 <= w && w <= hi + 1e-12, || format!("{w} outside [{lo}, {hi}]"))?;
    }
    Ok(format!("50 sequences x {} metrics, worst {worst:.1e}; 1000 convex draws", Objective::ALL.len()))
}

// Criterion 4

#[derive(Clone)]
struct TabState<'a> {
    policy: &'a TabularPolicy,
    first: Option<usize>,
}

impl DecodeState for TabState<'_> {
    fn logits(&self) -> &[f64] {
        match self.first {
            None => &self.policy.first,
            Some(y) => &self.policy.second[y],
        }
    }

    fn push(&mut self, token: usize) -> CoreResult<()> {
        self.first = Some(token);
        Ok(())
    }
}

fn surrogate_gradient(pol: &TabularPolicy, y: [usize; 2], reward: f64, baseline: f64) -> [f64; 12] {
    let mut g = Graph::new();
    let first = g.param(Tensor::row(pol.first.to_vec()));
    let second = g.param(Tensor::from_rows(&pol.second).unwrap());
    let nll1 = g.cross_entropy(first, &[y[0]]).unwrap();
    let row = g.embedding_lookup(second, &[y[0]]).unwrap();
    let nll2 = g.cross_entropy(row, &[y[1]]).unwrap();
    let nll = g.add(nll1, nll2).unwrap();
    let mut out = [0.0; 12];
    if let Some(loss) = reinforce_surrogate(&mut g, &[nll], &[reward], baseline).unwrap() {
        let grads = g.backward(loss).unwrap();
        out[..3].copy_from_slice(grads.get(first).unwrap().data());
        out[3..].copy_from_slice(grads.get(second).unwrap().data());
    }
    out
}

fn estimator_unbiasedness() -> Outcome {
    let pol = TabularPolicy {
        first: [0.3, -0.5, 0.9],
        second: [[0.1, 0.7, -0.2], [-1.0, 0.4, 0.0], [0.5, 0.5, -0.6]],
    };
    let scorer = Scorer::new(&Lexicon::default_chest(), |_| None);
    let reference = Reference {
        tokens: vec![0, 2],
        labels: LabelSet::new(),
    };
    let pv = PreferenceVector::new(vec![0.6, 0.4]).unwrap();
    let objectives = [Objective::Bleu(1), Objective::RougeL];
    let reward = |y: [usize; 2]| weighted_reward(&pv, &scorer.rewards(&objectives, &y, &reference)).unwrap();

    let e0 = pol.exact_gradient(reward, 0.0);
    let e7 = pol.exact_gradient(reward, 0.7);
    let gap = e0.iter().zip(&e7).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(gap < 1e-12, || format!("exact expectations differ by {gap}"))?;

    let rollouts = 100_000;
    let mut worst_z = 0.0f64;
    for baseline in [0.0, 0.7] {
        let exact = pol.exact_gradient(reward, baseline);
        let mut cache: HashMap<[usize; 2], [f64; 12]> = HashMap::new();
        let (mut sum, mut sum_sq) = ([0.0; 12], [0.0; 12]);
        let mut r = rng::seeded(31);
        for _ in 0..rollouts {
            let gen = sample(TabState { policy: &pol, first: None }, 2, None, 1.0, &mut r).map_err(|e| e.to_string())?;
            let y = [gen.tokens[0], gen.tokens[1]];
            let g = *cache.entry(y).or_insert_with(|| surrogate_gradient(&pol, y, reward(y), baseline));
            for k in 0..12 {
                sum[k] += g[k];
                sum_sq[k] += g[k] * g[k];
            }
        }
        let n = rollouts as f64;
        for k in 0..12 {
            let mean = sum[k] / n;
            let se = ((sum_sq[k] / n - mean * mean).max(0.0) / (n - 1.0)).sqrt();
            let diff = (mean - exact[k]).abs();
            check(diff <= 3.0 * se + 1e-12, || format!("b={baseline} coord {k}: {diff} > 3*{se}"))?;
            if se > 0.0 {
                worst_z = worst_z.max(diff / se);
            }
        }
    }
    Ok(format!("{rollouts} rollouts per baseline, worst |z| {worst_z:.2}, baseline gap {gap:.1e}"))
}

// Criterion 5

fn grid_combinatorics(dir: &Path) -> Outcome {
    let g2 = enumerate_preference_grid(2, 0.1).map_err(|e| e.to_string())?;
    let g3 = enumerate_preference_grid(3, 0.1).map_err(|e| e.to_string())?;
    check(g2.len() == 11 && g3.len() == 66, || format!("grid sizes {} and {}", g2.len(), g3.len()))?;
    for (m, grid) in [(2, &g2), (3, &g3)] {
        for i in 0..m {
            let basis = grid.iter().any(|v| v.weights().iter().enumerate().all(|(j, &w)| w == if i == j { 1.0 } else { 0.0 }));
            check(basis, || format!("basis vector e{i} missing for m={m}"))?;
        }
    }
    let corpus_dir = dir.join("corpus");
    let run = dir.join("run");
    prefseq(&["gen-corpus", "--n", "40", "--out", p(&corpus_dir)])?;
    prefseq(&["train", "--corpus", p(&corpus_dir), "--out", p(&run), "--epochs1", "0", "--epochs2", "0"])?;
    let mut rows = Vec::new();
    for (interval, want) in [("0.1", 11), ("0.2", 6)] {
        let csv = prefseq(&["sweep", "--run", p(&run), "--corpus", p(&corpus_dir), "--interval", interval])?;
        let got = csv.lines().count() - 1;
        check(got == want, || format!("sweep at {interval} has {got} rows, expected {want}"))?;
        rows.push(got);
    }
    Ok(format!("grids 11/66 with bases; sweep rows {rows:?}"))
}

// Criterion 6

fn sweep_rows(csv_text: &str) -> std::result::Result<HashMap<String, (f64, f64)>, String> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let mut out = HashMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| e.to_string());
        out.insert(format!("{},{}", num(0)?, num(1)?), (num(2)?, num(3)?));
    }
    Ok(out)
}

fn preference_trend(dir: &Path) -> Outcome {
    let corpus_dir = dir.join("corpus");
    let run = dir.join("run");
    let toy = workspace_root().join("configs/toy.toml");
    prefseq(&["gen-corpus", "--out", p(&corpus_dir)])?;
    let start = Instant::now();
    prefseq(&["train", "--corpus", p(&corpus_dir), "--config", p(&toy), "--out", p(&run)])?;
    let train_time = start.elapsed();
    check(train_time <= Duration::from_secs(600), || format!("training took {train_time:.0?}"))?;

    let log = std::fs::read_to_string(run.join("train_log.csv")).map_err(|e| e.to_string())?;
    let stage2: Vec<f64> = log
        .lines()
        .skip(1)
        .filter(|l| l.split(',').nth(1) == Some("2"))
        .map(|l| l.split(',').skip(3).take(2).map(|v| v.parse::<f64>().unwrap()).sum())
        .collect();
    let (first, last) = (stage2[0], stage2[stage2.len() - 1]);

    let csv_text = prefseq(&["sweep", "--run", p(&run), "--corpus", p(&corpus_dir), "--interval", "0.5"])?;
    let rows = sweep_rows(&csv_text)?;
    let (a, mid, b) = (rows["1,0"], rows["0.5,0.5"], rows["0,1"]);
    let sensitive = greedy_outputs_differ(&run, &corpus_dir)?;
    let summary = format!(
        "[1,0]=({:.4},{:.4}) [.5,.5]=({:.4},{:.4}) [0,1]=({:.4},{:.4}); train {train_time:.0?}; \
         stage-2 reward {first:.3}->{last:.3}; greedy outputs differ on {sensitive} test items",
        a.0, a.1, mid.0, mid.1, b.0, b.1
    );
    let between = |lo: f64, x: f64, hi: f64| lo.min(hi) <= x && x <= lo.max(hi);
    check(a.0 - b.0 > 0.01, || format!("metric 1 margin {:.4}; {summary}", a.0 - b.0))?;
    check(b.1 - a.1 > 0.01, || format!("metric 2 margin {:.4}; {summary}", b.1 - a.1))?;
    check(between(a.0, mid.0, b.0) && between(a.1, mid.1, b.1), || format!("midpoint outside; {summary}"))?;
    check(last > first, || format!("stage-2 reward did not improve; {summary}"))?;
    check(sensitive > 0, || format!("preference has no effect on greedy output; {summary}"))?;
    Ok(summary)
}

fn greedy_outputs_differ(run: &Path, corpus_dir: &Path) -> std::result::Result<usize, String> {
    let err = |e: prefseq::Error| e.to_string();
    let config = RunConfig::load(&run.join("config.toml")).map_err(|e| format!("{e:?}"))?;
    let model = Model::load(config.model, &run.join("stage2.ckpt")).map_err(err)?;
    let (splits, vocab) = corpus::load_splits(corpus_dir).map_err(err)?;
    let examples = corpus::examples(splits.get(Split::Test), &vocab, &Lexicon::default_chest()).map_err(err)?;
    let (p1, p2) = (PreferenceVector::new(vec![1.0, 0.0]).unwrap(), PreferenceVector::new(vec![0.0, 1.0]).unwrap());
    let mut differ = 0;
    for ex in &examples {
        let y1 = model.generate(&ex.features, &p1, Strategy::Greedy).map_err(err)?;
        let y2 = model.generate(&ex.features, &p2, Strategy::Greedy).map_err(err)?;
        differ += usize::from(y1.tokens != y2.tokens);
    }
    Ok(differ)
}

// Criterion 7

fn alpha_ablation() -> Outcome {
    let grid = enumerate_preference_grid(2, 0.1).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for fusion in [FusionMode::Projected, FusionMode::Literal] {
        for seed in 0..5 {
            let c = ModelConfig {
                alpha: 0.0,
                fusion,
                ..tiny_config(9)
            };
            let m = Model::new(c.clone(), seed).map_err(|e| e.to_string())?;
            let x = features_for(&c, &mut rng::seeded(seed));
            let e = m.encode(&x).map_err(|e| e.to_string())?;
            let first = m.generate(&x, &grid[0], Strategy::Greedy).map_err(|e| e.to_string())?;
            for pv in &grid {
                let u = m.pvf_fuse(&m.expand_preference(pv).map_err(|e| e.to_string())?, &e).map_err(|e| e.to_string())?;
                check(u == e, || format!("{fusion:?} seed {seed}: U != E at {pv:?}"))?;
                let y = m.generate(&x, pv, Strategy::Greedy).map_err(|e| e.to_string())?;
                check(y.tokens == first.tokens, || format!("{fusion:?} seed {seed}: decode changed at {pv:?}"))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} (model, preference) pairs"))
}

// Criterion 8

const SMALL: &str = "\
[model]
d_model = 16
n_heads = 2
d_ff = 32
n_enc_layers = 1
n_dec_layers = 1

[train]
epochs1 = 2
epochs2 = 2
batch_size = 8
n_samples = 3
";

fn pipeline(dir: &Path) -> std::result::Result<Vec<(String, Vec<u8>)>, String> {
    let corpus_dir = dir.join("corpus");
    let run = dir.join("run");
    let config = dir.join("small.toml");
    std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    std::fs::write(&config, SMALL).map_err(|e| e.to_string())?;
    prefseq(&["gen-corpus", "--n", "60", "--seed", "3", "--out", p(&corpus_dir)])?;
    prefseq(&["train", "--corpus", p(&corpus_dir), "--config", p(&config), "--out", p(&run), "--seed", "5"])?;
    let csv_path = dir.join("sweep.csv");
    prefseq(&["sweep", "--run", p(&run), "--corpus", p(&corpus_dir), "--interval", "0.25", "--out", p(&csv_path)])?;
    let files = [
        corpus_dir.join("train.jsonl"),
        corpus_dir.join("test.jsonl"),
        run.join("stage1.ckpt"),
        run.join("stage2.ckpt"),
        run.join("train_log.csv"),
        csv_path,
    ];
    files
        .iter()
        .map(|f| {
            let name = f.strip_prefix(dir).unwrap().display().to_string();
            std::fs::read(f).map(|b| (name, b)).map_err(|e| format!("{}: {e}", f.display()))
        })
        .collect()
}

fn reproducibility(dir: &Path) -> Outcome {
    let a = pipeline(&dir.join("a"))?;
    let b = pipeline(&dir.join("b"))?;
    for ((name, x), (_, y)) in a.iter().zip(&b) {
        check(x == y, || format!("{name} differs between runs"))?;
    }
    Ok(format!("{} artifacts bit-identical", a.len()))
}

#[test]
fn acceptance_criteria() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = |name: &str| {
        let d = tmp.path().join(name);
        std::fs::create_dir_all(&d).unwrap();
        d
    };
    let results = [
        report(1, "gradient correctness", Some(Duration::from_secs(60)), gradient_correctness),
        report(2, "metric oracle equivalence", Some(Duration::from_secs(10)), metric_oracles),
        report(3, "reward algebra", None, reward_algebra),
        report(4, "estimator unbiasedness", Some(Duration::from_secs(120)), estimator_unbiasedness),
        report(5, "preference-grid combinatorics", None, || grid_combinatorics(&dir("c5"))),
        report(6, "preference-trend replication", None, || preference_trend(&dir("c6"))),
        report(7, "alpha = 0 ablation", None, alpha_ablation),
        report(8, "pipeline reproducibility", None, || reproducibility(&dir("c8"))),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
