//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use userprior::corpus::{activity_distribution, synth_corpus, Dataset, LabelScheme, SynthConfig, Timelines, Tweet};
use userprior::eval::{
    bin_by_timeline_length, metrics_from_confusion, run_experiment_modes, split_by_user,
    ConfusionMatrix, ExperimentConfig, ExperimentReport, PredictionRecord, SplitMode, TIMELINE_BINS,
};
use userprior::gbdt::{fit_gbdt_with_classes, staged_training_loss, GbdtConfig};
use userprior::profile::ProfileMode;
use userprior::recurrent::{gradient_check, RecurrentConfig, RecurrentModel};
use userprior::rng::Rng;
use userprior::text::EmbeddingMatrix;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// 1. Gradient correctness.
fn gradients() -> Outcome {
    let mut rng = Rng::new(101);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let n_classes = if trial % 2 == 0 { 2 } else { 3 };
        let config = RecurrentConfig {
            embed_dim: 8,
            hidden_dim: 8,
            max_seq_len: 6,
            n_classes,
            seed: 1000 + trial,
            ..Default::default()
        };
        let emb = EmbeddingMatrix::random(30, 8, 2000 + trial);
        let model = RecurrentModel::new(config, &emb).unwrap();
        let len = 1 + rng.below(8);
        let tokens: Vec<usize> = (0..len)
            .map(|_| {
                let t = rng.below(29);
                if t >= 1 { t + 1 } else { t }
            })
            .collect();
        let label = rng.below(n_classes);
        worst = worst.max(gradient_check(&model, (&tokens, label), 1e-5).unwrap());
    }
    outcome(worst < 1e-4, format!("max relative error {worst:.2e} over 20 models, both heads"))
}

/// Exhaustive first-split search: every (feature, midpoint) candidate scored
/// from scratch; the best gain wins, near-ties going to the lowest feature
/// and then the lowest threshold.
fn oracle_split(x: &[Vec<f64>], g: &[f64], h: &[f64], lambda: f64, min_leaf: usize) -> Option<(usize, f64)> {
    let score = |gs: f64, hs: f64| gs * gs / (hs + lambda);
    let (gt, ht): (f64, f64) = (g.iter().sum(), h.iter().sum());
    let mut candidates = Vec::new();
    for f in 0..x[0].len() {
        let mut values: Vec<f64> = x.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let thr = (w[0] + w[1]) / 2.0;
            let left: Vec<usize> = (0..x.len()).filter(|&i| x[i][f] <= thr).collect();
            if left.len() < min_leaf || x.len() - left.len() < min_leaf {
                continue;
            }
            let gl: f64 = left.iter().map(|&i| g[i]).sum();
            let hl: f64 = left.iter().map(|&i| h[i]).sum();
            let gain = 0.5 * (score(gl, hl) + score(gt - gl, ht - hl) - score(gt, ht));
            candidates.push((f, thr, gain));
        }
    }
    let best = candidates.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    candidates
        .into_iter()
        .find(|c| c.2 >= best - 1e-9 * best.abs().max(1.0))
        .map(|(f, t, _)| (f, t))
}

// 2. GBDT oracle equivalence and monotone training loss.
fn gbdt_oracle() -> Outcome {
    let mut rng = Rng::new(202);
    let mut mismatches = 0;
    let mut non_monotone = 0;
    for trial in 0..50 {
        let n = 2 + rng.below(19);
        let d = 1 + rng.below(3);
        let n_classes = if trial % 3 == 0 { 3 } else { 2 };
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| (rng.below(9) as f64 - 4.0) / 4.0).collect())
            .collect();
        let mut y: Vec<usize> = (0..n).map(|_| rng.below(n_classes)).collect();
        y[0] = 0;
        y[1] = n_classes - 1;
        let config = GbdtConfig {
            n_rounds: 10,
            max_depth: 1 + rng.below(3),
            learning_rate: [0.1, 0.3, 1.0][rng.below(3)],
            min_samples_leaf: 1 + rng.below(2),
            lambda: [0.0, 1.0][rng.below(2)],
            seed: 0,
        };
        let model = fit_gbdt_with_classes(&x, &y, n_classes, &config).unwrap();

        // Gradients at the prior, computed independently of the learner.
        let counts: Vec<f64> = (0..n_classes).map(|c| y.iter().filter(|&&v| v == c).count() as f64).collect();
        let outputs: Vec<usize> = if n_classes == 2 { vec![1] } else { (0..n_classes).collect() };
        for (k, &class) in outputs.iter().enumerate() {
            let p = counts[class] / n as f64;
            let g: Vec<f64> = y.iter().map(|&v| p - (v == class) as u8 as f64).collect();
            let h = vec![p * (1.0 - p); n];
            let expected = oracle_split(&x, &g, &h, config.lambda, config.min_samples_leaf);
            if model.rounds()[0][k].root_split() != expected {
                mismatches += 1;
            }
        }
        let staged = staged_training_loss(&model, &x, &y).unwrap();
        if staged.windows(2).any(|w| w[1] > w[0] + 1e-9) {
            non_monotone += 1;
        }
    }
    outcome(
        mismatches == 0 && non_monotone == 0,
        format!("50 datasets: {mismatches} root-split mismatches, {non_monotone} non-monotone loss curves"),
    )
}

// 3. Metric identities.
fn metric_identities() -> Outcome {
    let mut rng = Rng::new(303);
    let mut failures = Vec::new();
    for trial in 0..100 {
        let k = 2 + rng.below(4);
        let mut counts: Vec<Vec<usize>> = (0..k).map(|_| (0..k).map(|_| rng.below(12)).collect()).collect();
        counts[0][0] += 1;
        let cm = ConfusionMatrix::from_counts(counts.clone()).unwrap();
        let names: Vec<String> = (0..k).map(|c| format!("c{c}")).collect();
        let r = metrics_from_confusion(&cm, &names).unwrap();
        let total: usize = counts.iter().flatten().sum();
        let accuracy = 100.0 * (0..k).map(|c| counts[c][c]).sum::<usize>() as f64 / total as f64;
        let (p, rc, f) = (r.micro.precision.unwrap(), r.micro.recall.unwrap(), r.micro.f1.unwrap());
        if [p, rc, f].iter().any(|v| (v - accuracy).abs() > 1e-12) {
            failures.push(format!("trial {trial}: micro {p}/{rc}/{f} vs accuracy {accuracy}"));
        }
        let mean = r.classes.iter().map(|c| c.prf.f1.unwrap_or(0.0)).sum::<f64>() / k as f64;
        if r.macro_avg.f1 != Some(mean) {
            failures.push(format!("trial {trial}: macro F1 {:?} vs mean {mean}", r.macro_avg.f1));
        }
        for c in 0..k {
            let tp = counts[c][c] as f64;
            let pred: f64 = (0..k).map(|g| counts[g][c]).sum::<usize>() as f64;
            let gold: f64 = counts[c].iter().sum::<usize>() as f64;
            let (prec, rec) = (tp / pred, tp / gold);
            let expected = if pred == 0.0 || gold == 0.0 || prec + rec == 0.0 {
                None
            } else {
                Some(100.0 * 2.0 * prec * rec / (prec + rec))
            };
            let got = r.classes[c].prf.f1;
            let ok = match (got, expected) {
                (None, None) => true,
                (Some(a), Some(b)) => (a - b).abs() < 1e-9,
                _ => false,
            };
            if !ok {
                failures.push(format!("trial {trial} class {c}: F1 {got:?} vs {expected:?}"));
            }
        }
    }
    let hand = ConfusionMatrix::from_counts(vec![vec![3, 1], vec![1, 5]]).unwrap();
    let r = metrics_from_confusion(&hand, &["a".into(), "b".into()]).unwrap();
    let a = r.classes[0].prf;
    if (a.precision, a.recall, a.f1) != (Some(75.0), Some(75.0), Some(75.0)) {
        failures.push(format!("hand example gave {a:?}"));
    }
    let detail = match failures.first() {
        None => "100 matrices: micro P = R = F1 = accuracy, macro F1 = class mean; tp=3/fp=1/fn=1 gives 75.0/75.0/75.0".into(),
        Some(first) => format!("{} failures, first: {first}", failures.len()),
    };
    outcome(failures.is_empty(), detail)
}

fn random_dataset(rng: &mut Rng) -> Dataset {
    let n_users = 2 + rng.below(30);
    let n = n_users + rng.below(200);
    let tweets = (0..n)
        .map(|i| Tweet {
            id: format!("t{i}"),
            user_id: format!("u{}", if i < n_users { i } else { rng.below(n_users) }),
            text: String::new(),
            label: rng.below(2),
        })
        .collect();
    Dataset::new(LabelScheme::fused_binary(), tweets, Timelines::new()).unwrap()
}

// 4. Split-by-user guarantee.
fn user_split() -> Outcome {
    let mut rng = Rng::new(404);
    let mut leaks = 0;
    let mut bad_partitions = 0;
    for trial in 0..100 {
        let dataset = random_dataset(&mut rng);
        let n_users = dataset.users().len();
        let k = 2 + rng.below(n_users.min(10) - 1);
        let plan = split_by_user(&dataset, k, trial).unwrap();
        let mut seen = vec![0usize; dataset.len()];
        for fold in 0..k {
            let test = plan.test_indices(fold);
            for &i in &test {
                seen[i] += 1;
            }
            let users = |idx: &[usize]| -> BTreeSet<String> {
                idx.iter().map(|&i| dataset.tweets()[i].user_id.clone()).collect()
            };
            let train: Vec<usize> = (0..dataset.len()).filter(|i| !test.contains(i)).collect();
            if !users(&test).is_disjoint(&users(&train)) {
                leaks += 1;
            }
        }
        if seen.iter().any(|&s| s != 1) {
            bad_partitions += 1;
        }
    }
    outcome(
        leaks == 0 && bad_partitions == 0,
        format!("100 datasets: {leaks} folds sharing users with their training side, {bad_partitions} non-partitions"),
    )
}

fn directional_config() -> ExperimentConfig {
    ExperimentConfig {
        split: SplitMode::ByUser,
        k: 10,
        recurrent: RecurrentConfig {
            embed_dim: 80,
            hidden_dim: 80,
            max_seq_len: 12,
            ..Default::default()
        },
        ..Default::default()
    }
}

const SEEDS: [u64; 3] = [1, 2, 3];

fn macro_gap(signal: f64, seed: u64) -> (f64, f64, Vec<ExperimentReport>) {
    let dataset = synth_corpus(&SynthConfig {
        n_users: 150,
        n_tweets: 2000,
        signal_strength: signal,
        seed,
        ..Default::default()
    })
    .unwrap();
    let reports = run_experiment_modes(
        &dataset,
        &[ProfileMode::Baseline, ProfileMode::Timeline],
        &directional_config(),
        seed,
    )
    .unwrap();
    let base = reports[0].metrics.macro_avg.f1.unwrap();
    let timeline = reports[1].metrics.macro_avg.f1.unwrap();
    (base, timeline, reports)
}

// 5. Directional timeline benefit.
fn directional(reports_out: &mut Vec<ExperimentReport>) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in SEEDS {
        let (base, timeline, reports) = macro_gap(0.9, seed);
        pass &= timeline - base >= 5.0;
        parts.push(format!("seed {seed}: {base:.1} -> {timeline:.1} ({:+.1})", timeline - base));
        reports_out.extend(reports);
    }
    outcome(pass, format!("macro F1 baseline -> timeline, by-user 10-fold: {}", parts.join("; ")))
}

// 6. No-signal null check.
fn null_check() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in SEEDS {
        let (base, timeline, _) = macro_gap(0.0, seed);
        pass &= (timeline - base).abs() <= 2.0;
        parts.push(format!("seed {seed}: {base:.1} vs {timeline:.1} ({:+.1})", timeline - base));
    }
    outcome(pass, format!("signal 0, |timeline - baseline| <= 2: {}", parts.join("; ")))
}

// 7. Bin report conformance.
fn bin_conformance(reports: &[ExperimentReport]) -> Outcome {
    let rec = |gold, pred, timeline_len| PredictionRecord {
        id: String::new(),
        user_id: String::new(),
        fold: 0,
        gold,
        pred,
        timeline_len,
    };
    // Bin 0-5 never predicts class 1; bin 16-20 is perfect; the rest are empty.
    let records = [rec(0, 0, 2), rec(1, 0, 4), rec(0, 0, 0), rec(1, 1, 20), rec(0, 0, 17)];
    let tsv = bin_by_timeline_length(&records, 2).unwrap().to_tsv();
    let expected = "bin\tcount\tprecision\trecall\tf1\n\
                    0-5\t3\tNAN\t50.0\tNAN\n\
                    6-10\t0\tNAN\tNAN\tNAN\n\
                    11-15\t0\tNAN\tNAN\tNAN\n\
                    16-20\t2\t100.0\t100.0\t100.0\n";
    let mut pass = tsv == expected;
    let mut detail = if pass {
        "hand bins render NAN/50.0/NAN for a never-predicted class and NAN rows when empty".to_string()
    } else {
        format!("unexpected TSV:\n{tsv}")
    };
    for r in reports {
        let labels: Vec<String> = r.bins.rows.iter().map(|b| b.label()).collect();
        let fixed: Vec<String> = TIMELINE_BINS.iter().map(|(lo, hi)| format!("{lo}-{hi}")).collect();
        if labels != fixed || r.bins.total() != r.metrics.total {
            pass = false;
            detail = format!("experiment bins {labels:?} hold {} of {} tweets", r.bins.total(), r.metrics.total);
        }
    }
    if pass {
        detail.push_str(&format!("; {} experiment bin reports sum to their totals", reports.len()));
    }
    outcome(pass, detail)
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_userprior")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

// 8. Determinism of `eval`.
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let synth = run_cli(&["synth", "--out-dir", s(&corpus), "--seed", "8"]);
    if !synth.status.success() {
        return outcome(false, format!("synth failed: {}", String::from_utf8_lossy(&synth.stderr)));
    }
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"tweets": "corpus/tweets.jsonl", "timelines": "corpus/timelines.jsonl",
            "scheme": "fused-binary", "mode": "timeline", "split": "by-user", "k": 5, "seed": 21,
            "recurrent": {"embed_dim": 16, "hidden_dim": 16, "epochs": 3, "max_seq_len": 12},
            "gbdt": {"n_rounds": 40}}"#,
    )
    .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run_cli(&["eval", "--config", s(&cfg), "--out-dir", s(out)]);
        if !o.status.success() {
            return outcome(false, format!("eval failed: {}", String::from_utf8_lossy(&o.stderr)));
        }
    }
    let mut names: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| std::fs::read(a.join(n)).ok() != std::fs::read(b.join(n)).ok())
        .collect();
    outcome(
        differing.is_empty() && names.len() == 5,
        format!("{} report files from two eval runs, {} differ", names.len(), differing.len()),
    )
}

// 9. Distribution export.
fn distribution() -> Outcome {
    let config = SynthConfig {
        hater_fraction: 0.02,
        top_hater_share: 0.96,
        seed: 9,
        ..Default::default()
    };
    let dataset = synth_corpus(&config).unwrap();
    let dist = activity_distribution(&dataset, Some("hate")).unwrap();
    let total: usize = dist.iter().map(|d| d.1).sum();
    let share = dist[0].1 as f64 / total as f64;

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("synth.json");
    std::fs::write(&cfg, serde_json::to_string(&config).unwrap()).unwrap();
    run_cli(&["synth", "--config", s(&cfg), "--out-dir", s(dir.path())]);
    let tsv_path = dir.path().join("dist.tsv");
    let o = run_cli(&[
        "dist", "--input", s(&dir.path().join("tweets.jsonl")), "--hate-only", "--hate-class", "hate",
        "--output", s(&tsv_path),
    ]);
    let tsv = std::fs::read_to_string(&tsv_path).unwrap_or_default();
    let counts: Vec<usize> = tsv.lines().skip(1).filter_map(|l| l.split('\t').nth(1)?.parse().ok()).collect();
    let monotone = counts.windows(2).all(|w| w[0] >= w[1]);
    let pass = o.status.success() && share >= 0.9 && monotone && counts.iter().sum::<usize>() == total;
    outcome(
        pass,
        format!(
            "top hater holds {:.1}% of {total} hate tweets; exported counts over {} users non-increasing: {monotone}",
            100.0 * share,
            counts.len()
        ),
    )
}

fn main() {
    let mut experiment_reports = Vec::new();
    let checks: Vec<(&str, Box<dyn FnOnce(&mut Vec<ExperimentReport>) -> Outcome>)> = vec![
        ("gradient correctness", Box::new(|_| gradients())),
        ("gbdt oracle equivalence", Box::new(|_| gbdt_oracle())),
        ("metric identities", Box::new(|_| metric_identities())),
        ("split-by-user guarantee", Box::new(|_| user_split())),
        ("directional timeline benefit", Box::new(directional)),
        ("no-signal null check", Box::new(|_| null_check())),
        ("bin report conformance", Box::new(|r| bin_conformance(r))),
        ("eval determinism", Box::new(|_| determinism())),
        ("distribution export", Box::new(|_| distribution())),
    ];
    // Runtime limits in seconds for the criteria that state one.
    let budgets: [Option<f64>; 9] = [Some(60.0), Some(60.0), None, None, Some(600.0), None, None, None, None];
    let mut failed = 0;
    for (i, (name, check)) in checks.into_iter().enumerate() {
        let start = Instant::now();
        let result = check(&mut experiment_reports);
        let elapsed = start.elapsed().as_secs_f64();
        let over = budgets[i].filter(|&b| elapsed > b);
        let pass = result.pass && over.is_none();
        let verdict = if pass { "PASS" } else { "FAIL" };
        failed += usize::from(!pass);
        let note = over.map(|b| format!(" (over the {b:.0}s budget)")).unwrap_or_default();
        println!("{verdict} criterion {}: {name}: {} [{elapsed:.1}s]{note}", i + 1, result.detail);
    }
    println!("{} of 9 acceptance criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
