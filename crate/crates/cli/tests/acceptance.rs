//! Acceptance suite: one PASS/FAIL line per criterion.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use regex::Regex;

use synthdeid::corpusgen::{generate_corpus, GenConfig};
use synthdeid::crf::{
    self, log_likelihood_and_gradient, log_partition, marginals, viterbi, CrfModel, LabelSet, Sequence,
    TrainConfig,
};
use synthdeid::eval::{learning_curve, CurveOptions};
use synthdeid::features::{ContextMode, FeatureTable, FeatureVector, Gazetteer};
use synthdeid::note::{parse_note, read_corpus, write_corpus, CategoryCounts, CategoryMapping, Note, Strictness};
use synthdeid::rng;
use synthdeid::surrogen::{
    read_labeled_corpus, synthesize_corpus, write_labeled_corpus, Lexicon, LexiconKind, Lexicons, SurrogatePlan,
};
use synthdeid::{Label, LabeledNote, PhiCategory, Tagger};

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Check + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let elapsed = start.elapsed();
    ensure(elapsed < limit, || format!("took {elapsed:.1?}, limit {limit:?}"))
}

// ---------------------------------------------------------------- CRF suite

struct Case {
    model: CrfModel,
    xs: Vec<FeatureVector>,
}

fn random_case<R: Rng>(r: &mut R, max_len: usize, max_labels: usize, scale: f64) -> Case {
    let labels = r.random_range(1..=max_labels);
    let features = r.random_range(1..=5);
    let len = r.random_range(1..=max_len);
    let names = (0..features).map(|i| format!("f{i}")).collect();
    let table = FeatureTable::from_names(names, ContextMode::Positional);
    let weights = (0..features * labels + labels * labels).map(|_| r.random_range(-scale..=scale)).collect();
    let label_names = (0..labels).map(|i| format!("Y{i}")).collect();
    let model = CrfModel::from_weights(LabelSet::new(label_names), table, weights).unwrap();
    let xs = (0..len)
        .map(|_| FeatureVector::new((0..features as u32).filter(|_| r.random_bool(0.5)).collect()))
        .collect();
    Case { model, xs }
}

fn crf_suite() -> Vec<Case> {
    let mut r = rng::seeded(2024);
    (0..100).map(|_| random_case(&mut r, 6, 4, 2.0)).collect()
}

/// Every labeling in lexicographic order with its unnormalized score.
fn enumerate(case: &Case) -> Vec<(Vec<usize>, f64)> {
    let (t_len, l) = (case.xs.len(), case.model.num_labels());
    let m = &case.model;
    let mut ys = vec![0usize; t_len];
    let mut out = Vec::new();
    loop {
        let mut score = 0.0;
        for (t, x) in case.xs.iter().enumerate() {
            for &f in x.indices() {
                score += m.emission(f as usize, ys[t]);
            }
            if t > 0 {
                score += m.transition(ys[t - 1], ys[t]);
            }
        }
        out.push((ys.clone(), score));
        let mut k = t_len;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            ys[k] += 1;
            if ys[k] < l {
                break;
            }
            ys[k] = 0;
        }
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn crf_oracle(suite: &[Case]) -> Check {
    let start = Instant::now();
    for (i, case) in suite.iter().enumerate() {
        let all = enumerate(case);
        let oracle_z = log_sum_exp(all.iter().map(|(_, s)| *s));
        let z = log_partition(&case.model, &case.xs).map_err(|e| e.to_string())?;
        ensure(rel_err(z, oracle_z) <= 1e-9, || format!("trial {i}: log Z {z} vs {oracle_z}"))?;
        let mut best = &all[0];
        for candidate in &all[1..] {
            if candidate.1 > best.1 {
                best = candidate;
            }
        }
        let path = viterbi(&case.model, &case.xs).map_err(|e| e.to_string())?;
        ensure(path == best.0, || format!("trial {i}: viterbi {path:?} vs first argmax {:?}", best.0))?;
    }
    within_time(start, Duration::from_secs(30))?;
    Ok(format!("{} trials in {:.2?}", suite.len(), start.elapsed()))
}

fn marginal_normalization(suite: &[Case]) -> Check {
    let (mut node_err, mut edge_err) = (0f64, 0f64);
    for (i, case) in suite.iter().enumerate() {
        let m = marginals(&case.model, &case.xs).map_err(|e| e.to_string())?;
        let (t_len, l) = (case.xs.len(), case.model.num_labels());
        for t in 0..t_len {
            let sum: f64 = (0..l).map(|y| m.node(t, y)).sum();
            node_err = node_err.max((sum - 1.0).abs());
        }
        for t in 0..t_len.saturating_sub(1) {
            for a in 0..l {
                let row: f64 = (0..l).map(|b| m.edge(t, a, b)).sum();
                edge_err = edge_err.max((row - m.node(t, a)).abs());
                let col: f64 = (0..l).map(|b| m.edge(t, b, a)).sum();
                edge_err = edge_err.max((col - m.node(t + 1, a)).abs());
            }
        }
        // node marginals against enumeration
        let all = enumerate(case);
        let z = log_sum_exp(all.iter().map(|(_, s)| *s));
        for t in 0..t_len {
            for y in 0..l {
                let p: f64 = all.iter().filter(|(ys, _)| ys[t] == y).map(|(_, s)| (s - z).exp()).sum();
                ensure((p - m.node(t, y)).abs() <= 1e-9, || format!("trial {i}: P(y_{t}={y}) {p} vs {}", m.node(t, y)))?;
            }
        }
    }
    ensure(node_err <= 1e-10, || format!("node sum error {node_err:e}"))?;
    ensure(edge_err <= 1e-9, || format!("edge consistency error {edge_err:e}"))?;
    Ok(format!("max node error {node_err:.1e}, max edge error {edge_err:.1e}"))
}

fn gradient_check() -> Check {
    let start = Instant::now();
    let mut r = rng::seeded(77);
    let (features, labels) = (6usize, 4usize);
    let names = (0..features).map(|i| format!("f{i}")).collect();
    let table = FeatureTable::from_names(names, ContextMode::Positional);
    let weights: Vec<f64> = (0..features * labels + labels * labels).map(|_| r.random_range(-1.0..=1.0)).collect();
    let label_names = (0..labels).map(|i| format!("Y{i}")).collect();
    let mut model = CrfModel::from_weights(LabelSet::new(label_names), table, weights).unwrap();
    let dataset: Vec<Sequence> = (0..20)
        .map(|_| {
            let len = r.random_range(1..=10);
            Sequence {
                features: (0..len)
                    .map(|_| FeatureVector::new((0..features as u32).filter(|_| r.random_bool(0.4)).collect()))
                    .collect(),
                labels: (0..len).map(|_| r.random_range(0..labels)).collect(),
            }
        })
        .collect();
    let h = 1e-5;
    let mut worst = 0f64;
    for lambda in [0.0, 0.1] {
        let (_, grad) = log_likelihood_and_gradient(&model, &dataset, lambda).map_err(|e| e.to_string())?;
        for i in 0..grad.len() {
            let w = model.weights()[i];
            model.weights_mut()[i] = w + h;
            let (up, _) = log_likelihood_and_gradient(&model, &dataset, lambda).unwrap();
            model.weights_mut()[i] = w - h;
            let (down, _) = log_likelihood_and_gradient(&model, &dataset, lambda).unwrap();
            model.weights_mut()[i] = w;
            let numeric = (up - down) / (2.0 * h);
            let err = (numeric - grad[i]).abs() / numeric.abs().max(grad[i].abs()).max(1.0);
            ensure(err <= 1e-5, || format!("lambda {lambda}, coordinate {i}: {} vs {numeric}", grad[i]))?;
            worst = worst.max(err);
        }
    }
    within_time(start, Duration::from_secs(60))?;
    Ok(format!("max relative error {worst:.1e}"))
}

fn sampling_fidelity() -> Check {
    let start = Instant::now();
    let lexicon = Lexicon::parse("Mary\t3\nAnna\t1\n", LexiconKind::FemaleFirst).map_err(|e| e.to_string())?;
    let mut r = rng::seeded(42);
    let n = 100_000;
    let mary = (0..n).filter(|_| lexicon.sample(&mut r) == "Mary").count();
    let freq = mary as f64 / n as f64;
    ensure((0.74..=0.76).contains(&freq), || format!("Mary frequency {freq}"))?;
    within_time(start, Duration::from_secs(5))?;
    Ok(format!("Mary frequency {freq:.4}"))
}

// ---------------------------------------------------------------- corpora

fn parsed_corpus(seed: u64, n: usize) -> Vec<Note> {
    let raw = generate_corpus(&GenConfig { seed, note_count: n, ..GenConfig::default() }).unwrap();
    let mapping = CategoryMapping::default();
    raw.iter().map(|r| parse_note(r, &mapping, Strictness::Strict).unwrap().note).collect()
}

fn labeled_corpus(seed: u64, n: usize, threads: usize) -> Vec<LabeledNote> {
    synthesize_corpus(&parsed_corpus(seed, n), &SurrogatePlan::new(seed), &Lexicons::fixtures(), threads).unwrap()
}

/// `(char begin, char end)` of every token in `line`.
fn oracle_tokens(re: &Regex, line: &str) -> Vec<(usize, usize)> {
    re.find_iter(line)
        .map(|m| (line[..m.start()].chars().count(), line[..m.end()].chars().count()))
        .collect()
}

fn synthesis_alignment() -> Check {
    let re = Regex::new(r"[\p{Alphabetic}\p{Nd}\p{Nl}\p{No}_]+|[^\s\p{Alphabetic}\p{Nd}\p{Nl}\p{No}_]").unwrap();
    let notes = labeled_corpus(5, 1000, 4);
    let (mut misaligned, mut non_o, mut surrogate_tokens, mut spans) = (0usize, 0usize, 0usize, 0usize);
    for ln in &notes {
        let note = &ln.note;
        let mut expected = Vec::new();
        for (li, line) in note.lines.iter().enumerate() {
            for (b, e) in oracle_tokens(&re, line) {
                let covering = note.phi_spans.iter().find(|s| s.line_index == li && s.begin < e && b < s.end);
                expected.push(match covering {
                    Some(s) if s.begin <= b && e <= s.end => Label::from(s.category),
                    Some(_) => {
                        misaligned += 1;
                        Label::O
                    }
                    None => Label::O,
                });
            }
            if line.contains("[**") {
                misaligned += 1;
            }
        }
        if expected != ln.token_labels {
            misaligned += 1;
        }
        non_o += ln.token_labels.iter().filter(|&&l| l != Label::O).count();
        for span in &note.phi_spans {
            spans += 1;
            surrogate_tokens += re.find_iter(&note.span_text(span)).count();
        }
    }
    ensure(misaligned == 0, || format!("{misaligned} misalignments"))?;
    ensure(non_o == surrogate_tokens, || format!("{non_o} non-O tokens vs {surrogate_tokens} surrogate tokens"))?;
    Ok(format!("{} notes, {spans} surrogates, {non_o} PHI tokens", notes.len()))
}

fn stats_formatting() -> Check {
    let counts = CategoryCounts { note_count: 967, notes_with_phi: 954, token_count: 131_806, phi_instance_count: 9860 };
    let (with_phi, rate) = (counts.notes_with_phi_cell(), counts.phi_instances_cell());
    ensure(with_phi == "954 (98.65%)", || format!("got {with_phi:?}"))?;
    ensure(rate == "9860 (7.48%)", || format!("got {rate:?}"))?;
    Ok(format!("{with_phi}, {rate}"))
}

fn learning_curve_trend() -> Check {
    let start = Instant::now();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(4);
    let mut all = labeled_corpus(42, 1100, threads);
    let test = all.split_off(1000);
    let options = CurveOptions { threads, ..CurveOptions::default() };
    let result = learning_curve(&all, &test, &[100, 200, 500, 1000], &TrainConfig::default(), 42, &options)
        .map_err(|e| e.to_string())?;
    let mut summary = Vec::new();
    for category in PhiCategory::ALL {
        let recalls: Vec<f64> = result.points.iter().map(|p| p.metrics.get(category).recall).collect();
        if let Some(w) = recalls.windows(2).find(|w| w[1] < w[0] - 0.01) {
            return Err(format!("{category} recall drops {} -> {}", w[0], w[1]));
        }
    }
    for category in [PhiCategory::PatientName, PhiCategory::Hospital] {
        let f1: Vec<f64> = result.points.iter().map(|p| p.metrics.get(category).f1).collect();
        let r: Vec<f64> = result.points.iter().map(|p| p.metrics.get(category).recall).collect();
        let gain = f1[3] - f1[0];
        ensure(gain >= 0.02, || format!("{category} F1 {:.3} -> {:.3}", f1[0], f1[3]))?;
        summary.push(format!("{category} F1 {:.3}->{:.3} R {:.3}->{:.3}", f1[0], f1[3], r[0], r[3]));
    }
    within_time(start, Duration::from_secs(300))?;
    Ok(format!("{} in {:.0?}", summary.join(", "), start.elapsed()))
}

// ---------------------------------------------------------------- CLI runs

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn run(&self, args: &[&str]) -> Result<(), String> {
        let out = Command::new(env!("CARGO_BIN_EXE_synthdeid"))
            .args(args)
            .current_dir(self.dir.path())
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || {
            format!("`synthdeid {}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
        })
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }
}

/// Output files of a run directory, manifest excluded.
fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "manifest.json")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

fn manifest_without_run_fields(dir: &Path) -> serde_json::Value {
    let text = fs::read_to_string(dir.join("manifest.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v.as_object_mut().unwrap().remove("duration_secs");
    v["config"].as_object_mut().unwrap().remove("out");
    v
}

fn determinism() -> Check {
    let ws = Workspace { dir: tempfile::tempdir().map_err(|e| e.to_string())? };
    ws.run(&["gen", "--seed", "8", "--notes", "260", "--out", "gen"])?;
    ws.run(&["parse", "--input", "gen/raw.jsonl", "--out", "parse"])?;
    ws.run(&["synth", "--seed", "8", "--input", "parse/corpus.jsonl", "--out", "synth"])?;
    ws.run(&["stats", "--input", "synth/labeled.jsonl", "--out", "stats"])?;

    let mut labeled = read_labeled_corpus(ws.path("synth/labeled.jsonl")).map_err(|e| e.to_string())?;
    let test = labeled.split_off(200);
    write_labeled_corpus(&labeled, ws.path("pool.jsonl")).unwrap();
    write_labeled_corpus(&test, ws.path("test.jsonl")).unwrap();

    ws.run(&["train", "--input", "pool.jsonl", "--max-iter", "60", "--out", "train"])?;
    ws.run(&["tag", "--model", "train/model.json", "--input", "test.jsonl", "--out", "tag"])?;
    ws.run(&["eval", "--gold", "test.jsonl", "--predictions", "tag/predictions.jsonl", "--out", "eval"])?;
    ws.run(&["curve", "--pool", "pool.jsonl", "--test", "test.jsonl", "--sizes", "50,100,200", "--max-iter", "40", "--out", "curve"])?;

    let runs = [("gen", "gen"), ("parse", "parse"), ("synth", "synth"), ("stats", "stats"), ("train", "train"), ("tag", "tag"), ("eval", "eval"), ("curve", "curve")];
    for (command, dir) in runs {
        let again = format!("{dir}-again");
        ws.run(&[command, "--config", &format!("{dir}/manifest.json"), "--threads", "1", "--out", &again])?;
        ensure(outputs(&ws.path(dir)) == outputs(&ws.path(&again)), || format!("{command}: outputs differ on re-run"))?;
        ensure(
            manifest_without_run_fields(&ws.path(dir)) == manifest_without_run_fields(&ws.path(&again)),
            || format!("{command}: manifests differ on re-run"),
        )?;
    }

    ws.run(&["train", "--config", "train/manifest.json", "--threads", "4", "--out", "train4"])?;
    ws.run(&["tag", "--model", "train4/model.json", "--input", "test.jsonl", "--threads", "4", "--out", "tag4"])?;
    let single = fs::read(ws.path("tag/predictions.jsonl")).unwrap();
    let multi = fs::read(ws.path("tag4/predictions.jsonl")).unwrap();
    ensure(single == multi, || "4-thread predictions differ from the single-thread run".into())?;
    Ok(format!("{} commands reproduced; {} test notes tagged identically with 4 threads", runs.len(), test.len()))
}

fn serialization() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let notes = labeled_corpus(9, 250, 1);
    let (train, test) = notes.split_at(150);
    let config = TrainConfig { max_iterations: 60, ..TrainConfig::default() };
    let tagger = Tagger::train(train, Gazetteer::fixtures(), ContextMode::Positional, &config).map_err(|e| e.to_string())?;
    let model_path = dir.path().join("model.json");
    crf::save_model(tagger.model(), &model_path).map_err(|e| e.to_string())?;
    let loaded = Tagger::from_model(crf::load_model(&model_path).map_err(|e| e.to_string())?, Gazetteer::fixtures())
        .map_err(|e| e.to_string())?;
    let test_notes: Vec<Note> = test.iter().map(|n| n.note.clone()).collect();
    let before = tagger.tag_corpus(&test_notes, 1).unwrap();
    let after = loaded.tag_corpus(&test_notes, 1).unwrap();
    ensure(before == after, || "tags differ after model round trip".into())?;
    ensure(
        tagger.model().weights().iter().zip(loaded.model().weights()).all(|(a, b)| a.to_bits() == b.to_bits()),
        || "weights differ after model round trip".into(),
    )?;

    let raw = generate_corpus(&GenConfig { seed: 9, note_count: 250, ..GenConfig::default() }).unwrap();
    let parsed = parsed_corpus(9, 250);
    for (name, corpus) in [("raw", &raw), ("parsed", &parsed)] {
        let first = dir.path().join(format!("{name}.jsonl"));
        let second = dir.path().join(format!("{name}-2.jsonl"));
        write_corpus(corpus, &first).unwrap();
        let read = read_corpus(&first).map_err(|e| e.to_string())?;
        ensure(&read == corpus, || format!("{name} corpus changed on read"))?;
        write_corpus(&read, &second).unwrap();
        ensure(fs::read(&first).unwrap() == fs::read(&second).unwrap(), || format!("{name} corpus bytes changed"))?;
    }
    let first = dir.path().join("labeled.jsonl");
    write_labeled_corpus(&notes, &first).unwrap();
    let read = read_labeled_corpus(&first).map_err(|e| e.to_string())?;
    ensure(read == notes, || "labeled corpus changed on read".into())?;
    Ok(format!("{} notes tagged identically; raw, parsed and labeled corpora round-trip", test.len()))
}

fn main() {
    let suite = crf_suite();
    let criteria: Vec<Criterion> = vec![
        ("crf oracle equivalence", Box::new(|| crf_oracle(&suite))),
        ("gradient check", Box::new(gradient_check)),
        ("marginal normalization", Box::new(|| marginal_normalization(&suite))),
        ("sampling fidelity", Box::new(sampling_fidelity)),
        ("synthesis alignment", Box::new(synthesis_alignment)),
        ("stats formatting", Box::new(stats_formatting)),
        ("learning-curve trend", Box::new(learning_curve_trend)),
        ("determinism", Box::new(determinism)),
        ("serialization", Box::new(serialization)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
