//! Resolved options and the body of each subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use synthdeid::corpusgen::{generate_corpus_with, GenConfig, TemplateBank};
use synthdeid::crf::{self, TrainConfig};
use synthdeid::eval::{self, learning_curve, CurveOptions, EvalError, DEFAULT_SIZES};
use synthdeid::features::{ContextMode, Gazetteer};
use synthdeid::note::io::{read_jsonl, write_jsonl};
use synthdeid::note::{corpus_stats, parse_note, read_corpus, write_corpus, CategoryMapping, Strictness};
use synthdeid::surrogen::{
    read_labeled_corpus, synthesize_corpus, write_labeled_corpus, Lexicons, SurrogatePlan,
};
use synthdeid::{Label, Tagger};

use crate::config::{Common, RunManifest};
use crate::error::CliError;

pub const RAW: &str = "raw.jsonl";
pub const CORPUS: &str = "corpus.jsonl";
pub const LABELED: &str = "labeled.jsonl";
pub const MODEL: &str = "model.json";
pub const PREDICTIONS: &str = "predictions.jsonl";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenOpts {
    pub notes: usize,
    pub density: f64,
    pub min_lines: usize,
    pub max_lines: usize,
    pub templates: Option<PathBuf>,
}

impl Default for GenOpts {
    fn default() -> Self {
        let g = GenConfig::default();
        GenOpts {
            notes: g.note_count,
            density: g.density,
            min_lines: g.min_lines,
            max_lines: g.max_lines,
            templates: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParseOpts {
    pub input: PathBuf,
    pub mapping: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthOpts {
    pub input: PathBuf,
    pub lexicons: Option<PathBuf>,
    pub consistent: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsOpts {
    pub input: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOpts {
    pub input: PathBuf,
    pub l2: f64,
    pub max_iter: usize,
    pub tol_obj: f64,
    pub tol_grad: f64,
    pub gazetteer: Option<PathBuf>,
    pub context: ContextMode,
}

impl Default for TrainOpts {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainOpts {
            input: PathBuf::new(),
            l2: t.l2_lambda,
            max_iter: t.max_iterations,
            tol_obj: t.tol_objective,
            tol_grad: t.tol_gradient,
            gazetteer: None,
            context: ContextMode::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TagOpts {
    pub model: PathBuf,
    pub input: PathBuf,
    pub gazetteer: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOpts {
    pub gold: PathBuf,
    pub predictions: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveOpts {
    pub pool: PathBuf,
    pub test: PathBuf,
    pub sizes: Vec<usize>,
    pub l2: f64,
    pub max_iter: usize,
    pub tol_obj: f64,
    pub tol_grad: f64,
    pub gazetteer: Option<PathBuf>,
    pub context: ContextMode,
}

impl Default for CurveOpts {
    fn default() -> Self {
        let t = TrainOpts::default();
        CurveOpts {
            pool: PathBuf::new(),
            test: PathBuf::new(),
            sizes: DEFAULT_SIZES.to_vec(),
            l2: t.l2,
            max_iter: t.max_iter,
            tol_obj: t.tol_obj,
            tol_grad: t.tol_grad,
            gazetteer: None,
            context: t.context,
        }
    }
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub note_id: String,
    pub labels: Vec<Label>,
}

fn required(path: &Path, flag: &str) -> Result<(), CliError> {
    if path.as_os_str().is_empty() {
        return Err(CliError::Usage(format!("missing required option --{flag}")));
    }
    Ok(())
}

fn write_text(out: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    let path = out.join(name);
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(PathBuf::from(name))
}

fn gazetteer(dir: Option<&Path>) -> Result<Gazetteer, CliError> {
    Ok(match dir {
        Some(dir) => Gazetteer::from_lexicons(&Lexicons::load_dir(dir)?),
        None => Gazetteer::fixtures(),
    })
}

fn train_config(common: &Common, l2: f64, max_iter: usize, tol_obj: f64, tol_grad: f64) -> TrainConfig {
    TrainConfig {
        l2_lambda: l2,
        max_iterations: max_iter,
        tol_objective: tol_obj,
        tol_gradient: tol_grad,
        seed: common.seed,
        threads: common.threads,
        ..TrainConfig::default()
    }
}

pub fn gen(common: &Common, opts: &GenOpts, manifest: &mut RunManifest) -> Result<(), CliError> {
    let bank = match &opts.templates {
        Some(path) => {
            manifest.inputs.insert("templates".into(), path.clone());
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            TemplateBank::parse(&text)?
        }
        None => TemplateBank::default(),
    };
    let config = GenConfig {
        seed: common.seed,
        note_count: opts.notes,
        min_lines: opts.min_lines,
        max_lines: opts.max_lines,
        density: opts.density,
        ..GenConfig::default()
    };
    let notes = generate_corpus_with(&config, &bank)?;
    write_corpus(&notes, common.out.join(RAW))?;
    manifest.seeds.insert("seed".into(), common.seed);
    manifest.outputs.push(RAW.into());
    eprintln!("wrote {} notes", notes.len());
    Ok(())
}

pub fn parse(common: &Common, opts: &ParseOpts, manifest: &mut RunManifest) -> Result<(), CliError> {
    required(&opts.input, "input")?;
    manifest.inputs.insert("input".into(), opts.input.clone());
    let mapping = match &opts.mapping {
        Some(path) => {
            manifest.inputs.insert("mapping".into(), path.clone());
            CategoryMapping::load(path)?
        }
        None => CategoryMapping::default(),
    };
    let strictness = if common.strict { Strictness::Strict } else { Strictness::Lenient };
    let raw = read_corpus(&opts.input)?;
    let mut notes = Vec::with_capacity(raw.len());
    for r in &raw {
        let outcome = parse_note(r, &mapping, strictness)?;
        for w in &outcome.warnings {
            eprintln!(
                "warning: {} line {} offset {}: unmapped placeholder {:?} parsed as ID",
                w.note_id, w.line, w.offset, w.inner
            );
        }
        notes.push(outcome.note);
    }
    write_corpus(&notes, common.out.join(CORPUS))?;
    manifest.outputs.push(CORPUS.into());
    Ok(())
}

pub fn synth(common: &Common, opts: &SynthOpts, manifest: &mut RunManifest) -> Result<(), CliError> {
    required(&opts.input, "input")?;
    manifest.inputs.insert("input".into(), opts.input.clone());
    let lexicons = match &opts.lexicons {
        Some(dir) => {
            manifest.inputs.insert("lexicons".into(), dir.clone());
            Lexicons::load_dir(dir)?
        }
        None => Lexicons::fixtures(),
    };
    let notes = read_corpus(&opts.input)?;
    let plan = SurrogatePlan {
        consistency_mode: opts.consistent,
        ..SurrogatePlan::new(common.seed)
    };
    let labeled = synthesize_corpus(&notes, &plan, &lexicons, common.threads)?;
    write_labeled_corpus(&labeled, common.out.join(LABELED))?;
    manifest.seeds.insert("seed".into(), common.seed);
    manifest.outputs.push(LABELED.into());
    Ok(())
}

pub fn stats(common: &Common, opts: &StatsOpts, manifest: &mut RunManifest) -> Result<(), CliError> {
    required(&opts.input, "input")?;
    manifest.inputs.insert("input".into(), opts.input.clone());
    let stats = corpus_stats(&read_corpus(&opts.input)?);
    let table = stats.render();
    manifest.outputs.push(write_text(&common.out, "stats.txt", &table)?);
    manifest.outputs.push(write_text(&common.out, "stats.csv", &stats.to_csv())?);
    print!("{table}");
    Ok(())
}

pub fn train(common: &Common, opts: &TrainOpts, manifest: &mut RunManifest) -> Result<(), CliError> {
    required(&opts.input, "input")?;
    manifest.inputs.insert("input".into(), opts.input.clone());
    if let Some(dir) = &opts.gazetteer {
        manifest.inputs.insert("gazetteer".into(), dir.clone());
    }
    let gaz = gazetteer(opts.gazetteer.as_deref())?;
    let notes = read_labeled_corpus(&opts.input)?;
    let config = train_config(common, opts.l2, opts.max_iter, opts.tol_obj, opts.tol_grad);
    let tagger = Tagger::train(&notes, gaz, opts.context, &config)?;
    let model = tagger.model();
    crf::save_model(model, common.out.join(MODEL))?;
    manifest.seeds.insert("seed".into(), common.seed);
    manifest.outputs.push(MODEL.into());
    let meta = &model.meta;
    eprintln!(
        "{} features, {} iterations, objective {:.6}, stop: {}",
        model.num_features(),
        meta.iterations,
        meta.final_objective,
        meta.stop_reason.map_or("none", |r| r.as_str())
    );
    Ok(())
}

pub fn tag(common: &Common, opts: &TagOpts, manifest: &mut RunManifest) -> Result<(), CliError> {
    required(&opts.model, "model")?;
    required(&opts.input, "input")?;
    manifest.inputs.insert("model".into(), opts.model.clone());
    manifest.inputs.insert("input".into(), opts.input.clone());
    if let Some(dir) = &opts.gazetteer {
        manifest.inputs.insert("gazetteer".into(), dir.clone());
    }
    let tagger = Tagger::from_model(crf::load_model(&opts.model)?, gazetteer(opts.gazetteer.as_deref())?)?;
    let notes = read_corpus(&opts.input)?;
    let tags = tagger.tag_corpus(&notes, common.threads)?;
    let predictions: Vec<Prediction> = notes
        .iter()
        .zip(tags)
        .map(|(n, labels)| Prediction { note_id: n.note_id.clone(), labels })
        .collect();
    write_jsonl(&predictions, common.out.join(PREDICTIONS))?;
    manifest.outputs.push(PREDICTIONS.into());
    Ok(())
}

pub fn evaluate(common: &Common, opts: &EvalOpts, manifest: &mut RunManifest) -> Result<(), CliError> {
    required(&opts.gold, "gold")?;
    required(&opts.predictions, "predictions")?;
    manifest.inputs.insert("gold".into(), opts.gold.clone());
    manifest.inputs.insert("predictions".into(), opts.predictions.clone());
    let gold = read_labeled_corpus(&opts.gold)?;
    let predictions: Vec<Prediction> = read_jsonl(&opts.predictions, |_| Ok(()))?;
    if let Some((g, p)) = gold.iter().zip(&predictions).find(|(g, p)| g.note.note_id != p.note_id) {
        return Err(EvalError::Alignment(format!(
            "gold note {:?} is paired with prediction {:?}",
            g.note.note_id, p.note_id
        ))
        .into());
    }
    let labels: Vec<Vec<Label>> = predictions.into_iter().map(|p| p.labels).collect();
    let report = eval::evaluate(&gold, &labels)?;
    let size = gold.len();
    let table = eval::render_metrics([(size, &report)]);
    manifest.outputs.push(write_text(&common.out, "metrics.csv", &eval::metrics_csv([(size, &report)]))?);
    manifest.outputs.push(write_text(&common.out, "metrics.txt", &table)?);
    print!("{table}");
    Ok(())
}

pub fn curve(common: &Common, opts: &CurveOpts, manifest: &mut RunManifest) -> Result<(), CliError> {
    required(&opts.pool, "pool")?;
    required(&opts.test, "test")?;
    manifest.inputs.insert("pool".into(), opts.pool.clone());
    manifest.inputs.insert("test".into(), opts.test.clone());
    if let Some(dir) = &opts.gazetteer {
        manifest.inputs.insert("gazetteer".into(), dir.clone());
    }
    let pool = read_labeled_corpus(&opts.pool)?;
    let test = read_labeled_corpus(&opts.test)?;
    let options = CurveOptions {
        gazetteer: gazetteer(opts.gazetteer.as_deref())?,
        context_mode: opts.context,
        threads: common.threads,
    };
    let config = train_config(common, opts.l2, opts.max_iter, opts.tol_obj, opts.tol_grad);
    let result = learning_curve(&pool, &test, &opts.sizes, &config, common.seed, &options)?;
    let table = result.render();
    let json = serde_json::to_string_pretty(&result).expect("curve serializes") + "\n";
    manifest.seeds.insert("seed".into(), common.seed);
    manifest.outputs.push(write_text(&common.out, "curve.csv", &result.metrics_csv())?);
    manifest.outputs.push(write_text(&common.out, "recall.csv", &result.recall_csv())?);
    manifest.outputs.push(write_text(&common.out, "curve.txt", &table)?);
    manifest.outputs.push(write_text(&common.out, "curve.json", &json)?);
    print!("{table}");
    Ok(())
}
