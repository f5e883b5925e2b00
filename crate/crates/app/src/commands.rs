//! One function per subcommand. Each resolves its effective config,
//! does the work and leaves a manifest next to its outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use modq_core::baselines::{fit_cnb, fit_random};
use modq_core::dataset::{
    attach_categories, import_normvio, make_choice_pairs, make_extract_example, read_jsonl, read_normvio,
    split_dataset, split_dataset_holding_out, write_jsonl, RowBuilder,
};
use modq_core::evalkit::{
    evaluate, evaluate_predictor, generalization_report, label_external, read_external_predictions,
    render_generalization_png, write_generalization_csv, EvalReport, ExternalPrediction, HoldoutSet,
};
use modq_core::rulekit::{
    categorizer_registry, encoder_registry, Categorizer, KeywordCategorizer, ListRuleExtractor, RemoteRuleExtractor,
    RuleExtractor,
};
use modq_core::{DatasetRow, ModelKind, ModerationRecord, SplitName};
use modq_ingest::mock::{serve as serve_mock, Federation};
use modq_ingest::{ApiClient, HttpsScheme, PrefixScheme, TrigramIdentifier, UrlScheme};
use modq_models::{save_checkpoint, train_extract, train_select, CheckpointConfig};
use serde::Serialize;

use crate::cli::*;
use crate::config::AppConfig;
use crate::error::{AppError, Result};
use crate::manifest::Manifest;
use crate::models::{load_all, load_model, scan_model_dir, BANK_FILE};
use crate::service::{serve_forever, AppState};

const MANIFEST: &str = "manifest.json";

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| AppError::io(path, e))
}

fn rows(path: &Path) -> Result<Vec<DatasetRow>> {
    Ok(read_jsonl(path)?)
}

pub fn categorizer(cfg: &AppConfig) -> Result<Arc<dyn Categorizer>> {
    Ok(match &cfg.dataset.keyword_table {
        Some(p) => Arc::new(KeywordCategorizer::from_file(p)?),
        None => categorizer_registry().get(&cfg.dataset.categorizer)?,
    })
}

fn extractor(cfg: &AppConfig) -> Result<Box<dyn RuleExtractor>> {
    match cfg.dataset.extractor.as_str() {
        "list" => Ok(Box::new(ListRuleExtractor::default())),
        "remote" => {
            let r = &cfg.dataset.remote;
            Ok(Box::new(RemoteRuleExtractor::new(r.url.clone(), r.model.clone(), r.api_key_env.clone())))
        }
        other => Err(AppError::Usage(format!("unknown extractor `{other}` (expected list or remote)"))),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Runtime::new().map_err(|e| AppError::Io { path: "tokio runtime".into(), source: e })
}

pub fn read_seeds(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

pub fn harvest(mut cfg: AppConfig, a: &HarvestArgs) -> Result<()> {
    if let Some(p) = &a.seeds {
        cfg.harvest.seeds = read_seeds(p)?;
    } else if a.mock && cfg.harvest.seeds.is_empty() {
        cfg.harvest.seeds = vec!["alpha.test".into(), "zeta.test".into()];
    }
    if let Some(d) = a.depth {
        cfg.harvest.max_depth = d;
    }
    if let Some(r) = a.rate {
        cfg.client.requests_per_second = r;
    }
    if let Some(f) = a.fan_out {
        cfg.harvest.fan_out = f;
    }
    if let Some(s) = a.safe_seed {
        cfg.harvest.safe_seed = s;
    }
    let out = runtime()?.block_on(async {
        let mock = if a.mock {
            Some(serve_mock(Federation::bundled()).await.map_err(|e| AppError::io(Path::new("mock"), e))?)
        } else {
            None
        };
        let scheme: Arc<dyn UrlScheme> = match &mock {
            Some(m) => Arc::new(PrefixScheme { base: m.base_url() }),
            None => Arc::new(HttpsScheme),
        };
        let client = ApiClient::new(cfg.client.clone(), scheme)?;
        let lang = TrigramIdentifier::default();
        Ok::<_, AppError>(modq_ingest::harvest(&client, &cfg.harvest, &lang).await?)
    })?;
    modq_ingest::harvest::write_outputs(&out, &a.out)?;
    log::info!("harvest: {}", serde_json::to_string(&out.stats)?);
    let mut m = Manifest::new("harvest", cfg.harvest.safe_seed, &cfg);
    if let Some(p) = &a.seeds {
        m.input(p)?;
    }
    m.output(&a.out)?;
    m.write(&a.out.join(MANIFEST))
}

pub fn build_dataset(mut cfg: AppConfig, a: &BuildArgs) -> Result<()> {
    if let Some(e) = &a.extractor {
        cfg.dataset.extractor = e.clone();
    }
    if let Some(t) = a.threshold {
        cfg.dataset.match_threshold = t;
    }
    let cat = categorizer(&cfg)?;
    let (rows, stats, input) = if let Some(path) = &a.normvio {
        let import = import_normvio(&read_normvio(path)?);
        let mut rows: Vec<DatasetRow> =
            import.records.iter().map(|r| DatasetRow::from_record(r, &import.rule_sets[&r.community])).collect();
        attach_categories(&mut rows, cat.as_ref());
        let stats = serde_json::json!({"input": import.records.len() + import.dropped, "dropped": import.dropped, "emitted": rows.len()});
        (rows, stats, path.clone())
    } else {
        let path = a.records.clone().expect("clap requires --records or --normvio");
        let records: Vec<ModerationRecord> = read_jsonl(&path)?;
        let ex = extractor(&cfg)?;
        let enc = encoder_registry().get(&cfg.dataset.encoder)?;
        let builder = RowBuilder {
            extractor: ex.as_ref(),
            encoder: enc.as_ref(),
            categorizer: cat.as_ref(),
            threshold: cfg.dataset.match_threshold,
        };
        let (rows, stats) = builder.build(&records)?;
        (rows, serde_json::to_value(stats)?, path)
    };
    mkdir(&a.out)?;
    write_jsonl(&a.out.join("dataset.jsonl"), &rows)?;
    write_json(&a.out.join("build_stats.json"), &stats)?;
    let mut m = Manifest::new("build-dataset", 0, &cfg);
    m.input(&input)?.output(&a.out)?;
    m.write(&a.out.join(MANIFEST))
}

pub fn synth(mut cfg: AppConfig, a: &SynthArgs) -> Result<()> {
    if let Some(s) = a.seed {
        cfg.synth.seed = s;
    }
    if let Some(n) = a.comments {
        cfg.synth.n_comments = n;
    }
    let corpus = modq_core::synth::generate(&cfg.synth)?;
    mkdir(&a.out)?;
    write_jsonl(&a.out.join("dataset.jsonl"), &corpus.rows)?;
    write_json(
        &a.out.join("communities.json"),
        &serde_json::json!({"communities": corpus.communities, "disjoint_communities": corpus.disjoint_communities}),
    )?;
    let mut m = Manifest::new("synth", cfg.synth.seed, &cfg);
    m.output(&a.out)?;
    m.write(&a.out.join(MANIFEST))
}

pub fn split(mut cfg: AppConfig, a: &SplitArgs) -> Result<()> {
    if let Some(s) = a.seed {
        cfg.split.seed = s;
    }
    if let Some(n) = a.holdout_communities {
        cfg.split.n_holdout_communities = n;
    }
    if let Some(n) = a.holdout_rules {
        cfg.split.n_holdout_rules = n;
    }
    let input = rows(&a.input)?;
    let splits = if a.holdout_community.is_empty() {
        split_dataset(&input, &cfg.split)?
    } else {
        cfg.split.n_holdout_communities = 0;
        split_dataset_holding_out(&input, &cfg.split, &a.holdout_community)?
    };
    mkdir(&a.out)?;
    for name in SplitName::ALL {
        write_jsonl(&a.out.join(format!("{}.jsonl", name.as_str())), splits.get(name))?;
    }
    write_json(
        &a.out.join("held_out.json"),
        &serde_json::json!({"communities": splits.held_out_communities, "rules": splits.held_out_rules}),
    )?;
    let mut m = Manifest::new("split", cfg.split.seed, &cfg);
    m.input(&a.input)?.output(&a.out)?;
    m.write(&a.out.join(MANIFEST))
}

pub fn train(mut cfg: AppConfig, a: &TrainArgs) -> Result<()> {
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(s) = a.seed {
        cfg.train.seed = s;
    }
    if let Some(c) = a.copies {
        cfg.augment.copies = c;
    }
    let train_rows = rows(&a.train)?;
    let dev_rows = match &a.dev {
        Some(p) => rows(p)?,
        None => Vec::new(),
    };
    let needs_dev = matches!(a.model, ModelChoice::Select | ModelChoice::Extract);
    if needs_dev && dev_rows.is_empty() {
        return Err(AppError::Usage("--dev with at least one row is required to pick a checkpoint".into()));
    }
    let cat = categorizer(&cfg)?;
    mkdir(&a.out)?;
    let log_epoch = |m: &modq_models::EpochMetrics| {
        log::info!("epoch {} dev macro F1 {:.4} accuracy {:.4}", m.epoch, m.dev_macro_f1, m.dev_accuracy)
    };
    match a.model {
        ModelChoice::Select => {
            let groups = train_rows
                .iter()
                .map(|r| make_choice_pairs(&r.record(), &r.rule_set()))
                .collect::<modq_core::Result<Vec<_>>>()?;
            let t = train_select(&groups, &dev_rows, &cfg.train, &cfg.encoder, cat.as_ref(), log_epoch)?;
            let ck = CheckpointConfig {
                format_version: modq_models::checkpoint::FORMAT_VERSION,
                model_kind: ModelKind::Select,
                encoder: cfg.encoder.clone(),
                train: cfg.train.clone(),
                best_epoch: t.best_epoch,
            };
            save_checkpoint(&a.out, &ck, &t.weights, &t.tokenizer, &t.metrics)?;
        }
        ModelChoice::Extract => {
            let base = train_rows
                .iter()
                .map(|r| make_extract_example(&r.record(), &r.rule_set()))
                .collect::<modq_core::Result<Vec<_>>>()?;
            let examples = cfg.augment.expand(&base)?;
            let t = train_extract(&examples, &dev_rows, &cfg.train, &cfg.encoder, cat.as_ref(), log_epoch)?;
            if t.skipped > 0 {
                log::warn!("{} examples lost their gold span to truncation", t.skipped);
            }
            let ck = CheckpointConfig {
                format_version: modq_models::checkpoint::FORMAT_VERSION,
                model_kind: ModelKind::Extract,
                encoder: cfg.encoder.clone(),
                train: cfg.train.clone(),
                best_epoch: t.best_epoch,
            };
            save_checkpoint(&a.out, &ck, &t.weights, &t.tokenizer, &t.metrics)?;
        }
        ModelChoice::Random => fit_random(&train_rows, cfg.train.seed)?.save(&a.out.join(BANK_FILE))?,
        ModelChoice::Cnb => fit_cnb(&train_rows, Default::default())?.save(&a.out.join(BANK_FILE))?,
    }
    let mut m = Manifest::new("train", cfg.train.seed, &cfg);
    m.input(&a.train)?;
    if let Some(d) = &a.dev {
        m.input(d)?;
    }
    m.output(&a.out)?;
    m.write(&a.out.join(MANIFEST))
}

pub fn evaluate_cmd(cfg: AppConfig, a: &EvaluateArgs) -> Result<()> {
    let gold = rows(&a.gold)?;
    let cat = categorizer(&cfg)?;
    let report: EvalReport = match (&a.pred, &a.model) {
        (Some(p), _) => evaluate(&label_external(&read_external_predictions(p)?, &gold, cat.as_ref())?)?,
        (None, Some(m)) => evaluate_predictor(load_model(m)?.1.as_ref(), &gold, cat.as_ref())?,
        (None, None) => return Err(AppError::Usage("--pred or --model is required".into())),
    };
    match &a.out {
        Some(out) => {
            write_json(out, &report)?;
            let mut m = Manifest::new("evaluate", 0, &cfg);
            m.input(&a.gold)?;
            if let Some(p) = a.pred.as_ref().or(a.model.as_ref()) {
                m.input(p)?;
            }
            m.output(out)?;
            m.write(&sibling_manifest(out))
        }
        None => {
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
    }
}

/// `report.json` gets `report.manifest.json`.
fn sibling_manifest(out: &Path) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}.{MANIFEST}"))
}

pub fn predict(cfg: AppConfig, a: &PredictArgs) -> Result<()> {
    let (_, model) = load_model(&a.model)?;
    let input = rows(&a.input)?;
    let preds: Vec<ExternalPrediction> = model
        .predict_rows(&input)?
        .into_iter()
        .map(|(record_id, n)| ExternalPrediction {
            record_id,
            predicted_rule_number: Some(n),
            predicted_categories: None,
        })
        .collect();
    write_jsonl(&a.out, &preds)?;
    let mut m = Manifest::new("predict", 0, &cfg);
    m.input(&a.model)?.input(&a.input)?.output(&a.out)?;
    m.write(&sibling_manifest(&a.out))
}

pub fn serve(mut cfg: AppConfig, a: &ServeArgs) -> Result<()> {
    if let Some(addr) = &a.addr {
        cfg.serve.addr = addr.clone();
    }
    let mut paths = match &a.model_dir {
        Some(d) => scan_model_dir(d)?,
        None => BTreeMap::new(),
    };
    for spec in &a.models {
        let (id, path) =
            spec.split_once('=').ok_or_else(|| AppError::Usage(format!("--model expects ID=PATH, got `{spec}`")))?;
        paths.insert(id.to_string(), PathBuf::from(path));
    }
    if paths.is_empty() {
        return Err(AppError::Usage("no models to serve; pass --model-dir or --model".into()));
    }
    let state = Arc::new(AppState::new(load_all(&paths)?, &cfg.serve));
    runtime()?
        .block_on(serve_forever(state, &cfg.serve.addr))
        .map_err(|e| AppError::Io { path: cfg.serve.addr.clone(), source: e })
}

pub fn report(cfg: AppConfig, a: &ReportArgs) -> Result<()> {
    let (_, model) = load_model(&a.model)?;
    let cat = categorizer(&cfg)?;
    let held: serde_json::Value = {
        let p = a.splits.join("held_out.json");
        serde_json::from_slice(&std::fs::read(&p).map_err(|e| AppError::io(&p, e))?)?
    };
    let count = |k: &str| held[k].as_array().map_or(0, Vec::len);
    let sets = [
        ("test", SplitName::Test, 0),
        ("communities_holdout", SplitName::CommunitiesHoldout, count("communities")),
        ("rules_holdout", SplitName::RulesHoldout, count("rules")),
    ];
    let mut holdouts = Vec::new();
    let mut reports = BTreeMap::new();
    for (label, name, n) in sets {
        let path = a.splits.join(format!("{}.jsonl", name.as_str()));
        let r = rows(&path)?;
        reports.insert(
            label,
            if r.is_empty() { None } else { Some(evaluate_predictor(model.as_ref(), &r, cat.as_ref())?) },
        );
        holdouts.push(HoldoutSet { set: label.to_string(), n, rows: r });
    }
    let table = generalization_report(model.as_ref(), &holdouts, cat.as_ref())?;
    mkdir(&a.out)?;
    write_generalization_csv(&a.out.join("generalization.csv"), &table)?;
    render_generalization_png(&a.out.join("generalization.png"), &table)?;
    write_json(&a.out.join("report.json"), &reports)?;
    let mut m = Manifest::new("report", 0, &cfg);
    m.input(&a.model)?.input(&a.splits)?.output(&a.out)?;
    m.write(&a.out.join(MANIFEST))
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = AppConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Harvest(a) => harvest(cfg, a),
        Command::BuildDataset(a) => build_dataset(cfg, a),
        Command::Split(a) => split(cfg, a),
        Command::Train(a) => train(cfg, a),
        Command::Evaluate(a) => evaluate_cmd(cfg, a),
        Command::Predict(a) => predict(cfg, a),
        Command::Serve(a) => serve(cfg, a),
        Command::Report(a) => report(cfg, a),
        Command::Synth(a) => synth(cfg, a),
    }
}
