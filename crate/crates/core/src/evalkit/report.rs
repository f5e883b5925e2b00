use std::collections::BTreeMap;
use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::f1::{binary_safe_f1, category_macro_f1, exact_rule_accuracy, mean_macro_f1, BinarySafe};
use super::labels::{label_predictions, LabeledPrediction};
use super::mlcm::{multilabel_confusion, ConfusionMatrix};
use crate::error::{Error, Result};
use crate::predictor::RulePredictor;
use crate::rulekit::Categorizer;
use crate::types::{Category, DatasetRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_records: usize,
    pub per_category_macro_f1: BTreeMap<Category, f64>,
    /// Mean over categories that occur in gold.
    pub mean_macro_f1: f64,
    pub binary_safe: BinarySafe,
    pub exact_rule_accuracy: f64,
    pub confusion: ConfusionMatrix,
}

pub fn evaluate(labeled: &[LabeledPrediction]) -> Result<EvalReport> {
    if labeled.is_empty() {
        return Err(Error::invalid("nothing to evaluate"));
    }
    Ok(EvalReport {
        n_records: labeled.len(),
        per_category_macro_f1: category_macro_f1(labeled),
        mean_macro_f1: mean_macro_f1(labeled),
        binary_safe: binary_safe_f1(labeled),
        exact_rule_accuracy: exact_rule_accuracy(labeled),
        confusion: multilabel_confusion(labeled),
    })
}

pub fn evaluate_predictor(
    model: &dyn RulePredictor,
    rows: &[DatasetRow],
    categorizer: &dyn Categorizer,
) -> Result<EvalReport> {
    let preds = model.predict_rows(rows)?;
    evaluate(&label_predictions(&preds, rows, categorizer)?)
}

/// A holdout evaluation set for one value of N.
#[derive(Debug, Clone)]
pub struct HoldoutSet {
    /// `communities_holdout`, `rules_holdout`, or any label.
    pub set: String,
    pub n: usize,
    pub rows: Vec<DatasetRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationRow {
    pub set: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub category: String,
    /// Empty when the holdout had no records.
    pub macro_f1: Option<f64>,
}

pub fn generalization_report(
    model: &dyn RulePredictor,
    holdouts: &[HoldoutSet],
    categorizer: &dyn Categorizer,
) -> Result<Vec<GeneralizationRow>> {
    let mut out = Vec::new();
    for h in holdouts {
        if h.rows.is_empty() {
            out.extend(Category::ALL.iter().map(|c| GeneralizationRow {
                set: h.set.clone(),
                n: h.n,
                category: c.to_string(),
                macro_f1: None,
            }));
            continue;
        }
        let report = evaluate_predictor(model, &h.rows, categorizer)?;
        out.extend(report.per_category_macro_f1.iter().map(|(c, v)| GeneralizationRow {
            set: h.set.clone(),
            n: h.n,
            category: c.to_string(),
            macro_f1: Some(*v),
        }));
    }
    Ok(out)
}

pub fn write_generalization_csv(path: &Path, rows: &[GeneralizationRow]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

const PALETTE: [[u8; 3]; 6] =
    [[31, 119, 180], [255, 127, 14], [44, 160, 44], [214, 39, 40], [148, 103, 189], [140, 86, 75]];

/// Grouped bar chart: one group per category, one bar per (set, N) in
/// first-appearance order. Absent values are left blank.
pub fn render_generalization_png(path: &Path, rows: &[GeneralizationRow]) -> Result<()> {
    let mut series: Vec<(String, usize)> = Vec::new();
    for r in rows {
        if !series.iter().any(|(s, n)| *s == r.set && *n == r.n) {
            series.push((r.set.clone(), r.n));
        }
    }
    let (bar_w, gap, height, margin) = (8u32, 10u32, 240u32, 10u32);
    let group_w = bar_w * series.len().max(1) as u32 + gap;
    let width = margin * 2 + group_w * Category::ALL.len() as u32;
    let mut img = RgbImage::from_pixel(width, height + margin * 2, Rgb([255, 255, 255]));
    for x in margin..width - margin {
        img.put_pixel(x, height + margin, Rgb([0, 0, 0]));
    }
    for r in rows {
        let Some(v) = r.macro_f1 else { continue };
        let Ok(cat) = r.category.parse::<Category>() else { continue };
        let si = series.iter().position(|(s, n)| *s == r.set && *n == r.n).unwrap_or(0);
        let x0 = margin + cat.index() as u32 * group_w + si as u32 * bar_w;
        let h = (v.clamp(0.0, 1.0) * f64::from(height)).round() as u32;
        let color = Rgb(PALETTE[si % PALETTE.len()]);
        for x in x0..x0 + bar_w - 1 {
            for y in (height + margin - h)..(height + margin) {
                img.put_pixel(x, y, color);
            }
        }
    }
    img.save(path)?;
    Ok(())
}
