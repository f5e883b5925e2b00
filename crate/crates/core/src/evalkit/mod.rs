//! Scoring predictions against gold labels.

pub mod f1;
pub mod labels;
pub mod mlcm;
pub mod report;

pub use f1::{
    binary_safe_f1, category_macro_f1, exact_rule_accuracy, f1, mean_macro_f1, supported_categories, Binary, BinarySafe,
};
pub use labels::{label_external, label_predictions, read_external_predictions, ExternalPrediction, LabeledPrediction};
pub use mlcm::{fractional_allocation, multilabel_confusion, ConfusionMatrix};
pub use report::{
    evaluate, evaluate_predictor, generalization_report, render_generalization_png, write_generalization_csv,
    EvalReport, GeneralizationRow, HoldoutSet,
};
