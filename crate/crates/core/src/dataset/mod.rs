//! Model-ready QA examples, augmentations, splits and dataset files.

pub mod augment;
pub mod build;
pub mod context;
pub mod examples;
pub mod io;
pub mod normvio;
pub mod split;

pub use augment::{augment_extract, AugmentOp, AugmentPlan};
pub use build::{attach_categories, gold_categories, BuildStats, RowBuilder};
pub use context::{build_context, ContextEntry, RuleContext, Segment, MARKER_TOKENS};
pub use examples::{
    check_group, content_sequence, format_question, group_pairs, make_choice_pairs, make_extract_example, ChoicePair,
    ExtractExample, SEP_MARK,
};
pub use io::{read_jsonl, write_jsonl};
pub use normvio::{import_normvio, read_normvio, NormVioImport, NormVioRow};
pub use split::{rule_key, split_dataset, split_dataset_holding_out, SplitSpec, Splits};
