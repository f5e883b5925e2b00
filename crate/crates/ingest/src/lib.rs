//! Harvesting moderation data from Lemmy instances.
//!
//! Discovery snowballs over each instance's federation listing, the modlog
//! is paged per instance, and [`filter::filter_records`] turns raw log
//! entries into clean [`modq_core::ModerationRecord`]s. A fixture-backed
//! mock federation lives in [`mock`] for tests and offline runs.

pub mod client;
pub mod discover;
pub mod domain;
pub mod error;
pub mod filter;
pub mod harvest;
pub mod langid;
pub mod lemmy;
pub mod mock;
pub mod modlog;
pub mod safe;
pub mod types;

pub use client::{ApiClient, ClientConfig, HttpsScheme, PrefixScheme, UrlScheme};
pub use discover::discover_instances;
pub use error::{IngestError, Result};
pub use filter::{filter_records, FilterPolicy, FilterStats};
pub use harvest::{harvest, HarvestConfig, HarvestOutput, HarvestStats};
pub use langid::{AcceptAll, LanguageIdentifier, TrigramIdentifier};
pub use modlog::{fetch_modlog, ModlogPage, PageCursor};
pub use safe::{SafeCandidate, SafePool};
pub use types::*;
