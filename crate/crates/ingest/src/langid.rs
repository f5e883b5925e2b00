//! Language predicates for the "in English" filter.

use whatlang::{Detector, Lang};

pub trait LanguageIdentifier: Send + Sync {
    fn name(&self) -> &str;
    fn is_english(&self, text: &str) -> bool;
}

/// Character-trigram identifier over bundled language profiles, restricted
/// to languages common on Lemmy so short comments are not scattered over
/// rarely seen profiles.
pub struct TrigramIdentifier {
    detector: Detector,
}

pub const LANGUAGES: [Lang; 14] = [
    Lang::Eng,
    Lang::Deu,
    Lang::Fra,
    Lang::Spa,
    Lang::Por,
    Lang::Ita,
    Lang::Nld,
    Lang::Pol,
    Lang::Rus,
    Lang::Ukr,
    Lang::Fin,
    Lang::Swe,
    Lang::Jpn,
    Lang::Cmn,
];

impl Default for TrigramIdentifier {
    fn default() -> Self {
        TrigramIdentifier { detector: Detector::with_allowlist(LANGUAGES.to_vec()) }
    }
}

impl LanguageIdentifier for TrigramIdentifier {
    fn name(&self) -> &str {
        "trigram"
    }

    fn is_english(&self, text: &str) -> bool {
        self.detector.detect_lang(text) == Some(Lang::Eng)
    }
}

pub struct AcceptAll;

impl LanguageIdentifier for AcceptAll {
    fn name(&self) -> &str {
        "accept-all"
    }

    fn is_english(&self, _: &str) -> bool {
        true
    }
}
