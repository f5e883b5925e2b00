//! Seeded synthetic moderation corpus.
//!
//! Each concept has a rule-wording pool split in two: communities flagged
//! as disjoint draw only from the reserve half, so their rule texts never
//! appear elsewhere. Every wording of a concept shares one anchor word, and
//! violating comments carry keywords from a concept pool that is shared by
//! all communities.

use chrono::{DateTime, Duration, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::attach_categories;
use crate::error::{Error, Result};
use crate::rulekit::KeywordCategorizer;
use crate::types::{DatasetRow, Rule, SAFE_RULE};

struct Concept {
    wordings: &'static [&'static str],
    /// Wordings reserved for disjoint communities.
    reserve: &'static [&'static str],
    keywords: &'static [&'static str],
}

const CONCEPTS: &[Concept] = &[
    Concept {
        wordings: &["No spam.", "Do not spam the community.", "Spam will be removed.", "No spam or self-promotion."],
        reserve: &["Spam and advertising are banned.", "Keep this place free of spam."],
        keywords: &["discount", "promo", "coupon", "subscribe", "giveaway", "followers", "bargain"],
    },
    Concept {
        wordings: &["Be civil.", "Stay civil in every discussion.", "Civil comments only.", "Keep replies civil."],
        reserve: &["Civil and polite tone is required.", "Remain civil toward others."],
        keywords: &["idiot", "moron", "stupid", "loser", "dumbass", "clown", "pathetic"],
    },
    Concept {
        wordings: &[
            "No hate speech.",
            "Hate is not tolerated.",
            "Hate speech gets you banned.",
            "Zero tolerance for hate.",
        ],
        reserve: &["Remove hate and slurs.", "Hate posts are deleted."],
        keywords: &["subhuman", "vermin", "degenerates", "inferior", "infestation", "savages"],
    },
    Concept {
        wordings: &[
            "No doxxing.",
            "Doxxing is forbidden.",
            "Never post anything resembling doxxing.",
            "Doxxing results in a ban.",
        ],
        reserve: &["Doxxing of anyone is prohibited.", "Zero doxxing allowed here."],
        keywords: &["address", "phone", "workplace", "lives", "license", "neighborhood"],
    },
    Concept {
        wordings: &[
            "No NSFW content.",
            "NSFW material is not allowed.",
            "Keep NSFW posts elsewhere.",
            "Mark NSFW or it goes.",
        ],
        reserve: &["NSFW imagery will be removed.", "We do not host NSFW uploads."],
        keywords: &["nude", "xxx", "naked", "onlyfans", "lewd", "porno"],
    },
    Concept {
        wordings: &[
            "No spoilers.",
            "Hide spoilers properly.",
            "Spoilers must be hidden.",
            "Avoid spoilers in comments.",
        ],
        reserve: &["Spoilers without warning are removed.", "Unmarked spoilers get deleted."],
        keywords: &["ending", "finale", "dies", "twist", "killer", "episode"],
    },
    Concept {
        wordings: &[
            "Use the correct flair.",
            "Every post needs flair.",
            "Flair your posts.",
            "Wrong flair gets removed.",
        ],
        reserve: &["Posts without flair are deleted.", "Choose a matching flair."],
        keywords: &["uppercase", "untitled", "caps", "headline", "unformatted", "wall"],
    },
    Concept {
        wordings: &[
            "No harassment.",
            "Harassment is banned.",
            "Harassment of users is forbidden.",
            "Report harassment, never engage in it.",
        ],
        reserve: &["Any harassment means removal.", "Harassment will not be tolerated."],
        keywords: &["watch", "hunt", "regret", "coming", "messaging", "hurt"],
    },
    Concept {
        wordings: &[
            "Respect the moderators.",
            "Moderators have the final word.",
            "Do not argue with moderators publicly.",
            "Contact moderators privately.",
        ],
        reserve: &["Moderators decide disputes.", "Follow moderators instructions."],
        keywords: &["unban", "corrupt", "powertrip", "alt", "abuse", "janitors"],
    },
    Concept {
        wordings: &[
            "Stay on topic.",
            "Keep posts on topic.",
            "Off-topic posts are removed.",
            "Only on topic discussion.",
        ],
        reserve: &["Content must be on topic.", "Keep every thread on topic."],
        keywords: &["recipe", "football", "horoscope", "crypto", "lottery", "vacation"],
    },
    Concept {
        wordings: &[
            "No trolling.",
            "Trolling gets you banned.",
            "Trolling is not welcome.",
            "Do not engage in trolling.",
        ],
        reserve: &["Trolling posts are removed.", "Trolling of any kind is prohibited."],
        keywords: &["triggered", "cope", "seethe", "ratio", "snowflake", "cry"],
    },
];

const FILLER: &[&str] = &[
    "i",
    "think",
    "this",
    "is",
    "the",
    "a",
    "really",
    "about",
    "with",
    "my",
    "friend",
    "and",
    "we",
    "went",
    "to",
    "see",
    "it",
    "yesterday",
    "honestly",
    "pretty",
    "good",
    "thread",
    "post",
    "people",
    "here",
    "some",
    "time",
    "that",
    "was",
    "interesting",
    "maybe",
    "next",
    "week",
    "you",
    "know",
    "just",
    "question",
    "anyone",
    "else",
    "agree",
    "point",
    "today",
    "thanks",
    "sharing",
    "idea",
    "well",
    "so",
    "also",
    "little",
    "more",
    "than",
    "before",
    "sure",
    "what",
    "did",
];

const COMMUNITY_NAMES: &[&str] = &[
    "gardening",
    "retrogaming",
    "cycling",
    "astronomy",
    "baking",
    "linux",
    "photography",
    "chess",
    "hiking",
    "music",
    "woodworking",
    "movies",
    "birdwatching",
    "aquariums",
    "knitting",
    "running",
];

pub fn n_concepts() -> usize {
    CONCEPTS.len()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_communities: usize,
    pub rules_per_community: usize,
    pub n_comments: usize,
    pub safe_fraction: f64,
    /// The last this-many communities use reserve wordings only.
    pub n_disjoint: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 13,
            n_communities: 12,
            rules_per_community: 6,
            n_comments: 2000,
            safe_fraction: 0.3,
            n_disjoint: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCorpus {
    pub rows: Vec<DatasetRow>,
    pub communities: Vec<String>,
    pub disjoint_communities: Vec<String>,
    /// Concept index behind each `(community, rule_number)`.
    pub rule_concepts: Vec<(String, u32, usize)>,
}

fn sentence<R: Rng>(rng: &mut R, keywords: &[&str]) -> String {
    let n = rng.random_range(5..=11);
    let mut words: Vec<&str> = (0..n).map(|_| *FILLER.choose(rng).expect("filler")).collect();
    for kw in keywords {
        let at = rng.random_range(0..=words.len());
        words.insert(at, kw);
    }
    words.join(" ")
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    if cfg.n_communities == 0 || cfg.n_communities > COMMUNITY_NAMES.len() {
        return Err(Error::invalid(format!("n_communities must be in 1..={}", COMMUNITY_NAMES.len())));
    }
    if cfg.rules_per_community == 0 || cfg.rules_per_community > CONCEPTS.len() {
        return Err(Error::invalid(format!("rules_per_community must be in 1..={}", CONCEPTS.len())));
    }
    if !(0.0..=1.0).contains(&cfg.safe_fraction) || cfg.n_disjoint > cfg.n_communities {
        return Err(Error::invalid("safe_fraction must be in [0,1] and n_disjoint ≤ n_communities"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let communities: Vec<String> = COMMUNITY_NAMES[..cfg.n_communities].iter().map(|s| s.to_string()).collect();
    let disjoint_from = cfg.n_communities - cfg.n_disjoint;

    let mut rule_sets: Vec<(Vec<Rule>, Vec<usize>)> = Vec::new();
    let mut rule_concepts = Vec::new();
    for (ci, community) in communities.iter().enumerate() {
        let mut order: Vec<usize> = (0..CONCEPTS.len()).collect();
        order.shuffle(&mut rng);
        order.truncate(cfg.rules_per_community);
        let rules: Vec<Rule> = order
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let pool = if ci >= disjoint_from { CONCEPTS[k].reserve } else { CONCEPTS[k].wordings };
                Rule::new(i as u32 + 1, *pool.choose(&mut rng).expect("wording"))
            })
            .collect();
        for (i, &k) in order.iter().enumerate() {
            rule_concepts.push((community.clone(), i as u32 + 1, k));
        }
        rule_sets.push((rules, order));
    }

    let base: DateTime<Utc> = DateTime::from_timestamp(1_700_000_000, 0).expect("valid timestamp");
    let mut rows = Vec::with_capacity(cfg.n_comments);
    for i in 0..cfg.n_comments {
        let ci = i % cfg.n_communities;
        let (rules, concepts) = &rule_sets[ci];
        let safe = rng.random_bool(cfg.safe_fraction);
        let (gold, text) = if safe {
            (SAFE_RULE, sentence(&mut rng, &[]))
        } else {
            let r = rng.random_range(0..rules.len());
            let pool = CONCEPTS[concepts[r]].keywords;
            let k = rng.random_range(1..=2);
            let kws: Vec<&str> = pool.choose_multiple(&mut rng, k).copied().collect();
            (rules[r].number, sentence(&mut rng, &kws))
        };
        rows.push(DatasetRow {
            id: format!("synth-{i:05}"),
            community: communities[ci].clone(),
            instance: "synth.example".into(),
            comment_text: text,
            removed: gold != SAFE_RULE,
            reason: (gold != SAFE_RULE).then(|| format!("Rule {gold}")),
            gold_rule_number: gold,
            rules: rules.clone(),
            categories: Vec::new(),
            split: None,
            created_at: Some(base + Duration::minutes(i as i64)),
        });
    }
    attach_categories(&mut rows, &KeywordCategorizer::default());
    Ok(SynthCorpus { rows, disjoint_communities: communities[disjoint_from..].to_vec(), communities, rule_concepts })
}
