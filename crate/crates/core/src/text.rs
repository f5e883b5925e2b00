//! Character-offset helpers and word tokenization shared across modules.
//!
//! All spans in this crate are counted in Unicode scalar values, not bytes.

/// Number of characters in `s`.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Slice by character offsets `[start, end)`. Out-of-range bounds are clamped.
pub fn char_slice(s: &str, start: usize, end: usize) -> &str {
    let begin = byte_index(s, start);
    let stop = byte_index(s, end.max(start));
    &s[begin..stop]
}

fn byte_index(s: &str, chars: usize) -> usize {
    s.char_indices().nth(chars).map_or(s.len(), |(i, _)| i)
}

/// Lowercased alphanumeric word tokens, with apostrophes kept inside words.
pub fn words(s: &str) -> Vec<String> {
    word_spans(s).into_iter().map(|(w, _, _)| w).collect()
}

/// Lowercased word tokens with their character offsets.
pub fn word_spans(s: &str) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let chars: Vec<char> = s.chars().collect();
    for (i, &ch) in chars.iter().enumerate() {
        let inner_apostrophe =
            ch == '\'' && !current.is_empty() && chars.get(i + 1).is_some_and(|c| c.is_alphanumeric());
        if ch.is_alphanumeric() || inner_apostrophe {
            if current.is_empty() {
                start = i;
            }
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            out.push((std::mem::take(&mut current), start, i));
        }
    }
    if !current.is_empty() {
        out.push((current, start, chars.len()));
    }
    out
}

/// FNV-1a, stable across platforms and toolchains.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Whitespace-collapsed, lowercased form used for exact rule-text matching.
pub fn normalize(s: &str) -> String {
    s.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
        .trim_end_matches(['.', '!', ';'])
        .to_string()
}
