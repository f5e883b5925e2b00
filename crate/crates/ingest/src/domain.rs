//! Host name checks.

/// Lower-cases and strips surrounding whitespace and a trailing dot.
pub fn normalize_host(s: &str) -> String {
    s.trim().trim_end_matches('.').to_ascii_lowercase()
}

/// Syntactic check for a DNS name with at least two labels: labels of
/// 1..=63 letters, digits or inner hyphens, 253 characters total, and a
/// top-level label that is not all digits.
pub fn is_valid_domain(s: &str) -> bool {
    if s.is_empty() || s.len() > 253 {
        return false;
    }
    let labels: Vec<&str> = s.split('.').collect();
    if labels.len() < 2 {
        return false;
    }
    let label_ok = |l: &str| {
        !l.is_empty()
            && l.len() <= 63
            && l.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-')
            && !l.starts_with('-')
            && !l.ends_with('-')
    };
    labels.iter().all(|l| label_ok(l)) && !labels[labels.len() - 1].bytes().all(|b| b.is_ascii_digit())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_ordinary_names() {
        for h in ["lemmy.world", "a.b.c", "sh.itjust.works", "x-1.test"] {
            assert!(is_valid_domain(h), "{h}");
        }
    }

    #[test]
    fn rejects_junk() {
        for h in ["", "localhost", "bad_host!.test", "-a.test", "a..b", "10.0.0.1", "a.test/x", "a b.test"] {
            assert!(!is_valid_domain(h), "{h}");
        }
        assert!(!is_valid_domain(&format!("{}.test", "a".repeat(64))));
    }

    #[test]
    fn normalizes() {
        assert_eq!(normalize_host(" Lemmy.World. "), "lemmy.world");
    }
}
