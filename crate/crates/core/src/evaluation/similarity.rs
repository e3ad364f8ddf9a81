//! Levenshtein distance and normalized string similarity.

/// Character-level Levenshtein distance (unit insert, delete, substitute).
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    // single rolling row over b
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let above = row[j + 1];
            let sub = diag + usize::from(ca != cb);
            row[j + 1] = sub.min(above + 1).min(row[j] + 1);
            diag = above;
        }
    }
    row[b.len()]
}

pub fn normalize(s: &str, normalize_case: bool, trim_whitespace: bool) -> String {
    let s = if trim_whitespace { s.trim() } else { s };
    if normalize_case {
        s.to_lowercase()
    } else {
        s.to_string()
    }
}

/// `1 − distance / max(len)` over the normalized strings; two empty strings score 1.
pub fn similarity(a: &str, b: &str, normalize_case: bool, trim_whitespace: bool) -> f64 {
    let a = normalize(a, normalize_case, trim_whitespace);
    let b = normalize(b, normalize_case, trim_whitespace);
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - edit_distance(&a, &b) as f64 / longest as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_distances() {
        assert_eq!(edit_distance("kitten", "sitting"), 3);
        assert_eq!(edit_distance("", "abc"), 3);
        assert_eq!(edit_distance("flaw", "lawn"), 2);
        assert_eq!(edit_distance("Jonathan Smith", "Jonathon Smith"), 1);
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(similarity("Acme Corp", "Acme Corp", true, true), 1.0);
        assert!((similarity("kitten", "sitting", true, true) - (1.0 - 3.0 / 7.0)).abs() < 1e-12);
        assert_eq!(similarity("", "abc", true, true), 0.0);
        assert_eq!(similarity("", "", true, true), 1.0);
        assert_eq!(similarity(" ACME ", "acme", true, true), 1.0);
        assert!(similarity("A", "a", false, true) < 1.0);
    }

    proptest! {
        #[test]
        fn symmetric_bounded_and_exact_on_equality(a in "[a-cA-C ]{0,10}", b in "[a-cA-C ]{0,10}") {
            let s = similarity(&a, &b, true, true);
            prop_assert_eq!(s, similarity(&b, &a, true, true));
            prop_assert!((0.0..=1.0).contains(&s));
            let equal = normalize(&a, true, true) == normalize(&b, true, true);
            prop_assert_eq!(s == 1.0, equal);
        }
    }
}
