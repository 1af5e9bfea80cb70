//! Surface-string normalization shared by alias resolution and label
//! matching.

/// Lowercase, trim, and collapse internal whitespace runs to single spaces.
pub fn normalize_surface(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// [`normalize_surface`] plus stripping trailing ASCII punctuation, the rule
/// answers are normalized under before label comparison. Idempotent.
pub fn normalize_label(s: &str) -> String {
    let mut out = normalize_surface(s);
    while out
        .chars()
        .last()
        .is_some_and(|c| c.is_ascii_punctuation())
    {
        out.pop();
    }
    while out.ends_with(' ') {
        out.pop();
    }
    out
}
