//! Small text helpers shared by the lexicon, marker and rule matchers.

use alloc::string::String;
use alloc::vec::Vec;

/// Whitespace tokens of `text`, in order.
pub fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
}

pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Case-insensitive match of `term` in `haystack` where the match is not
/// preceded or followed by a word character.
///
/// `haystack_lower` must already be lowercased; `term` is lowercased here.
pub fn contains_word(haystack_lower: &str, term: &str) -> bool {
    count_words(haystack_lower, term) > 0
}

/// Number of non-overlapping word-boundary occurrences of `term`.
pub fn count_words(haystack_lower: &str, term: &str) -> usize {
    let term = term.trim().to_lowercase();
    if term.is_empty() {
        return 0;
    }
    let mut count = 0;
    let mut from = 0;
    while let Some(pos) = haystack_lower[from..].find(term.as_str()) {
        let start = from + pos;
        let end = start + term.len();
        let before_ok = haystack_lower[..start]
            .chars()
            .next_back()
            .is_none_or(|c| !is_word_char(c));
        let after_ok = haystack_lower[end..]
            .chars()
            .next()
            .is_none_or(|c| !is_word_char(c));
        if before_ok && after_ok {
            count += 1;
            from = end;
        } else {
            // advance by one char to keep slicing on a boundary
            from = start + haystack_lower[start..].chars().next().map_or(1, char::len_utf8);
        }
    }
    count
}

/// Case-insensitive substring test.
pub fn contains_substring(haystack_lower: &str, needle: &str) -> bool {
    let needle = needle.to_lowercase();
    !needle.is_empty() && haystack_lower.contains(needle.as_str())
}

/// Lowercased token with leading/trailing punctuation removed. Returns the
/// lowercased raw token when stripping would leave nothing.
pub fn normalize_token(token: &str) -> String {
    let lower = token.to_lowercase();
    let trimmed = lower.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty() {
        lower
    } else {
        String::from(trimmed)
    }
}

/// Join tokens with single spaces.
pub fn join_tokens(tokens: &[&str]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(t);
    }
    out
}

/// Split into whitespace tokens, collected.
pub fn token_vec(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}
