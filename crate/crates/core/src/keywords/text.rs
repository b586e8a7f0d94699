// SPDX-License-Identifier: Apache-2.0

use std::collections::HashSet;

use super::KeywordSet;

/// Common English function words, dropped from 1-grams only.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been", "before", "being", "both", "but", "by",
    "can", "could", "did", "do", "does", "doing", "done", "each", "for", "from", "had", "has", "have", "having", "he", "her", "here",
    "him", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just", "may", "me", "more", "most", "must", "my", "no",
    "nor", "not", "now", "of", "on", "once", "only", "or", "other", "our", "out", "over", "own", "same", "she", "should", "so", "some",
    "such", "than", "that", "the", "their", "them", "then", "there", "these", "they", "this", "those", "through", "to", "too", "under",
    "until", "up", "very", "was", "we", "were", "what", "when", "where", "which", "while", "who", "why", "will", "with", "would", "you",
    "your",
];

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.binary_search(&word).is_ok()
}

/// Splits text into sentences: at newlines, and at `.`, `!` or `?` when
/// followed by whitespace or the end of the text.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut start = 0;
    for (i, &b) in bytes.iter().enumerate() {
        let ends = match b {
            b'\n' | b'\r' => true,
            b'.' | b'!' | b'?' => bytes.get(i + 1).is_none_or(|n| n.is_ascii_whitespace()),
            _ => false,
        };
        if ends {
            out.push(&text[start..i]);
            start = i + 1;
        }
    }
    out.push(&text[start..]);
    out.retain(|s| !s.trim().is_empty());
    out
}

/// Lowercased alphanumeric runs.
pub fn word_tokens(sentence: &str) -> Vec<String> {
    sentence
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Sliding-window n-grams (n in 1..=3) that never cross a sentence
/// boundary. Stopwords are removed for unigrams only.
pub fn ngram_tokenize(text: &str, n: usize) -> Vec<String> {
    assert!((1..=3).contains(&n), "n-gram size must be 1, 2 or 3");
    let mut out = Vec::new();
    for s in sentences(text) {
        let words = word_tokens(s);
        if n == 1 {
            out.extend(words.into_iter().filter(|w| !is_stopword(w)));
        } else {
            out.extend(words.windows(n).map(|w| w.join(" ")));
        }
    }
    out
}

/// Phrases of `ks` that occur in `message` as whole-token sequences
/// (case-insensitive), in keyword-set order.
pub fn match_keywords(message: &str, ks: &KeywordSet) -> Vec<String> {
    let mut windows: [HashSet<String>; 3] = Default::default();
    for s in sentences(message) {
        let words = word_tokens(s);
        for n in 1..=3 {
            windows[n - 1].extend(words.windows(n).map(|w| w.join(" ")));
        }
    }
    ks.entries
        .iter()
        .filter(|e| (1..=3).contains(&e.n) && windows[e.n - 1].contains(&e.phrase))
        .map(|e| e.phrase.clone())
        .collect()
}
