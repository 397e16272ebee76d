use std::sync::OnceLock;

use regex::Regex;

fn pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\p{P}|[^\p{P}]+").expect("static pattern compiles"))
}

/// Whitespace split, then every Unicode punctuation character (general
/// category P*) becomes its own token. No lowercasing.
pub fn word_tokens(text: &str) -> Vec<&str> {
    text.split_whitespace().flat_map(|chunk| pattern().find_iter(chunk).map(|m| m.as_str())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isolates_punctuation() {
        assert_eq!(word_tokens("Hello, world!"), vec!["Hello", ",", "world", "!"]);
        assert_eq!(word_tokens("«a»—b"), vec!["«", "a", "»", "—", "b"]);
        assert_eq!(word_tokens("日本。"), vec!["日本", "。"]);
        assert!(word_tokens("  ").is_empty());
    }
}
