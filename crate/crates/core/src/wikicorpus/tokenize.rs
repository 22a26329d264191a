//! Word tokenization with per-token character offsets.
//!
//! Offsets are counted in Unicode scalar values (Rust `char`s), half-open.

use std::collections::HashMap;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// First character of the token.
    pub start: usize,
    /// One past the last character of the token.
    pub end: usize,
}

pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<Token>;
}

/// Splits on Unicode whitespace, then peels leading and trailing
/// non-alphanumeric characters off each chunk as single-character tokens.
#[derive(Debug, Default, Clone, Copy)]
pub struct DefaultTokenizer;

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

impl Tokenizer for DefaultTokenizer {
    fn tokenize(&self, text: &str) -> Vec<Token> {
        let chars: Vec<char> = text.chars().collect();
        let mut tokens = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            if chars[i].is_whitespace() {
                i += 1;
                continue;
            }
            let chunk_start = i;
            while i < chars.len() && !chars[i].is_whitespace() {
                i += 1;
            }
            split_chunk(&chars, chunk_start, i, &mut tokens);
        }
        tokens
    }
}

fn split_chunk(chars: &[char], start: usize, end: usize, out: &mut Vec<Token>) {
    let mut lo = start;
    while lo < end && is_punct(chars[lo]) {
        out.push(single(chars, lo));
        lo += 1;
    }
    if lo == end {
        return;
    }
    let mut hi = end;
    while hi > lo && is_punct(chars[hi - 1]) {
        hi -= 1;
    }
    out.push(Token {
        text: chars[lo..hi].iter().collect(),
        start: lo,
        end: hi,
    });
    for k in hi..end {
        out.push(single(chars, k));
    }
}

fn single(chars: &[char], at: usize) -> Token {
    Token {
        text: chars[at].to_string(),
        start: at,
        end: at + 1,
    }
}

/// Splits on whitespace only. Used for pre-tokenized text such as query
/// templates.
#[derive(Debug, Default, Clone, Copy)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn tokenize(&self, text: &str) -> Vec<Token> {
        let mut tokens = Vec::new();
        let mut current: Option<(usize, String)> = None;
        let mut idx = 0;
        for c in text.chars() {
            if c.is_whitespace() {
                if let Some((start, s)) = current.take() {
                    tokens.push(Token { text: s, start, end: idx });
                }
            } else {
                current.get_or_insert_with(|| (idx, String::new())).1.push(c);
            }
            idx += 1;
        }
        if let Some((start, s)) = current {
            tokens.push(Token { text: s, start, end: idx });
        }
        tokens
    }
}

/// Language-keyed tokenizers with a fallback.
#[derive(Clone)]
pub struct TokenizerRegistry {
    fallback: Arc<dyn Tokenizer>,
    by_language: HashMap<String, Arc<dyn Tokenizer>>,
}

impl Default for TokenizerRegistry {
    fn default() -> Self {
        Self {
            fallback: Arc::new(DefaultTokenizer),
            by_language: HashMap::new(),
        }
    }
}

impl std::fmt::Debug for TokenizerRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut langs: Vec<_> = self.by_language.keys().collect();
        langs.sort();
        f.debug_struct("TokenizerRegistry")
            .field("languages", &langs)
            .finish()
    }
}

impl TokenizerRegistry {
    pub fn register(&mut self, language: &str, tokenizer: Arc<dyn Tokenizer>) {
        self.by_language.insert(language.to_string(), tokenizer);
    }

    pub fn get(&self, language: &str) -> &dyn Tokenizer {
        self.by_language
            .get(language)
            .map(|t| t.as_ref())
            .unwrap_or(self.fallback.as_ref())
    }

    pub fn tokenize(&self, text: &str, language: &str) -> Vec<Token> {
        self.get(language).tokenize(text)
    }
}

/// Tokenizes with the default rule. Convenience for callers without a registry.
pub fn tokenize(text: &str) -> Vec<Token> {
    DefaultTokenizer.tokenize(text)
}

/// Maps a half-open character range onto the inclusive token range of every
/// token it overlaps. Returns `None` when no token overlaps.
pub fn char_span_to_tokens(tokens: &[Token], start: usize, end: usize) -> Option<(usize, usize)> {
    let mut first = None;
    let mut last = None;
    for (i, t) in tokens.iter().enumerate() {
        if t.start < end && start < t.end {
            first.get_or_insert(i);
            last = Some(i);
        } else if t.start >= end {
            break;
        }
    }
    Some((first?, last?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn splits_parentheses_and_period() {
        let toks = tokenize("Rami Nieminen (born 1966).");
        assert_eq!(
            texts(&toks),
            ["Rami", "Nieminen", "(", "born", "1966", ")", "."]
        );
        assert_eq!((toks[2].start, toks[2].end), (14, 15));
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize(" \t\n").is_empty());
    }

    #[test]
    fn anchor_offsets_map_to_token() {
        let toks = tokenize("Nice ambience, but");
        assert_eq!(char_span_to_tokens(&toks, 5, 13), Some((1, 1)));
        assert_eq!(char_span_to_tokens(&toks, 13, 14), Some((2, 2)));
        assert_eq!(char_span_to_tokens(&toks, 4, 5), None);
    }

    #[test]
    fn inner_punctuation_stays() {
        assert_eq!(texts(&tokenize("2-1 U.S. 23–16,")), ["2-1", "U.S", ".", "23–16", ","]);
    }

    #[test]
    fn offsets_are_chars_not_bytes() {
        let toks = tokenize("東京 は");
        assert_eq!((toks[1].start, toks[1].end), (3, 4));
    }

    #[test]
    fn whitespace_tokenizer_keeps_quotes() {
        let toks = WhitespaceTokenizer.tokenize("\"LOC\" . Location");
        assert_eq!(texts(&toks), ["\"LOC\"", ".", "Location"]);
        assert_eq!((toks[2].start, toks[2].end), (8, 16));
    }

    #[test]
    fn registry_dispatches_by_language() {
        let mut reg = TokenizerRegistry::default();
        reg.register("zz", Arc::new(WhitespaceTokenizer));
        assert_eq!(reg.tokenize("a.", "zz").len(), 1);
        assert_eq!(reg.tokenize("a.", "en").len(), 2);
    }
}
