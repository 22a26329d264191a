//! Dump ingestion: XML pages, wikitext stripping, tokenization, and the
//! entity index that pairs definition articles with mention sites.

pub mod article;
pub mod dump;
pub mod index;
pub mod tokenize;
pub mod wikitext;

pub use article::{build_article, AnchorMention, Article, CorpusBuilder};
pub use dump::{parse_dump, PageReader, RawPage};
pub use index::{build_entity_index, filter_entities, EntityEntry, EntityIndex, MinCounts, Redirects};
pub use tokenize::{DefaultTokenizer, Token, Tokenizer, TokenizerRegistry, WhitespaceTokenizer};
pub use wikitext::{strip_page, strip_wikitext, CharAnchor, StrippedText};

/// Uppercases the first character, turns underscores into spaces and
/// collapses runs of whitespace. No other case folding is applied.
pub fn normalize_title(title: &str) -> String {
    let spaced = title.replace('_', " ");
    let mut collapsed = String::with_capacity(spaced.len());
    for word in spaced.split_whitespace() {
        if !collapsed.is_empty() {
            collapsed.push(' ');
        }
        collapsed.push_str(word);
    }
    let mut chars = collapsed.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
