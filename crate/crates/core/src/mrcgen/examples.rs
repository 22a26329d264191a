use std::collections::HashSet;

use rand::Rng;

use super::ArticleStore;
use crate::error::{Error, Result};
use crate::wikicorpus::index::EntityEntry;
use crate::wikicorpus::{AnchorMention, Article, EntityIndex};

pub const MASK: &str = "[MASK]";

/// Attempts at drawing a window free of the title before that condition is
/// relaxed.
const STRICT_ATTEMPTS: usize = 64;

/// The first `query_words` words of the definition, with each maximal
/// case-insensitive occurrence of the title replaced by a single mask token.
pub fn make_query(definition: &Article, title_tokens: &[String], query_words: usize) -> Result<Vec<String>> {
    if definition.tokens.is_empty() {
        return Err(Error::Entity {
            entity: definition.title.clone(),
            reason: "definition article is empty".into(),
        });
    }
    let pattern: Vec<String> = title_tokens.iter().map(|t| t.to_lowercase()).collect();
    let mut out = Vec::with_capacity(query_words);
    let tokens = &definition.tokens;
    let mut i = 0;
    while i < tokens.len() && out.len() < query_words {
        let m = pattern.len();
        let hit = m > 0
            && i + m <= tokens.len()
            && tokens[i..i + m]
                .iter()
                .zip(&pattern)
                .all(|(t, p)| t.to_lowercase() == *p);
        if hit {
            out.push(MASK.to_string());
            i += m;
        } else {
            out.push(tokens[i].clone());
            i += 1;
        }
    }
    Ok(out)
}

/// Context window with exactly `left_words` requested words before the anchor
/// (clipped at the article start) and `context_words - left_words` after it
/// (clipped at the end). Returns the window and the anchor's span in it.
pub fn make_context_at(
    mention: &Article,
    anchor: &AnchorMention,
    context_words: usize,
    left_words: usize,
) -> (Vec<String>, (usize, usize)) {
    let left_words = left_words.min(context_words);
    let left = left_words.min(anchor.start);
    let right_avail = mention.tokens.len() - anchor.end - 1;
    let right = (context_words - left_words).min(right_avail);
    let window = mention.tokens[anchor.start - left..=anchor.end + right].to_vec();
    (window, (left, left + anchor.len() - 1))
}

/// Draws the left offset uniformly from `0..=context_words` and builds the
/// window.
pub fn make_context<R: Rng + ?Sized>(
    mention: &Article,
    anchor: &AnchorMention,
    context_words: usize,
    rng: &mut R,
) -> (Vec<String>, (usize, usize)) {
    let xi = rng.random_range(0..=context_words);
    make_context_at(mention, anchor, context_words, xi)
}

/// Every exact token-level occurrence of `surface`, leftmost first and
/// non-overlapping.
pub fn find_identical_spans(context: &[String], surface: &[String]) -> Vec<(usize, usize)> {
    let m = surface.len();
    let mut spans = Vec::new();
    if m == 0 {
        return spans;
    }
    let mut i = 0;
    while i + m <= context.len() {
        if context[i..i + m] == *surface {
            spans.push((i, i + m - 1));
            i += m;
        } else {
            i += 1;
        }
    }
    spans
}

fn contains_sequence(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// A window of up to `context_words` words from a same-language article that
/// has no anchor to the entity. Windows that contain the title are rejected
/// for the first attempts, then accepted. The definition article is only
/// used when no other article qualifies.
pub fn sample_unanswerable<R: Rng + ?Sized>(
    entity: &EntityEntry,
    title_tokens: &[String],
    index: &EntityIndex,
    store: &ArticleStore,
    context_words: usize,
    rng: &mut R,
) -> Result<(Vec<String>, u64)> {
    let mentioning: HashSet<u64> = entity.mentions.iter().map(|m| m.article_id).collect();
    let roster = index.rosters.get(&entity.lang).map(Vec::as_slice).unwrap_or(&[]);
    let usable = |id: &&u64| {
        !mentioning.contains(id) && store.get(**id).is_some_and(|a| !a.tokens.is_empty())
    };
    let mut candidates: Vec<u64> = roster
        .iter()
        .filter(usable)
        .filter(|id| Some(**id) != entity.definition)
        .copied()
        .collect();
    if candidates.is_empty() {
        candidates = roster.iter().filter(usable).copied().collect();
    }
    if candidates.is_empty() {
        return Err(Error::Entity {
            entity: entity.title.clone(),
            reason: "no article without an anchor to the entity".into(),
        });
    }
    let draw = |rng: &mut R| {
        let id = candidates[rng.random_range(0..candidates.len())];
        let article = store.get(id).expect("candidate exists in store");
        let n = article.tokens.len();
        let start = if n > context_words {
            rng.random_range(0..=n - context_words)
        } else {
            0
        };
        let end = (start + context_words).min(n);
        (article.tokens[start..end].to_vec(), id)
    };
    for _ in 0..STRICT_ATTEMPTS {
        let (window, id) = draw(rng);
        if !contains_sequence(&window, title_tokens) {
            return Ok((window, id));
        }
    }
    Ok(draw(rng))
}
