//! Entity index: for every (language, title) the definition article and all
//! anchor sites that point at it.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::article::Article;
use super::normalize_title;

/// Redirect map keyed by (language, normalized source title).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Redirects {
    map: HashMap<(String, String), String>,
}

/// One line of `redirects.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedirectRecord {
    pub lang: String,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolved {
    pub title: String,
    /// The hop landed on another redirect (a chain or a cycle).
    pub unresolved: bool,
}

impl Redirects {
    pub fn insert(&mut self, language: &str, from: &str, to: &str) {
        let to = normalize_title(to.split('#').next().unwrap_or(""));
        self.map
            .insert((language.to_string(), normalize_title(from)), to);
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Follows at most one redirect hop.
    pub fn resolve(&self, language: &str, title: &str) -> Resolved {
        let key = (language.to_string(), title.to_string());
        match self.map.get(&key) {
            None => Resolved {
                title: title.to_string(),
                unresolved: false,
            },
            Some(next) => {
                let again = (language.to_string(), next.clone());
                Resolved {
                    title: next.clone(),
                    unresolved: self.map.contains_key(&again),
                }
            }
        }
    }

    pub fn records(&self) -> Vec<RedirectRecord> {
        let mut out: Vec<RedirectRecord> = self
            .map
            .iter()
            .map(|((lang, from), to)| RedirectRecord {
                lang: lang.clone(),
                from: from.clone(),
                to: to.clone(),
            })
            .collect();
        out.sort_by(|a, b| (&a.lang, &a.from).cmp(&(&b.lang, &b.from)));
        out
    }

    pub fn from_records(records: impl IntoIterator<Item = RedirectRecord>) -> Self {
        let mut r = Self::default();
        for rec in records {
            r.map.insert((rec.lang, normalize_title(&rec.from)), normalize_title(&rec.to));
        }
        r
    }
}

/// A mention site: the article and the ordinal of the anchor within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MentionRef {
    pub article_id: u64,
    pub ordinal: usize,
}

/// One line of `index.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityEntry {
    pub lang: String,
    pub title: String,
    pub definition: Option<u64>,
    pub mention_count: usize,
    pub mentions: Vec<MentionRef>,
    /// Set when a redirect hop ended on another redirect.
    #[serde(default)]
    pub unresolved: bool,
}

impl EntityEntry {
    fn new(lang: &str, title: &str) -> Self {
        Self {
            lang: lang.to_string(),
            title: title.to_string(),
            definition: None,
            mention_count: 0,
            mentions: Vec::new(),
            unresolved: false,
        }
    }

    pub fn is_definition_less(&self) -> bool {
        self.definition.is_none() || self.unresolved
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityIndex {
    pub entities: BTreeMap<(String, String), EntityEntry>,
    /// Article ids per language, ascending.
    pub rosters: BTreeMap<String, Vec<u64>>,
}

impl EntityIndex {
    pub fn get(&self, lang: &str, title: &str) -> Option<&EntityEntry> {
        self.entities.get(&(lang.to_string(), title.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &EntityEntry> {
        self.entities.values()
    }

    /// Adds one article's contribution: its roster slot, its title as a
    /// definition, and each of its anchors as a mention.
    pub fn add_article(&mut self, article: &Article, redirects: &Redirects) {
        let lang = article.language.as_str();
        self.rosters
            .entry(lang.to_string())
            .or_default()
            .push(article.article_id);
        self.entities
            .entry((lang.to_string(), article.title.clone()))
            .or_insert_with(|| EntityEntry::new(lang, &article.title))
            .definition = Some(article.article_id);
        for (ordinal, anchor) in article.anchors.iter().enumerate() {
            let resolved = redirects.resolve(lang, &anchor.target);
            let entry = self
                .entities
                .entry((lang.to_string(), resolved.title.clone()))
                .or_insert_with(|| EntityEntry::new(lang, &resolved.title));
            entry.mentions.push(MentionRef {
                article_id: article.article_id,
                ordinal,
            });
            entry.unresolved |= resolved.unresolved;
        }
    }

    /// Order-independent merge; `finish` must be called afterwards.
    pub fn merge(&mut self, other: EntityIndex) {
        for (lang, ids) in other.rosters {
            self.rosters.entry(lang).or_default().extend(ids);
        }
        for (key, entry) in other.entities {
            match self.entities.get_mut(&key) {
                None => {
                    self.entities.insert(key, entry);
                }
                Some(mine) => {
                    mine.mentions.extend(entry.mentions);
                    mine.unresolved |= entry.unresolved;
                    mine.definition = match (mine.definition, entry.definition) {
                        (Some(a), Some(b)) => Some(a.min(b)),
                        (a, b) => a.or(b),
                    };
                }
            }
        }
    }

    /// Sorts rosters and mention lists and refreshes counts.
    pub fn finish(&mut self) {
        for ids in self.rosters.values_mut() {
            ids.sort_unstable();
            ids.dedup();
        }
        for entry in self.entities.values_mut() {
            entry.mentions.sort_unstable();
            entry.mentions.dedup();
            entry.mention_count = entry.mentions.len();
        }
    }

    pub fn from_entries(entries: impl IntoIterator<Item = EntityEntry>, articles: &[Article]) -> Self {
        let mut index = EntityIndex::default();
        for a in articles {
            index
                .rosters
                .entry(a.language.clone())
                .or_default()
                .push(a.article_id);
        }
        for e in entries {
            index.entities.insert((e.lang.clone(), e.title.clone()), e);
        }
        index.finish();
        index
    }
}

pub fn build_entity_index<'a>(
    articles: impl IntoIterator<Item = &'a Article>,
    redirects: &Redirects,
) -> EntityIndex {
    let mut index = EntityIndex::default();
    for a in articles {
        index.add_article(a, redirects);
    }
    index.finish();
    index
}

/// Builds the index over article chunks in parallel and merges the parts.
#[cfg(feature = "parallel")]
pub fn build_entity_index_parallel(articles: &[Article], redirects: &Redirects) -> EntityIndex {
    use rayon::prelude::*;
    let mut index = articles
        .par_chunks(256)
        .map(|chunk| {
            let mut part = EntityIndex::default();
            for a in chunk {
                part.add_article(a, redirects);
            }
            part
        })
        .reduce(EntityIndex::default, |mut a, b| {
            a.merge(b);
            a
        });
    index.finish();
    index
}

/// Minimum mention counts per language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinCounts {
    pub default: usize,
    pub per_language: HashMap<String, usize>,
}

impl Default for MinCounts {
    /// 10 for English, 5 for everything else.
    fn default() -> Self {
        let mut per_language = HashMap::new();
        per_language.insert("en".to_string(), 10);
        Self {
            default: 5,
            per_language,
        }
    }
}

impl MinCounts {
    pub fn uniform(n: usize) -> Self {
        Self {
            default: n,
            per_language: HashMap::new(),
        }
    }

    pub fn for_language(&self, lang: &str) -> usize {
        self.per_language.get(lang).copied().unwrap_or(self.default)
    }
}

/// Drops definition-less entities and those mentioned fewer times than the
/// threshold of their language. Entities with no mentions never survive.
pub fn filter_entities(index: &EntityIndex, min_counts: &MinCounts) -> EntityIndex {
    let entities = index
        .entities
        .iter()
        .filter(|(_, e)| {
            !e.is_definition_less()
                && e.mention_count > 0
                && e.mention_count >= min_counts.for_language(&e.lang)
        })
        .map(|(k, e)| (k.clone(), e.clone()))
        .collect();
    EntityIndex {
        entities,
        rosters: index.rosters.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wikicorpus::article::AnchorMention;

    fn article(id: u64, lang: &str, title: &str, targets: &[&str]) -> Article {
        let mut tokens = vec!["intro".to_string()];
        let mut anchors = Vec::new();
        for t in targets {
            tokens.push(t.to_string());
            anchors.push(AnchorMention {
                target: t.to_string(),
                start: tokens.len() - 1,
                end: tokens.len() - 1,
            });
            tokens.push("and".to_string());
        }
        Article {
            article_id: id,
            language: lang.into(),
            title: title.into(),
            tokens,
            anchors,
        }
    }

    #[test]
    fn counts_mentions() {
        let arts = [
            article(0, "en", "Japan", &[]),
            article(1, "en", "Tokyo", &["Japan", "Japan"]),
        ];
        let idx = build_entity_index(&arts, &Redirects::default());
        let e = idx.get("en", "Japan").unwrap();
        assert_eq!(e.mention_count, 2);
        assert_eq!(e.definition, Some(0));
        assert_eq!(e.mentions[1], MentionRef { article_id: 1, ordinal: 1 });
    }

    #[test]
    fn one_hop_redirect() {
        let mut r = Redirects::default();
        r.insert("en", "JP", "Japan");
        let arts = [article(0, "en", "Japan", &[]), article(1, "en", "Edo", &["JP"])];
        let idx = build_entity_index(&arts, &r);
        assert_eq!(idx.get("en", "Japan").unwrap().mention_count, 1);
        assert!(idx.get("en", "JP").is_none());
    }

    #[test]
    fn missing_page_is_definition_less() {
        let arts = [article(1, "en", "Edo", &["Atlantis"])];
        let idx = build_entity_index(&arts, &Redirects::default());
        let e = idx.get("en", "Atlantis").unwrap();
        assert!(e.is_definition_less());
        assert_eq!(e.mention_count, 1);
    }

    #[test]
    fn redirect_cycle_flagged() {
        let mut r = Redirects::default();
        r.insert("en", "A", "B");
        r.insert("en", "B", "A");
        let arts = [article(0, "en", "B", &[]), article(1, "en", "Edo", &["A"])];
        let idx = build_entity_index(&arts, &r);
        let e = idx.get("en", "B").unwrap();
        assert!(e.unresolved);
        assert!(e.is_definition_less());
    }

    #[test]
    fn thresholds_per_language() {
        let mut arts = vec![article(0, "en", "E", &[]), article(1, "de", "D", &[])];
        arts.push(article(2, "en", "X", &["E"; 9]));
        arts.push(article(3, "de", "Y", &["D"; 5]));
        let idx = build_entity_index(&arts, &Redirects::default());
        let kept = filter_entities(&idx, &MinCounts::default());
        assert!(kept.get("en", "E").is_none());
        assert!(kept.get("de", "D").is_some());
        // zero-mention definitions never survive
        assert!(filter_entities(&idx, &MinCounts::uniform(0)).get("en", "X").is_none());
    }

    #[test]
    fn merge_is_order_independent() {
        let arts = [
            article(0, "en", "Japan", &["Edo"]),
            article(1, "en", "Edo", &["Japan"]),
            article(2, "en", "Kyoto", &["Japan", "Edo"]),
        ];
        let r = Redirects::default();
        let whole = build_entity_index(&arts, &r);
        let mut a = build_entity_index(&arts[2..], &r);
        let b = build_entity_index(&arts[..2], &r);
        a.merge(b);
        a.finish();
        assert_eq!(a, whole);
    }
}
