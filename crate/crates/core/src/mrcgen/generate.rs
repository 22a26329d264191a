use log::{debug, warn};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::examples::{find_identical_spans, make_context, make_query, sample_unanswerable};
use super::{ArticleStore, GenConfig, MrcExample};
use crate::error::{Error, Result};
use crate::wikicorpus::index::EntityEntry;
use crate::wikicorpus::{EntityIndex, TokenizerRegistry};

fn keyed_digest(seed: u64, lang: &str, entity: &str, extra: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((lang.len() as u64).to_le_bytes());
    h.update(lang.as_bytes());
    h.update((entity.len() as u64).to_le_bytes());
    h.update(entity.as_bytes());
    h.update(extra);
    h.finalize().into()
}

/// The generator that drives every random choice for one entity.
pub fn entity_rng(seed: u64, lang: &str, entity: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(keyed_digest(seed, lang, entity, b"rng"))
}

pub fn example_id(seed: u64, lang: &str, entity: &str, ordinal: usize) -> String {
    let d = keyed_digest(seed, lang, entity, &(ordinal as u64).to_le_bytes());
    d[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Answerable examples first (ordinals `0..k`), then unanswerable ones.
/// Errors on the unanswerable side drop only that side.
pub fn generate_entity(
    entity: &EntityEntry,
    index: &EntityIndex,
    store: &ArticleStore,
    config: &GenConfig,
    tokenizers: &TokenizerRegistry,
) -> Result<Vec<MrcExample>> {
    let definition = entity
        .definition
        .and_then(|id| store.get(id))
        .ok_or_else(|| Error::Entity {
            entity: entity.title.clone(),
            reason: "definition article missing".into(),
        })?;
    let title_tokens: Vec<String> = tokenizers
        .tokenize(&entity.title, &entity.lang)
        .into_iter()
        .map(|t| t.text)
        .collect();
    let query = make_query(definition, &title_tokens, config.query_words)?;
    let mut rng = entity_rng(config.seed, &entity.lang, &entity.title);

    let k = config.answerable_cap.min(entity.mentions.len());
    let mut picked = sample(&mut rng, entity.mentions.len(), k).into_vec();
    picked.sort_unstable();

    let mut out = Vec::with_capacity(2 * k);
    for (ordinal, &m) in picked.iter().enumerate() {
        let mention = entity.mentions[m];
        let article = store.get(mention.article_id).ok_or_else(|| Error::Entity {
            entity: entity.title.clone(),
            reason: format!("mention article {} missing", mention.article_id),
        })?;
        let anchor = article.anchors.get(mention.ordinal).ok_or_else(|| Error::Entity {
            entity: entity.title.clone(),
            reason: format!("anchor {} missing in article {}", mention.ordinal, mention.article_id),
        })?;
        let (context, _primary) = make_context(article, anchor, config.context_words, &mut rng);
        let answers = find_identical_spans(&context, article.surface(anchor));
        out.push(MrcExample {
            id: example_id(config.seed, &entity.lang, &entity.title, ordinal),
            lang: entity.lang.clone(),
            entity: entity.title.clone(),
            query: query.clone(),
            context,
            answers,
            answerable: true,
            provenance: Some((definition.article_id, article.article_id)),
            source_id: None,
            label: None,
        });
    }

    let n_unanswerable = config.unanswerable_cap.min(k);
    for j in 0..n_unanswerable {
        match sample_unanswerable(entity, &title_tokens, index, store, config.context_words, &mut rng) {
            Ok((context, source)) => out.push(MrcExample {
                id: example_id(config.seed, &entity.lang, &entity.title, k + j),
                lang: entity.lang.clone(),
                entity: entity.title.clone(),
                query: query.clone(),
                context,
                answers: Vec::new(),
                answerable: false,
                provenance: Some((definition.article_id, source)),
                source_id: None,
                label: None,
            }),
            Err(e) => {
                debug!("{}: unanswerable side skipped: {e}", entity.title);
                break;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Default)]
pub struct GenOutput {
    /// In canonical (language, entity, ordinal) order.
    pub examples: Vec<MrcExample>,
    pub skipped_entities: usize,
}

/// Shared inputs for generation.
pub struct Generator<'a> {
    pub index: &'a EntityIndex,
    pub store: &'a ArticleStore,
    pub config: &'a GenConfig,
    pub tokenizers: &'a TokenizerRegistry,
}

impl<'a> Generator<'a> {
    fn entities(&self) -> impl Iterator<Item = &'a EntityEntry> + 'a {
        let config = self.config;
        self.index.iter().filter(move |e| config.includes(&e.lang))
    }

    /// Lazily yields examples entity by entity, logging and skipping entities
    /// that fail.
    pub fn stream(&self) -> impl Iterator<Item = MrcExample> + '_ {
        self.entities().flat_map(move |e| {
            match generate_entity(e, self.index, self.store, self.config, self.tokenizers) {
                Ok(v) => v,
                Err(err) => {
                    warn!("skipping entity: {err}");
                    Vec::new()
                }
            }
        })
    }

    /// Generates over `workers` threads. The result does not depend on the
    /// worker count.
    pub fn run(&self, workers: usize) -> GenOutput {
        let entities: Vec<&EntityEntry> = self.entities().collect();
        let one = |e: &&EntityEntry| generate_entity(e, self.index, self.store, self.config, self.tokenizers);

        #[cfg(feature = "parallel")]
        let results: Vec<Result<Vec<MrcExample>>> = {
            use rayon::prelude::*;
            match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
                Ok(pool) => pool.install(|| entities.par_iter().map(one).collect()),
                Err(_) => entities.iter().map(one).collect(),
            }
        };
        #[cfg(not(feature = "parallel"))]
        let results: Vec<Result<Vec<MrcExample>>> = {
            let _ = workers;
            entities.iter().map(one).collect()
        };

        let mut out = GenOutput::default();
        for r in results {
            match r {
                Ok(v) => out.examples.extend(v),
                Err(err) => {
                    warn!("skipping entity: {err}");
                    out.skipped_entities += 1;
                }
            }
        }
        if out.skipped_entities > 0 {
            warn!("{} entities skipped", out.skipped_entities);
        }
        out
    }
}

/// Convenience wrapper over [`Generator::run`].
pub fn generate_examples(
    index: &EntityIndex,
    store: &ArticleStore,
    config: &GenConfig,
    tokenizers: &TokenizerRegistry,
    workers: usize,
) -> GenOutput {
    Generator {
        index,
        store,
        config,
        tokenizers,
    }
    .run(workers)
}
