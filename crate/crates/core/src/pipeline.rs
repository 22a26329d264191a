//! In-memory composition of the corpus stages, shared by the CLI and tests.

use std::io::BufRead;

use crate::error::Result;
use crate::mrcgen::{generate_examples, ArticleStore, GenConfig, GenOutput};
use crate::reader::{to_span_prediction, Reader};
use crate::taskconv::{convert_task, decode_to_task, PairMode, Scheme, TaskInstance, TaskPrediction};
use crate::wikicorpus::{
    build_entity_index, filter_entities, parse_dump, CorpusBuilder, EntityIndex, MinCounts, TokenizerRegistry,
};

const PAGE_BATCH: usize = 512;

/// Streams one dump into the builder in fixed-size page batches. Returns the
/// number of pages read.
pub fn ingest_dump<R: BufRead>(builder: &mut CorpusBuilder, stream: R, lang: &str) -> Result<usize> {
    let mut batch = Vec::with_capacity(PAGE_BATCH);
    let mut pages = 0;
    for page in parse_dump(stream, lang) {
        batch.push(page?);
        pages += 1;
        if batch.len() == PAGE_BATCH {
            builder.add_pages(std::mem::take(&mut batch));
        }
    }
    builder.add_pages(batch);
    Ok(pages)
}

/// Result of indexing and generation over a built corpus.
pub struct Pretraining {
    pub index: EntityIndex,
    pub store: ArticleStore,
    pub output: GenOutput,
}

/// Indexes the corpus, applies the mention thresholds and generates
/// examples.
pub fn generate_pretraining(builder: CorpusBuilder, min_counts: &MinCounts, config: &GenConfig, workers: usize) -> Result<Pretraining> {
    config.validate()?;
    let full = build_entity_index(&builder.articles, &builder.redirects);
    let index = filter_entities(&full, min_counts);
    let tokenizers = builder.tokenizers;
    let store = ArticleStore::new(builder.articles);
    let output = generate_examples(&index, &store, config, &tokenizers, workers);
    Ok(Pretraining { index, store, output })
}

/// Builds the bundled miniature corpus (both languages).
pub fn mini_corpus() -> Result<CorpusBuilder> {
    let mut builder = CorpusBuilder::default();
    for lang in crate::synth::MINI_LANGUAGES {
        let text = crate::synth::bundled_mini_dump(lang).expect("bundled language");
        ingest_dump(&mut builder, text.as_bytes(), lang)?;
    }
    Ok(builder)
}

/// Converts each instance, scores every resulting input and decodes one
/// prediction per instance, in input order. Queries longer than
/// `query_limit` are cut first.
pub fn predict_tasks(
    reader: &Reader,
    instances: &[TaskInstance],
    scheme: &Scheme,
    tokenizers: &TokenizerRegistry,
    query_limit: Option<usize>,
) -> Result<Vec<TaskPrediction>> {
    let one = |inst: &TaskInstance| -> Result<TaskPrediction> {
        let mut inputs = convert_task(inst, scheme, PairMode::Classification, tokenizers)?;
        let group: Vec<_> = inputs
            .drain(..)
            .map(|mut u| {
                if let Some(q) = query_limit {
                    u.truncate_query(q);
                }
                let p = to_span_prediction(&reader.score(&u), reader.config.threshold);
                (u, p)
            })
            .collect();
        decode_to_task(&group, scheme)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        instances.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    instances.iter().map(one).collect()
}
