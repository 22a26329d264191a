//! Turns MediaWiki dumps into machine-reading examples (anchor = answer,
//! definition = query, mention window = context), recasts downstream tasks in
//! the same query/context/span form, and trains a span-extraction reader on
//! the result.

pub mod error;
pub mod eval;
pub mod jsonl;
pub mod mrcgen;
pub mod pipeline;
pub mod reader;
pub mod synth;
pub mod taskconv;
pub mod wikicorpus;

pub use error::{Error, Result};
