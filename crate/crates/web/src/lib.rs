//! WebAssembly bindings for the demo page in `www/`. Every function takes and
//! returns JSON strings so the page needs no generated type glue.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use wikimrc::mrcgen::{find_identical_spans, make_context_at};
use wikimrc::taskconv::{convert_task, PairMode, Scheme, TaskInstance};
use wikimrc::wikicorpus::{build_article, Article, RawPage, TokenizerRegistry};

#[derive(Serialize)]
struct AnchorView {
    target: String,
    start: usize,
    end: usize,
    surface: String,
}

#[derive(Serialize)]
struct StripView {
    tokens: Vec<String>,
    anchors: Vec<AnchorView>,
}

#[derive(Serialize)]
struct WindowView {
    window: Vec<String>,
    /// The anchor's own span in the window.
    anchor: (usize, usize),
    /// Every span identical to the anchor surface; these are the answers.
    answers: Vec<(usize, usize)>,
}

#[derive(Serialize)]
struct InputView {
    label: Option<String>,
    assembled: Vec<String>,
    context_offset: usize,
    gold: Vec<(usize, usize)>,
    gold_text: Vec<String>,
}

fn article(wikitext: &str, lang: &str) -> Article {
    let page = RawPage {
        title: "Demo".into(),
        namespace: 0,
        redirect_target: None,
        wikitext: wikitext.into(),
        language: lang.into(),
    };
    build_article(0, &page, &TokenizerRegistry::default())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Strips markup and tokenizes, listing each anchor with its token span.
#[wasm_bindgen]
pub fn strip(wikitext: &str, lang: &str) -> Result<String, String> {
    let a = article(wikitext, lang);
    let anchors = a
        .anchors
        .iter()
        .map(|m| AnchorView {
            target: m.target.clone(),
            start: m.start,
            end: m.end,
            surface: a.surface(m).join(" "),
        })
        .collect();
    to_json(&StripView {
        tokens: a.tokens,
        anchors,
    })
}

/// Context window around anchor number `anchor` with `left_words` of the
/// `context_words` budget placed before it.
#[wasm_bindgen]
pub fn context_window(
    wikitext: &str,
    lang: &str,
    anchor: usize,
    context_words: usize,
    left_words: usize,
) -> Result<String, String> {
    let a = article(wikitext, lang);
    let mention = a
        .anchors
        .get(anchor)
        .ok_or_else(|| format!("anchor {anchor} does not exist ({} found)", a.anchors.len()))?;
    let (window, span) = make_context_at(&a, mention, context_words, left_words);
    let answers = find_identical_spans(&window, a.surface(mention));
    to_json(&WindowView {
        window,
        anchor: span,
        answers,
    })
}

fn bundled_scheme(name: &str) -> Result<Scheme, String> {
    match name {
        "conll" => Ok(Scheme::conll()),
        "absa" => Ok(Scheme::absa()),
        "pawsx" => Ok(Scheme::pawsx()),
        "xnli" => Ok(Scheme::xnli()),
        "eqa" => Ok(Scheme::eqa()),
        other => Err(format!("unknown scheme {other:?}")),
    }
}

/// Converts one task instance (JSON with a `"task"` field) into reader
/// inputs under a bundled scheme.
#[wasm_bindgen]
pub fn convert(instance_json: &str, scheme: &str) -> Result<String, String> {
    let instance: TaskInstance = serde_json::from_str(instance_json).map_err(|e| e.to_string())?;
    let scheme = bundled_scheme(scheme)?;
    let inputs = convert_task(&instance, &scheme, PairMode::Classification, &TokenizerRegistry::default())
        .map_err(|e| e.to_string())?;
    let views: Vec<InputView> = inputs
        .into_iter()
        .map(|u| InputView {
            gold_text: u.gold.iter().map(|&s| u.span_tokens(s).join(" ")).collect(),
            assembled: u.assembled(),
            context_offset: u.context_offset(),
            label: u.label,
            gold: u.gold,
        })
        .collect();
    to_json(&views)
}
