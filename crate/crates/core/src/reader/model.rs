use std::borrow::Cow;
use std::fmt::Debug;

use log::warn;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tape::{Grads, Graph, NodeId, ParamStore};
use super::{span_candidates, wae_targets, EncodedSequence, EncoderKind, ReaderConfig, SpanScoreMatrix, Vocab};
use crate::error::{Error, Result};
use crate::taskconv::UnifiedInput;

/// Maps token ids to an `n × hidden` matrix inside a [`Graph`].
pub trait Encoder: Send + Sync + Debug {
    fn hidden(&self) -> usize;
    fn forward(&self, g: &mut Graph, ids: &[usize]) -> NodeId;
    fn clone_box(&self) -> Box<dyn Encoder>;
}

/// Fixed sinusoidal position codes, `n × d`.
pub fn positional_table(n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |(p, i)| {
        let rate = 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
        let angle = p as f64 / rate;
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    uniform(rng, rows, cols, (6.0 / (rows + cols) as f64).sqrt())
}

fn embedding_table(store: &mut ParamStore, rng: &mut ChaCha8Rng, vocab: usize, d: usize) -> usize {
    store.add("embed.tokens", uniform(rng, vocab, d, 3f64.sqrt()))
}

fn affine(g: &mut Graph, x: NodeId, w: usize, b: usize) -> NodeId {
    let w = g.param(w);
    let b = g.param(b);
    let y = g.matmul(x, w);
    g.add_row(y, b)
}

fn layer_norm(g: &mut Graph, x: NodeId, (gain, bias): (usize, usize)) -> NodeId {
    let gain = g.param(gain);
    let bias = g.param(bias);
    g.layer_norm(x, gain, bias)
}

fn norm_params(store: &mut ParamStore, prefix: &str, d: usize) -> (usize, usize) {
    (
        store.add(format!("{prefix}.gain"), Array2::ones((1, d))),
        store.add(format!("{prefix}.bias"), Array2::zeros((1, d))),
    )
}

fn dense(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, fan_in: usize, fan_out: usize) -> (usize, usize) {
    (
        store.add(format!("{name}.weight"), xavier(rng, fan_in, fan_out)),
        store.add(format!("{name}.bias"), Array2::zeros((1, fan_out))),
    )
}

#[derive(Debug, Clone)]
struct Block {
    norm1: (usize, usize),
    query: (usize, usize),
    key: (usize, usize),
    value: (usize, usize),
    out: (usize, usize),
    norm2: (usize, usize),
    up: (usize, usize),
    down: (usize, usize),
}

/// Pre-norm self-attention encoder over token embeddings plus sinusoidal
/// positions.
#[derive(Debug, Clone)]
pub struct TransformerEncoder {
    hidden: usize,
    heads: usize,
    embed: usize,
    blocks: Vec<Block>,
    final_norm: (usize, usize),
}

impl TransformerEncoder {
    pub fn init(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        vocab: usize,
        hidden: usize,
        layers: usize,
        heads: usize,
        ffn: usize,
    ) -> Self {
        let embed = embedding_table(store, rng, vocab, hidden);
        let blocks = (0..layers)
            .map(|l| {
                let p = format!("layer{l}");
                Block {
                    norm1: norm_params(store, &format!("{p}.norm1"), hidden),
                    query: dense(store, rng, &format!("{p}.query"), hidden, hidden),
                    key: dense(store, rng, &format!("{p}.key"), hidden, hidden),
                    value: dense(store, rng, &format!("{p}.value"), hidden, hidden),
                    out: dense(store, rng, &format!("{p}.out"), hidden, hidden),
                    norm2: norm_params(store, &format!("{p}.norm2"), hidden),
                    up: dense(store, rng, &format!("{p}.up"), hidden, ffn),
                    down: dense(store, rng, &format!("{p}.down"), ffn, hidden),
                }
            })
            .collect();
        let final_norm = norm_params(store, "final_norm", hidden);
        Self {
            hidden,
            heads,
            embed,
            blocks,
            final_norm,
        }
    }

    fn attention(&self, g: &mut Graph, h: NodeId, b: &Block) -> NodeId {
        let q = affine(g, h, b.query.0, b.query.1);
        let k = affine(g, h, b.key.0, b.key.1);
        let v = affine(g, h, b.value.0, b.value.1);
        let dh = self.hidden / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut outs = Vec::with_capacity(self.heads);
        for head in 0..self.heads {
            let (lo, hi) = (head * dh, (head + 1) * dh);
            let (qh, kh, vh) = if self.heads == 1 {
                (q, k, v)
            } else {
                (g.slice_cols(q, lo, hi), g.slice_cols(k, lo, hi), g.slice_cols(v, lo, hi))
            };
            let s = g.matmul_t(qh, kh);
            let s = g.scale(s, scale);
            let p = g.softmax_rows(s);
            outs.push(g.matmul(p, vh));
        }
        let o = if outs.len() == 1 { outs[0] } else { g.concat_cols(&outs) };
        affine(g, o, b.out.0, b.out.1)
    }
}

impl Encoder for TransformerEncoder {
    fn hidden(&self) -> usize {
        self.hidden
    }

    fn forward(&self, g: &mut Graph, ids: &[usize]) -> NodeId {
        let tokens = g.gather(self.embed, ids);
        let pos = g.leaf(positional_table(ids.len(), self.hidden));
        let mut x = g.add(tokens, pos);
        for b in &self.blocks {
            let h = layer_norm(g, x, b.norm1);
            let a = self.attention(g, h, b);
            x = g.add(x, a);
            let h = layer_norm(g, x, b.norm2);
            let f = affine(g, h, b.up.0, b.up.1);
            let f = g.gelu(f);
            let f = affine(g, f, b.down.0, b.down.1);
            x = g.add(x, f);
        }
        layer_norm(g, x, self.final_norm)
    }

    fn clone_box(&self) -> Box<dyn Encoder> {
        Box::new(self.clone())
    }
}

/// Token embeddings plus positions; each output row sees only its own token.
#[derive(Debug, Clone)]
pub struct EmbeddingEncoder {
    hidden: usize,
    embed: usize,
}

impl EmbeddingEncoder {
    pub fn init(store: &mut ParamStore, rng: &mut ChaCha8Rng, vocab: usize, hidden: usize) -> Self {
        Self {
            hidden,
            embed: embedding_table(store, rng, vocab, hidden),
        }
    }
}

impl Encoder for EmbeddingEncoder {
    fn hidden(&self) -> usize {
        self.hidden
    }

    fn forward(&self, g: &mut Graph, ids: &[usize]) -> NodeId {
        let tokens = g.gather(self.embed, ids);
        let pos = g.leaf(positional_table(ids.len(), self.hidden));
        g.add(tokens, pos)
    }

    fn clone_box(&self) -> Box<dyn Encoder> {
        Box::new(self.clone())
    }
}

/// Scores a span from its boundary states:
/// `proj · tanh(H_i W_start + H_j W_end + bias) + shift`.
#[derive(Debug, Clone)]
pub struct SpanExtractor {
    pub start: usize,
    pub end: usize,
    pub bias: usize,
    pub proj: usize,
    pub shift: usize,
}

impl SpanExtractor {
    pub fn init(store: &mut ParamStore, rng: &mut ChaCha8Rng, hidden: usize, width: usize) -> Self {
        Self {
            start: store.add("extractor.start", xavier(rng, hidden, width)),
            end: store.add("extractor.end", xavier(rng, hidden, width)),
            bias: store.add("extractor.bias", Array2::zeros((1, width))),
            proj: store.add("extractor.proj", xavier(rng, 1, width)),
            shift: store.add("extractor.shift", Array2::zeros((1, 1))),
        }
    }

    pub fn forward(&self, g: &mut Graph, h: NodeId, pairs: &[(usize, usize)]) -> NodeId {
        let ws = g.param(self.start);
        let we = g.param(self.end);
        let a = g.matmul(h, ws);
        let b = g.matmul(h, we);
        let bias = g.param(self.bias);
        let proj = g.param(self.proj);
        let shift = g.param(self.shift);
        g.pair_logits(a, b, bias, proj, shift, pairs)
    }
}

/// Encoder, span scorer, vocabulary and parameters.
#[derive(Debug)]
pub struct Reader {
    pub config: ReaderConfig,
    pub vocab: Vocab,
    pub params: ParamStore,
    encoder: Box<dyn Encoder>,
    extractor: SpanExtractor,
}

impl Clone for Reader {
    fn clone(&self) -> Self {
        Self {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            params: self.params.clone(),
            encoder: self.encoder.clone_box(),
            extractor: self.extractor.clone(),
        }
    }
}

/// Seeded generator for parameter initialization.
fn init_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1417)
}

impl Reader {
    /// Random initialization from `config.seed`, with the encoder named in
    /// the config.
    pub fn new(config: ReaderConfig, vocab: Vocab) -> Result<Self> {
        let kind = config.encoder;
        Self::with_encoder(config, vocab, move |store, rng, c, v| match kind {
            EncoderKind::Transformer => Box::new(TransformerEncoder::init(
                store,
                rng,
                v,
                c.hidden,
                c.layers,
                c.heads,
                c.hidden * c.ffn_mult,
            )),
            EncoderKind::Embedding => Box::new(EmbeddingEncoder::init(store, rng, v, c.hidden)),
        })
    }

    /// Random initialization with a caller-supplied encoder. `build` receives
    /// the parameter store, the seeded generator, the config and the
    /// vocabulary size, and must produce `config.hidden`-wide outputs.
    pub fn with_encoder<F>(config: ReaderConfig, vocab: Vocab, build: F) -> Result<Self>
    where
        F: FnOnce(&mut ParamStore, &mut ChaCha8Rng, &ReaderConfig, usize) -> Box<dyn Encoder>,
    {
        config.validate()?;
        let mut params = ParamStore::default();
        let mut rng = init_rng(config.seed);
        let encoder = build(&mut params, &mut rng, &config, vocab.len());
        if encoder.hidden() != config.hidden {
            return Err(Error::Config(format!(
                "encoder width {} differs from configured {}",
                encoder.hidden(),
                config.hidden
            )));
        }
        let extractor = SpanExtractor::init(&mut params, &mut rng, config.hidden, config.hidden);
        Ok(Self {
            config,
            vocab,
            params,
            encoder,
            extractor,
        })
    }

    pub fn extractor(&self) -> &SpanExtractor {
        &self.extractor
    }

    /// Replaces parameter values by name. Every parameter must be present
    /// with a matching shape.
    pub fn set_params(&mut self, source: &ParamStore) -> Result<()> {
        for i in 0..self.params.len() {
            let name = self.params.name(i).to_string();
            let value = source
                .find(&name)
                .map(|j| source.get(j))
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))?;
            if value.dim() != self.params.get(i).dim() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    value.dim(),
                    self.params.get(i).dim()
                )));
            }
            self.params.get_mut(i).assign(value);
        }
        Ok(())
    }

    /// The input cut to `max_len`, context side only.
    pub fn fit<'a>(&self, input: &'a UnifiedInput) -> Cow<'a, UnifiedInput> {
        if input.len() <= self.config.max_len {
            return Cow::Borrowed(input);
        }
        let mut cut = input.clone();
        let removed = cut.truncate_context(self.config.max_len);
        warn!(
            "{}: input of {} tokens cut to {} ({removed} context tokens dropped)",
            input.source_id,
            input.len(),
            cut.len()
        );
        Cow::Owned(cut)
    }

    pub fn candidates(&self, input: &UnifiedInput) -> Vec<(usize, usize)> {
        span_candidates(input.query.len(), input.context.len(), self.config.max_span)
    }

    fn ids(&self, input: &UnifiedInput) -> Vec<usize> {
        self.vocab.ids(&input.assembled())
    }

    pub fn encode(&self, input: &UnifiedInput) -> EncodedSequence {
        let input = self.fit(input);
        let mut g = Graph::new(&self.params);
        let h = self.encoder.forward(&mut g, &self.ids(&input));
        let hidden = g.value(h).clone();
        let mask = vec![true; hidden.nrows()];
        EncodedSequence { hidden, mask }
    }

    pub fn score_spans(&self, enc: &EncodedSequence, candidates: &[(usize, usize)]) -> Result<SpanScoreMatrix> {
        let n = enc.len();
        if let Some(&(s, e)) = candidates.iter().find(|&&(s, e)| s > e || e >= n) {
            return Err(Error::CandidateOutOfBounds { start: s, end: e, len: n });
        }
        let mut g = Graph::new(&self.params);
        let h = g.leaf(enc.hidden.clone());
        let logits = self.extractor.forward(&mut g, h, candidates);
        SpanScoreMatrix::new(candidates.to_vec(), g.value(logits).column(0).to_vec(), self.config.max_span)
    }

    /// Encodes and scores every candidate of `input` (after fitting it to
    /// `max_len`).
    pub fn score(&self, input: &UnifiedInput) -> SpanScoreMatrix {
        let input = self.fit(input);
        let candidates = self.candidates(&input);
        let mut g = Graph::new(&self.params);
        let h = self.encoder.forward(&mut g, &self.ids(&input));
        let logits = self.extractor.forward(&mut g, h, &candidates);
        let logits = g.value(logits).column(0).to_vec();
        SpanScoreMatrix::new(candidates, logits, self.config.max_span).expect("one logit per candidate")
    }

    /// Loss for an input already fitted to `max_len`, with its targets.
    pub(crate) fn loss_with_targets(&self, input: &UnifiedInput, targets: &[f64], want_grads: bool) -> (f64, Option<Grads>) {
        let candidates = self.candidates(input);
        let mut g = Graph::new(&self.params);
        let h = self.encoder.forward(&mut g, &self.ids(input));
        let logits = self.extractor.forward(&mut g, h, &candidates);
        let loss = g.bce_mean(logits, targets.to_vec());
        let grads = want_grads.then(|| g.backward(loss));
        (g.scalar(loss), grads)
    }

    pub(crate) fn targets(&self, input: &UnifiedInput) -> Result<Vec<f64>> {
        wae_targets(&self.candidates(input), &input.gold, input.answerable(), self.config.max_span)
    }

    pub fn loss(&self, input: &UnifiedInput) -> Result<f64> {
        let input = self.fit(input);
        let targets = self.targets(&input)?;
        Ok(self.loss_with_targets(&input, &targets, false).0)
    }

    pub fn loss_and_grads(&self, input: &UnifiedInput) -> Result<(f64, Grads)> {
        let input = self.fit(input);
        let targets = self.targets(&input)?;
        let (loss, grads) = self.loss_with_targets(&input, &targets, true);
        Ok((loss, grads.expect("requested")))
    }
}
