use std::borrow::Cow;
use std::io::Write;

use log::info;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tape::{accumulate, Grads, ParamStore};
use super::{Reader, ReaderConfig, Vocab};
use crate::error::{Error, Result};
use crate::taskconv::UnifiedInput;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Pretrain,
    Finetune,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pretrain" => Ok(Mode::Pretrain),
            "finetune" => Ok(Mode::Finetune),
            other => Err(Error::UnknownMode(other.to_string())),
        }
    }
}

/// Adam with decoupled weight decay. Decay applies to matrices only, not to
/// row vectors such as biases and normalization gains.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    first: Vec<Array2<f64>>,
    second: Vec<Array2<f64>>,
    t: i32,
}

impl AdamW {
    pub fn new(params: &ParamStore, weight_decay: f64) -> Self {
        let zeros = || (0..params.len()).map(|i| Array2::zeros(params.get(i).raw_dim())).collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            first: zeros(),
            second: zeros(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &Grads, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (i, g) in grads.iter().enumerate() {
            let Some(g) = g else { continue };
            let p = params.get_mut(i);
            if self.weight_decay > 0.0 && p.nrows() > 1 && p.ncols() > 1 {
                *p *= 1.0 - lr * self.weight_decay;
            }
            let (m, v) = (&mut self.first[i], &mut self.second[i]);
            ndarray::Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
    }
}

fn global_norm(grads: &Grads) -> f64 {
    grads.iter().flatten().map(|g| g.iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt()
}

/// Minibatch training on the span loss. Batches follow a seeded shuffle
/// that is redrawn every epoch; per-example gradients are summed in batch
/// order, so results do not depend on the number of worker threads.
pub struct Trainer<'a> {
    reader: Reader,
    data: Vec<(Cow<'a, UnifiedInput>, Vec<f64>)>,
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
    opt: AdamW,
    trace: Vec<f64>,
}

impl<'a> Trainer<'a> {
    pub fn new(reader: Reader, data: &'a [UnifiedInput]) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("training data"));
        }
        let prepared = data
            .iter()
            .map(|input| {
                let fitted = reader.fit(input);
                let targets = reader.targets(&fitted)?;
                Ok((fitted, targets))
            })
            .collect::<Result<Vec<_>>>()?;
        let opt = AdamW::new(&reader.params, reader.config.weight_decay);
        let rng = ChaCha8Rng::seed_from_u64(reader.config.seed);
        Ok(Self {
            reader,
            order: Vec::new(),
            cursor: 0,
            data: prepared,
            rng,
            opt,
            trace: Vec::new(),
        })
    }

    fn next_batch(&mut self) -> Vec<usize> {
        let size = self.reader.config.batch_size.min(self.data.len());
        let mut batch = Vec::with_capacity(size);
        while batch.len() < size {
            if self.cursor == self.order.len() {
                self.order = (0..self.data.len()).collect();
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            batch.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        batch
    }

    /// One optimizer update; returns the mean batch loss.
    pub fn step(&mut self) -> Result<f64> {
        let batch = self.next_batch();
        let reader = &self.reader;
        let data = &self.data;
        let run = |&i: &usize| {
            let (input, targets) = &data[i];
            let (loss, grads) = reader.loss_with_targets(input, targets, true);
            (loss, grads.expect("requested"))
        };
        #[cfg(feature = "parallel")]
        let results: Vec<(f64, Grads)> = {
            use rayon::prelude::*;
            batch.par_iter().map(run).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let results: Vec<(f64, Grads)> = batch.iter().map(run).collect();

        let n = results.len() as f64;
        let mut total = 0.0;
        let mut grads: Grads = (0..self.reader.params.len()).map(|_| None).collect();
        for (loss, g) in results {
            total += loss;
            accumulate(&mut grads, g);
        }
        let loss = total / n;
        let step = self.trace.len();
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { batch: step, loss });
        }
        let config = &self.reader.config;
        let mut scale = 1.0 / n;
        if config.clip_norm > 0.0 {
            let norm = global_norm(&grads) * scale;
            if norm > config.clip_norm {
                scale *= config.clip_norm / norm;
            }
        }
        for g in grads.iter_mut().flatten() {
            *g *= scale;
        }
        let warm = if config.warmup_steps > 0 {
            ((step + 1) as f64 / config.warmup_steps as f64).min(1.0)
        } else {
            1.0
        };
        let lr = config.learning_rate * warm;
        self.opt.step(&mut self.reader.params, &grads, lr);
        self.trace.push(loss);
        Ok(loss)
    }

    pub fn steps_done(&self) -> usize {
        self.trace.len()
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn reader(&self) -> &Reader {
        &self.reader
    }

    /// Mean loss over the whole training set under the current parameters.
    pub fn full_loss(&self) -> f64 {
        let total: f64 = self
            .data
            .iter()
            .map(|(input, targets)| self.reader.loss_with_targets(input, targets, false).0)
            .sum();
        total / self.data.len() as f64
    }

    pub fn finish(self) -> (Reader, Vec<f64>) {
        (self.reader, self.trace)
    }
}

/// Trains for `config.steps` updates. Pretraining without an initial model
/// builds the vocabulary from `data` and initializes from `config.seed`;
/// fine-tuning requires an initial model. With an initial model, the
/// optimization fields of `config` replace the model's own, while the
/// architecture is kept.
pub fn train(
    data: &[UnifiedInput],
    config: &ReaderConfig,
    mode: Mode,
    initial: Option<Reader>,
) -> Result<(Reader, Vec<f64>)> {
    config.validate()?;
    let reader = match (initial, mode) {
        (Some(mut r), _) => {
            let c = &mut r.config;
            c.learning_rate = config.learning_rate;
            c.weight_decay = config.weight_decay;
            c.warmup_steps = config.warmup_steps;
            c.clip_norm = config.clip_norm;
            c.batch_size = config.batch_size;
            c.steps = config.steps;
            c.seed = config.seed;
            c.threshold = config.threshold;
            c.max_len = config.max_len;
            r
        }
        (None, Mode::Finetune) => {
            return Err(Error::Config("fine-tuning needs an initial model".into()));
        }
        (None, Mode::Pretrain) => {
            let tokens: Vec<String> = data.iter().flat_map(|u| u.assembled()).collect();
            let vocab = Vocab::build(tokens.iter().map(String::as_str), 1);
            Reader::new(config.clone(), vocab)?
        }
    };
    if config.steps == 0 {
        return Ok((reader, Vec::new()));
    }
    let mut trainer = Trainer::new(reader, data)?;
    for step in 0..config.steps {
        let loss = trainer.step()?;
        if (step + 1) % 50 == 0 || step + 1 == config.steps {
            info!("step {} loss {loss:.6}", step + 1);
        }
    }
    Ok(trainer.finish())
}

/// Writes `step,loss` rows, steps counted from 1.
pub fn write_loss_trace(mut out: impl Write, trace: &[f64]) -> std::io::Result<()> {
    writeln!(out, "step,loss")?;
    for (i, loss) in trace.iter().enumerate() {
        writeln!(out, "{},{loss}", i + 1)?;
    }
    Ok(())
}
