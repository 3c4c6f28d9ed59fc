use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{EmbeddingModel, NegativeTable, TrainConfig, TrainStats};
use crate::corpus::{build_vocabulary, Sentence, Vocabulary};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, log_sigmoid, sigmoid, Matrix};

pub(crate) struct Scratch {
    pub(crate) grad: Vec<f64>,
    pub(crate) coeffs: Vec<f64>,
    pub(crate) negatives: Vec<usize>,
}

impl Scratch {
    pub(crate) fn new(dim: usize) -> Self {
        Scratch {
            grad: vec![0.0; dim],
            coeffs: Vec::new(),
            negatives: Vec::new(),
        }
    }
}

/// Loss `-ln σ(u_pos·c) - Σ ln σ(-u_neg·c)` and, in `coeffs`, the derivative
/// of the loss with respect to each target score.
fn score_targets(center: &[f64], outputs: &Matrix, positive: usize, negatives: &[usize], coeffs: &mut Vec<f64>) -> f64 {
    coeffs.clear();
    let s = dot(center, outputs.row(positive));
    let mut loss = -log_sigmoid(s);
    coeffs.push(sigmoid(s) - 1.0);
    for &n in negatives {
        let s = dot(center, outputs.row(n));
        loss -= log_sigmoid(-s);
        coeffs.push(sigmoid(s));
    }
    loss
}

fn targets(positive: usize, negatives: &[usize]) -> impl Iterator<Item = usize> + '_ {
    std::iter::once(positive).chain(negatives.iter().copied())
}

/// Gradient step on `center` and the output rows it was scored against.
///
/// All gradients are taken at the pre-update parameters, so repeated target
/// indices accumulate exactly. Returns the loss before the update.
pub fn sgns_update(center: &mut [f64], outputs: &mut Matrix, positive: usize, negatives: &[usize], lr: f64) -> f64 {
    let mut scratch = Scratch::new(center.len());
    update_with(center, outputs, positive, negatives, lr, &mut scratch)
}

pub(crate) fn update_with(
    center: &mut [f64],
    outputs: &mut Matrix,
    positive: usize,
    negatives: &[usize],
    lr: f64,
    scratch: &mut Scratch,
) -> f64 {
    let loss = score_targets(center, outputs, positive, negatives, &mut scratch.coeffs);
    scratch.grad.iter_mut().for_each(|g| *g = 0.0);
    for (t, &c) in targets(positive, negatives).zip(&scratch.coeffs) {
        axpy(c, outputs.row(t), &mut scratch.grad);
    }
    for (t, &c) in targets(positive, negatives).zip(&scratch.coeffs) {
        axpy(-lr * c, center, outputs.row_mut(t));
    }
    axpy(-lr, &scratch.grad, center);
    loss
}

/// As [`sgns_update`] with the output matrix frozen.
pub(crate) fn sgns_update_center(
    center: &mut [f64],
    outputs: &Matrix,
    positive: usize,
    negatives: &[usize],
    lr: f64,
    scratch: &mut Scratch,
) -> f64 {
    let loss = score_targets(center, outputs, positive, negatives, &mut scratch.coeffs);
    scratch.grad.iter_mut().for_each(|g| *g = 0.0);
    for (t, &c) in targets(positive, negatives).zip(&scratch.coeffs) {
        axpy(c, outputs.row(t), &mut scratch.grad);
    }
    axpy(-lr, &scratch.grad, center);
    loss
}

/// Draws `count` noise indices, skipping draws equal to `positive`.
pub(crate) fn draw_negatives(
    table: &NegativeTable,
    positive: usize,
    count: usize,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<usize>,
) {
    out.clear();
    for _ in 0..count {
        let n = table.sample(rng);
        if n != positive {
            out.push(n);
        }
    }
}

pub(crate) fn uniform_init(rows: usize, dim: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut m = Matrix::zeros(rows, dim);
    let scale = 1.0 / dim as f64;
    for v in m.as_mut_slice() {
        *v = (rng.gen::<f64>() - 0.5) * scale;
    }
    m
}

/// Shared state of one training run: vocabulary-encoded corpus and the
/// learning-rate schedule.
pub(crate) struct Trainer {
    pub(crate) docs: Vec<Vec<usize>>,
    pub(crate) keep_prob: Vec<f64>,
    total_steps: f64,
    processed: u64,
    pub(crate) config: TrainConfig,
}

impl Trainer {
    pub(crate) fn new(corpus: &[Sentence], config: &TrainConfig) -> Result<(Self, Vocabulary)> {
        config.validate()?;
        let vocab = build_vocabulary(corpus, config.min_count, None).map_err(|e| match e {
            Error::EmptyVocabulary => Error::EmptyCorpus,
            other => other,
        })?;
        let docs: Vec<Vec<usize>> = corpus.iter().map(|s| vocab.encode(s)).collect();
        let total = vocab.total_count() as f64;
        let keep_prob = vocab
            .entries()
            .iter()
            .map(|&(_, count)| {
                let t = config.subsample_threshold * total;
                if t <= 0.0 {
                    1.0
                } else {
                    let f = count as f64;
                    (((f / t).sqrt() + 1.0) * t / f).min(1.0)
                }
            })
            .collect();
        let tokens: usize = docs.iter().map(Vec::len).sum();
        Ok((
            Trainer {
                docs,
                keep_prob,
                total_steps: (config.epochs * tokens) as f64 + 1.0,
                processed: 0,
                config: config.clone(),
            },
            vocab,
        ))
    }

    /// Linear decay from `initial_lr` to `initial_lr / 10000`.
    pub(crate) fn lr(&self) -> f64 {
        let progress = self.processed as f64 / self.total_steps;
        self.config.initial_lr * (1.0 - progress).max(1e-4)
    }

    /// Subsampled copy of document `d`; advances the schedule by its full length.
    pub(crate) fn sample_doc(&mut self, d: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        self.processed += self.docs[d].len() as u64;
        if self.config.subsample_threshold <= 0.0 {
            return self.docs[d].clone();
        }
        self.docs[d]
            .iter()
            .copied()
            .filter(|&w| {
                let p = self.keep_prob[w];
                p >= 1.0 || rng.gen::<f64>() < p
            })
            .collect()
    }
}

/// Skip-gram updates for the center at `pos` with a dynamic window.
/// Returns (loss sum, update count).
#[allow(clippy::too_many_arguments)]
pub(crate) fn skipgram_center(
    input: &mut Matrix,
    output: &mut Matrix,
    table: &NegativeTable,
    sentence: &[usize],
    pos: usize,
    config: &TrainConfig,
    lr: f64,
    rng: &mut ChaCha8Rng,
    scratch: &mut Scratch,
) -> (f64, u64) {
    let reach = rng.gen_range(1..=config.window);
    let lo = pos.saturating_sub(reach);
    let hi = (pos + reach).min(sentence.len() - 1);
    let center = sentence[pos];
    let mut loss = 0.0;
    let mut steps = 0;
    for (ctx_pos, &context) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
        if ctx_pos == pos {
            continue;
        }
        let mut negs = std::mem::take(&mut scratch.negatives);
        draw_negatives(table, context, config.negatives, rng, &mut negs);
        loss += update_with(input.row_mut(center), output, context, &negs, lr, scratch);
        scratch.negatives = negs;
        steps += 1;
    }
    (loss, steps)
}

/// Skip-gram with negative sampling.
///
/// Input vectors start uniform in `[-0.5/dim, 0.5/dim]`, output vectors at
/// zero. Single-threaded and bitwise deterministic for a fixed seed.
pub fn train_word2vec(corpus: &[Sentence], config: &TrainConfig) -> Result<EmbeddingModel> {
    let (mut trainer, vocab) = Trainer::new(corpus, config)?;
    let mut rng = crate::rng::stream_rng(config.seed, 0);
    let dim = config.dim;
    let mut input = uniform_init(vocab.len(), dim, &mut rng);
    let mut output = Matrix::zeros(vocab.len(), dim);
    let table = NegativeTable::from_vocabulary(&vocab);
    let mut scratch = Scratch::new(dim);
    let mut stats = TrainStats::default();

    for epoch in 0..config.epochs {
        let mut loss = 0.0;
        let mut steps = 0u64;
        for d in 0..trainer.docs.len() {
            let lr = trainer.lr();
            let sentence = trainer.sample_doc(d, &mut rng);
            stats.tokens_processed += sentence.len() as u64;
            if sentence.len() < 2 {
                continue;
            }
            for pos in 0..sentence.len() {
                let (l, n) = skipgram_center(
                    &mut input, &mut output, &table, &sentence, pos, config, lr, &mut rng, &mut scratch,
                );
                loss += l;
                steps += n;
            }
        }
        let mean = if steps > 0 { loss / steps as f64 } else { 0.0 };
        if !mean.is_finite() || !input.is_finite() || !output.is_finite() {
            return Err(Error::NumericalFailure { epoch: epoch + 1 });
        }
        stats.epoch_losses.push(mean);
    }

    Ok(EmbeddingModel {
        vocab,
        dim,
        input_vectors: input,
        output_vectors: output,
        negative_table: table,
        config: config.clone(),
        stats,
    })
}
