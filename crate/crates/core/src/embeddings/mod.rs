//! Word and document embeddings trained from scratch.
//!
//! Word vectors use skip-gram with negative sampling. Document vectors use
//! PV-DBOW trained jointly with the skip-gram objective, so both kinds of
//! vector score against the same output matrix and live in one space.

mod io;
mod pvdbow;
mod sgns;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

pub use io::{embeddings_to_string, load_doc_model, load_embeddings, parse_embeddings, save_doc_model, save_embeddings};
pub use pvdbow::{infer_doc_vector, train_pvdbow, DocEmbeddingModel, InferenceConfig};
pub use sgns::{sgns_update, train_word2vec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Skipgram,
    Pvdbow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub min_count: u64,
    /// Frequent-word downsampling threshold; 0 disables it.
    pub subsample_threshold: f64,
    pub seed: u64,
    pub mode: TrainMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 50,
            window: 5,
            negatives: 5,
            epochs: 10,
            initial_lr: 0.025,
            min_count: 5,
            subsample_threshold: 1e-4,
            seed: 1,
            mode: TrainMode::Skipgram,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::config(m));
        if self.dim < 1 {
            return fail("dim must be >= 1");
        }
        if self.window < 1 {
            return fail("window must be >= 1");
        }
        if self.negatives < 1 {
            return fail("negatives must be >= 1");
        }
        if self.epochs < 1 {
            return fail("epochs must be >= 1");
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return fail("initial_lr must be positive");
        }
        if self.min_count < 1 {
            return fail("min_count must be >= 1");
        }
        if self.subsample_threshold.is_nan() || self.subsample_threshold < 0.0 {
            return fail("subsample_threshold must be non-negative");
        }
        Ok(())
    }
}

/// Cumulative unigram^0.75 distribution over vocabulary indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NegativeTable {
    cumulative: Vec<f64>,
}

impl NegativeTable {
    pub fn from_vocabulary(vocab: &Vocabulary) -> Self {
        let weights: Vec<f64> = if vocab.total_count() == 0 {
            vec![1.0; vocab.len()]
        } else {
            vocab
                .entries()
                .iter()
                .map(|&(_, c)| (c as f64).powf(0.75))
                .collect()
        };
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        NegativeTable { cumulative }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty table");
        let u = rng.gen::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }

    /// Probability mass of index `i`.
    pub fn probability(&self, i: usize) -> f64 {
        let total = *self.cumulative.last().unwrap();
        let prev = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        (self.cumulative[i] - prev) / total
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    /// Mean negative-sampling loss per update, one entry per epoch.
    pub epoch_losses: Vec<f64>,
    /// Center tokens visited over all epochs (after subsampling).
    pub tokens_processed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    pub vocab: Vocabulary,
    pub dim: usize,
    pub input_vectors: Matrix,
    pub output_vectors: Matrix,
    pub negative_table: NegativeTable,
    pub config: TrainConfig,
    pub stats: TrainStats,
}

impl EmbeddingModel {
    /// Model with the given input vectors, zero output vectors and a
    /// count-derived (or uniform, for zero counts) negative table.
    pub fn from_vectors(vocab: Vocabulary, input_vectors: Matrix) -> Result<Self> {
        if input_vectors.rows() != vocab.len() {
            return Err(Error::DimensionMismatch {
                expected: vocab.len(),
                actual: input_vectors.rows(),
            });
        }
        let dim = input_vectors.cols();
        if dim < 1 {
            return Err(Error::config("dim must be >= 1"));
        }
        if !input_vectors.is_finite() {
            return Err(Error::NonFinite("embedding vectors".into()));
        }
        Ok(EmbeddingModel {
            negative_table: NegativeTable::from_vocabulary(&vocab),
            output_vectors: Matrix::zeros(vocab.len(), dim),
            config: TrainConfig {
                dim,
                ..TrainConfig::default()
            },
            stats: TrainStats::default(),
            vocab,
            dim,
            input_vectors,
        })
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.vocab
            .index_of(token)
            .map(|i| self.input_vectors.row(i))
    }

    /// One negative-sampling update of input row `center` against output
    /// rows `context` (positive) and `negatives`. Returns the loss before the
    /// update.
    pub fn sgns_step(&mut self, center: usize, context: usize, negatives: &[usize], lr: f64) -> f64 {
        sgns_update(
            self.input_vectors.row_mut(center),
            &mut self.output_vectors,
            context,
            negatives,
            lr,
        )
    }

    pub fn nearest_neighbors(&self, token: &str, k: usize) -> Result<NeighborList> {
        nearest_neighbors(self, token, k)
    }

    pub fn is_finite(&self) -> bool {
        self.input_vectors.is_finite() && self.output_vectors.is_finite()
    }
}

/// Cosine similarity; 0 when either vector has zero norm. Identical nonzero
/// vectors give exactly 1.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let uu = dot(u, u);
    let vv = dot(v, v);
    if uu == 0.0 || vv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot(u, v) / (uu * vv).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub token: String,
    pub similarity: f64,
}

/// Neighbors sorted by descending similarity, ties by token.
pub type NeighborList = Vec<Neighbor>;

pub fn nearest_neighbors(model: &EmbeddingModel, token: &str, k: usize) -> Result<NeighborList> {
    if k < 1 {
        return Err(Error::config("k must be >= 1"));
    }
    let query = model
        .vocab
        .index_of(token)
        .ok_or_else(|| Error::UnknownToken(token.to_string()))?;
    let qv = model.input_vectors.row(query);
    let mut scored: Vec<(f64, usize)> = (0..model.vocab.len())
        .filter(|&i| i != query)
        .map(|i| Ok((cosine(qv, model.input_vectors.row(i))?, i)))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| model.vocab.token(a.1).cmp(model.vocab.token(b.1)))
    });
    scored.truncate(k);
    Ok(scored
        .into_iter()
        .map(|(similarity, i)| Neighbor {
            token: model.vocab.token(i).to_string(),
            similarity,
        })
        .collect())
}
