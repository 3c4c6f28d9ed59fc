//! Contextual word-replacement augmentation with an optional document-vector
//! quality check.
//!
//! One attempt picks an in-vocabulary position uniformly, looks up the top-k
//! embedding neighbors of the token there, samples one with probability
//! proportional to its (non-negative) cosine similarity and swaps it in. With
//! the quality check on, the swap is kept only if the inferred document
//! vectors of the original and the edited sentence have cosine similarity
//! above the threshold; otherwise the next attempt starts again from the
//! original sentence.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledDataset, Record, Sentence};
use crate::embeddings::{cosine, nearest_neighbors, DocEmbeddingModel, EmbeddingModel, NeighborList};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Maximum attempts per augmented copy.
    pub run: usize,
    pub threshold: f64,
    pub k_neighbors: usize,
    /// Target augmented copies per record.
    pub copies: usize,
    pub seed: u64,
    pub quality_check: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            run: 10,
            threshold: 0.8,
            k_neighbors: 10,
            copies: 20,
            seed: 1,
            quality_check: true,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.run < 1 || self.k_neighbors < 1 || self.copies < 1 {
            return Err(Error::config("run, k_neighbors and copies must all be >= 1"));
        }
        if self.threshold.is_nan() {
            return Err(Error::config("threshold must be a number"));
        }
        Ok(())
    }
}

/// Embedding models used during augmentation. `docs` is required for the
/// quality check; when present without it, similarities are still measured
/// and reported.
#[derive(Clone, Copy, Debug)]
pub struct AugmentModels<'a> {
    pub words: &'a EmbeddingModel,
    pub docs: Option<&'a DocEmbeddingModel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum AugmentOutcome {
    Accepted {
        sentence: Sentence,
        /// Document-vector cosine between original and edit, when a
        /// document model was supplied.
        similarity: Option<f64>,
        attempts_used: usize,
        position: usize,
        replacement: String,
    },
    Exhausted {
        attempts: usize,
    },
}

impl AugmentOutcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self, AugmentOutcome::Accepted { .. })
    }
}

/// Precomputed neighbor lists keyed by token.
#[derive(Clone, Debug, Default)]
pub struct NeighborCache {
    lists: HashMap<String, NeighborList>,
}

impl NeighborCache {
    pub fn build<'s>(words: &EmbeddingModel, k: usize, tokens: impl IntoIterator<Item = &'s String>) -> Result<Self> {
        let mut lists = HashMap::new();
        for t in tokens {
            if lists.contains_key(t) || !words.vocab.contains(t) {
                continue;
            }
            let n = nearest_neighbors(words, t, k)?;
            if !n.is_empty() {
                lists.insert(t.clone(), n);
            }
        }
        Ok(NeighborCache { lists })
    }

    pub fn get(&self, token: &str) -> Option<&NeighborList> {
        self.lists.get(token)
    }
}

/// Index into `weights` chosen by the uniform draw `u`, proportional to the
/// weights; falls back to uniform selection when every weight is zero.
fn weighted_pick(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return ((u * weights.len() as f64) as usize).min(weights.len() - 1);
    }
    let target = u * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    // rounding can leave target == total; take the last positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap()
}

fn augment_cached<R: Rng + ?Sized>(
    s: &Sentence,
    models: AugmentModels<'_>,
    cfg: &AugmentConfig,
    cache: &NeighborCache,
    rng: &mut R,
) -> Result<AugmentOutcome> {
    if cfg.quality_check && models.docs.is_none() {
        return Err(Error::config("quality check requires a document model"));
    }
    let candidates: Vec<usize> = s
        .tokens()
        .iter()
        .enumerate()
        .filter(|(_, t)| cache.get(t).is_some())
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoAugmentableToken);
    }
    // the same inference seed for s and every edit, so document vectors
    // differ only through the edited token
    let infer_seed = rng.next_u64();
    let original = match models.docs {
        Some(docs) => Some((docs, docs.infer(s, infer_seed)?)),
        None => None,
    };

    for attempt in 1..=cfg.run {
        let u_pos: f64 = rng.gen();
        let u_pick: f64 = rng.gen();
        let position = candidates[((u_pos * candidates.len() as f64) as usize).min(candidates.len() - 1)];
        let neighbors = cache.get(&s.tokens()[position]).expect("candidate has neighbors");
        let weights: Vec<f64> = neighbors.iter().map(|n| n.similarity.max(0.0)).collect();
        let replacement = &neighbors[weighted_pick(&weights, u_pick)].token;
        let edited = s.with_replacement(position, replacement);
        let similarity = match &original {
            Some((docs, v)) => Some(cosine(v, &docs.infer(&edited, infer_seed)?)?),
            None => None,
        };
        let accept = !cfg.quality_check || similarity.is_some_and(|sim| sim > cfg.threshold);
        if accept {
            return Ok(AugmentOutcome::Accepted {
                sentence: edited,
                similarity,
                attempts_used: attempt,
                position,
                replacement: replacement.clone(),
            });
        }
    }
    Ok(AugmentOutcome::Exhausted { attempts: cfg.run })
}

/// One augmentation of `s`. Each attempt consumes exactly two uniform draws
/// from `rng` (position, then neighbor), after one `u64` for the inference
/// seed.
pub fn augment_sentence<R: Rng + ?Sized>(
    s: &Sentence,
    models: AugmentModels<'_>,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<AugmentOutcome> {
    cfg.validate()?;
    let cache = NeighborCache::build(models.words, cfg.k_neighbors, s.tokens())?;
    augment_cached(s, models, cfg, &cache, rng)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentDiagnostics {
    /// Augmentation calls, one per (record, copy).
    pub attempted: usize,
    pub accepted: usize,
    pub exhausted: usize,
    /// Calls on records without any augmentable token.
    pub unaugmentable: usize,
    pub mean_similarity: Option<f64>,
    pub config: AugmentConfig,
}

impl AugmentDiagnostics {
    pub fn accepted_fraction(&self) -> f64 {
        let decided = self.accepted + self.exhausted;
        if decided == 0 {
            0.0
        } else {
            self.accepted as f64 / decided as f64
        }
    }
}

/// Originals in input order followed by every accepted copy, grouped by
/// source record. Copy `c` of record `i` draws from its own stream derived
/// from `(seed, i, c)`, so results do not depend on scheduling or on how
/// many attempts other copies used.
pub fn augment_dataset(
    data: &LabeledDataset,
    models: AugmentModels<'_>,
    cfg: &AugmentConfig,
) -> Result<(LabeledDataset, AugmentDiagnostics)> {
    cfg.validate()?;
    if cfg.quality_check && models.docs.is_none() {
        return Err(Error::config("quality check requires a document model"));
    }
    let cache = NeighborCache::build(
        models.words,
        cfg.k_neighbors,
        data.records().iter().flat_map(|r| r.sentence.tokens()),
    )?;

    let per_record: Vec<Vec<Result<AugmentOutcome>>> = data
        .records()
        .par_iter()
        .enumerate()
        .map(|(i, record)| {
            let seed = derive_seed(cfg.seed, i as u64);
            (0..cfg.copies)
                .map(|c| {
                    let mut rng = stream_rng(seed, c as u64);
                    augment_cached(&record.sentence, models, cfg, &cache, &mut rng)
                })
                .collect()
        })
        .collect();

    let mut records: Vec<Record> = data.records().to_vec();
    let mut diag = AugmentDiagnostics {
        attempted: 0,
        accepted: 0,
        exhausted: 0,
        unaugmentable: 0,
        mean_similarity: None,
        config: cfg.clone(),
    };
    let mut sim_sum = 0.0;
    let mut sim_count = 0usize;
    for (record, outcomes) in data.records().iter().zip(per_record) {
        for outcome in outcomes {
            diag.attempted += 1;
            match outcome {
                Ok(AugmentOutcome::Accepted { sentence, similarity, .. }) => {
                    diag.accepted += 1;
                    if let Some(sim) = similarity {
                        sim_sum += sim;
                        sim_count += 1;
                    }
                    records.push(Record {
                        sentence,
                        label: record.label.clone(),
                    });
                }
                Ok(AugmentOutcome::Exhausted { .. }) => diag.exhausted += 1,
                Err(Error::NoAugmentableToken | Error::AllTokensUnknown) => diag.unaugmentable += 1,
                Err(e) => return Err(e),
            }
        }
    }
    if sim_count > 0 {
        diag.mean_similarity = Some(sim_sum / sim_count as f64);
    }
    Ok((LabeledDataset::new(records)?, diag))
}

/// Accepted fraction at each threshold, with the quality check on and the
/// same base seed for every threshold.
pub fn acceptance_rate_curve(
    data: &LabeledDataset,
    models: AugmentModels<'_>,
    thresholds: &[f64],
    cfg: &AugmentConfig,
) -> Result<Vec<(f64, f64)>> {
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::config("thresholds must be sorted ascending"));
    }
    thresholds
        .iter()
        .map(|&threshold| {
            let run_cfg = AugmentConfig {
                threshold,
                quality_check: true,
                ..cfg.clone()
            };
            let (_, diag) = augment_dataset(data, models, &run_cfg)?;
            Ok((threshold, diag.accepted_fraction()))
        })
        .collect()
}
