use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sgns::{draw_negatives, sgns_update_center, skipgram_center, uniform_init, update_with, Scratch, Trainer};
use super::{sgns_update, EmbeddingModel, NegativeTable, TrainConfig, TrainStats};
use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::stream_rng;

/// Step count and linear learning-rate schedule used to embed unseen text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub steps: usize,
    pub initial_lr: f64,
    pub final_lr: f64,
}

impl InferenceConfig {
    pub fn for_training(config: &TrainConfig) -> Self {
        InferenceConfig {
            steps: 50,
            initial_lr: config.initial_lr,
            final_lr: config.initial_lr / 100.0,
        }
    }

    fn lr(&self, step: usize) -> f64 {
        if self.steps <= 1 {
            return self.initial_lr;
        }
        let t = step as f64 / (self.steps - 1) as f64;
        self.initial_lr + (self.final_lr - self.initial_lr) * t
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocEmbeddingModel {
    /// Jointly trained word vectors; its output matrix is shared with the
    /// document vectors.
    pub word_model: EmbeddingModel,
    /// One row per training document, in corpus order.
    pub doc_vectors: Matrix,
    pub inference: InferenceConfig,
}

impl DocEmbeddingModel {
    pub fn dim(&self) -> usize {
        self.word_model.dim
    }

    /// Negative-sampling update of document `doc` predicting output row
    /// `target`. Returns the loss before the update.
    pub fn dbow_step(&mut self, doc: usize, target: usize, negatives: &[usize], lr: f64) -> f64 {
        sgns_update(
            self.doc_vectors.row_mut(doc),
            &mut self.word_model.output_vectors,
            target,
            negatives,
            lr,
        )
    }

    /// [`infer_doc_vector`] with the model's configured step count.
    pub fn infer(&self, sentence: &Sentence, seed: u64) -> Result<Vec<f64>> {
        infer_doc_vector(self, sentence, self.inference.steps, seed)
    }
}

/// PV-DBOW interleaved with skip-gram: for every token, the document vector
/// predicts it, then the token's own window gets the usual skip-gram update.
pub fn train_pvdbow(corpus: &[Sentence], config: &TrainConfig) -> Result<DocEmbeddingModel> {
    let (mut trainer, vocab) = Trainer::new(corpus, config)?;
    let mut rng = stream_rng(config.seed, 1);
    let dim = config.dim;
    let mut input = uniform_init(vocab.len(), dim, &mut rng);
    let mut docs = uniform_init(corpus.len(), dim, &mut rng);
    let mut output = Matrix::zeros(vocab.len(), dim);
    let table = NegativeTable::from_vocabulary(&vocab);
    let mut scratch = Scratch::new(dim);
    let mut negs = Vec::with_capacity(config.negatives);
    let mut stats = TrainStats::default();

    for epoch in 0..config.epochs {
        let mut loss = 0.0;
        let mut steps = 0u64;
        for d in 0..trainer.docs.len() {
            let lr = trainer.lr();
            let sentence = trainer.sample_doc(d, &mut rng);
            stats.tokens_processed += sentence.len() as u64;
            for pos in 0..sentence.len() {
                let target = sentence[pos];
                draw_negatives(&table, target, config.negatives, &mut rng, &mut negs);
                loss += update_with(docs.row_mut(d), &mut output, target, &negs, lr, &mut scratch);
                steps += 1;
                if sentence.len() > 1 {
                    let (l, n) = skipgram_center(
                        &mut input, &mut output, &table, &sentence, pos, config, lr, &mut rng, &mut scratch,
                    );
                    loss += l;
                    steps += n;
                }
            }
        }
        let mean = if steps > 0 { loss / steps as f64 } else { 0.0 };
        if !mean.is_finite() || !input.is_finite() || !output.is_finite() || !docs.is_finite() {
            return Err(Error::NumericalFailure { epoch: epoch + 1 });
        }
        stats.epoch_losses.push(mean);
    }

    Ok(DocEmbeddingModel {
        inference: InferenceConfig::for_training(config),
        word_model: EmbeddingModel {
            vocab,
            dim,
            input_vectors: input,
            output_vectors: output,
            negative_table: table,
            config: config.clone(),
            stats,
        },
        doc_vectors: docs,
    })
}

/// Embeds `sentence` by training a fresh document vector for `steps` passes
/// with all word and output vectors frozen. OOV tokens are skipped.
pub fn infer_doc_vector(model: &DocEmbeddingModel, sentence: &Sentence, steps: usize, seed: u64) -> Result<Vec<f64>> {
    let words = &model.word_model;
    let tokens = words.vocab.encode(sentence);
    if tokens.is_empty() {
        return Err(Error::AllTokensUnknown);
    }
    let dim = model.dim();
    let mut rng = stream_rng(seed, 0);
    let scale = 1.0 / dim as f64;
    let mut vector: Vec<f64> = (0..dim).map(|_| (rng.gen::<f64>() - 0.5) * scale).collect();
    let schedule = InferenceConfig {
        steps,
        ..model.inference.clone()
    };
    let mut scratch = Scratch::new(dim);
    let mut negs = Vec::with_capacity(words.config.negatives);
    for step in 0..steps {
        let lr = schedule.lr(step);
        for &target in &tokens {
            draw_negatives(&words.negative_table, target, words.config.negatives, &mut rng, &mut negs);
            sgns_update_center(&mut vector, &words.output_vectors, target, &negs, lr, &mut scratch);
        }
    }
    Ok(vector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    fn small_model() -> DocEmbeddingModel {
        let corpus: Vec<Sentence> = ["a b c", "c d e", "a e"].iter().map(|l| tokenize(l).unwrap()).collect();
        let cfg = TrainConfig {
            dim: 6,
            min_count: 1,
            epochs: 5,
            subsample_threshold: 0.0,
            mode: super::super::TrainMode::Pvdbow,
            ..TrainConfig::default()
        };
        train_pvdbow(&corpus, &cfg).unwrap()
    }

    #[test]
    fn one_doc_vector_per_line() {
        let m = small_model();
        assert_eq!(m.doc_vectors.rows(), 3);
        assert_eq!(m.doc_vectors.cols(), 6);
        assert!(m.doc_vectors.is_finite());
    }

    #[test]
    fn zero_steps_returns_initialization() {
        let m = small_model();
        let s = tokenize("a b").unwrap();
        let v = infer_doc_vector(&m, &s, 0, 9).unwrap();
        let mut rng = stream_rng(9, 0);
        let expected: Vec<f64> = (0..6).map(|_| (rng.gen::<f64>() - 0.5) * (1.0 / 6.0)).collect();
        assert_eq!(v, expected);
    }

    #[test]
    fn inference_is_seeded() {
        let m = small_model();
        let s = tokenize("a b zz").unwrap();
        assert_eq!(m.infer(&s, 4).unwrap(), m.infer(&s, 4).unwrap());
        assert_ne!(m.infer(&s, 4).unwrap(), m.infer(&s, 5).unwrap());
    }

    #[test]
    fn all_oov_is_an_error() {
        let m = small_model();
        let s = tokenize("xx yy").unwrap();
        assert!(matches!(m.infer(&s, 1), Err(Error::AllTokensUnknown)));
    }

    #[test]
    fn schedule_endpoints() {
        let cfg = InferenceConfig { steps: 50, initial_lr: 0.025, final_lr: 0.00025 };
        assert_eq!(cfg.lr(0), 0.025);
        assert!((cfg.lr(49) - 0.00025).abs() < 1e-15);
    }
}
