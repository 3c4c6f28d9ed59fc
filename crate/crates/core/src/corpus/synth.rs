//! Seeded synthetic headline data.
//!
//! Each category owns a word list; a fraction `overlap` of every list is a
//! pool of words shared by all categories, the rest is exclusive. A pool of
//! function words appears in every category. The companion corpus draws each
//! line from a single category, so words of one category keep company with
//! each other and their embeddings converge.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Record, Sentence};
use crate::error::{Error, Result};

const CATEGORY_NAMES: [&str; 10] = [
    "Legal",
    "General News",
    "Sports",
    "Other",
    "Politics",
    "Traffic News",
    "Community Activities",
    "Crime",
    "Business",
    "Foreign Affairs",
];

const CONSONANTS: &[u8] = b"bdfghklmnprstw";
const VOWELS: &[u8] = b"aeiou";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub categories: usize,
    pub per_category: usize,
    pub vocab_per_category: usize,
    pub overlap: f64,
    pub seed: u64,
    pub corpus_lines: usize,
    pub function_words: usize,
    /// Probability that a headline token is a category word rather than a
    /// function word.
    pub topical_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            categories: 10,
            per_category: 20,
            vocab_per_category: 30,
            overlap: 0.1,
            seed: 1,
            corpus_lines: 5000,
            function_words: 40,
            topical_rate: 0.6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub dataset: LabeledDataset,
    pub corpus: Vec<Sentence>,
    /// Word list of each category, in label order of `category_labels`.
    pub category_words: Vec<Vec<String>>,
    pub category_labels: Vec<String>,
    pub function_words: Vec<String>,
}

/// Two-letter syllables make a prefix code, so distinct ids give distinct words.
fn pseudo_word(mut id: usize) -> String {
    let n = CONSONANTS.len() * VOWELS.len();
    let mut word = String::new();
    for _ in 0..3 {
        let syl = id % n;
        id /= n;
        word.push(CONSONANTS[syl / VOWELS.len()] as char);
        word.push(VOWELS[syl % VOWELS.len()] as char);
    }
    word
}

fn category_label(i: usize, categories: usize) -> String {
    if categories <= CATEGORY_NAMES.len() {
        CATEGORY_NAMES[i].to_string()
    } else {
        format!("category_{i:03}")
    }
}

pub fn generate_synthetic_dataset(cfg: &SynthConfig) -> Result<SyntheticData> {
    if cfg.categories < 2 {
        return Err(Error::config("synthetic data needs at least 2 categories"));
    }
    if cfg.per_category < 1 || cfg.vocab_per_category < 1 {
        return Err(Error::config("per_category and vocab_per_category must be >= 1"));
    }
    if !(0.0..=1.0).contains(&cfg.overlap) || !(0.0..=1.0).contains(&cfg.topical_rate) {
        return Err(Error::config("overlap and topical_rate must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let shared = (cfg.overlap * cfg.vocab_per_category as f64).round() as usize;
    let exclusive = cfg.vocab_per_category - shared;
    let needed = shared + exclusive * cfg.categories + cfg.function_words;
    let space = (CONSONANTS.len() * VOWELS.len()).pow(3);
    if needed > space {
        return Err(Error::config("requested vocabulary exceeds the pseudo-word space"));
    }
    let mut ids: Vec<usize> = rand::seq::index::sample(&mut rng, space, needed).into_vec();
    let mut take = |n: usize| -> Vec<String> { ids.drain(..n).map(pseudo_word).collect() };
    let shared_words = take(shared);
    let category_words: Vec<Vec<String>> = (0..cfg.categories)
        .map(|_| {
            let mut words = shared_words.clone();
            words.extend(take(exclusive));
            words
        })
        .collect();
    let function_words = take(cfg.function_words);
    let category_labels: Vec<String> = (0..cfg.categories)
        .map(|i| category_label(i, cfg.categories))
        .collect();

    let draw = |rng: &mut ChaCha8Rng, category: usize, len: usize| -> Sentence {
        let words = &category_words[category];
        let mut tokens = Vec::with_capacity(len);
        // the first token is always topical so no line is pure filler
        tokens.push(words.choose(rng).unwrap().clone());
        while tokens.len() < len {
            let topical = function_words.is_empty() || rng.gen_bool(cfg.topical_rate);
            let pool = if topical { words } else { &function_words };
            tokens.push(pool.choose(rng).unwrap().clone());
        }
        tokens.shuffle(rng);
        Sentence::new(tokens).expect("generated tokens are valid")
    };

    let mut records = Vec::with_capacity(cfg.categories * cfg.per_category);
    for (c, label) in category_labels.iter().enumerate() {
        for _ in 0..cfg.per_category {
            let len = rng.gen_range(5..=9);
            records.push(Record {
                sentence: draw(&mut rng, c, len),
                label: label.clone(),
            });
        }
    }
    records.shuffle(&mut rng);

    let corpus = (0..cfg.corpus_lines)
        .map(|_| {
            let c = rng.gen_range(0..cfg.categories);
            let len = rng.gen_range(8..=14);
            draw(&mut rng, c, len)
        })
        .collect();

    Ok(SyntheticData {
        dataset: LabeledDataset::new(records)?,
        corpus,
        category_words,
        category_labels,
        function_words,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn cfg(overlap: f64) -> SynthConfig {
        SynthConfig {
            categories: 10,
            per_category: 20,
            vocab_per_category: 30,
            overlap,
            seed: 1,
            corpus_lines: 200,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn sizes_follow_arithmetic() {
        let data = generate_synthetic_dataset(&cfg(0.1)).unwrap();
        assert_eq!(data.dataset.len(), 200);
        assert_eq!(data.dataset.labels().len(), 10);
        assert_eq!(data.corpus.len(), 200);
    }

    #[test]
    fn same_seed_same_data() {
        let a = generate_synthetic_dataset(&cfg(0.1)).unwrap();
        let b = generate_synthetic_dataset(&cfg(0.1)).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.corpus, b.corpus);
        let c = generate_synthetic_dataset(&SynthConfig { seed: 2, ..cfg(0.1) }).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn zero_overlap_is_disjoint() {
        let data = generate_synthetic_dataset(&cfg(0.0)).unwrap();
        let mut seen = HashSet::new();
        for words in &data.category_words {
            for w in words {
                assert!(seen.insert(w.clone()), "{w} appears in two categories");
            }
        }
    }

    #[test]
    fn overlap_fraction_is_respected() {
        let data = generate_synthetic_dataset(&cfg(0.1)).unwrap();
        let a: HashSet<_> = data.category_words[0].iter().collect();
        let b: HashSet<_> = data.category_words[1].iter().collect();
        assert_eq!(a.intersection(&b).count(), 3);
    }

    #[test]
    fn rejects_single_category() {
        assert!(generate_synthetic_dataset(&SynthConfig {
            categories: 1,
            ..cfg(0.1)
        })
        .is_err());
    }

    #[test]
    fn pseudo_words_are_distinct() {
        let words: HashSet<String> = (0..5000).map(pseudo_word).collect();
        assert_eq!(words.len(), 5000);
    }
}
