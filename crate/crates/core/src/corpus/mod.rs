//! Tokenization, vocabularies and headline datasets.
//!
//! Every piece of text entering the pipeline passes through [`tokenize`], so
//! the vocabulary built from a free-text corpus and the one seen by a
//! classifier agree on what a token is.

mod io;
mod synth;
mod vocab;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

pub use io::{
    load_labeled_dataset, load_text_corpus, parse_labeled_dataset, parse_text_corpus,
    write_labeled_dataset, DatasetLoadReport,
};
pub use synth::{generate_synthetic_dataset, SynthConfig, SyntheticData};
pub use vocab::{build_vocabulary, Vocabulary};

/// A non-empty sequence of lowercase, whitespace-free tokens.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Sentence(Vec<String>);

impl Sentence {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptySentence);
        }
        if let Some(bad) = tokens
            .iter()
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(Error::config(format!("invalid token {bad:?}")));
        }
        Ok(Sentence(tokens))
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Copy of the sentence with the token at `position` swapped for `token`.
    pub fn with_replacement(&self, position: usize, token: &str) -> Sentence {
        let mut tokens = self.0.clone();
        tokens[position] = token.to_string();
        Sentence(tokens)
    }

    /// Tokens joined by single spaces.
    pub fn text(&self) -> String {
        self.0.join(" ")
    }
}

impl TryFrom<Vec<String>> for Sentence {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        Sentence::new(tokens)
    }
}

impl From<Sentence> for Vec<String> {
    fn from(s: Sentence) -> Self {
        s.0
    }
}

fn strip_punctuation(token: &str) -> &str {
    token.trim_matches(|c: char| !c.is_alphanumeric())
}

/// Lowercase, NFC-normalize, split on Unicode whitespace and strip leading
/// and trailing punctuation from each piece.
pub fn tokenize(text: &str) -> Result<Sentence> {
    let normalized: String = text.to_lowercase().nfc().collect();
    let tokens: Vec<String> = normalized
        .split_whitespace()
        .map(strip_punctuation)
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect();
    if tokens.is_empty() {
        return Err(Error::EmptySentence);
    }
    Ok(Sentence(tokens))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Record {
    pub sentence: Sentence,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDataset {
    records: Vec<Record>,
    labels: Vec<String>,
}

impl LabeledDataset {
    /// Builds a dataset; the label set is the sorted set of distinct labels.
    pub fn new(records: Vec<Record>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for r in &records {
            validate_label(&r.label)?;
        }
        let labels = records
            .iter()
            .map(|r| r.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(LabeledDataset { records, labels })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn sentences(&self) -> Vec<Sentence> {
        self.records.iter().map(|r| r.sentence.clone()).collect()
    }

    pub fn label_column(&self) -> Vec<String> {
        self.records.iter().map(|r| r.label.clone()).collect()
    }

    /// Records at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<LabeledDataset> {
        LabeledDataset::new(indices.iter().map(|&i| self.records[i].clone()).collect())
    }

    pub fn into_records(self) -> Vec<Record> {
        self.records
    }
}

pub(crate) fn validate_label(label: &str) -> Result<()> {
    if label.trim().is_empty() || label.contains(['\t', '\n', '\r']) {
        return Err(Error::config(format!("invalid label {label:?}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub line_count: usize,
    pub token_count: usize,
    pub vocab_size: usize,
}

impl CorpusStats {
    pub fn of(sentences: &[Sentence]) -> Self {
        let distinct: BTreeSet<&str> = sentences
            .iter()
            .flat_map(|s| s.tokens().iter().map(String::as_str))
            .collect();
        CorpusStats {
            line_count: sentences.len(),
            token_count: sentences.iter().map(Sentence::len).sum(),
            vocab_size: distinct.len(),
        }
    }
}
