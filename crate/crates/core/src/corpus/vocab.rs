use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Sentence;
use crate::error::{Error, Result};

/// Ordered token set with counts.
///
/// Vocabularies produced by [`build_vocabulary`] are ordered by descending
/// count, ties broken lexicographically. Vocabularies read back from an
/// embedding file keep the file order and carry zero counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<(String, u64)>", into = "Vec<(String, u64)>")]
pub struct Vocabulary {
    entries: Vec<(String, u64)>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Wraps entries as given. Duplicate tokens keep their first position.
    pub fn from_entries(entries: Vec<(String, u64)>) -> Self {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, (token, _)) in entries.iter().enumerate() {
            index.entry(token.clone()).or_insert(i);
        }
        Vocabulary { entries, index }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.entries[index].0
    }

    pub fn count(&self, index: usize) -> u64 {
        self.entries[index].1
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn total_count(&self) -> u64 {
        self.entries.iter().map(|(_, c)| c).sum()
    }

    /// In-vocabulary token indices of `sentence`, OOV tokens dropped.
    pub fn encode(&self, sentence: &Sentence) -> Vec<usize> {
        sentence
            .tokens()
            .iter()
            .filter_map(|t| self.index_of(t))
            .collect()
    }
}

impl From<Vec<(String, u64)>> for Vocabulary {
    fn from(entries: Vec<(String, u64)>) -> Self {
        Vocabulary::from_entries(entries)
    }
}

impl From<Vocabulary> for Vec<(String, u64)> {
    fn from(v: Vocabulary) -> Self {
        v.entries
    }
}

/// Counts tokens, drops those below `min_count` and keeps at most `max_size`
/// of the most frequent.
pub fn build_vocabulary(
    sentences: &[Sentence],
    min_count: u64,
    max_size: Option<usize>,
) -> Result<Vocabulary> {
    if min_count < 1 {
        return Err(Error::config("min_count must be at least 1"));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for s in sentences {
        for t in s.tokens() {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut entries: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(t, c)| (t.to_string(), c))
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if let Some(max) = max_size {
        entries.truncate(max);
    }
    if entries.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    Ok(Vocabulary::from_entries(entries))
}
