//! Sentence featurization.
//!
//! Count-based methods (`tf`, `tfidf`) produce sparse rows over a vocabulary
//! capped at `max_features`; embedding methods pool the word vectors of the
//! in-vocabulary tokens into dense rows.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{build_vocabulary, Sentence, Vocabulary};
use crate::embeddings::{load_embeddings, EmbeddingModel};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Matrix};

pub const DEFAULT_MAX_FEATURES: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMethod {
    Tf,
    Tfidf,
    W2vMean,
    W2vMedian,
    W2vPowermean,
}

impl FeatureMethod {
    pub const ALL: [FeatureMethod; 5] = [
        FeatureMethod::Tf,
        FeatureMethod::Tfidf,
        FeatureMethod::W2vMean,
        FeatureMethod::W2vMedian,
        FeatureMethod::W2vPowermean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureMethod::Tf => "tf",
            FeatureMethod::Tfidf => "tfidf",
            FeatureMethod::W2vMean => "w2v-mean",
            FeatureMethod::W2vMedian => "w2v-median",
            FeatureMethod::W2vPowermean => "w2v-powermean",
        }
    }

    pub fn uses_embeddings(self) -> bool {
        !matches!(self, FeatureMethod::Tf | FeatureMethod::Tfidf)
    }
}

impl std::fmt::Display for FeatureMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown feature method `{s}`")))
    }
}

#[derive(Clone, Debug)]
pub enum EmbeddingSource {
    Path(PathBuf),
    Model(Arc<EmbeddingModel>),
}

/// Unfitted featurizer configuration.
#[derive(Clone, Debug)]
pub struct FeatureSpec {
    pub method: FeatureMethod,
    pub max_features: usize,
    pub embeddings: Option<EmbeddingSource>,
    /// When set, fitting fails unless the embeddings have this dimension.
    pub expected_dim: Option<usize>,
}

impl FeatureSpec {
    pub fn new(method: FeatureMethod) -> Self {
        FeatureSpec {
            method,
            max_features: DEFAULT_MAX_FEATURES,
            embeddings: None,
            expected_dim: None,
        }
    }

    pub fn with_max_features(mut self, max_features: usize) -> Self {
        self.max_features = max_features;
        self
    }

    pub fn with_embeddings(mut self, source: EmbeddingSource) -> Self {
        self.embeddings = Some(source);
        self
    }

    pub fn fit(&self, documents: &[Sentence]) -> Result<FittedFeatures> {
        if self.max_features < 1 {
            return Err(Error::config("max_features must be >= 1"));
        }
        if documents.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if self.method.uses_embeddings() {
            let (model, path) = match &self.embeddings {
                Some(EmbeddingSource::Path(p)) => (Arc::new(load_embeddings(p)?), Some(p.clone())),
                Some(EmbeddingSource::Model(m)) => (Arc::clone(m), None),
                None => return Err(Error::config(format!("{} needs embeddings", self.method))),
            };
            if let Some(expected) = self.expected_dim {
                if model.dim != expected {
                    return Err(Error::DimensionMismatch {
                        expected,
                        actual: model.dim,
                    });
                }
            }
            return Ok(FittedFeatures {
                method: self.method,
                vocab: None,
                idf: Vec::new(),
                embedding_path: path,
                embedding_dim: model.dim,
                embeddings: Some(model),
            });
        }

        let vocab = build_vocabulary(documents, 1, Some(self.max_features))?;
        let mut df = vec![0u64; vocab.len()];
        let mut seen = vec![usize::MAX; vocab.len()];
        for (d, doc) in documents.iter().enumerate() {
            for i in vocab.encode(doc) {
                if seen[i] != d {
                    seen[i] = d;
                    df[i] += 1;
                }
            }
        }
        let n = documents.len() as f64;
        let idf = df
            .iter()
            .map(|&f| ((1.0 + n) / (1.0 + f as f64)).ln() + 1.0)
            .collect();
        Ok(FittedFeatures {
            method: self.method,
            vocab: Some(vocab),
            idf,
            embeddings: None,
            embedding_path: None,
            embedding_dim: 0,
        })
    }
}

/// A fitted featurizer. Embedding handles are not serialized; reattach them
/// with [`FittedFeatures::attach_embeddings`] after loading.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FittedFeatures {
    pub method: FeatureMethod,
    pub vocab: Option<Vocabulary>,
    pub idf: Vec<f64>,
    pub embedding_path: Option<PathBuf>,
    pub embedding_dim: usize,
    #[serde(skip)]
    pub embeddings: Option<Arc<EmbeddingModel>>,
}

impl FittedFeatures {
    pub fn attach_embeddings(&mut self, model: Arc<EmbeddingModel>) -> Result<()> {
        if model.dim != self.embedding_dim {
            return Err(Error::DimensionMismatch {
                expected: self.embedding_dim,
                actual: model.dim,
            });
        }
        self.embeddings = Some(model);
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        match self.method {
            FeatureMethod::Tf | FeatureMethod::Tfidf => self.vocab.as_ref().map_or(0, Vocabulary::len),
            FeatureMethod::W2vMean | FeatureMethod::W2vMedian => self.embedding_dim,
            FeatureMethod::W2vPowermean => 3 * self.embedding_dim,
        }
    }

    pub fn column_names(&self) -> Vec<String> {
        match (&self.vocab, self.method) {
            (Some(v), _) => v.entries().iter().map(|(t, _)| t.clone()).collect(),
            (None, FeatureMethod::W2vPowermean) => ["min", "mean", "max"]
                .iter()
                .flat_map(|p| (0..self.embedding_dim).map(move |j| format!("{p}_{j}")))
                .collect(),
            (None, _) => (0..self.embedding_dim).map(|j| format!("dim_{j}")).collect(),
        }
    }

    pub fn transform(&self, documents: &[Sentence]) -> Result<FeatureMatrix> {
        match self.method {
            FeatureMethod::Tf | FeatureMethod::Tfidf => self.transform_counts(documents),
            _ => self.transform_embeddings(documents),
        }
    }

    fn transform_counts(&self, documents: &[Sentence]) -> Result<FeatureMatrix> {
        let vocab = self.vocab.as_ref().ok_or_else(|| Error::config("featurizer is not fitted"))?;
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut empty_rows = 0;
        let mut counts = vec![0.0; vocab.len()];
        for doc in documents {
            let mut cols = vocab.encode(doc);
            for &c in &cols {
                counts[c] += 1.0;
            }
            cols.sort_unstable();
            cols.dedup();
            if cols.is_empty() {
                empty_rows += 1;
            }
            let start = values.len();
            for &c in &cols {
                let v = match self.method {
                    FeatureMethod::Tfidf => counts[c] * self.idf[c],
                    _ => counts[c],
                };
                indices.push(c);
                values.push(v);
                counts[c] = 0.0;
            }
            if self.method == FeatureMethod::Tfidf {
                let row = &mut values[start..];
                let norm = dot(row, row).sqrt();
                if norm > 0.0 {
                    row.iter_mut().for_each(|v| *v /= norm);
                }
            }
            indptr.push(values.len());
        }
        Ok(FeatureMatrix {
            column_names: self.column_names(),
            storage: Storage::Sparse(CsrMatrix {
                cols: vocab.len(),
                indptr,
                indices,
                values,
            }),
            empty_rows,
        })
    }

    fn transform_embeddings(&self, documents: &[Sentence]) -> Result<FeatureMatrix> {
        let model = self
            .embeddings
            .as_ref()
            .ok_or_else(|| Error::config("embeddings are not attached"))?;
        if model.dim != self.embedding_dim {
            return Err(Error::DimensionMismatch {
                expected: self.embedding_dim,
                actual: model.dim,
            });
        }
        let dim = model.dim;
        let width = self.n_features();
        let mut out = Matrix::zeros(documents.len(), width);
        let mut empty_rows = 0;
        for (r, doc) in documents.iter().enumerate() {
            let vectors: Vec<&[f64]> = doc.tokens().iter().filter_map(|t| model.vector(t)).collect();
            if vectors.is_empty() {
                empty_rows += 1;
                continue;
            }
            let row = out.row_mut(r);
            match self.method {
                FeatureMethod::W2vMean => mean_into(&vectors, row),
                FeatureMethod::W2vMedian => median_into(&vectors, row),
                FeatureMethod::W2vPowermean => {
                    let (min, rest) = row.split_at_mut(dim);
                    let (mean, max) = rest.split_at_mut(dim);
                    mean_into(&vectors, mean);
                    for j in 0..dim {
                        let column = vectors.iter().map(|v| v[j]);
                        min[j] = column.clone().fold(f64::INFINITY, f64::min);
                        max[j] = column.fold(f64::NEG_INFINITY, f64::max);
                    }
                }
                FeatureMethod::Tf | FeatureMethod::Tfidf => unreachable!(),
            }
        }
        Ok(FeatureMatrix {
            column_names: self.column_names(),
            storage: Storage::Dense(out),
            empty_rows,
        })
    }
}

fn mean_into(vectors: &[&[f64]], out: &mut [f64]) {
    for v in vectors {
        axpy(1.0, v, out);
    }
    let n = vectors.len() as f64;
    out.iter_mut().for_each(|x| *x /= n);
}

/// Element-wise median; even counts average the two middle values.
fn median_into(vectors: &[&[f64]], out: &mut [f64]) {
    let mut column: Vec<f64> = Vec::with_capacity(vectors.len());
    for (j, slot) in out.iter_mut().enumerate() {
        column.clear();
        column.extend(vectors.iter().map(|v| v[j]));
        column.sort_by(f64::total_cmp);
        let n = column.len();
        *slot = if n % 2 == 1 {
            column[n / 2]
        } else {
            (column[n / 2 - 1] + column[n / 2]) / 2.0
        };
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Storage {
    Sparse(CsrMatrix),
    Dense(Matrix),
}

#[derive(Clone, Copy, Debug)]
pub enum RowView<'a> {
    Sparse { indices: &'a [usize], values: &'a [f64] },
    Dense(&'a [f64]),
}

impl RowView<'_> {
    #[inline]
    pub fn dot(&self, w: &[f64]) -> f64 {
        match self {
            RowView::Sparse { indices, values } => indices.iter().zip(*values).map(|(&i, v)| w[i] * v).sum(),
            RowView::Dense(x) => dot(x, w),
        }
    }

    /// `w += alpha * row`
    #[inline]
    pub fn axpy_into(&self, alpha: f64, w: &mut [f64]) {
        match self {
            RowView::Sparse { indices, values } => {
                for (&i, v) in indices.iter().zip(*values) {
                    w[i] += alpha * v;
                }
            }
            RowView::Dense(x) => axpy(alpha, x, w),
        }
    }

    #[inline]
    pub fn get(&self, j: usize) -> f64 {
        match self {
            RowView::Sparse { indices, values } => indices.binary_search(&j).map_or(0.0, |k| values[k]),
            RowView::Dense(x) => x[j],
        }
    }

    /// Nonzero-or-stored entries as (column, value).
    pub fn entries(&self) -> Vec<(usize, f64)> {
        match self {
            RowView::Sparse { indices, values } => indices.iter().copied().zip(values.iter().copied()).collect(),
            RowView::Dense(x) => x.iter().copied().enumerate().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub storage: Storage,
    pub column_names: Vec<String>,
    /// Documents without any in-vocabulary token (all-zero rows).
    pub empty_rows: usize,
}

impl FeatureMatrix {
    pub fn from_dense(m: Matrix) -> Self {
        FeatureMatrix {
            column_names: (0..m.cols()).map(|j| format!("x{j}")).collect(),
            storage: Storage::Dense(m),
            empty_rows: 0,
        }
    }

    pub fn rows(&self) -> usize {
        match &self.storage {
            Storage::Sparse(s) => s.indptr.len() - 1,
            Storage::Dense(d) => d.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match &self.storage {
            Storage::Sparse(s) => s.cols,
            Storage::Dense(d) => d.cols(),
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> RowView<'_> {
        match &self.storage {
            Storage::Sparse(s) => {
                let (a, b) = (s.indptr[i], s.indptr[i + 1]);
                RowView::Sparse {
                    indices: &s.indices[a..b],
                    values: &s.values[a..b],
                }
            }
            Storage::Dense(d) => RowView::Dense(d.row(i)),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    pub fn to_dense(&self) -> Matrix {
        match &self.storage {
            Storage::Dense(d) => d.clone(),
            Storage::Sparse(_) => {
                let mut m = Matrix::zeros(self.rows(), self.cols());
                for i in 0..self.rows() {
                    for (j, v) in self.row(i).entries() {
                        m.set(i, j, v);
                    }
                }
                m
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        match &self.storage {
            Storage::Sparse(s) => s.values.iter().all(|v| v.is_finite()),
            Storage::Dense(d) => d.is_finite(),
        }
    }

    /// Sparse: `rows cols nnz` header then `row col value` lines.
    /// Dense: one comma-separated line per row.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        match &self.storage {
            Storage::Sparse(s) => {
                writeln!(out, "{} {} {}", self.rows(), s.cols, s.values.len()).unwrap();
                for i in 0..self.rows() {
                    for (j, v) in self.row(i).entries() {
                        writeln!(out, "{i} {j} {v}").unwrap();
                    }
                }
            }
            Storage::Dense(d) => {
                for i in 0..d.rows() {
                    let line: Vec<String> = d.row(i).iter().map(|v| v.to_string()).collect();
                    out.push_str(&line.join(","));
                    out.push('\n');
                }
            }
        }
        out
    }

    pub fn write_dump(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.dump()).map_err(|e| Error::io(path, e))
    }
}
