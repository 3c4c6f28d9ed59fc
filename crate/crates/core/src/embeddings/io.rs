//! word2vec text format for word vectors, a versioned JSON container for
//! full document models.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DocEmbeddingModel, EmbeddingModel};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

const DOC_MODEL_FORMAT: &str = "newsaug-pvdbow";
const DOC_MODEL_VERSION: u32 = 1;

/// Header `<vocab_size> <dim>`, then `token v1 … vdim` per line with 17
/// significant digits, which round-trips every f64 exactly.
pub fn embeddings_to_string(model: &EmbeddingModel) -> String {
    let mut out = String::new();
    writeln!(out, "{} {}", model.vocab.len(), model.dim).unwrap();
    for i in 0..model.vocab.len() {
        out.push_str(model.vocab.token(i));
        for v in model.input_vectors.row(i) {
            write!(out, " {v:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn save_embeddings(model: &EmbeddingModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, embeddings_to_string(model)).map_err(|e| Error::io(path, e))
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: message.into(),
    }
}

pub fn parse_embeddings(text: &str) -> Result<EmbeddingModel> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| format_err(1, "missing header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (rows, dim) = match fields.as_slice() {
        [r, d] => (
            r.parse::<usize>().map_err(|_| format_err(1, "bad vocabulary size"))?,
            d.parse::<usize>().map_err(|_| format_err(1, "bad dimension"))?,
        ),
        _ => return Err(format_err(1, "header must be `<vocab_size> <dim>`")),
    };
    if rows == 0 || dim == 0 {
        return Err(format_err(1, "vocabulary size and dimension must be positive"));
    }
    let mut entries = Vec::with_capacity(rows);
    let mut data = Vec::with_capacity(rows * dim);
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if entries.len() == rows {
            return Err(format_err(n, format!("more than {rows} vector rows")));
        }
        let mut parts = line.split(' ').filter(|p| !p.is_empty());
        let token = parts.next().ok_or_else(|| format_err(n, "missing token"))?;
        let mut width = 0;
        for p in parts {
            let v: f64 = p.parse().map_err(|_| format_err(n, format!("bad number `{p}`")))?;
            if !v.is_finite() {
                return Err(format_err(n, "non-finite component"));
            }
            data.push(v);
            width += 1;
        }
        if width != dim {
            return Err(format_err(n, format!("expected {dim} components, found {width}")));
        }
        entries.push((token.to_string(), 0));
    }
    if entries.len() != rows {
        return Err(format_err(
            rows + 1,
            format!("header declares {rows} rows, found {}", entries.len()),
        ));
    }
    let vocab = Vocabulary::from_entries(entries);
    if vocab.entries().len() != vocab.entries().iter().map(|(t, _)| t).collect::<std::collections::HashSet<_>>().len() {
        return Err(format_err(1, "duplicate tokens"));
    }
    EmbeddingModel::from_vectors(vocab, Matrix::from_vec(rows, dim, data))
}

/// Reads word vectors; the result has zero counts, zero output vectors and
/// a uniform negative table.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&text)
}

#[derive(Serialize, Deserialize)]
struct DocModelFile {
    format: String,
    version: u32,
    model: DocEmbeddingModel,
}

#[derive(Serialize)]
struct DocModelFileRef<'a> {
    format: &'static str,
    version: u32,
    model: &'a DocEmbeddingModel,
}

pub fn save_doc_model(model: &DocEmbeddingModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string(&DocModelFileRef {
        format: DOC_MODEL_FORMAT,
        version: DOC_MODEL_VERSION,
        model,
    })?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_doc_model(path: impl AsRef<Path>) -> Result<DocEmbeddingModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: DocModelFile = serde_json::from_str(&text)?;
    if file.format != DOC_MODEL_FORMAT || file.version != DOC_MODEL_VERSION {
        return Err(format_err(1, format!("unsupported model container {} v{}", file.format, file.version)));
    }
    if !file.model.word_model.is_finite() || !file.model.doc_vectors.is_finite() {
        return Err(Error::NonFinite("document model".into()));
    }
    Ok(file.model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> EmbeddingModel {
        let vocab = Vocabulary::from_entries(vec![("a".into(), 3), ("b".into(), 1)]);
        let m = Matrix::from_rows(&[vec![0.1, -1.0 / 3.0, 1e-300], vec![std::f64::consts::PI, 2.5e17, -0.0]]);
        EmbeddingModel::from_vectors(vocab, m).unwrap()
    }

    #[test]
    fn text_round_trip_is_bitwise() {
        let m = model();
        let back = parse_embeddings(&embeddings_to_string(&m)).unwrap();
        assert_eq!(back.vocab.token(1), "b");
        for (x, y) in m.input_vectors.as_slice().iter().zip(back.input_vectors.as_slice()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn header_row_count_mismatch() {
        let err = parse_embeddings("3 2\na 1 2\nb 3 4\n").unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn short_row_reports_line() {
        let err = parse_embeddings("2 2\na 1 2\nb 3\n").unwrap_err();
        assert!(matches!(err, Error::Format { line: 3, .. }));
        let err = parse_embeddings("x 2\n").unwrap_err();
        assert!(matches!(err, Error::Format { line: 1, .. }));
        let err = parse_embeddings("1 2\na 1 nan\n").unwrap_err();
        assert!(matches!(err, Error::Format { line: 2, .. }));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.vec");
        save_embeddings(&model(), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("2 3\n"));
        assert_eq!(load_embeddings(&path).unwrap().input_vectors, model().input_vectors);
    }
}
