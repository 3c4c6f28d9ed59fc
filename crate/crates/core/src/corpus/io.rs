use std::fs;
use std::path::Path;

use super::{tokenize, validate_label, CorpusStats, LabeledDataset, Record, Sentence};
use crate::error::{Error, Result};

const HEADER: &str = "label\ttext";

/// Splits raw bytes into 1-based numbered UTF-8 lines, accepting LF or CRLF.
fn utf8_lines(bytes: &[u8]) -> Result<Vec<(usize, &str)>> {
    if bytes.is_empty() {
        return Ok(Vec::new());
    }
    let body = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    body.split(|&b| b == b'\n')
        .enumerate()
        .map(|(i, raw)| {
            let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
            std::str::from_utf8(raw)
                .map(|line| (i + 1, line))
                .map_err(|_| Error::Encoding { line: i + 1 })
        })
        .collect()
}

/// One document per line; lines without any token are skipped.
pub fn parse_text_corpus(bytes: &[u8]) -> Result<(Vec<Sentence>, CorpusStats)> {
    let mut sentences = Vec::new();
    for (_, line) in utf8_lines(bytes)? {
        if let Ok(s) = tokenize(line) {
            sentences.push(s);
        }
    }
    let stats = CorpusStats::of(&sentences);
    Ok((sentences, stats))
}

pub fn load_text_corpus(path: impl AsRef<Path>) -> Result<(Vec<Sentence>, CorpusStats)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_text_corpus(&bytes)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DatasetLoadReport {
    /// Rows whose text had no tokens.
    pub skipped_empty: usize,
}

pub fn parse_labeled_dataset(bytes: &[u8]) -> Result<(LabeledDataset, DatasetLoadReport)> {
    let lines = utf8_lines(bytes)?;
    let mut lines = lines.into_iter();
    match lines.next() {
        Some((_, header)) if header == HEADER => {}
        _ => {
            return Err(Error::Format {
                line: 1,
                message: "expected header `label<TAB>text`".into(),
            })
        }
    }
    let mut records = Vec::new();
    let mut report = DatasetLoadReport::default();
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::Format {
                line: n,
                message: format!("expected 2 tab-separated columns, found {}", fields.len()),
            });
        }
        let label = fields[0].trim();
        validate_label(label).map_err(|_| Error::Format {
            line: n,
            message: "empty label".into(),
        })?;
        match tokenize(fields[1]) {
            Ok(sentence) => records.push(Record {
                sentence,
                label: label.to_string(),
            }),
            Err(_) => report.skipped_empty += 1,
        }
    }
    Ok((LabeledDataset::new(records)?, report))
}

/// Reads a `label<TAB>text` file with a header line.
pub fn load_labeled_dataset(path: impl AsRef<Path>) -> Result<(LabeledDataset, DatasetLoadReport)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_labeled_dataset(&bytes)
}

impl LabeledDataset {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        for r in self.records() {
            out.push_str(&r.label);
            out.push('\t');
            out.push_str(&r.sentence.text());
            out.push('\n');
        }
        out
    }
}

pub fn write_labeled_dataset(path: impl AsRef<Path>, data: &LabeledDataset) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, data.to_tsv()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn skips_blank_lines() {
        let (s, stats) = parse_text_corpus(b"a b\n\nc\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(stats.line_count, 2);
        assert_eq!(stats.token_count, 3);
    }

    #[test]
    fn accepts_crlf() {
        let (s, _) = parse_text_corpus(b"a b\r\nc\r\n").unwrap();
        assert_eq!(s[0].tokens(), ["a", "b"]);
        assert_eq!(s[1].tokens(), ["c"]);
    }

    #[test]
    fn empty_file_gives_zero_stats() {
        let (s, stats) = parse_text_corpus(b"").unwrap();
        assert!(s.is_empty());
        assert_eq!(stats, CorpusStats::default());
    }

    #[test]
    fn invalid_utf8_reports_line() {
        let err = parse_text_corpus(b"ok\nfine\nbad \xff\n").unwrap_err();
        assert!(matches!(err, Error::Encoding { line: 3 }));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_text_corpus("/nonexistent/corpus.txt"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn reads_labeled_rows() {
        let (d, report) =
            parse_labeled_dataset("label\ttext\n Traffic \tTsela ya N1 ka Borwa\nLegal\t...\n".as_bytes())
                .unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.records()[0].label, "Traffic");
        assert_eq!(report.skipped_empty, 1);
    }

    #[test]
    fn format_errors_carry_row_numbers() {
        let err = parse_labeled_dataset(b"label\ttext\nA\tx\nB\ty\tz\n").unwrap_err();
        assert!(matches!(err, Error::Format { line: 3, .. }));
        let err = parse_labeled_dataset(b"text\tlabel\nA\tx\n").unwrap_err();
        assert!(matches!(err, Error::Format { line: 1, .. }));
        let err = parse_labeled_dataset(b"").unwrap_err();
        assert!(matches!(err, Error::Format { line: 1, .. }));
    }

    #[test]
    fn header_only_is_empty_dataset() {
        assert!(matches!(
            parse_labeled_dataset(b"label\ttext\n"),
            Err(Error::EmptyDataset)
        ));
    }

    proptest! {
        #[test]
        fn tsv_round_trips(rows in prop::collection::vec(("[A-Z][a-z]{0,6}", "[a-z0-9]{1,5}( [a-z0-9]{1,5}){0,6}"), 1..15)) {
            let mut text = String::from("label\ttext\n");
            for (label, body) in &rows {
                text.push_str(&format!("{label}\t{body}\n"));
            }
            let (first, _) = parse_labeled_dataset(text.as_bytes()).unwrap();
            let (second, _) = parse_labeled_dataset(first.to_tsv().as_bytes()).unwrap();
            prop_assert_eq!(&first, &second);
            prop_assert_eq!(first.to_tsv(), second.to_tsv());
        }
    }
}
