//! Datasets and the multilabel text format.
//!
//! One example per line: a comma-separated label list, then
//! whitespace-separated `feature:value` pairs, e.g. `3,7 1:0.5 4:2.0`.
//! Labels and feature indices are 1-based in files and 0-based in memory;
//! the shift happens at this boundary. An optional first line `n d c`
//! (three bare integers) pins the dimensions; without it they are
//! inferred as max index + 1. A line whose first token contains `:` has
//! an empty label set; fully empty lines are empty examples.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Multiclass,
    Multilabel,
}

impl DatasetKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetKind::Multiclass => "multiclass",
            DatasetKind::Multilabel => "multilabel",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    /// n x d feature matrix.
    pub x: SparseMatrix,
    /// n x c label indicator matrix.
    pub y: SparseMatrix,
    pub kind: DatasetKind,
}

impl Dataset {
    pub fn n_examples(&self) -> usize {
        self.x.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    pub fn n_labels(&self) -> usize {
        self.y.n_cols()
    }
}

/// Evaluation metrics; `test_error` is present for multiclass data only.
#[derive(Debug, Clone)]
pub struct Metrics {
    pub precision_at: BTreeMap<usize, f64>,
    pub test_error: Option<f64>,
    pub n_evaluated: usize,
    pub n_skipped_empty: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ParseReport {
    pub n_examples: usize,
    pub n_empty_label_rows: usize,
    pub header_present: bool,
}

struct ParsedLine {
    labels: Vec<usize>,
    features: Vec<(usize, f64)>,
}

fn parse_err(line_no: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line: line_no,
        message: message.into(),
    }
}

/// Parse a 1-based index token to a 0-based index.
fn parse_index(tok: &str, line_no: usize, what: &str) -> Result<usize> {
    let raw: usize = tok
        .parse()
        .map_err(|_| parse_err(line_no, format!("invalid {what} index `{tok}`")))?;
    if raw == 0 {
        return Err(parse_err(
            line_no,
            format!("{what} index `{tok}` must be >= 1 (file indices are 1-based)"),
        ));
    }
    Ok(raw - 1)
}

fn parse_line(line: &str, line_no: usize) -> Result<ParsedLine> {
    let mut tokens = line.split_whitespace().peekable();
    let mut labels = Vec::new();
    if let Some(first) = tokens.peek() {
        if !first.contains(':') {
            let label_field = tokens.next().unwrap();
            for tok in label_field.split(',') {
                if tok.is_empty() {
                    return Err(parse_err(line_no, "empty label token"));
                }
                labels.push(parse_index(tok, line_no, "label")?);
            }
            labels.sort_unstable();
            labels.dedup();
        }
    }
    let mut features = Vec::new();
    for tok in tokens {
        let (idx_str, val_str) = tok
            .split_once(':')
            .ok_or_else(|| parse_err(line_no, format!("expected `index:value`, got `{tok}`")))?;
        let idx = parse_index(idx_str, line_no, "feature")?;
        let val: f64 = val_str
            .parse()
            .map_err(|_| parse_err(line_no, format!("invalid feature value `{val_str}`")))?;
        if !val.is_finite() {
            return Err(parse_err(line_no, format!("non-finite feature value `{val_str}`")));
        }
        features.push((idx, val));
    }
    features.sort_by_key(|&(i, _)| i);
    for w in features.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(parse_err(
                line_no,
                format!("duplicate feature index {}", w[0].0 + 1),
            ));
        }
    }
    Ok(ParsedLine { labels, features })
}

/// True when the line is exactly three bare nonnegative integers, the
/// optional `n d c` header. No valid data line has this shape: features
/// carry colons and a bare label field is a single token.
fn is_header(line: &str) -> Option<(usize, usize, usize)> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != 3 {
        return None;
    }
    let mut vals = [0usize; 3];
    for (slot, tok) in vals.iter_mut().zip(&toks) {
        if tok.contains(':') || tok.contains(',') {
            return None;
        }
        *slot = tok.parse().ok()?;
    }
    Some((vals[0], vals[1], vals[2]))
}

pub fn parse_multilabel_str(text: &str) -> Result<(Dataset, ParseReport)> {
    let mut report = ParseReport::default();
    let mut header: Option<(usize, usize, usize)> = None;
    let mut rows: Vec<ParsedLine> = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if idx == 0 {
            if let Some(dims) = is_header(line) {
                header = Some(dims);
                report.header_present = true;
                continue;
            }
        }
        if line.trim().is_empty() {
            rows.push(ParsedLine {
                labels: Vec::new(),
                features: Vec::new(),
            });
            continue;
        }
        let parsed = parse_line(line, line_no)?;
        if let Some((n, d, c)) = header {
            if rows.len() >= n {
                return Err(parse_err(
                    line_no,
                    format!("more than the {n} examples declared in the header"),
                ));
            }
            if let Some(&l) = parsed.labels.iter().find(|&&l| l >= c) {
                return Err(parse_err(
                    line_no,
                    format!("label index {} exceeds declared c = {c}", l + 1),
                ));
            }
            if let Some(&(f, _)) = parsed.features.iter().find(|&&(f, _)| f >= d) {
                return Err(parse_err(
                    line_no,
                    format!("feature index {} exceeds declared d = {d}", f + 1),
                ));
            }
        }
        rows.push(parsed);
    }

    let (n, d, c) = match header {
        Some((n, d, c)) => {
            if rows.len() != n {
                return Err(parse_err(
                    text.lines().count(),
                    format!("header declares {n} examples but file has {}", rows.len()),
                ));
            }
            (n, d, c)
        }
        None => {
            let d = rows
                .iter()
                .flat_map(|r| r.features.iter().map(|&(f, _)| f + 1))
                .max()
                .unwrap_or(0);
            let c = rows
                .iter()
                .flat_map(|r| r.labels.iter().map(|&l| l + 1))
                .max()
                .unwrap_or(0);
            (rows.len(), d, c)
        }
    };

    let mut x_rows = Vec::with_capacity(n);
    let mut y_rows = Vec::with_capacity(n);
    for row in rows {
        if row.labels.is_empty() {
            report.n_empty_label_rows += 1;
        }
        y_rows.push(row.labels.into_iter().map(|l| (l, 1.0)).collect());
        x_rows.push(row.features);
    }
    report.n_examples = n;

    let x = SparseMatrix::from_rows(d, x_rows)?;
    let y = SparseMatrix::from_rows(c, y_rows)?;
    let multiclass = n > 0
        && (0..n).all(|i| {
            let (labels, _) = y.row(i);
            labels.len() == 1
        });
    Ok((
        Dataset {
            x,
            y,
            kind: if multiclass {
                DatasetKind::Multiclass
            } else {
                DatasetKind::Multilabel
            },
        },
        report,
    ))
}

pub fn parse_multilabel_text(path: impl AsRef<Path>) -> Result<(Dataset, ParseReport)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_multilabel_str(&text)
}

/// Write a dataset in the text format with an `n d c` header. Values are
/// written with the shortest representation that parses back to the same
/// f64, so write-then-parse round-trips exactly.
pub fn format_multilabel_text(ds: &Dataset) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} {}",
        ds.n_examples(),
        ds.n_features(),
        ds.n_labels()
    );
    for i in 0..ds.n_examples() {
        let (labels, _) = ds.y.row(i);
        let label_field = labels
            .iter()
            .map(|l| (l + 1).to_string())
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&label_field);
        let (cols, vals) = ds.x.row(i);
        for (&ci, &v) in cols.iter().zip(vals) {
            let _ = write!(out, " {}:{}", ci + 1, v);
        }
        out.push('\n');
    }
    out
}

pub fn write_multilabel_text(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_multilabel_text(ds))
        .map_err(|e| Error::io(path.display().to_string(), e))
}
