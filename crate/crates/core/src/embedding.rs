//! Immutable word-embedding tables and the word2vec text interchange format.
//!
//! The format is line oriented: a header `"<count> <dim>"` followed by one row
//! per token, `token v1 ... vdim`, single-space separated. Vectors are kept as
//! `f64`; anything that does not parse to a finite number is rejected.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: file is not valid UTF-8")]
    Utf8 { line: usize },
    #[error("line 1: malformed header: {reason}")]
    Header { reason: String },
    #[error("line {line}: row has {found} values, expected {expected}")]
    RowLength {
        line: usize,
        found: usize,
        expected: usize,
    },
    #[error("line {line}: cannot parse value {value:?}")]
    BadValue { line: usize, value: String },
    #[error("line {line}: non-finite value {value:?}")]
    NonFinite { line: usize, value: String },
    #[error("line {line}: duplicate token {token:?}")]
    DuplicateToken { line: usize, token: String },
    #[error("line {line}: empty row")]
    EmptyRow { line: usize },
    #[error("header declares {declared} rows but file has {found}")]
    CountMismatch { declared: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LookupError {
    #[error("phrase is empty")]
    EmptyPhrase,
    #[error("out of vocabulary: {}", .missing.join(", "))]
    Oov { missing: Vec<String> },
    #[error("strict lookup: token {token:?} not in table")]
    Policy { token: String },
}

/// How multi-word phrases are resolved against a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LookupPolicy {
    /// Try the underscored token first, then fall back to the mean of the
    /// constituent word vectors.
    #[default]
    UnderscoreThenAverage,
    /// Only the exact underscored token.
    Strict,
}

impl std::str::FromStr for LookupPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "underscore-then-average" => Ok(Self::UnderscoreThenAverage),
            "strict" => Ok(Self::Strict),
            other => Err(format!("unknown lookup policy {other:?}")),
        }
    }
}

impl std::fmt::Display for LookupPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::UnderscoreThenAverage => "underscore-then-average",
            Self::Strict => "strict",
        })
    }
}

/// A fixed-dimension token → vector map. Rows keep their file order so a
/// table written back out matches the input layout.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    entries: IndexMap<String, Vec<f64>>,
    source_label: String,
}

impl EmbeddingTable {
    /// Build a table from in-memory rows, enforcing the same invariants as
    /// the parser.
    pub fn from_rows<I, S>(
        source_label: impl Into<String>,
        dimension: usize,
        rows: I,
    ) -> Result<Self, ParseError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        if dimension == 0 {
            return Err(ParseError::Header {
                reason: "dimension must be positive".into(),
            });
        }
        let mut entries = IndexMap::new();
        for (i, (token, vector)) in rows.into_iter().enumerate() {
            let line = i + 2;
            let token = token.into();
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                return Err(ParseError::BadValue { line, value: token });
            }
            if vector.len() != dimension {
                return Err(ParseError::RowLength {
                    line,
                    found: vector.len(),
                    expected: dimension,
                });
            }
            if let Some(v) = vector.iter().find(|v| !v.is_finite()) {
                return Err(ParseError::NonFinite {
                    line,
                    value: v.to_string(),
                });
            }
            if entries.contains_key(&token) {
                return Err(ParseError::DuplicateToken { line, token });
            }
            entries.insert(token, vector);
        }
        Ok(Self {
            dimension,
            entries,
            source_label: source_label.into(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn with_source_label(mut self, label: impl Into<String>) -> Self {
        self.source_label = label.into();
        self
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Returns a copy with every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dimension: self.dimension,
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(|x| x * factor).collect()))
                .collect(),
            source_label: self.source_label.clone(),
        }
    }

    /// Resolve a phrase to a vector under `policy`.
    ///
    /// Internal whitespace maps to `_` for the direct lookup. Under
    /// [`LookupPolicy::UnderscoreThenAverage`] a miss falls back to the
    /// arithmetic mean of the space-separated constituents, all of which
    /// must be present.
    pub fn lookup_phrase(
        &self,
        phrase: &str,
        policy: LookupPolicy,
    ) -> Result<Vec<f64>, LookupError> {
        let parts: Vec<&str> = phrase.split_whitespace().collect();
        if parts.is_empty() {
            return Err(LookupError::EmptyPhrase);
        }
        let token = parts.join("_");
        if let Some(v) = self.get(&token) {
            return Ok(v.to_vec());
        }
        match policy {
            LookupPolicy::Strict => Err(LookupError::Policy { token }),
            LookupPolicy::UnderscoreThenAverage => {
                let missing: Vec<String> = parts
                    .iter()
                    .filter(|p| !self.contains(p))
                    .map(|p| p.to_string())
                    .collect();
                if !missing.is_empty() || parts.len() == 1 {
                    return Err(LookupError::Oov {
                        missing: if missing.is_empty() {
                            vec![token]
                        } else {
                            missing
                        },
                    });
                }
                let mut mean = vec![0.0; self.dimension];
                for part in &parts {
                    for (m, x) in mean.iter_mut().zip(self.get(part).expect("checked above")) {
                        *m += x;
                    }
                }
                let k = parts.len() as f64;
                mean.iter_mut().for_each(|m| *m /= k);
                Ok(mean)
            }
        }
    }

    /// Whether `phrase` resolves under `policy`, without building the vector.
    pub fn resolves(&self, phrase: &str, policy: LookupPolicy) -> bool {
        let parts: Vec<&str> = phrase.split_whitespace().collect();
        if parts.is_empty() {
            return false;
        }
        if self.contains(&parts.join("_")) {
            return true;
        }
        policy == LookupPolicy::UnderscoreThenAverage
            && parts.len() > 1
            && parts.iter().all(|p| self.contains(p))
    }

    /// Serialize to word2vec text. Values use 17 significant digits so a
    /// re-parse recovers every bit.
    pub fn to_word2vec_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.entries.len(), self.dimension);
        for (token, vector) in &self.entries {
            out.push_str(token);
            for v in vector {
                let _ = write!(out, " {}", format_f64(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_word2vec<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        writer.write_all(self.to_word2vec_string().as_bytes())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_word2vec_string())
    }

    /// Parse word2vec text from any reader.
    pub fn read_word2vec<R: Read>(
        reader: R,
        source_label: impl Into<String>,
    ) -> Result<Self, ParseError> {
        let mut lines = BufReader::new(reader).lines();
        let header = match lines.next() {
            Some(line) => line.map_err(|e| io_or_utf8(e, 1))?,
            None => {
                return Err(ParseError::Header {
                    reason: "file is empty".into(),
                })
            }
        };
        let (declared, dimension) = parse_header(&header)?;

        let mut entries = IndexMap::with_capacity(declared);
        for (line_no, line) in (2..).zip(lines) {
            let line = line.map_err(|e| io_or_utf8(e, line_no))?;
            let mut fields = line.split_ascii_whitespace();
            let Some(token) = fields.next() else {
                return Err(ParseError::EmptyRow { line: line_no });
            };
            let mut vector = Vec::with_capacity(dimension);
            for raw in fields {
                let v: f64 = raw.parse().map_err(|_| ParseError::BadValue {
                    line: line_no,
                    value: raw.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(ParseError::NonFinite {
                        line: line_no,
                        value: raw.to_string(),
                    });
                }
                vector.push(v);
            }
            if vector.len() != dimension {
                return Err(ParseError::RowLength {
                    line: line_no,
                    found: vector.len(),
                    expected: dimension,
                });
            }
            if entries.contains_key(token) {
                return Err(ParseError::DuplicateToken {
                    line: line_no,
                    token: token.to_string(),
                });
            }
            entries.insert(token.to_string(), vector);
        }
        if entries.len() != declared {
            return Err(ParseError::CountMismatch {
                declared,
                found: entries.len(),
            });
        }
        Ok(Self {
            dimension,
            entries,
            source_label: source_label.into(),
        })
    }

    pub fn parse_word2vec(text: &str, source_label: impl Into<String>) -> Result<Self, ParseError> {
        Self::read_word2vec(text.as_bytes(), source_label)
    }
}

/// Supported on-disk formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Word2VecText,
}

/// Load a table from disk. The source label defaults to the file stem.
pub fn load_table(
    path: impl AsRef<Path>,
    format: TableFormat,
) -> Result<EmbeddingTable, ParseError> {
    let path = path.as_ref();
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match format {
        TableFormat::Word2VecText => {
            EmbeddingTable::read_word2vec(std::fs::File::open(path)?, label)
        }
    }
}

fn parse_header(header: &str) -> Result<(usize, usize), ParseError> {
    let fields: Vec<&str> = header.split_ascii_whitespace().collect();
    let [count, dim] = fields.as_slice() else {
        return Err(ParseError::Header {
            reason: format!("expected \"<count> <dimension>\", got {header:?}"),
        });
    };
    let count: usize = count.parse().map_err(|_| ParseError::Header {
        reason: format!("bad vocabulary count {count:?}"),
    })?;
    let dim: usize = dim.parse().map_err(|_| ParseError::Header {
        reason: format!("bad dimension {dim:?}"),
    })?;
    if dim == 0 {
        return Err(ParseError::Header {
            reason: "dimension must be positive".into(),
        });
    }
    Ok((count, dim))
}

fn io_or_utf8(err: std::io::Error, line: usize) -> ParseError {
    if err.kind() == std::io::ErrorKind::InvalidData {
        ParseError::Utf8 { line }
    } else {
        ParseError::Io(err)
    }
}

/// Format with 17 significant digits in scientific notation.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}
