//! On-disk formats: binary embedding sets, the language manifest, and classifier
//! probability matrices.
//!
//! Embedding file layout (all little-endian):
//!
//! ```text
//! "EMB1" | dim: u32 | n: u32 | n*dim f32, row-major
//! ```

use std::collections::HashSet;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"EMB1";
pub const HEADER_LEN: usize = 12;

/// Row sums of a probability matrix must be 1 within this tolerance.
pub const ROW_SUM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("dimension mismatch: expected {expected} payload bytes, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value at row {row}, col {col}")]
    NonFinite { row: usize, col: usize },
    #[error("embedding set must have at least one row and one column")]
    Empty,
    #[error("ragged rows: row {row} has {found} columns, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("cannot parse {text:?} as a finite real at row {row}, col {col}")]
    Parse { row: usize, col: usize, text: String },
    #[error("probability row {row} sums to {sum}, expected 1 within {ROW_SUM_TOLERANCE}")]
    RowSumViolation { row: usize, sum: f64 },
    #[error("probability {value} at row {row}, col {col} is outside [0, 1]")]
    ProbabilityOutOfRange { row: usize, col: usize, value: f64 },
    #[error("duplicate language code {0:?}")]
    DuplicateLanguage(String),
    #[error("empty language code at position {0}")]
    EmptyLanguage(usize),
    #[error("probability vocabulary needs at least 2 languages, found {0}")]
    VocabularyTooSmall(usize),
    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error("language {0:?} is not listed in the manifest")]
    UnknownLanguage(String),
    #[error("csv: {0}")]
    Csv(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// N×dim embedding vectors for one language. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet<T = f32> {
    language: String,
    vectors: Matrix<T>,
}

impl<T: Scalar> EmbeddingSet<T> {
    /// Validates N ≥ 1, dim ≥ 1 and finiteness of every entry.
    pub fn new(language: impl Into<String>, vectors: Matrix<T>) -> Result<Self, StoreError> {
        if vectors.rows() == 0 || vectors.cols() == 0 {
            return Err(StoreError::Empty);
        }
        if let Some(pos) = vectors.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(StoreError::NonFinite {
                row: pos / vectors.cols(),
                col: pos % vectors.cols(),
            });
        }
        Ok(Self {
            language: language.into(),
            vectors,
        })
    }

    pub fn from_rows(language: impl Into<String>, rows: &[Vec<T>]) -> Result<Self, StoreError> {
        let expected = rows.first().map_or(0, Vec::len);
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != expected) {
            return Err(StoreError::RaggedRows {
                row,
                expected,
                found: r.len(),
            });
        }
        let m = Matrix::from_rows(rows).ok_or(StoreError::Empty)?;
        Self::new(language, m)
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn with_language(mut self, language: impl Into<String>) -> Self {
        self.language = language.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    /// Number of vectors N.
    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    /// Always false for a validated set; present for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.vectors.rows() == 0
    }

    pub fn vectors(&self) -> &Matrix<T> {
        &self.vectors
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.vectors.row(i)
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.vectors.iter_rows()
    }

    /// New set made of the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self, StoreError> {
        let mut data = Vec::with_capacity(indices.len() * self.dim());
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::new(
            self.language.clone(),
            Matrix::from_vec(indices.len(), self.dim(), data),
        )
    }

    pub fn cast<U: Scalar>(&self) -> EmbeddingSet<U> {
        EmbeddingSet {
            language: self.language.clone(),
            vectors: self.vectors.cast(),
        }
    }
}

/// Serializes a matrix as one `EMB1` block. Values are narrowed to f32.
pub fn encode_block<T: Scalar>(m: &Matrix<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.as_slice().len());
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    for &v in m.as_slice() {
        let f = v.to_f32().unwrap_or(f32::NAN);
        out.extend_from_slice(&f.to_le_bytes());
    }
    out
}

/// Parses one `EMB1` block from the front of `bytes`, returning it and the unread tail.
/// With `exact`, trailing bytes are a dimension mismatch.
pub fn decode_block(bytes: &[u8], exact: bool) -> Result<(Matrix<f32>, &[u8]), StoreError> {
    if bytes.len() < HEADER_LEN {
        return Err(StoreError::MalformedHeader(format!(
            "file has {} bytes, header needs {HEADER_LEN}",
            bytes.len()
        )));
    }
    if &bytes[..4] != EMBEDDING_MAGIC {
        return Err(StoreError::MalformedHeader(format!(
            "bad magic {:?}",
            String::from_utf8_lossy(&bytes[..4])
        )));
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if dim == 0 || n == 0 {
        return Err(StoreError::MalformedHeader(format!("dim={dim}, n={n}; both must be ≥ 1")));
    }
    let expected = n
        .checked_mul(dim)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| StoreError::MalformedHeader(format!("dim={dim}, n={n} overflows")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected || (exact && payload.len() != expected) {
        return Err(StoreError::DimensionMismatch {
            expected,
            found: payload.len(),
        });
    }
    let mut data = Vec::with_capacity(n * dim);
    for (k, chunk) in payload[..expected].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(StoreError::NonFinite {
                row: k / dim,
                col: k % dim,
            });
        }
        data.push(v);
    }
    Ok((Matrix::from_vec(n, dim, data), &payload[expected..]))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, StoreError> {
    let mut buf = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(io_err(path))?;
    Ok(buf)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    fs::write(path, bytes).map_err(io_err(path))
}

/// Loads an embedding file. The language label defaults to the file stem; the
/// manifest is the authority for the real code (see [`load_manifest_language`]).
pub fn load_embeddings(path: &Path) -> Result<EmbeddingSet<f32>, StoreError> {
    let bytes = read_bytes(path)?;
    let (m, _) = decode_block(&bytes, true)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    EmbeddingSet::new(stem, m)
}

pub fn save_embeddings<T: Scalar>(set: &EmbeddingSet<T>, path: &Path) -> Result<(), StoreError> {
    write_bytes(path, &encode_block(set.vectors()))
}

fn parse_cell<T: Scalar>(text: &str, row: usize, col: usize) -> Result<T, StoreError> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(T::lit)
        .ok_or_else(|| StoreError::Parse {
            row,
            col,
            text: text.to_string(),
        })
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

/// Headerless CSV of reals; row i, column j becomes `vectors[i][j]`.
pub fn import_csv_from<T: Scalar, R: Read>(reader: R, language: &str) -> Result<EmbeddingSet<T>, StoreError> {
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (r, rec) in csv_reader(reader).records().enumerate() {
        let rec = rec.map_err(|e| StoreError::Csv(e.to_string()))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if let Some(first) = rows.first() {
            if rec.len() != first.len() {
                return Err(StoreError::RaggedRows {
                    row: r,
                    expected: first.len(),
                    found: rec.len(),
                });
            }
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, cell)| parse_cell(cell, r, c))
            .collect::<Result<Vec<T>, _>>()?;
        rows.push(row);
    }
    EmbeddingSet::from_rows(language, &rows)
}

pub fn import_csv<T: Scalar>(path: &Path, language: &str) -> Result<EmbeddingSet<T>, StoreError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    import_csv_from(file, language)
}

/// Per-utterance classifier probabilities over an ordered vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    vocabulary: Vec<String>,
    rows: Matrix<f64>,
}

fn check_vocabulary(codes: &[String]) -> Result<(), StoreError> {
    let mut seen = HashSet::new();
    for (i, c) in codes.iter().enumerate() {
        if c.is_empty() {
            return Err(StoreError::EmptyLanguage(i));
        }
        if !seen.insert(c.as_str()) {
            return Err(StoreError::DuplicateLanguage(c.clone()));
        }
    }
    Ok(())
}

impl ProbabilityMatrix {
    pub fn new(vocabulary: Vec<String>, rows: Matrix<f64>) -> Result<Self, StoreError> {
        check_vocabulary(&vocabulary)?;
        if vocabulary.len() < 2 {
            return Err(StoreError::VocabularyTooSmall(vocabulary.len()));
        }
        if rows.cols() != vocabulary.len() {
            return Err(StoreError::RaggedRows {
                row: 0,
                expected: vocabulary.len(),
                found: rows.cols(),
            });
        }
        for (r, row) in rows.iter_rows().enumerate() {
            for (c, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(StoreError::ProbabilityOutOfRange { row: r, col: c, value: p });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(StoreError::RowSumViolation { row: r, sum });
            }
        }
        Ok(Self { vocabulary, rows })
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn rows(&self) -> &Matrix<f64> {
        &self.rows
    }

    /// Number of utterances N.
    pub fn len(&self) -> usize {
        self.rows.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.rows() == 0
    }
}

pub fn probability_matrix_from<R: Read>(reader: R) -> Result<ProbabilityMatrix, StoreError> {
    let mut records = csv_reader(reader).into_records();
    let header = records
        .next()
        .ok_or_else(|| StoreError::Csv("missing header row".into()))?
        .map_err(|e| StoreError::Csv(e.to_string()))?;
    let vocabulary: Vec<String> = header.iter().map(str::to_string).collect();
    check_vocabulary(&vocabulary)?;
    let k = vocabulary.len();
    let mut data = Vec::new();
    let mut n = 0;
    for (r, rec) in records.enumerate() {
        let rec = rec.map_err(|e| StoreError::Csv(e.to_string()))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != k {
            return Err(StoreError::RaggedRows {
                row: r,
                expected: k,
                found: rec.len(),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            data.push(parse_cell::<f64>(cell, r, c)?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(StoreError::Csv("no probability rows".into()));
    }
    ProbabilityMatrix::new(vocabulary, Matrix::from_vec(n, k, data))
}

pub fn load_probability_matrix(path: &Path) -> Result<ProbabilityMatrix, StoreError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    probability_matrix_from(file)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub language: String,
    /// Relative to the manifest's directory unless absolute.
    pub path: PathBuf,
    pub utterance_count: Option<usize>,
}

/// Which embedding file holds which language, and which language is the query.
///
/// Text form: first line `#query <code>`, then `<code>\t<path>[\t<count>]` per
/// line. Blank lines and other `#` lines are ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageManifest {
    pub query_language: String,
    pub entries: Vec<ManifestEntry>,
}

impl LanguageManifest {
    pub fn new(query_language: impl Into<String>, entries: Vec<ManifestEntry>) -> Result<Self, StoreError> {
        let m = Self {
            query_language: query_language.into(),
            entries,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), StoreError> {
        let codes: Vec<String> = self.entries.iter().map(|e| e.language.clone()).collect();
        check_vocabulary(&codes)?;
        if !codes.contains(&self.query_language) {
            return Err(StoreError::UnknownLanguage(self.query_language.clone()));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, StoreError> {
        let mut query: Option<String> = None;
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("#query") {
                let code = rest.trim();
                if code.is_empty() {
                    return Err(StoreError::Manifest {
                        line: line_no,
                        reason: "#query without a language code".into(),
                    });
                }
                if query.replace(code.to_string()).is_some() {
                    return Err(StoreError::Manifest {
                        line: line_no,
                        reason: "second #query line".into(),
                    });
                }
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            if query.is_none() {
                return Err(StoreError::Manifest {
                    line: line_no,
                    reason: "first line must be `#query <language-code>`".into(),
                });
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let (language, path, count) = match fields.as_slice() {
                [l, p] => (*l, *p, None),
                [l, p, c] => {
                    let n = c.trim().parse::<usize>().map_err(|_| StoreError::Manifest {
                        line: line_no,
                        reason: format!("bad utterance count {c:?}"),
                    })?;
                    (*l, *p, Some(n))
                }
                _ => {
                    return Err(StoreError::Manifest {
                        line: line_no,
                        reason: "expected `<code>\\t<path>` (optionally `\\t<count>`)".into(),
                    })
                }
            };
            if language.trim().is_empty() || path.trim().is_empty() {
                return Err(StoreError::Manifest {
                    line: line_no,
                    reason: "empty language code or path".into(),
                });
            }
            entries.push(ManifestEntry {
                language: language.trim().to_string(),
                path: PathBuf::from(path.trim()),
                utterance_count: count,
            });
        }
        let query = query.ok_or(StoreError::Manifest {
            line: 1,
            reason: "missing `#query <language-code>` line".into(),
        })?;
        Self::new(query, entries)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("#query {}\n", self.query_language);
        for e in &self.entries {
            out.push_str(&e.language);
            out.push('\t');
            // Manifests are written with forward slashes on every platform.
            out.push_str(&e.path.to_string_lossy().replace('\\', "/"));
            if let Some(n) = e.utterance_count {
                out.push('\t');
                out.push_str(&n.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn entry(&self, language: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.language == language)
    }

    /// Target languages in manifest order (everything but the query).
    pub fn targets(&self) -> impl Iterator<Item = &ManifestEntry> + '_ {
        self.entries.iter().filter(move |e| e.language != self.query_language)
    }
}

pub fn load_manifest(path: &Path) -> Result<LanguageManifest, StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    LanguageManifest::parse(&text)
}

pub fn save_manifest(manifest: &LanguageManifest, path: &Path) -> Result<(), StoreError> {
    write_bytes(path, manifest.to_text().as_bytes())
}

/// Loads one language's embeddings, resolving its path against `base_dir` and
/// labelling the set with the manifest's code.
pub fn load_manifest_language(
    manifest: &LanguageManifest,
    base_dir: &Path,
    language: &str,
) -> Result<EmbeddingSet<f32>, StoreError> {
    let entry = manifest
        .entry(language)
        .ok_or_else(|| StoreError::UnknownLanguage(language.to_string()))?;
    let path = base_dir.join(&entry.path);
    Ok(load_embeddings(&path)?.with_language(language))
}
