//! Fixed-dimension text vectors.
//!
//! The built-in embedder is TF-IDF followed by a seeded sparse random
//! projection (Achlioptas-style entries in {-1, 0, +1} with probabilities
//! 1/6, 2/3, 1/6). Externally computed embeddings can be loaded from the
//! `EMBD` binary format instead.
//!
//! `EMBD` layout (all little-endian):
//!
//! | bytes  | content                          |
//! |--------|----------------------------------|
//! | 0..4   | ASCII `EMBD`                     |
//! | 4..8   | `u32` row count                  |
//! | 8..12  | `u32` column count               |
//! | 12..16 | reserved, written as zero        |
//! | 16..   | `rows * cols` `f32`, row-major   |

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DatasetTable;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EMBD";
pub const HEADER_LEN: usize = 16;
pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_MIN_DF: usize = 5;

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermStats {
    pub index: usize,
    pub document_frequency: usize,
}

/// Terms with document frequency at least `min_df`. Indices follow the
/// lexicographic order of the terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: BTreeMap<String, TermStats>,
    n_docs: usize,
    min_df: usize,
}

impl Vocabulary {
    pub fn build<S: AsRef<str>>(docs: &[Vec<S>], min_df: usize) -> Vocabulary {
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in docs {
            let mut seen: Vec<&str> = doc.iter().map(|t| t.as_ref()).collect();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_default() += 1;
            }
        }
        let terms = df
            .into_iter()
            .filter(|&(_, n)| n >= min_df)
            .enumerate()
            .map(|(index, (t, n))| {
                (
                    t.to_string(),
                    TermStats {
                        index,
                        document_frequency: n,
                    },
                )
            })
            .collect();
        Vocabulary {
            terms,
            n_docs: docs.len(),
            min_df,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn min_df(&self) -> usize {
        self.min_df
    }

    pub fn get(&self, term: &str) -> Option<TermStats> {
        self.terms.get(term).copied()
    }

    /// `ln(n_docs / (1 + df)) + 1`
    pub fn idf(&self, stats: TermStats) -> f64 {
        (self.n_docs as f64 / (1.0 + stats.document_frequency as f64)).ln() + 1.0
    }

    /// Sparse TF-IDF vector (raw term counts times idf), sorted by index.
    pub fn tfidf<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<(usize, f64)> {
        let mut counts: BTreeMap<usize, (TermStats, usize)> = BTreeMap::new();
        for t in tokens {
            if let Some(stats) = self.get(t.as_ref()) {
                counts.entry(stats.index).or_insert((stats, 0)).1 += 1;
            }
        }
        counts
            .into_values()
            .map(|(stats, tf)| (stats.index, tf as f64 * self.idf(stats)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingSource {
    Builtin,
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    n_rows: usize,
    dim: usize,
    data: Vec<f32>,
    source: EmbeddingSource,
    seed: Option<u64>,
}

impl EmbeddingMatrix {
    pub fn new(n_rows: usize, dim: usize, data: Vec<f32>, source: EmbeddingSource) -> Result<Self> {
        if data.len() != n_rows * dim {
            return Err(Error::Format(format!(
                "{} values cannot form a {n_rows}x{dim} matrix",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!(
                "non-finite embedding value at row {}",
                i / dim.max(1)
            )));
        }
        Ok(EmbeddingMatrix {
            n_rows,
            dim,
            data,
            source,
            seed: None,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn source(&self) -> EmbeddingSource {
        self.source
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.n_rows)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let rows = u32::try_from(self.n_rows).map_err(|_| Error::Format("row count exceeds u32".into()))?;
        let cols = u32::try_from(self.dim).map_err(|_| Error::Format("column count exceeds u32".into()))?;
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&rows.to_le_bytes());
        out.extend_from_slice(&cols.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], expected_rows: usize) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!("truncated header: {} bytes", bytes.len())));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::Format("bad magic, expected `EMBD`".into()));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        let (rows, cols) = (word(4), word(8));
        if rows != expected_rows {
            return Err(Error::Format(format!(
                "file has {rows} rows, dataset has {expected_rows}"
            )));
        }
        let payload = &bytes[HEADER_LEN..];
        let expected = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Format("matrix size overflows".into()))?;
        if payload.len() != expected {
            return Err(Error::Format(format!(
                "payload is {} bytes, expected {expected}",
                payload.len()
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        EmbeddingMatrix::new(rows, cols, data, EmbeddingSource::External)
    }
}

pub fn save_embeddings(matrix: &EmbeddingMatrix, path: &Path) -> Result<()> {
    fs::write(path, matrix.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_embeddings(path: &Path, expected_rows: usize) -> Result<EmbeddingMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingMatrix::from_bytes(&bytes, expected_rows)
}

/// Sparse random projection matrix, one `dim`-long row of {-1, 0, +1} per
/// vocabulary index, drawn in index order from a seeded stream.
fn projection(vocab_len: usize, dim: usize, seed: u64) -> Vec<i8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..vocab_len * dim)
        .map(|_| match rng.random_range(0..6u8) {
            0 => -1,
            5 => 1,
            _ => 0,
        })
        .collect()
}

/// Rounds a unit vector to `f32` while keeping its norm (evaluated in `f64`)
/// at 1 to within ~1e-12: each component, largest first, is re-solved so that
/// the squared norm absorbs the rounding error of the components before it.
fn round_unit_f32(v: &[f64]) -> Vec<f32> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return vec![0.0; v.len()];
    }
    let mut out: Vec<f32> = v.iter().map(|x| (x / norm) as f32).collect();
    let mut order: Vec<usize> = (0..out.len()).filter(|&i| out[i] != 0.0).collect();
    order.sort_by(|&a, &b| out[b].abs().total_cmp(&out[a].abs()).then(a.cmp(&b)));
    let sq = |o: &[f32]| o.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>();
    for &i in &order {
        let err = 1.0 - sq(&out);
        if err.abs() < 1e-13 {
            break;
        }
        let x = out[i] as f64;
        let target = x * x + err;
        if target > 0.0 {
            out[i] = (target.sqrt().copysign(x)) as f32;
        }
    }
    out
}

/// Embeds raw texts (row order is preserved).
pub fn embed_texts<S: AsRef<str> + Sync>(texts: &[S], dim: usize, seed: u64, min_df: usize) -> Result<EmbeddingMatrix> {
    if dim < 2 {
        return Err(Error::Config(format!("embedding dim must be >= 2, got {dim}")));
    }
    if min_df < 1 {
        return Err(Error::Config("min_df must be >= 1".into()));
    }
    let docs: Vec<Vec<String>> = texts.par_iter().map(|t| tokenize(t.as_ref())).collect();
    let vocab = Vocabulary::build(&docs, min_df);
    let proj = projection(vocab.len(), dim, seed);
    let scale = (3.0 / dim as f64).sqrt();

    let rows: Vec<Vec<f32>> = docs
        .par_iter()
        .map(|doc| {
            let mut y = vec![0.0f64; dim];
            for (idx, w) in vocab.tfidf(doc) {
                let r = &proj[idx * dim..(idx + 1) * dim];
                for (yj, &s) in y.iter_mut().zip(r) {
                    if s != 0 {
                        *yj += w * scale * s as f64;
                    }
                }
            }
            round_unit_f32(&y)
        })
        .collect();

    let mut m = EmbeddingMatrix::new(
        texts.len(),
        dim,
        rows.into_iter().flatten().collect(),
        EmbeddingSource::Builtin,
    )?;
    m.seed = Some(seed);
    Ok(m)
}

/// Embeds the table's texts in row (id) order.
pub fn embed_corpus(table: &DatasetTable, dim: usize, seed: u64, min_df: usize) -> Result<EmbeddingMatrix> {
    embed_texts(table.texts(), dim, seed, min_df)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Hello, World!"), vec!["hello", "world"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("state-of-the-art AI"), vec!["state", "of", "the", "art", "ai"]);
    }

    #[test]
    fn vocabulary_is_sorted_and_filtered() {
        let docs = vec![tokenize("b a c"), tokenize("a b"), tokenize("a")];
        let v = Vocabulary::build(&docs, 2);
        assert_eq!(v.len(), 2);
        assert_eq!(v.get("a").unwrap().index, 0);
        assert_eq!(v.get("a").unwrap().document_frequency, 3);
        assert_eq!(v.get("b").unwrap().index, 1);
        assert!(v.get("c").is_none());
    }

    #[test]
    fn config_errors() {
        assert!(matches!(embed_texts(&["a"], 1, 0, 1), Err(Error::Config(_))));
        assert!(matches!(embed_texts(&["a"], 4, 0, 0), Err(Error::Config(_))));
    }

    #[test]
    fn empty_text_is_zero_row() {
        let m = embed_texts(&[""], 8, 1, 1).unwrap();
        assert_eq!(m.n_rows(), 1);
        assert!(m.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_texts_identical_rows() {
        let m = embed_texts(&["the cat sat", "a dog ran", "the cat sat"], 16, 3, 1).unwrap();
        assert_eq!(m.row(0), m.row(2));
        assert_ne!(m.row(0), m.row(1));
    }

    #[test]
    fn rounded_rows_have_unit_norm() {
        let texts: Vec<String> = (0..50)
            .map(|i| format!("word{} word{} shared token{}", i % 7, i % 11, i % 3))
            .collect();
        let m = embed_texts(&texts, 64, 9, 1).unwrap();
        for r in m.rows() {
            let n = r.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() <= 1e-9, "norm {n}");
        }
    }

    #[test]
    fn header_layout() {
        let m = EmbeddingMatrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], EmbeddingSource::External).unwrap();
        let b = m.to_bytes().unwrap();
        assert_eq!(b.len(), 16 + 24);
        assert_eq!(&b[0..4], b"EMBD");
        assert_eq!(&b[4..8], &2u32.to_le_bytes());
        assert_eq!(&b[8..12], &3u32.to_le_bytes());
        assert_eq!(&b[12..16], &[0, 0, 0, 0]);
        assert_eq!(&b[16..20], &1.0f32.to_le_bytes());
        let back = EmbeddingMatrix::from_bytes(&b, 2).unwrap();
        assert_eq!(back.data(), m.data());
    }

    #[test]
    fn empty_matrix_is_header_only() {
        let m = EmbeddingMatrix::new(0, 5, vec![], EmbeddingSource::Builtin).unwrap();
        let b = m.to_bytes().unwrap();
        assert_eq!(b.len(), 16);
        assert_eq!(EmbeddingMatrix::from_bytes(&b, 0).unwrap().dim(), 5);
    }

    #[test]
    fn format_errors() {
        let m = EmbeddingMatrix::new(5, 2, vec![0.5; 10], EmbeddingSource::External).unwrap();
        let b = m.to_bytes().unwrap();
        assert!(matches!(EmbeddingMatrix::from_bytes(&b, 4), Err(Error::Format(_))));
        assert!(matches!(
            EmbeddingMatrix::from_bytes(&b[..b.len() - 1], 5),
            Err(Error::Format(_))
        ));
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(EmbeddingMatrix::from_bytes(&bad, 5), Err(Error::Format(_))));
        assert!(matches!(
            EmbeddingMatrix::from_bytes(&b[..10], 5),
            Err(Error::Format(_))
        ));
    }
}
