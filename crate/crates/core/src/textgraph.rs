//! Heterogeneous document-word graph.
//!
//! Node layout: documents take indices `0..n_doc`, words take
//! `n_doc..n_doc + n_word`. Document-word edges carry TF-IDF weights,
//! word-word edges carry PPMI over sliding windows, every node has a unit
//! self-loop, and document-document pairs are unconnected.
//!
//! Weights:
//!
//! ```text
//! tfidf(d, w) = count(w in d) * ln(n_doc / df(w))        (kept when > 0)
//! pmi(i, j)   = ln( #W(i,j) * #W / (#W(i) * #W(j)) )      (kept when > 0, i != j)
//! Ã           = D^-1/2 A D^-1/2,   D = diag(row sums of A)
//! ```
//!
//! Windows never straddle documents. A document shorter than the window
//! contributes exactly one window.

use std::collections::BTreeMap;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Vocabulary};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

pub const DEFAULT_WINDOW_SIZE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphConfig {
    pub window_size: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            window_size: DEFAULT_WINDOW_SIZE,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_size < 2 {
            return Err(Error::Config(format!(
                "window_size must be at least 2, got {}",
                self.window_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfIdfEdge {
    pub doc: usize,
    pub word: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpmiEdge {
    /// Always `a < b`.
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// TF-IDF weight for every (document, word) pair with a positive weight,
/// sorted by document then word id.
pub fn compute_tf_idf(corpus: &Corpus, vocab: &Vocabulary) -> Vec<TfIdfEdge> {
    let n_doc = corpus.n_docs() as f64;
    corpus
        .documents()
        .par_iter()
        .map(|doc| {
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for w in doc.tokens.iter().filter_map(|t| vocab.id(t)) {
                *counts.entry(w).or_default() += 1;
            }
            counts
                .into_iter()
                .filter_map(|(word, tf)| {
                    let idf = (n_doc / vocab.document_frequency(word) as f64).ln();
                    let weight = tf as f64 * idf;
                    (weight > 0.0).then_some(TfIdfEdge {
                        doc: doc.id,
                        word,
                        weight,
                    })
                })
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect()
}

#[derive(Default)]
struct WindowCounts {
    windows: u64,
    single: BTreeMap<usize, u64>,
    pairs: BTreeMap<(usize, usize), u64>,
}

impl WindowCounts {
    fn merge(mut self, other: WindowCounts) -> WindowCounts {
        self.windows += other.windows;
        for (k, v) in other.single {
            *self.single.entry(k).or_default() += v;
        }
        for (k, v) in other.pairs {
            *self.pairs.entry(k).or_default() += v;
        }
        self
    }
}

fn count_document(ids: &[Option<usize>], window: usize) -> WindowCounts {
    let mut counts = WindowCounts::default();
    let n_windows = if ids.len() <= window {
        1
    } else {
        ids.len() - window + 1
    };
    let mut present = Vec::with_capacity(window);
    for start in 0..n_windows {
        let end = (start + window).min(ids.len());
        present.clear();
        present.extend(ids[start..end].iter().flatten().copied());
        present.sort_unstable();
        present.dedup();
        counts.windows += 1;
        for (k, &i) in present.iter().enumerate() {
            *counts.single.entry(i).or_default() += 1;
            for &j in &present[k + 1..] {
                *counts.pairs.entry((i, j)).or_default() += 1;
            }
        }
    }
    counts
}

/// Positive PMI between distinct vocabulary words, one edge per unordered
/// pair, sorted by `(a, b)`.
pub fn compute_ppmi(
    corpus: &Corpus,
    vocab: &Vocabulary,
    config: &GraphConfig,
) -> Result<Vec<PpmiEdge>> {
    config.validate()?;
    let counts = corpus
        .documents()
        .par_iter()
        .map(|doc| {
            let ids: Vec<Option<usize>> = doc.tokens.iter().map(|t| vocab.id(t)).collect();
            count_document(&ids, config.window_size)
        })
        .reduce(WindowCounts::default, WindowCounts::merge);

    let total = counts.windows as f64;
    Ok(counts
        .pairs
        .iter()
        .filter_map(|(&(a, b), &joint)| {
            let pmi = ((joint as f64 * total)
                / (counts.single[&a] as f64 * counts.single[&b] as f64))
                .ln();
            (pmi > 0.0).then_some(PpmiEdge { a, b, weight: pmi })
        })
        .collect())
}

/// Raw symmetric adjacency with unit diagonal.
pub fn build_adjacency(
    tfidf: &[TfIdfEdge],
    ppmi: &[PpmiEdge],
    n_doc: usize,
    n_word: usize,
) -> Result<SparseMatrix> {
    let n = n_doc + n_word;
    let mut triplets = Vec::with_capacity(n + 2 * (tfidf.len() + ppmi.len()));
    triplets.extend((0..n).map(|i| (i, i, 1.0)));

    let check = |row: usize, col: usize, weight: f64| {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidWeight { row, col, weight });
        }
        Ok(())
    };
    for e in tfidf {
        if e.doc >= n_doc {
            return Err(Error::IndexOutOfRange {
                what: "document",
                index: e.doc,
                limit: n_doc,
            });
        }
        if e.word >= n_word {
            return Err(Error::IndexOutOfRange {
                what: "word",
                index: e.word,
                limit: n_word,
            });
        }
        let w = n_doc + e.word;
        check(e.doc, w, e.weight)?;
        triplets.push((e.doc, w, e.weight));
        triplets.push((w, e.doc, e.weight));
    }
    for e in ppmi {
        for idx in [e.a, e.b] {
            if idx >= n_word {
                return Err(Error::IndexOutOfRange {
                    what: "word",
                    index: idx,
                    limit: n_word,
                });
            }
        }
        let (a, b) = (n_doc + e.a, n_doc + e.b);
        check(a, b, e.weight)?;
        triplets.push((a, b, e.weight));
        triplets.push((b, a, e.weight));
    }
    SparseMatrix::from_triplets(n, n, triplets)
}

/// `Ã_ij = A_ij / sqrt(d_i * d_j)` with `d` the row sums of `A`.
pub fn normalize_adjacency(a: &SparseMatrix) -> Result<SparseMatrix> {
    if a.n_rows() != a.n_cols() {
        return Err(Error::DimensionMismatch {
            context: "adjacency normalization",
            expected: "square matrix".into(),
            found: format!("{}x{}", a.n_rows(), a.n_cols()),
        });
    }
    let degrees = a.row_sums();
    if let Some((row, &degree)) = degrees
        .iter()
        .enumerate()
        .find(|(_, &d)| !(d > 0.0 && d.is_finite()))
    {
        return Err(Error::NonPositiveDegree { row, degree });
    }
    Ok(a.map_values(|r, c, v| v / (degrees[r] * degrees[c]).sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextGraph {
    pub n_doc: usize,
    pub n_word: usize,
    pub window_size: usize,
    pub adjacency: SparseMatrix,
    pub normalized: SparseMatrix,
}

impl TextGraph {
    pub fn from_adjacency(
        n_doc: usize,
        n_word: usize,
        window_size: usize,
        adjacency: SparseMatrix,
    ) -> Result<Self> {
        let normalized = normalize_adjacency(&adjacency)?;
        Ok(TextGraph {
            n_doc,
            n_word,
            window_size,
            adjacency,
            normalized,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_doc + self.n_word
    }

    pub fn word_node(&self, word: usize) -> usize {
        self.n_doc + word
    }
}

pub fn build_text_graph(
    corpus: &Corpus,
    vocab: &Vocabulary,
    config: &GraphConfig,
) -> Result<TextGraph> {
    let tfidf = compute_tf_idf(corpus, vocab);
    let ppmi = compute_ppmi(corpus, vocab, config)?;
    let adjacency = build_adjacency(&tfidf, &ppmi, corpus.n_docs(), vocab.len())?;
    TextGraph::from_adjacency(corpus.n_docs(), vocab.len(), config.window_size, adjacency)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphHeader {
    pub n_doc: usize,
    pub n_word: usize,
    pub window_size: usize,
}

/// Writes the normalized graph as `src<TAB>dst<TAB>weight` lines plus a JSON
/// header next to it.
pub fn export_graph(graph: &TextGraph, edges_path: &Path, header_path: &Path) -> Result<()> {
    let file = std::fs::File::create(edges_path).map_err(|e| Error::io(edges_path, e))?;
    let mut out = BufWriter::new(file);
    for (r, c, v) in graph.normalized.iter() {
        writeln!(out, "{r}\t{c}\t{v}").map_err(|e| Error::io(edges_path, e))?;
    }
    out.flush().map_err(|e| Error::io(edges_path, e))?;

    let header = GraphHeader {
        n_doc: graph.n_doc,
        n_word: graph.n_word,
        window_size: graph.window_size,
    };
    let json = serde_json::to_string_pretty(&header).expect("header serializes");
    std::fs::write(header_path, json + "\n").map_err(|e| Error::io(header_path, e))
}

/// Reads back an exported graph: the header and the normalized matrix.
pub fn import_graph(edges_path: &Path, header_path: &Path) -> Result<(GraphHeader, SparseMatrix)> {
    let text = std::fs::read_to_string(header_path).map_err(|e| Error::io(header_path, e))?;
    let header: GraphHeader = serde_json::from_str(&text).map_err(|e| Error::MalformedHeader {
        path: header_path.to_path_buf(),
        message: e.to_string(),
    })?;
    let n = header.n_doc + header.n_word;

    let file = std::fs::File::open(edges_path).map_err(|e| Error::io(edges_path, e))?;
    let mut triplets = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(edges_path, e))?;
        let bad = |message: &str| Error::MalformedRecord {
            path: edges_path.to_path_buf(),
            line: idx + 1,
            message: message.to_owned(),
        };
        let mut fields = line.split('\t');
        let (Some(r), Some(c), Some(v), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(bad("expected 3 tab-separated fields"));
        };
        let r: usize = r.parse().map_err(|_| bad("bad source index"))?;
        let c: usize = c.parse().map_err(|_| bad("bad target index"))?;
        let v: f64 = v.parse().map_err(|_| bad("bad weight"))?;
        triplets.push((r, c, v));
    }
    Ok((header, SparseMatrix::from_triplets(n, n, triplets)?))
}
