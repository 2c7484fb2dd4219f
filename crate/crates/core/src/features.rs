//! Node features: document embeddings stacked over a zero block for words.
//!
//! Embedding file layout (all little-endian):
//!
//! ```text
//! b"VGE1" | n_doc: u64 | dim: u64 | n_doc * dim f32, row-major
//! ```
//!
//! with a sidecar `<path>.ids.json` holding the document id of each row.

use std::path::{Path, PathBuf};

use ndarray::{s, Array2};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"VGE1";
const HEADER_LEN: usize = 4 + 8 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub values: Array2<f64>,
    pub doc_order: Vec<usize>,
}

impl EmbeddingMatrix {
    pub fn new(values: Array2<f64>) -> Self {
        let doc_order = (0..values.nrows()).collect();
        EmbeddingMatrix { values, doc_order }
    }

    pub fn n_doc(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".ids.json");
    PathBuf::from(s)
}

/// Writes values narrowed to `f32`, plus the id sidecar.
pub fn write_embedding_file(path: &Path, emb: &EmbeddingMatrix) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN + emb.values.len() * 4);
    buf.extend_from_slice(EMBEDDING_MAGIC);
    buf.extend_from_slice(&(emb.n_doc() as u64).to_le_bytes());
    buf.extend_from_slice(&(emb.dim() as u64).to_le_bytes());
    for &v in emb.values.iter() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    let ids = sidecar_path(path);
    let json = serde_json::to_string(&emb.doc_order).expect("ids serialize");
    std::fs::write(&ids, json).map_err(|e| Error::io(&ids, e))
}

/// Parses an embedding file and its sidecar without checking them against a
/// corpus.
pub fn read_embedding_file(path: &Path) -> Result<EmbeddingMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && &bytes[..4] != EMBEDDING_MAGIC {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
                expected: "VGE1",
            });
        }
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if &bytes[..4] != EMBEDDING_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: "VGE1",
        });
    }
    let read_u64 = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let (rows, dim) = (read_u64(4) as usize, read_u64(12) as usize);
    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::MalformedHeader {
            path: path.to_path_buf(),
            message: format!("shape {rows}x{dim} overflows"),
        })?;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            message: format!("{} trailing bytes", bytes.len() - expected),
        });
    }

    let data: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let values = Array2::from_shape_vec((rows, dim), data).expect("length checked");

    let ids_path = sidecar_path(path);
    let ids_text = std::fs::read_to_string(&ids_path).map_err(|e| Error::io(&ids_path, e))?;
    let doc_order: Vec<usize> =
        serde_json::from_str(&ids_text).map_err(|e| Error::MalformedHeader {
            path: ids_path.clone(),
            message: e.to_string(),
        })?;
    Ok(EmbeddingMatrix { values, doc_order })
}

/// Reads an embedding file and checks it row-for-row against the corpus.
pub fn load_embedding_file(path: &Path, corpus: &Corpus) -> Result<EmbeddingMatrix> {
    let emb = read_embedding_file(path)?;
    if emb.n_doc() != corpus.n_docs() {
        return Err(Error::RowCountMismatch {
            path: path.to_path_buf(),
            expected: corpus.n_docs(),
            found: emb.n_doc(),
        });
    }
    if emb.doc_order.len() != emb.n_doc() {
        return Err(Error::RowCountMismatch {
            path: sidecar_path(path),
            expected: emb.n_doc(),
            found: emb.doc_order.len(),
        });
    }
    if let Some((row, &found)) = emb
        .doc_order
        .iter()
        .enumerate()
        .find(|&(row, &id)| id != row)
    {
        return Err(Error::OrderMismatch {
            path: sidecar_path(path),
            row,
            expected: row,
            found,
        });
    }
    if let Some(((row, col), _)) = emb.values.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFiniteValue {
            path: path.to_path_buf(),
            row,
            col,
        });
    }
    Ok(emb)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    /// `(n_doc + n_word) x d`.
    pub matrix: Array2<f64>,
    pub n_doc: usize,
    /// Whether document rows are optimized alongside the weights.
    pub trainable: bool,
}

impl NodeFeatures {
    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn n_nodes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn doc_rows(&self) -> ndarray::ArrayView2<'_, f64> {
        self.matrix.slice(s![..self.n_doc, ..])
    }
}

/// `X = [X_doc; 0]`.
pub fn assemble_node_features(
    emb: &EmbeddingMatrix,
    n_word: usize,
    trainable: bool,
) -> NodeFeatures {
    let mut matrix = Array2::zeros((emb.n_doc() + n_word, emb.dim()));
    matrix.slice_mut(s![..emb.n_doc(), ..]).assign(&emb.values);
    NodeFeatures {
        matrix,
        n_doc: emb.n_doc(),
        trainable,
    }
}

/// One-hot features for every node; used when no embeddings are available.
pub fn identity_features(n_doc: usize, n_word: usize) -> NodeFeatures {
    NodeFeatures {
        matrix: Array2::eye(n_doc + n_word),
        n_doc,
        trainable: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabelSet, Split};
    use ndarray::Axis;

    fn corpus(n: usize) -> Corpus {
        Corpus::from_tokens(
            (0..n).map(|i| (vec![format!("w{i}")], Some(0), Split::Train)),
            LabelSet::new(["a", "b"]).unwrap(),
        )
        .unwrap()
    }

    fn sample(rows: usize, dim: usize) -> EmbeddingMatrix {
        EmbeddingMatrix::new(Array2::from_shape_fn((rows, dim), |(r, c)| {
            (r * dim + c) as f64 * 0.25 - 1.0
        }))
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.vge");
        let emb = sample(3, 4);
        write_embedding_file(&p, &emb).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"VGE1");
        assert_eq!(bytes.len(), 20 + 12 * 4);
        let back = load_embedding_file(&p, &corpus(3)).unwrap();
        assert_eq!(back, emb);
    }

    #[test]
    fn row_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.vge");
        write_embedding_file(&p, &sample(2, 4)).unwrap();
        let err = load_embedding_file(&p, &corpus(3)).unwrap_err();
        assert!(err.to_string().contains("row count mismatch"), "{err}");
    }

    #[test]
    fn order_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.vge");
        let mut emb = sample(3, 4);
        emb.doc_order = vec![0, 2, 1];
        write_embedding_file(&p, &emb).unwrap();
        let err = load_embedding_file(&p, &corpus(3)).unwrap_err();
        assert!(err.to_string().contains("order mismatch"), "{err}");
    }

    #[test]
    fn truncated_and_non_finite() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.vge");
        write_embedding_file(&p, &sample(3, 4)).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(
            load_embedding_file(&p, &corpus(3)),
            Err(Error::Truncated { .. })
        ));

        let mut emb = sample(3, 4);
        emb.values[[1, 2]] = f64::NAN;
        write_embedding_file(&p, &emb).unwrap();
        assert!(matches!(
            load_embedding_file(&p, &corpus(3)),
            Err(Error::NonFiniteValue { row: 1, col: 2, .. })
        ));
    }

    #[test]
    fn bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.vge");
        std::fs::write(&p, b"XXXX0000000000000000").unwrap();
        assert!(matches!(
            read_embedding_file(&p),
            Err(Error::BadMagic { .. })
        ));
    }

    #[test]
    fn stacking_zero_block() {
        let emb = sample(3, 4);
        let x = assemble_node_features(&emb, 3, false);
        assert_eq!(x.matrix.dim(), (6, 4));
        assert_eq!(x.matrix.row(0), emb.values.row(0));
        assert!(x.matrix.slice(s![3.., ..]).iter().all(|&v| v == 0.0));
        let x = assemble_node_features(&emb, 0, true);
        assert_eq!(x.matrix, emb.values);
        assert!(x.trainable);
    }

    #[test]
    fn identity_fallback() {
        let x = identity_features(2, 1);
        assert_eq!(x.matrix, Array2::<f64>::eye(3));
        assert!(x.matrix.sum_axis(Axis(1)).iter().all(|&s| s == 1.0));
        assert!(!x.trainable);
    }
}
