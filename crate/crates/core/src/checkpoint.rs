//! Parameter checkpoints.
//!
//! ```text
//! b"VGC1" | header_len: u64 LE | JSON header | f64 LE payload
//! ```
//!
//! The payload holds W1, W2, W_aux and the trainable document rows, each
//! row-major, skipping tensors the architecture does not have.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Architecture, AuxHeadParams, GcnParams, ModelParams};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"VGC1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub architecture: String,
    pub lambda: Option<f64>,
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub n_classes: usize,
    pub n_doc: usize,
    pub has_x_doc: bool,
    pub seed: u64,
    pub epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub arch: Architecture,
    pub params: ModelParams,
    pub seed: u64,
    /// Number of completed epochs when the parameters were captured.
    pub epoch: usize,
}

impl Checkpoint {
    pub fn header(&self, feature_dim: usize, n_doc: usize) -> CheckpointHeader {
        let p = &self.params;
        CheckpointHeader {
            architecture: self.arch.name().to_owned(),
            lambda: match self.arch {
                Architecture::Fused { lambda } => Some(lambda),
                Architecture::GcnOnly => Some(1.0),
                Architecture::AuxOnly => Some(0.0),
            },
            feature_dim,
            hidden_dim: p.gcn.as_ref().map_or(0, GcnParams::hidden_dim),
            n_classes: p.n_classes(),
            n_doc,
            has_x_doc: p.x_doc.is_some(),
            seed: self.seed,
            epoch: self.epoch,
        }
    }

    pub fn write(&self, path: &Path, feature_dim: usize, n_doc: usize) -> Result<()> {
        let header =
            serde_json::to_vec(&self.header(feature_dim, n_doc)).expect("header serializes");
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
        buf.extend_from_slice(&header);
        let p = &self.params;
        let tensors = [
            p.gcn.as_ref().map(|g| &g.w1),
            p.gcn.as_ref().map(|g| &g.w2),
            p.aux.as_ref().map(|a| &a.w_aux),
            p.x_doc.as_ref(),
        ];
        for t in tensors.into_iter().flatten() {
            for v in t.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<(CheckpointHeader, Checkpoint)> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let truncated = |expected: usize| Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        };
        let malformed = |message: String| Error::MalformedHeader {
            path: path.to_path_buf(),
            message,
        };
        if bytes.len() < 12 {
            return Err(truncated(12));
        }
        if &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
                expected: "VGC1",
            });
        }
        let header_len = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
        let payload_start = 12usize
            .checked_add(header_len)
            .ok_or_else(|| malformed("header length overflows".into()))?;
        if bytes.len() < payload_start {
            return Err(truncated(payload_start));
        }
        let header: CheckpointHeader = serde_json::from_slice(&bytes[12..payload_start])
            .map_err(|e| malformed(e.to_string()))?;

        let arch = match header.architecture.as_str() {
            "fused" => {
                let lambda = header
                    .lambda
                    .ok_or_else(|| malformed("fused checkpoint without lambda".into()))?;
                Architecture::fused(lambda)?
            }
            "gcn" => Architecture::GcnOnly,
            "aux" => Architecture::AuxOnly,
            other => return Err(malformed(format!("unknown architecture {other:?}"))),
        };
        let (d, h, c) = (header.feature_dim, header.hidden_dim, header.n_classes);
        let mut shapes = Vec::new();
        if arch.has_gcn() {
            shapes.extend([(d, h), (h, c)]);
        }
        if arch.has_aux() {
            shapes.push((d, c));
        }
        if header.has_x_doc {
            shapes.push((header.n_doc, d));
        }
        let expected = payload_start + 8 * shapes.iter().map(|(r, c)| r * c).sum::<usize>();
        if bytes.len() < expected {
            return Err(truncated(expected));
        }
        if bytes.len() > expected {
            return Err(malformed(format!(
                "{} trailing bytes",
                bytes.len() - expected
            )));
        }

        let mut values = bytes[payload_start..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut tensors = shapes.into_iter().map(|shape| {
            let data: Vec<f64> = values.by_ref().take(shape.0 * shape.1).collect();
            Array2::from_shape_vec(shape, data).expect("length checked")
        });
        let gcn = arch.has_gcn().then(|| GcnParams {
            w1: tensors.next().unwrap(),
            w2: tensors.next().unwrap(),
        });
        let aux = arch.has_aux().then(|| AuxHeadParams {
            w_aux: tensors.next().unwrap(),
        });
        let x_doc = header.has_x_doc.then(|| tensors.next().unwrap());
        let checkpoint = Checkpoint {
            arch,
            params: ModelParams { gcn, aux, x_doc },
            seed: header.seed,
            epoch: header.epoch,
        };
        Ok((header, checkpoint))
    }
}
