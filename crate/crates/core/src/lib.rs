//! Transductive text classification over a heterogeneous document-word
//! graph.
//!
//! A corpus becomes one graph whose nodes are documents and vocabulary
//! words (TF-IDF document-word edges, PPMI word-word edges). A two-layer GCN
//! runs over that graph, a linear head runs on externally supplied document
//! embeddings, and the two class distributions are interpolated with a
//! weight λ. Test documents take part in propagation but never in the loss.

pub mod checkpoint;
pub mod corpus;
pub mod error;
pub mod features;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod sparse;
pub mod synthetic;
pub mod textgraph;
pub mod training;

pub use checkpoint::Checkpoint;
pub use corpus::{Corpus, Document, LabelSet, PreprocessConfig, Split, Vocabulary};
pub use error::{Error, Result};
pub use features::{EmbeddingMatrix, NodeFeatures};
pub use metrics::{ConfusionMatrix, MetricsReport};
pub use model::{Architecture, ModelParams};
pub use sparse::SparseMatrix;
pub use textgraph::{GraphConfig, TextGraph};
pub use training::{TrainConfig, TrainHistory};
