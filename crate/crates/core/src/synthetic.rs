//! Seeded toy corpora with known class structure.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, LabelSet, Split};
use crate::features::EmbeddingMatrix;

/// Per-class document counts for each split.
#[derive(Debug, Clone, Copy)]
pub struct SplitSizes {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl SplitSizes {
    fn total(self) -> usize {
        self.train + self.dev + self.test
    }

    fn split_of(self, k: usize) -> Split {
        if k < self.train {
            Split::Train
        } else if k < self.train + self.dev {
            Split::Dev
        } else {
            Split::Test
        }
    }
}

fn draw_doc(rng: &mut ChaCha8Rng, words: &[String], len: usize) -> Vec<String> {
    (0..len)
        .map(|_| words[rng.random_range(0..words.len())].clone())
        .collect()
}

fn vocab(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Assembles documents class by class, then interleaves them so that the
/// classes alternate in corpus order.
fn interleave(
    per_class: Vec<Vec<(Vec<String>, usize, Split)>>,
) -> Vec<(Vec<String>, Option<usize>, Split)> {
    let longest = per_class.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::new();
    for k in 0..longest {
        for docs in &per_class {
            if let Some((tokens, label, split)) = docs.get(k) {
                out.push((tokens.clone(), Some(*label), *split));
            }
        }
    }
    out
}

/// Two classes with disjoint vocabularies: 20/5/5 documents per class, so
/// 40 train, 10 dev and 10 test overall. All documents carry labels.
pub fn separable_corpus(seed: u64) -> Corpus {
    let sizes = SplitSizes {
        train: 20,
        dev: 5,
        test: 5,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocabs = [vocab("alpha", 12), vocab("beta", 12)];
    let per_class = vocabs
        .iter()
        .enumerate()
        .map(|(label, words)| {
            (0..sizes.total())
                .map(|k| (draw_doc(&mut rng, words, 8), label, sizes.split_of(k)))
                .collect()
        })
        .collect();
    Corpus::from_tokens(
        interleave(per_class),
        LabelSet::new(["first", "second"]).expect("two labels"),
    )
    .expect("generated corpus is valid")
}

/// Four classes where each signal source separates only half of them.
///
/// Classes 0 and 1 have disjoint vocabularies but identically distributed
/// embeddings. Classes 2 and 3 draw words from one shared vocabulary and
/// differ only in the sign of embedding dimension 0. Embedding dimension 1
/// is a constant 1 (the linear head has no bias); the remaining dimensions
/// are noise.
pub fn mixed_corpus(seed: u64) -> (Corpus, EmbeddingMatrix) {
    let sizes = SplitSizes {
        train: 20,
        dev: 10,
        test: 10,
    };
    const DIM: usize = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared = vocab("gamma", 12);
    let vocabs = [
        vocab("alpha", 12),
        vocab("beta", 12),
        shared.clone(),
        shared,
    ];
    let mut per_class = Vec::new();
    let mut rows_by_class = Vec::new();
    for (label, words) in vocabs.iter().enumerate() {
        let mut docs = Vec::new();
        let mut rows = Vec::new();
        for k in 0..sizes.total() {
            docs.push((draw_doc(&mut rng, words, 10), label, sizes.split_of(k)));
            let sign = match label {
                2 => 1.0,
                3 => -1.0,
                _ => 0.0,
            };
            let mut row = [0.0; DIM];
            row[0] = sign + rng.random_range(-0.4..0.4);
            row[1] = 1.0;
            for v in &mut row[2..] {
                *v = rng.random_range(-0.5..0.5);
            }
            rows.push(row);
        }
        per_class.push(docs);
        rows_by_class.push(rows);
    }

    let longest = sizes.total();
    let mut flat = Vec::new();
    for k in 0..longest {
        for rows in &rows_by_class {
            flat.extend_from_slice(&rows[k]);
        }
    }
    let corpus = Corpus::from_tokens(
        interleave(per_class),
        LabelSet::new(["a", "b", "c", "d"]).expect("four labels"),
    )
    .expect("generated corpus is valid");
    let values = Array2::from_shape_vec((corpus.n_docs(), DIM), flat).expect("row per document");
    // Round through f32 so the matrix equals what the embedding file stores.
    let values = values.mapv(|v| v as f32 as f64);
    (corpus, EmbeddingMatrix::new(values))
}

/// Random small corpus over a fixed alphabet, for oracle comparisons.
pub fn random_corpus(
    rng: &mut impl Rng,
    max_docs: usize,
    max_len: usize,
    alphabet: usize,
) -> Corpus {
    let n_docs = rng.random_range(1..=max_docs);
    let docs: Vec<_> = (0..n_docs)
        .map(|i| {
            let len = rng.random_range(1..=max_len);
            let tokens: Vec<String> = (0..len)
                .map(|_| format!("t{}", rng.random_range(0..alphabet)))
                .collect();
            let split = if i == 0 {
                Split::Train
            } else {
                [Split::Train, Split::Dev, Split::Test][rng.random_range(0..3)]
            };
            (tokens, Some(rng.random_range(0..2)), split)
        })
        .collect();
    Corpus::from_tokens(docs, LabelSet::new(["x", "y"]).expect("two labels")).expect("valid corpus")
}
