//! Fixtures shared by the criterion benches.

use hetgcn::corpus::build_vocabulary;
use hetgcn::features::identity_features;
use hetgcn::textgraph::{build_text_graph, GraphConfig};
use hetgcn::{Corpus, LabelSet, NodeFeatures, Split, TextGraph, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n_docs` documents of `len` tokens over a vocabulary of `n_words`, drawn
/// from a fixed seed so every bench run sees the same corpus.
pub fn corpus(n_docs: usize, len: usize, n_words: usize) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let docs: Vec<_> = (0..n_docs)
        .map(|i| {
            let tokens: Vec<String> = (0..len)
                .map(|_| format!("w{}", rng.random_range(0..n_words)))
                .collect();
            let split = match i % 5 {
                0 => Split::Dev,
                1 => Split::Test,
                _ => Split::Train,
            };
            (tokens, Some(i % 2), split)
        })
        .collect();
    Corpus::from_tokens(docs, LabelSet::new(["a", "b"]).unwrap()).unwrap()
}

pub struct Fixture {
    pub corpus: Corpus,
    pub vocab: Vocabulary,
    pub graph: TextGraph,
    pub features: NodeFeatures,
}

pub fn fixture(n_docs: usize, len: usize, n_words: usize) -> Fixture {
    let corpus = corpus(n_docs, len, n_words);
    let vocab = build_vocabulary(&corpus, 1).unwrap();
    let graph = build_text_graph(&corpus, &vocab, &GraphConfig::default()).unwrap();
    let features = identity_features(corpus.n_docs(), vocab.len());
    Fixture {
        corpus,
        vocab,
        graph,
        features,
    }
}
