use hetgcn::corpus::build_vocabulary;
use hetgcn::features::{assemble_node_features, identity_features};
use hetgcn::model::{backward, forward, Gradients};
use hetgcn::synthetic::{mixed_corpus, separable_corpus};
use hetgcn::textgraph::{build_text_graph, TextGraph};
use hetgcn::training::{self, adam_step, AdamState, LearningRates};
use hetgcn::{
    Architecture, Corpus, GraphConfig, ModelParams, NodeFeatures, SparseMatrix, Split, TrainConfig,
};
use ndarray::{Array2, Axis};

fn separable() -> (Corpus, TextGraph, NodeFeatures) {
    let corpus = separable_corpus(0);
    let vocab = build_vocabulary(&corpus, 1).unwrap();
    let graph = build_text_graph(&corpus, &vocab, &GraphConfig::default()).unwrap();
    let features = identity_features(corpus.n_docs(), vocab.len());
    (corpus, graph, features)
}

fn fused() -> Architecture {
    Architecture::fused(0.6).unwrap()
}

#[test]
fn same_seed_gives_identical_loss_trace() {
    let (corpus, emb) = mixed_corpus(2);
    let vocab = build_vocabulary(&corpus, 1).unwrap();
    let graph = build_text_graph(&corpus, &vocab, &GraphConfig::default()).unwrap();
    let features = assemble_node_features(&emb, vocab.len(), true);
    let config = TrainConfig {
        max_epochs: 30,
        ..TrainConfig::default()
    };
    let a = training::train(&graph, &features, &corpus, fused(), &config).unwrap();
    let b = training::train(&graph, &features, &corpus, fused(), &config).unwrap();
    let bits =
        |h: &hetgcn::TrainHistory| h.losses().iter().map(|l| l.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.history), bits(&b.history));
    assert_eq!(a.params, b.params);
    assert_eq!(a.history.to_csv(), b.history.to_csv());
}

#[test]
fn loss_decreases_early() {
    let (corpus, graph, features) = separable();
    let config = TrainConfig {
        max_epochs: 10,
        patience: None,
        ..TrainConfig::default()
    };
    let out = training::train(&graph, &features, &corpus, fused(), &config).unwrap();
    let losses = out.history.losses();
    assert_eq!(losses.len(), 10);
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
}

#[test]
fn zero_epochs_returns_initialization() {
    let (corpus, graph, features) = separable();
    let config = TrainConfig {
        max_epochs: 0,
        ..TrainConfig::default()
    };
    let out = training::train(&graph, &features, &corpus, fused(), &config).unwrap();
    assert!(out.history.records.is_empty());
    let init = ModelParams::init(fused(), &features, config.hidden_dim, 2, config.seed);
    assert_eq!(out.best.params, init);
    assert_eq!(out.params, init);
}

#[test]
fn best_checkpoint_holds_best_dev_score() {
    let (corpus, graph, features) = separable();
    let config = TrainConfig {
        max_epochs: 40,
        ..TrainConfig::default()
    };
    let arch = fused();
    let out = training::train(&graph, &features, &corpus, arch, &config).unwrap();
    let best_in_history = out
        .history
        .records
        .iter()
        .filter_map(|r| r.dev_macro_f1)
        .fold(f64::MIN, f64::max);
    assert_eq!(out.best_dev.unwrap().0, best_in_history);
    let pass = forward(arch, &graph.normalized, &features, &out.best.params).unwrap();
    let dev = training::evaluate_split(&pass, &corpus, Split::Dev)
        .unwrap()
        .unwrap();
    assert_eq!(dev.macro_f1, best_in_history);
}

#[test]
fn early_stopping_without_dev_is_rejected() {
    let corpus = Corpus::from_tokens(
        [
            (vec!["a", "b"], Some(0), Split::Train),
            (vec!["c"], Some(1), Split::Train),
        ],
        hetgcn::LabelSet::new(["x", "y"]).unwrap(),
    )
    .unwrap();
    let vocab = build_vocabulary(&corpus, 1).unwrap();
    let graph = build_text_graph(&corpus, &vocab, &GraphConfig::default()).unwrap();
    let features = identity_features(2, vocab.len());
    let err =
        training::train(&graph, &features, &corpus, fused(), &TrainConfig::default()).unwrap_err();
    assert!(matches!(err, hetgcn::Error::NoDevDocuments));
    let config = TrainConfig {
        patience: None,
        max_epochs: 3,
        ..TrainConfig::default()
    };
    let out = training::train(&graph, &features, &corpus, fused(), &config).unwrap();
    assert_eq!(out.best.params, out.params);
    assert!(out.best_dev.is_none());
}

#[test]
fn adam_matches_reference_over_several_steps() {
    let (_, _, features) = separable();
    let mut params = ModelParams::init(Architecture::AuxOnly, &features, 4, 2, 1);
    let mut reference = params.aux.as_ref().unwrap().w_aux.clone();
    let mut state = AdamState::new(&params);
    let lrs = LearningRates {
        gcn: 0.01,
        emb: 0.0,
    };
    let (mut m, mut v) = (
        Array2::<f64>::zeros(reference.raw_dim()),
        Array2::<f64>::zeros(reference.raw_dim()),
    );
    for t in 1..=5 {
        let g = reference.mapv(|w| (w * t as f64).sin());
        let grads = Gradients {
            w1: None,
            w2: None,
            w_aux: Some(g.clone()),
            x_doc: None,
        };
        adam_step(&mut params, &grads, &mut state, lrs).unwrap();
        m = &m * 0.9 + &g * 0.1;
        v = &v * 0.999 + &(&g * &g) * 0.001;
        let m_hat = &m / (1.0 - 0.9f64.powi(t));
        let v_hat = &v / (1.0 - 0.999f64.powi(t));
        reference = &reference - &(m_hat / (v_hat.mapv(f64::sqrt) + 1e-8) * 0.01);
        let got = &params.aux.as_ref().unwrap().w_aux;
        let diff = (got - &reference)
            .iter()
            .fold(0.0f64, |a, d| a.max(d.abs()));
        assert!(diff < 1e-12, "step {t}: {diff}");
    }
}

/// Reordering word nodes permutes hidden word rows and leaves document
/// outputs unchanged.
#[test]
fn word_permutation_equivariance() {
    let (corpus, graph, _) = separable();
    let (n_doc, n_word) = (graph.n_doc, graph.n_word);
    let n = n_doc + n_word;
    let perm: Vec<usize> = (0..n)
        .map(|i| {
            if i < n_doc {
                i
            } else {
                n_doc + (i - n_doc + 7) % n_word
            }
        })
        .collect();
    let permuted = SparseMatrix::from_triplets(
        n,
        n,
        graph
            .adjacency
            .iter()
            .map(|(r, c, v)| (perm[r], perm[c], v))
            .collect(),
    )
    .unwrap();
    let other = TextGraph::from_adjacency(n_doc, n_word, graph.window_size, permuted).unwrap();

    let mut x = Array2::<f64>::zeros((n, 3));
    for d in 0..n_doc {
        x.row_mut(d)
            .assign(&ndarray::arr1(&[d as f64 * 0.1, 1.0, -(d as f64) * 0.05]));
    }
    let features = NodeFeatures {
        matrix: x,
        n_doc,
        trainable: false,
    };
    let arch = fused();
    let params = ModelParams::init(arch, &features, 5, corpus.n_classes(), 9);
    let a = forward(arch, &graph.normalized, &features, &params).unwrap();
    let b = forward(arch, &other.normalized, &features, &params).unwrap();
    let close =
        |p: &Array2<f64>, q: &Array2<f64>| p.iter().zip(q).all(|(u, v)| (u - v).abs() < 1e-12);
    assert!(close(&a.z, &b.z));
    let (ha, hb) = (
        &a.gcn.as_ref().unwrap().post1,
        &b.gcn.as_ref().unwrap().post1,
    );
    for (i, &j) in perm.iter().enumerate().skip(n_doc) {
        let (ra, rb) = (ha.index_axis(Axis(0), i), hb.index_axis(Axis(0), j));
        assert!(ra.iter().zip(rb.iter()).all(|(u, v)| (u - v).abs() < 1e-12));
    }
    let grads = backward(&a, &graph.normalized, &params, &corpus.training_targets()).unwrap();
    let grads_b = backward(&b, &other.normalized, &params, &corpus.training_targets()).unwrap();
    assert!(close(
        grads.w2.as_ref().unwrap(),
        grads_b.w2.as_ref().unwrap()
    ));
}

#[test]
fn sweep_over_three_points() {
    let (corpus, emb) = mixed_corpus(1);
    let vocab = build_vocabulary(&corpus, 1).unwrap();
    let graph = build_text_graph(&corpus, &vocab, &GraphConfig::default()).unwrap();
    let features = assemble_node_features(&emb, vocab.len(), false);
    let config = TrainConfig {
        max_epochs: 20,
        ..TrainConfig::default()
    };
    let (best, points) =
        training::select_lambda(&graph, &features, &corpus, &config, &[0.0, 0.5, 1.0]).unwrap();
    assert_eq!(points.len(), 3);
    assert!(points.iter().any(|p| p.lambda == best));
    let csv = training::sweep_csv(&points);
    assert_eq!(csv.lines().count(), 4);
}
