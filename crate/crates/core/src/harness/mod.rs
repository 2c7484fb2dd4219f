//! Pipeline orchestration behind the CLI: graph building, training,
//! evaluation, λ sweeps and ablations, with their on-disk artifacts.

mod ablation;
mod config;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use ablation::{AblationReport, Scores, FULL, WITHOUT_EMBEDDING, WITHOUT_GCN};
pub use config::{LambdaSetting, Mode, RunConfig, DEFAULT_LAMBDA};

use crate::checkpoint::Checkpoint;
use crate::corpus::{build_vocabulary, load_corpus, Corpus, Split, Vocabulary};
use crate::error::{Error, Result};
use crate::features::{
    assemble_node_features, identity_features, load_embedding_file, NodeFeatures,
};
use crate::metrics::MetricsReport;
use crate::model::{self, Architecture, ModelParams};
use crate::textgraph::{build_text_graph, export_graph, TextGraph};
use crate::training::{self, select_lambda, sweep_csv, SweepPoint, TrainOutcome};

pub const GRAPH_EDGES: &str = "graph_edges.tsv";
pub const GRAPH_HEADER: &str = "graph.json";
pub const GRAPH_STATS: &str = "graph_stats.json";
pub const HISTORY: &str = "history.csv";
pub const TEST_REPORT: &str = "test_report.json";
pub const EVAL_REPORT: &str = "eval_report.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_SELECTED: &str = "sweep_selected.txt";
pub const ABLATION_CSV: &str = "ablation.csv";
pub const ABLATION_TABLE: &str = "ablation.txt";

/// Corpus, vocabulary, graph and node features for one run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub corpus: Corpus,
    pub vocab: Vocabulary,
    pub graph: TextGraph,
    pub features: NodeFeatures,
}

impl Prepared {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let corpus = load_corpus(&cfg.corpus, &cfg.labels, &cfg.preprocess)?;
        let vocab = build_vocabulary(&corpus, cfg.min_df)?;
        let graph = build_text_graph(&corpus, &vocab, &cfg.graph)?;
        let features = match &cfg.embeddings {
            Some(path) => {
                let emb = load_embedding_file(path, &corpus)?;
                assemble_node_features(&emb, vocab.len(), cfg.trainable_embeddings)
            }
            None => identity_features(corpus.n_docs(), vocab.len()),
        };
        Ok(Prepared {
            corpus,
            vocab,
            graph,
            features,
        })
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            n_doc: self.graph.n_doc,
            n_word: self.graph.n_word,
            nnz: self.graph.adjacency.nnz(),
            average_doc_length: self.corpus.average_length(),
            window_size: self.graph.window_size,
        }
    }

    /// Forward pass with `params` and metrics on `split`.
    pub fn evaluate(
        &self,
        arch: Architecture,
        params: &ModelParams,
        split: Split,
    ) -> Result<(model::ForwardPass, Option<MetricsReport>)> {
        let pass = model::forward(arch, &self.graph.normalized, &self.features, params)?;
        let report = training::evaluate_split(&pass, &self.corpus, split)?;
        Ok((pass, report))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub n_doc: usize,
    pub n_word: usize,
    pub nnz: usize,
    pub average_doc_length: f64,
    pub window_size: usize,
}

/// What a run produced: printable summary lines and the files written.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub lines: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

impl RunSummary {
    fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>, summary: &mut RunSummary) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    summary.artifacts.push(path.to_path_buf());
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T, summary: &mut RunSummary) -> Result<()> {
    let json = serde_json::to_string_pretty(value).expect("serializable");
    write_file(path, json + "\n", summary)
}

fn create_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Runs the mode named in `cfg`.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    create_out(&cfg.out)?;
    let mut summary = RunSummary::default();
    match cfg.mode {
        Mode::BuildGraph => build_graph(cfg, &mut summary)?,
        Mode::Train => {
            train_mode(cfg, &mut summary)?;
        }
        Mode::Eval => eval_mode(cfg, &mut summary)?,
        Mode::Sweep => {
            sweep_mode(cfg, &mut summary)?;
        }
        Mode::Ablate => {
            ablate(std::slice::from_ref(cfg), &cfg.out, &mut summary)?;
        }
    }
    Ok(summary)
}

fn build_graph(cfg: &RunConfig, summary: &mut RunSummary) -> Result<()> {
    let prep = Prepared::from_config(cfg)?;
    let (edges, header) = (cfg.out.join(GRAPH_EDGES), cfg.out.join(GRAPH_HEADER));
    export_graph(&prep.graph, &edges, &header)?;
    summary.artifacts.extend([edges, header]);
    let stats = prep.stats();
    write_json(&cfg.out.join(GRAPH_STATS), &stats, summary)?;
    summary.line(format!(
        "n_doc={} n_word={} nnz={} average_doc_length={:.2}",
        stats.n_doc, stats.n_word, stats.nnz, stats.average_doc_length
    ));
    Ok(())
}

fn sweep(
    prep: &Prepared,
    cfg: &RunConfig,
    summary: &mut RunSummary,
) -> Result<(f64, Vec<SweepPoint>)> {
    let (best, points) = select_lambda(
        &prep.graph,
        &prep.features,
        &prep.corpus,
        &cfg.train,
        &cfg.lambda_grid,
    )?;
    write_file(&cfg.out.join(SWEEP_CSV), sweep_csv(&points), summary)?;
    write_file(
        &cfg.out.join(SWEEP_SELECTED),
        format!("lambda_star={best}\n"),
        summary,
    )?;
    for p in &points {
        summary.line(format!(
            "lambda={} dev_macro_f1={:.4} dev_weighted_f1={:.4}",
            p.lambda, p.dev_macro_f1, p.dev_weighted_f1
        ));
    }
    summary.line(format!("lambda_star={best}"));
    Ok((best, points))
}

fn sweep_mode(cfg: &RunConfig, summary: &mut RunSummary) -> Result<(f64, Vec<SweepPoint>)> {
    let prep = Prepared::from_config(cfg)?;
    sweep(&prep, cfg, summary)
}

fn resolve_lambda(prep: &Prepared, cfg: &RunConfig, summary: &mut RunSummary) -> Result<f64> {
    match cfg.lambda {
        LambdaSetting::Fixed(l) => Ok(l),
        LambdaSetting::Sweep => Ok(sweep(prep, cfg, summary)?.0),
    }
}

/// Trains the fused model, writes checkpoint, history and test report.
pub fn train_mode(cfg: &RunConfig, summary: &mut RunSummary) -> Result<TrainOutcome> {
    create_out(&cfg.out)?;
    let prep = Prepared::from_config(cfg)?;
    let lambda = resolve_lambda(&prep, cfg, summary)?;
    let arch = Architecture::fused(lambda)?;
    let outcome = training::train(&prep.graph, &prep.features, &prep.corpus, arch, &cfg.train)?;

    let ck_path = cfg.checkpoint_path();
    outcome
        .best
        .write(&ck_path, prep.features.dim(), prep.corpus.n_docs())?;
    summary.artifacts.push(ck_path);
    let history = cfg.out.join(HISTORY);
    outcome.history.write_csv(&history)?;
    summary.artifacts.push(history);

    let (_, report) = prep.evaluate(arch, &outcome.best.params, Split::Test)?;
    summary.line(format!(
        "lambda={lambda} epochs={} best_epoch={}",
        outcome.history.records.len(),
        outcome.best.epoch
    ));
    match report {
        Some(r) => {
            r.write_json(&cfg.out.join(TEST_REPORT))?;
            summary.artifacts.push(cfg.out.join(TEST_REPORT));
            summary.line(format!(
                "test macro_f1={:.4} weighted_f1={:.4}",
                r.macro_f1, r.weighted_f1
            ));
        }
        None => summary.line("test split has no labels; no report written"),
    }
    Ok(outcome)
}

fn eval_mode(cfg: &RunConfig, summary: &mut RunSummary) -> Result<()> {
    let prep = Prepared::from_config(cfg)?;
    let path = cfg.checkpoint_path();
    let (header, ck) = Checkpoint::read(&path)?;
    if header.feature_dim != prep.features.dim()
        || header.n_doc != prep.corpus.n_docs()
        || header.n_classes != prep.corpus.n_classes()
    {
        return Err(Error::DimensionMismatch {
            context: "checkpoint vs corpus",
            expected: format!(
                "d={} n_doc={} classes={}",
                prep.features.dim(),
                prep.corpus.n_docs(),
                prep.corpus.n_classes()
            ),
            found: format!(
                "d={} n_doc={} classes={}",
                header.feature_dim, header.n_doc, header.n_classes
            ),
        });
    }
    let (_, report) = prep.evaluate(ck.arch, &ck.params, Split::Test)?;
    let report =
        report.ok_or_else(|| Error::Config("test split has no labeled documents".into()))?;
    report.write_json(&cfg.out.join(EVAL_REPORT))?;
    summary.artifacts.push(cfg.out.join(EVAL_REPORT));
    summary.line(format!(
        "test macro_f1={:.4} weighted_f1={:.4}",
        report.macro_f1, report.weighted_f1
    ));
    Ok(())
}

fn scores(report: &MetricsReport) -> Scores {
    Scores {
        weighted_f1: report.weighted_f1,
        macro_f1: report.macro_f1,
    }
}

/// Per-configuration test reports of one ablation task.
#[derive(Debug, Clone)]
pub struct AblationRuns {
    pub full: MetricsReport,
    pub without_gcn: MetricsReport,
    pub without_embedding: MetricsReport,
}

fn ablate_task(cfg: &RunConfig, summary: &mut RunSummary) -> Result<AblationRuns> {
    let prep = Prepared::from_config(cfg)?;
    let lambda = resolve_lambda(&prep, cfg, summary)?;
    let identity = Prepared {
        features: identity_features(prep.corpus.n_docs(), prep.vocab.len()),
        ..prep.clone()
    };
    let runs = [
        (&prep, Architecture::fused(lambda)?, "full"),
        (&prep, Architecture::AuxOnly, "without_gcn"),
        (&identity, Architecture::GcnOnly, "without_embedding"),
    ];
    let dir = cfg.out.join(&cfg.task);
    create_out(&dir)?;
    let mut reports = Vec::new();
    for (p, arch, name) in runs {
        let outcome = training::train(&p.graph, &p.features, &p.corpus, arch, &cfg.train)?;
        let (_, report) = p.evaluate(arch, &outcome.best.params, Split::Test)?;
        let report = report.ok_or_else(|| {
            Error::Config(format!(
                "task {}: test split has no labeled documents",
                cfg.task
            ))
        })?;
        let path = dir.join(format!("{name}.json"));
        report.write_json(&path)?;
        summary.artifacts.push(path);
        reports.push(report);
    }
    let mut it = reports.into_iter();
    Ok(AblationRuns {
        full: it.next().unwrap(),
        without_gcn: it.next().unwrap(),
        without_embedding: it.next().unwrap(),
    })
}

/// Runs the three ablation configurations for every task config and writes
/// the combined report to `out`.
pub fn ablate(cfgs: &[RunConfig], out: &Path, summary: &mut RunSummary) -> Result<AblationReport> {
    create_out(out)?;
    let mut report = AblationReport::new();
    for cfg in cfgs {
        let runs = ablate_task(cfg, summary)?;
        report.push(
            &cfg.task,
            scores(&runs.full),
            scores(&runs.without_gcn),
            scores(&runs.without_embedding),
        );
    }
    let note = "w/o embedding head = identity node features with lambda = 1; w/o GCN = linear head on document features";
    let table = report.to_table(note);
    write_file(&out.join(ABLATION_CSV), report.to_csv(), summary)?;
    write_file(&out.join(ABLATION_TABLE), &table, summary)?;
    summary.lines.extend(table.lines().map(str::to_owned));
    Ok(report)
}
