#![allow(dead_code)]

use std::path::{Path, PathBuf};

use hetgcn::features::write_embedding_file;
use hetgcn::{Corpus, EmbeddingMatrix};

/// Writes `corpus` as JSONL, one record per document in id order.
pub fn write_corpus(dir: &Path, corpus: &Corpus) -> PathBuf {
    let path = dir.join("corpus.jsonl");
    let names = corpus.labels().names();
    let mut text = String::new();
    for doc in corpus.documents() {
        let record = serde_json::json!({
            "text": doc.tokens.join(" "),
            "label": doc.label.map(|l| names[l].clone()).unwrap_or_default(),
            "split": doc.split.as_str(),
        });
        text.push_str(&record.to_string());
        text.push('\n');
    }
    std::fs::write(&path, text).unwrap();
    path
}

pub fn write_embeddings(dir: &Path, emb: &EmbeddingMatrix) -> PathBuf {
    let path = dir.join("embeddings.vge");
    write_embedding_file(&path, emb).unwrap();
    path
}

/// Writes a config file with the corpus, label and output entries filled in
/// and `extra` appended verbatim.
pub fn write_config(dir: &Path, corpus: &Corpus, extra: &str) -> PathBuf {
    write_corpus(dir, corpus);
    let labels = corpus.labels().names().join(",");
    let text = format!("corpus = corpus.jsonl\nlabels = {labels}\nout = out\n{extra}");
    let path = dir.join("run.cfg");
    std::fs::write(&path, text).unwrap();
    path
}
