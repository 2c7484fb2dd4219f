//! Corpus ingestion: JSON Lines records, text cleaning, and the word vocabulary.
//!
//! Documents keep their file order and get dense ids `0..n_doc`. Cleaning runs
//! in a fixed order: punctuation removal, tokenization, lowercasing, then the
//! stopword filter, so a stopword followed by punctuation (`"là."`) is still
//! dropped.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn parse(tag: &str) -> Option<Split> {
        match tag {
            "train" => Some(Split::Train),
            "dev" => Some(Split::Dev),
            "test" => Some(Split::Test),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: usize,
    pub raw_text: String,
    pub tokens: Vec<String>,
    pub label: Option<usize>,
    pub split: Split,
}

/// Ordered class names. Class indices are positions in this list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    names: Vec<String>,
}

impl LabelSet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < 2 {
            return Err(Error::InvalidLabelSet(format!(
                "need at least 2 classes, got {}",
                names.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name.is_empty() {
                return Err(Error::InvalidLabelSet("empty class name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidLabelSet(format!("duplicate class {name:?}")));
            }
        }
        Ok(LabelSet { names })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn count(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// External word segmenter. Receives one punctuation-stripped document per
/// stdin line and must answer with one whitespace-separated token line per
/// input line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalTokenizer {
    pub program: String,
    pub args: Vec<String>,
}

impl ExternalTokenizer {
    /// Parses a whitespace-separated command line (no shell quoting).
    pub fn parse(command: &str) -> Option<Self> {
        let mut parts = command.split_whitespace().map(str::to_owned);
        let program = parts.next()?;
        Some(ExternalTokenizer {
            program,
            args: parts.collect(),
        })
    }

    fn segment(&self, texts: &[String]) -> Result<Vec<Vec<String>>> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Tokenizer(format!("cannot start {:?}: {e}", self.program)))?;

        let mut input = String::new();
        for text in texts {
            input.extend(
                text.chars()
                    .map(|c| if c == '\n' || c == '\r' { ' ' } else { c }),
            );
            input.push('\n');
        }
        let mut stdin = child.stdin.take().expect("stdin is piped");
        let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
        let output = child
            .wait_with_output()
            .map_err(|e| Error::Tokenizer(e.to_string()))?;
        writer
            .join()
            .expect("tokenizer writer thread panicked")
            .map_err(|e| Error::Tokenizer(format!("writing input: {e}")))?;
        if !output.status.success() {
            return Err(Error::Tokenizer(format!("exited with {}", output.status)));
        }
        let stdout = String::from_utf8(output.stdout)
            .map_err(|_| Error::Tokenizer("output is not UTF-8".into()))?;
        let lines: Vec<Vec<String>> = stdout
            .lines()
            .map(|l| l.split_whitespace().map(str::to_owned).collect())
            .collect();
        if lines.len() != texts.len() {
            return Err(Error::Tokenizer(format!(
                "returned {} lines for {} documents",
                lines.len(),
                texts.len()
            )));
        }
        Ok(lines)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessConfig {
    pub stopwords: HashSet<String>,
    pub strip_punctuation: bool,
    pub lowercase: bool,
    pub external_tokenizer: Option<ExternalTokenizer>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            stopwords: HashSet::new(),
            strip_punctuation: true,
            lowercase: false,
            external_tokenizer: None,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stopwords.iter().any(|s| s.is_empty()) {
            return Err(Error::InvalidPreprocess(
                "stopword list contains an empty entry".into(),
            ));
        }
        Ok(())
    }

    fn strip(&self, text: &str) -> String {
        if self.strip_punctuation {
            punctuation().replace_all(text, "").into_owned()
        } else {
            text.to_owned()
        }
    }

    fn finish(&self, tokens: impl IntoIterator<Item = String>) -> Vec<String> {
        tokens
            .into_iter()
            .map(|t| if self.lowercase { t.to_lowercase() } else { t })
            .filter(|t| !self.stopwords.contains(t))
            .collect()
    }
}

fn punctuation() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\p{P}").expect("valid punctuation class"))
}

/// Reads a stopword list: one token per line, blank lines ignored.
pub fn load_stopwords(path: &Path) -> Result<HashSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

/// Cleans and tokenizes one text. With an external tokenizer configured the
/// segmenter is spawned for this single text; use [`load_corpus`] for batches.
pub fn preprocess(text: &str, config: &PreprocessConfig) -> Result<Vec<String>> {
    let stripped = config.strip(text);
    match &config.external_tokenizer {
        None => Ok(config.finish(stripped.split_whitespace().map(str::to_owned))),
        Some(ext) => {
            let mut segmented = ext.segment(std::slice::from_ref(&stripped))?;
            Ok(config.finish(segmented.pop().unwrap_or_default()))
        }
    }
}

fn preprocess_all(texts: &[String], config: &PreprocessConfig) -> Result<Vec<Vec<String>>> {
    match &config.external_tokenizer {
        None => Ok(texts
            .par_iter()
            .map(|t| config.finish(config.strip(t).split_whitespace().map(str::to_owned)))
            .collect()),
        Some(ext) => {
            let stripped: Vec<String> = texts.iter().map(|t| config.strip(t)).collect();
            let segmented = ext.segment(&stripped)?;
            Ok(segmented.into_iter().map(|t| config.finish(t)).collect())
        }
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Document>,
    labels: LabelSet,
}

#[derive(Deserialize)]
struct RawRecord {
    text: Option<String>,
    #[serde(default)]
    label: Option<String>,
    split: String,
}

/// Loads a JSON Lines corpus with fields `text`, `label` and `split`.
pub fn load_corpus(path: &Path, labels: &LabelSet, config: &PreprocessConfig) -> Result<Corpus> {
    config.validate()?;
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let at = |line: usize| (path.to_path_buf(), line);

    let mut texts = Vec::new();
    let mut meta = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: RawRecord = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        let (p, l) = at(line_no);
        let text = record.text.ok_or(Error::MissingText {
            path: p.clone(),
            line: l,
        })?;
        let split = Split::parse(&record.split).ok_or_else(|| Error::UnknownSplit {
            path: p.clone(),
            line: l,
            split: record.split.clone(),
        })?;
        let label = match record.label.as_deref() {
            None | Some("") => None,
            Some(name) => Some(labels.index_of(name).ok_or_else(|| Error::UnknownLabel {
                path: p.clone(),
                line: l,
                label: name.to_owned(),
            })?),
        };
        if label.is_none() && split != Split::Test {
            return Err(Error::MissingLabel {
                path: p,
                line: l,
                split: split.as_str(),
            });
        }
        texts.push(text);
        meta.push((line_no, label, split));
    }

    let tokens = preprocess_all(&texts, config)?;
    let mut documents = Vec::with_capacity(texts.len());
    for (id, ((raw_text, tokens), (line, label, split))) in
        texts.into_iter().zip(tokens).zip(meta).enumerate()
    {
        if tokens.is_empty() {
            return Err(Error::EmptyDocument {
                path: path.to_path_buf(),
                line,
            });
        }
        documents.push(Document {
            id,
            raw_text,
            tokens,
            label,
            split,
        });
    }
    Corpus::new(documents, labels.clone())
}

impl Corpus {
    /// Validates ids, labels and splits of an already tokenized document list.
    pub fn new(documents: Vec<Document>, labels: LabelSet) -> Result<Self> {
        let where_ = PathBuf::from("<memory>");
        for (i, doc) in documents.iter().enumerate() {
            if doc.id != i {
                return Err(Error::IndexOutOfRange {
                    what: "document id",
                    index: doc.id,
                    limit: i,
                });
            }
            if doc.tokens.is_empty() {
                return Err(Error::EmptyDocument {
                    path: where_.clone(),
                    line: i + 1,
                });
            }
            match doc.label {
                Some(l) if l >= labels.count() => {
                    return Err(Error::IndexOutOfRange {
                        what: "label",
                        index: l,
                        limit: labels.count(),
                    })
                }
                None if doc.split != Split::Test => {
                    return Err(Error::MissingLabel {
                        path: where_.clone(),
                        line: i + 1,
                        split: doc.split.as_str(),
                    })
                }
                _ => {}
            }
        }
        if !documents.iter().any(|d| d.split == Split::Train) {
            return Err(Error::NoTrainDocuments);
        }
        Ok(Corpus { documents, labels })
    }

    /// Builds a corpus from pre-tokenized documents given as
    /// `(tokens, label, split)`; ids follow iteration order.
    pub fn from_tokens<T, S>(
        docs: impl IntoIterator<Item = (T, Option<usize>, Split)>,
        labels: LabelSet,
    ) -> Result<Self>
    where
        T: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let documents = docs
            .into_iter()
            .enumerate()
            .map(|(id, (tokens, label, split))| {
                let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
                Document {
                    id,
                    raw_text: tokens.join(" "),
                    tokens,
                    label,
                    split,
                }
            })
            .collect();
        Corpus::new(documents, labels)
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn n_docs(&self) -> usize {
        self.documents.len()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.count()
    }

    pub fn split_ids(&self, split: Split) -> Vec<usize> {
        self.documents
            .iter()
            .filter(|d| d.split == split)
            .map(|d| d.id)
            .collect()
    }

    /// `(doc id, label)` for labeled documents of one split.
    pub fn labeled(&self, split: Split) -> Vec<(usize, usize)> {
        self.documents
            .iter()
            .filter(|d| d.split == split)
            .filter_map(|d| d.label.map(|l| (d.id, l)))
            .collect()
    }

    /// The only label view handed to the optimizer: train documents only.
    pub fn training_targets(&self) -> Vec<(usize, usize)> {
        self.labeled(Split::Train)
    }

    pub fn average_length(&self) -> f64 {
        let total: usize = self.documents.iter().map(|d| d.tokens.len()).sum();
        total as f64 / self.documents.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
    document_frequency: Vec<usize>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.id_to_token[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn document_frequency(&self, id: usize) -> usize {
        self.document_frequency[id]
    }
}

/// Keeps tokens whose document frequency over all splits is at least
/// `min_df`, indexed in first-occurrence order.
pub fn build_vocabulary(corpus: &Corpus, min_df: usize) -> Result<Vocabulary> {
    if min_df == 0 {
        return Err(Error::Config("min_df must be at least 1".into()));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in corpus.documents() {
        let mut seen = HashSet::new();
        for tok in &doc.tokens {
            if seen.insert(tok.as_str()) {
                let count = df.entry(tok.as_str()).or_insert_with(|| {
                    order.push(tok.as_str());
                    0
                });
                *count += 1;
            }
        }
    }

    let mut vocab = Vocabulary {
        token_to_id: HashMap::new(),
        id_to_token: Vec::new(),
        document_frequency: Vec::new(),
    };
    for tok in order {
        let count = df[tok];
        if count >= min_df {
            vocab
                .token_to_id
                .insert(tok.to_owned(), vocab.id_to_token.len());
            vocab.id_to_token.push(tok.to_owned());
            vocab.document_frequency.push(count);
        }
    }
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary { min_df });
    }
    Ok(vocab)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> LabelSet {
        LabelSet::new(["pos", "neg"]).unwrap()
    }

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    fn toy(texts: &[&str]) -> Corpus {
        Corpus::from_tokens(
            texts.iter().map(|t| {
                (
                    t.split_whitespace().collect::<Vec<_>>(),
                    Some(0),
                    Split::Train,
                )
            }),
            labels(),
        )
        .unwrap()
    }

    #[test]
    fn strips_punctuation() {
        let cfg = PreprocessConfig::default();
        assert_eq!(preprocess("Tốt!!!", &cfg).unwrap(), vec!["Tốt"]);
    }

    #[test]
    fn removes_stopwords() {
        let cfg = PreprocessConfig {
            stopwords: ["là".to_string()].into_iter().collect(),
            ..Default::default()
        };
        assert_eq!(preprocess("đây là tốt", &cfg).unwrap(), vec!["đây", "tốt"]);
        // punctuation goes first, so "là." matches the stopword
        assert_eq!(preprocess("đây là. tốt", &cfg).unwrap(), vec!["đây", "tốt"]);
    }

    #[test]
    fn empty_text() {
        assert!(preprocess("", &PreprocessConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn lowercase_precedes_stopwords() {
        let cfg = PreprocessConfig {
            stopwords: ["là".to_string()].into_iter().collect(),
            lowercase: true,
            ..Default::default()
        };
        assert_eq!(preprocess("Đây LÀ tốt", &cfg).unwrap(), vec!["đây", "tốt"]);
    }

    #[test]
    fn punctuation_kept_when_disabled() {
        let cfg = PreprocessConfig {
            strip_punctuation: false,
            ..Default::default()
        };
        assert_eq!(preprocess("a, b", &cfg).unwrap(), vec!["a,", "b"]);
    }

    #[test]
    fn empty_stopword_rejected() {
        let cfg = PreprocessConfig {
            stopwords: ["".to_string()].into_iter().collect(),
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidPreprocess(_))));
    }

    #[test]
    fn external_tokenizer_joins_syllables() {
        // `tr` stands in for a segmenter: joins syllables with underscores.
        let cfg = PreprocessConfig {
            external_tokenizer: Some(ExternalTokenizer {
                program: "tr".into(),
                args: vec![" ".into(), "_".into()],
            }),
            ..Default::default()
        };
        assert_eq!(preprocess("sinh viên", &cfg).unwrap(), vec!["sinh_viên"]);
    }

    #[test]
    fn loads_three_records() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "c.jsonl",
            r#"{"text": "good class", "label": "pos", "split": "train"}
{"text": "bad class", "label": "neg", "split": "train"}
{"text": "fine", "label": "", "split": "test"}
"#,
        );
        let c = load_corpus(&p, &labels(), &PreprocessConfig::default()).unwrap();
        assert_eq!(c.n_docs(), 3);
        let splits: Vec<_> = c.documents().iter().map(|d| d.split).collect();
        assert_eq!(splits, [Split::Train, Split::Train, Split::Test]);
        assert_eq!(c.documents()[2].label, None);
        assert_eq!(c.documents()[1].label, Some(1));
        assert_eq!(c.training_targets(), vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn unknown_label() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "c.jsonl",
            r#"{"text": "x", "label": "joy", "split": "train"}"#,
        );
        let err = load_corpus(&p, &labels(), &PreprocessConfig::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownLabel { line: 1, .. }), "{err}");
        assert!(err.to_string().contains("unknown label"));
    }

    #[test]
    fn unknown_split_and_missing_text() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "a.jsonl",
            r#"{"text": "x", "label": "pos", "split": "valid"}"#,
        );
        assert!(matches!(
            load_corpus(&p, &labels(), &PreprocessConfig::default()),
            Err(Error::UnknownSplit { .. })
        ));
        let p = write(&dir, "b.jsonl", r#"{"label": "pos", "split": "train"}"#);
        assert!(matches!(
            load_corpus(&p, &labels(), &PreprocessConfig::default()),
            Err(Error::MissingText { .. })
        ));
    }

    #[test]
    fn document_emptied_by_cleaning() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "c.jsonl",
            "{\"text\": \"ok\", \"label\": \"pos\", \"split\": \"train\"}\n{\"text\": \"!!! ...\", \"label\": \"neg\", \"split\": \"train\"}\n",
        );
        let err = load_corpus(&p, &labels(), &PreprocessConfig::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyDocument { line: 2, .. }), "{err}");
    }

    #[test]
    fn zero_train_documents() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "c.jsonl",
            r#"{"text": "x", "label": "pos", "split": "dev"}"#,
        );
        assert!(matches!(
            load_corpus(&p, &labels(), &PreprocessConfig::default()),
            Err(Error::NoTrainDocuments)
        ));
    }

    #[test]
    fn label_set_validation() {
        assert!(LabelSet::new(["a"]).is_err());
        assert!(LabelSet::new(["a", "a"]).is_err());
        assert_eq!(LabelSet::new(["a", "b"]).unwrap().count(), 2);
    }

    #[test]
    fn vocabulary_first_occurrence() {
        let c = toy(&["a b a", "b c"]);
        let v = build_vocabulary(&c, 1).unwrap();
        assert_eq!(v.tokens(), ["a", "b", "c"]);
        assert_eq!(
            (0..3).map(|i| v.document_frequency(i)).collect::<Vec<_>>(),
            [1, 2, 1]
        );
    }

    #[test]
    fn vocabulary_min_df() {
        let c = toy(&["a b a", "b c"]);
        let v = build_vocabulary(&c, 2).unwrap();
        assert_eq!(v.tokens(), ["b"]);
        assert_eq!(v.id("b"), Some(0));
        assert_eq!(v.id("a"), None);
    }

    #[test]
    fn vocabulary_single_token() {
        let v = build_vocabulary(&toy(&["a"]), 1).unwrap();
        assert_eq!(v.tokens(), ["a"]);
        assert_eq!(v.document_frequency(0), 1);
    }

    #[test]
    fn vocabulary_empty_is_error() {
        assert!(matches!(
            build_vocabulary(&toy(&["a", "b"]), 2),
            Err(Error::EmptyVocabulary { min_df: 2 })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn vocabulary_is_permutation(docs in prop::collection::vec(
                prop::collection::vec("[a-e]", 1..8), 1..10), min_df in 1usize..3) {
                let c = Corpus::from_tokens(
                    docs.iter().map(|d| (d.clone(), Some(0), Split::Train)),
                    LabelSet::new(["x", "y"]).unwrap()).unwrap();
                if let Ok(v) = build_vocabulary(&c, min_df) {
                    let mut ids: Vec<usize> = v.tokens().iter().map(|t| v.id(t).unwrap()).collect();
                    ids.sort();
                    prop_assert_eq!(ids, (0..v.len()).collect::<Vec<_>>());
                    for (i, _) in v.tokens().iter().enumerate() {
                        prop_assert!(v.document_frequency(i) >= min_df);
                    }
                }
            }

            #[test]
            fn preprocessing_is_deterministic(text in "\\PC{0,40}") {
                let cfg = PreprocessConfig { lowercase: true, ..Default::default() };
                prop_assert_eq!(preprocess(&text, &cfg).unwrap(), preprocess(&text, &cfg).unwrap());
            }
        }
    }
}
