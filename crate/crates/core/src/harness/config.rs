//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Relative paths are
//! resolved against the directory holding the config file. Unknown keys
//! are rejected.
//!
//! | key | default |
//! |-----|---------|
//! | `task` | `task` |
//! | `corpus` | required |
//! | `labels` | required, comma separated |
//! | `stopwords` | none |
//! | `strip_punctuation` | `true` |
//! | `lowercase` | `false` |
//! | `tokenizer` | none (whitespace split) |
//! | `min_df` | `1` |
//! | `window_size` | `20` |
//! | `embeddings` | none (identity features) |
//! | `trainable_embeddings` | `true` |
//! | `hidden_dim` | `200` |
//! | `lr_gcn` / `lr_emb` | `1e-3` / `1e-5` |
//! | `max_epochs` | `200` |
//! | `patience` | `20` (`none` disables early stopping) |
//! | `seed` | `0` |
//! | `lambda` | `0.6`, or `sweep` |
//! | `lambda_grid` | `0.0,0.1,...,1.0` |
//! | `out` | `out` |
//! | `checkpoint` | `<out>/checkpoint.vgc` |

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::corpus::{load_stopwords, ExternalTokenizer, LabelSet, PreprocessConfig};
use crate::error::{Error, Result};
use crate::textgraph::GraphConfig;
use crate::training::{default_lambda_grid, TrainConfig};

pub const DEFAULT_LAMBDA: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    BuildGraph,
    Train,
    Eval,
    Sweep,
    Ablate,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "build-graph" => Ok(Mode::BuildGraph),
            "train" => Ok(Mode::Train),
            "eval" => Ok(Mode::Eval),
            "sweep" => Ok(Mode::Sweep),
            "ablate" => Ok(Mode::Ablate),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSetting {
    Fixed(f64),
    Sweep,
}

impl FromStr for LambdaSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "sweep" {
            return Ok(LambdaSetting::Sweep);
        }
        let v: f64 = s.parse().map_err(|_| {
            Error::Config(format!("lambda: expected a number or \"sweep\", got {s:?}"))
        })?;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::LambdaOutOfRange(v));
        }
        Ok(LambdaSetting::Fixed(v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub task: String,
    pub corpus: PathBuf,
    pub labels: LabelSet,
    pub preprocess: PreprocessConfig,
    pub min_df: usize,
    pub graph: GraphConfig,
    pub embeddings: Option<PathBuf>,
    pub trainable_embeddings: bool,
    pub train: TrainConfig,
    pub lambda: LambdaSetting,
    pub lambda_grid: Vec<f64>,
    pub out: PathBuf,
    pub checkpoint: Option<PathBuf>,
}

impl RunConfig {
    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.out.join("checkpoint.vgc"))
    }

    /// Reads a config file for `mode`.
    pub fn load(path: &Path, mode: Mode) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, mode).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str, base: &Path, mode: Mode) -> Result<Self> {
        let mut entries: Vec<(String, String, usize)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", idx + 1)))?;
            let key = k.trim().to_owned();
            if entries.iter().any(|(seen, _, _)| *seen == key) {
                return Err(Error::Config(format!(
                    "line {}: duplicate key {key:?}",
                    idx + 1
                )));
            }
            entries.push((key, v.trim().to_owned(), idx + 1));
        }

        let resolve = |p: &str| -> PathBuf {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let mut cfg = Partial::default();
        for (key, value, line) in entries {
            let field_err = |msg: String| Error::Config(format!("line {line}: {key}: {msg}"));
            match key.as_str() {
                "task" => cfg.task = Some(value),
                "corpus" => cfg.corpus = Some(resolve(&value)),
                "labels" => {
                    cfg.labels = Some(
                        LabelSet::new(value.split(',').map(str::trim))
                            .map_err(|e| field_err(e.to_string()))?,
                    )
                }
                "stopwords" => cfg.stopwords = Some(resolve(&value)),
                "strip_punctuation" => {
                    cfg.strip_punctuation = Some(parse_bool(&value).map_err(field_err)?)
                }
                "lowercase" => cfg.lowercase = Some(parse_bool(&value).map_err(field_err)?),
                "tokenizer" => {
                    cfg.tokenizer = Some(
                        ExternalTokenizer::parse(&value)
                            .ok_or_else(|| field_err("empty command".into()))?,
                    )
                }
                "min_df" => cfg.min_df = Some(parse_num(&value).map_err(field_err)?),
                "window_size" => cfg.window_size = Some(parse_num(&value).map_err(field_err)?),
                "embeddings" => cfg.embeddings = Some(resolve(&value)),
                "trainable_embeddings" => {
                    cfg.trainable_embeddings = Some(parse_bool(&value).map_err(field_err)?)
                }
                "hidden_dim" => cfg.train.hidden_dim = parse_num(&value).map_err(field_err)?,
                "lr_gcn" => cfg.train.lr_gcn = parse_num(&value).map_err(field_err)?,
                "lr_emb" => cfg.train.lr_emb = parse_num(&value).map_err(field_err)?,
                "max_epochs" => cfg.train.max_epochs = parse_num(&value).map_err(field_err)?,
                "patience" => {
                    cfg.train.patience = if value == "none" {
                        None
                    } else {
                        Some(parse_num(&value).map_err(field_err)?)
                    }
                }
                "seed" => cfg.train.seed = parse_num(&value).map_err(field_err)?,
                "lambda" => {
                    cfg.lambda = Some(value.parse().map_err(|e: Error| field_err(e.to_string()))?)
                }
                "lambda_grid" => {
                    let grid = value
                        .split(',')
                        .map(|v| parse_num::<f64>(v.trim()))
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(field_err)?;
                    if let Some(bad) = grid.iter().find(|l| !(0.0..=1.0).contains(*l)) {
                        return Err(field_err(format!("{bad} outside [0, 1]")));
                    }
                    cfg.lambda_grid = Some(grid);
                }
                "out" => cfg.out = Some(resolve(&value)),
                "checkpoint" => cfg.checkpoint = Some(resolve(&value)),
                _ => return Err(Error::Config(format!("line {line}: unknown key {key:?}"))),
            }
        }
        cfg.finish(mode, base)
    }
}

#[derive(Default)]
struct Partial {
    task: Option<String>,
    corpus: Option<PathBuf>,
    labels: Option<LabelSet>,
    stopwords: Option<PathBuf>,
    strip_punctuation: Option<bool>,
    lowercase: Option<bool>,
    tokenizer: Option<ExternalTokenizer>,
    min_df: Option<usize>,
    window_size: Option<usize>,
    embeddings: Option<PathBuf>,
    trainable_embeddings: Option<bool>,
    train: TrainConfig,
    lambda: Option<LambdaSetting>,
    lambda_grid: Option<Vec<f64>>,
    out: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
}

impl Partial {
    fn finish(self, mode: Mode, base: &Path) -> Result<RunConfig> {
        let corpus = self
            .corpus
            .ok_or_else(|| Error::Config("missing required key \"corpus\"".into()))?;
        let labels = self
            .labels
            .ok_or_else(|| Error::Config("missing required key \"labels\"".into()))?;
        let stopwords = match &self.stopwords {
            Some(p) => load_stopwords(p)?,
            None => Default::default(),
        };
        let preprocess = PreprocessConfig {
            stopwords,
            strip_punctuation: self.strip_punctuation.unwrap_or(true),
            lowercase: self.lowercase.unwrap_or(false),
            external_tokenizer: self.tokenizer,
        };
        preprocess.validate()?;
        let graph = GraphConfig {
            window_size: self
                .window_size
                .unwrap_or(crate::textgraph::DEFAULT_WINDOW_SIZE),
        };
        graph.validate()?;
        self.train.validate()?;
        let min_df = self.min_df.unwrap_or(1);
        if min_df == 0 {
            return Err(Error::Config("min_df must be at least 1".into()));
        }
        let lambda_grid = self.lambda_grid.unwrap_or_else(default_lambda_grid);
        if lambda_grid.is_empty() {
            return Err(Error::EmptyGrid);
        }

        for (what, p) in [
            ("corpus", Some(&corpus)),
            ("embeddings", self.embeddings.as_ref()),
        ] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(Error::Config(format!(
                        "{what} file {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        let out = self.out.unwrap_or_else(|| base.join("out"));
        let checkpoint = self.checkpoint;
        if mode == Mode::Eval {
            let ck = checkpoint
                .clone()
                .unwrap_or_else(|| out.join("checkpoint.vgc"));
            if !ck.is_file() {
                return Err(Error::Config(format!(
                    "checkpoint {} does not exist",
                    ck.display()
                )));
            }
        }

        Ok(RunConfig {
            mode,
            task: self.task.unwrap_or_else(|| "task".into()),
            corpus,
            labels,
            preprocess,
            min_df,
            graph,
            trainable_embeddings: self.trainable_embeddings.unwrap_or(true),
            embeddings: self.embeddings,
            train: self.train,
            lambda: self.lambda.unwrap_or(LambdaSetting::Fixed(DEFAULT_LAMBDA)),
            lambda_grid,
            out,
            checkpoint,
        })
    }
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got {s:?}")),
    }
}

fn parse_num<T: FromStr>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|_| format!("cannot parse {s:?}"))
}
