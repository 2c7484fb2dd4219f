//! Full-batch training with Adam, best-on-dev checkpointing, and λ selection.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, Zip};
use rayon::prelude::*;

use crate::checkpoint::Checkpoint;
use crate::corpus::{Corpus, Split};
use crate::error::{Error, Result};
use crate::features::NodeFeatures;
use crate::metrics::MetricsReport;
use crate::model::{self, Architecture, ForwardPass, Gradients, ModelParams, DEFAULT_HIDDEN_DIM};
use crate::textgraph::TextGraph;

pub const DEFAULT_LR_GCN: f64 = 1e-3;
pub const DEFAULT_LR_EMB: f64 = 1e-5;
pub const DEFAULT_MAX_EPOCHS: usize = 200;
pub const DEFAULT_PATIENCE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRates {
    /// W1, W2 and W_aux.
    pub gcn: f64,
    /// Trainable document feature rows.
    pub emb: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr_gcn: f64,
    pub lr_emb: f64,
    pub max_epochs: usize,
    /// Epochs without dev improvement before stopping; `None` disables
    /// early stopping.
    pub patience: Option<usize>,
    pub seed: u64,
    pub hidden_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_gcn: DEFAULT_LR_GCN,
            lr_emb: DEFAULT_LR_EMB,
            max_epochs: DEFAULT_MAX_EPOCHS,
            patience: Some(DEFAULT_PATIENCE),
            seed: 0,
            hidden_dim: DEFAULT_HIDDEN_DIM,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_gcn > 0.0 && self.lr_emb > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.patience == Some(0) {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be at least 1".into()));
        }
        Ok(())
    }

    pub fn learning_rates(&self) -> LearningRates {
        LearningRates {
            gcn: self.lr_gcn,
            emb: self.lr_emb,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    m: Array2<f64>,
    v: Array2<f64>,
}

impl Moments {
    fn like(p: &Array2<f64>) -> Self {
        Moments {
            m: Array2::zeros(p.raw_dim()),
            v: Array2::zeros(p.raw_dim()),
        }
    }
}

/// Adam moments for each parameter tensor, in W1, W2, W_aux, X_doc order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    slots: [Option<Moments>; 4],
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            slots: [
                params.gcn.as_ref().map(|g| Moments::like(&g.w1)),
                params.gcn.as_ref().map(|g| Moments::like(&g.w2)),
                params.aux.as_ref().map(|a| Moments::like(&a.w_aux)),
                params.x_doc.as_ref().map(Moments::like),
            ],
        }
    }
}

fn param_slots(params: &mut ModelParams) -> [Option<&mut Array2<f64>>; 4] {
    let (w1, w2) = match params.gcn.as_mut() {
        Some(g) => (Some(&mut g.w1), Some(&mut g.w2)),
        None => (None, None),
    };
    [
        w1,
        w2,
        params.aux.as_mut().map(|a| &mut a.w_aux),
        params.x_doc.as_mut(),
    ]
}

const SLOT_NAMES: [&str; 4] = ["W1", "W2", "W_aux", "X_doc"];

/// One bias-corrected Adam update. W1, W2 and W_aux use `lrs.gcn`; the
/// document feature rows use `lrs.emb`.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &Gradients,
    state: &mut AdamState,
    lrs: LearningRates,
) -> Result<()> {
    let grad_slots = [&grads.w1, &grads.w2, &grads.w_aux, &grads.x_doc];
    let mut slots = param_slots(params);

    for k in 0..4 {
        let (p, g, mo) = (&slots[k], grad_slots[k], &state.slots[k]);
        let ok = match (p, g, mo) {
            (Some(p), Some(g), Some(mo)) => p.dim() == g.dim() && p.dim() == mo.m.dim(),
            (Some(p), None, Some(mo)) => p.dim() == mo.m.dim(),
            (None, None, None) => true,
            _ => false,
        };
        if !ok {
            return Err(Error::DimensionMismatch {
                context: "adam step",
                expected: format!("{} gradient matching parameter", SLOT_NAMES[k]),
                found: format!(
                    "param {:?}, grad {:?}",
                    p.as_ref().map(|p| p.dim()),
                    g.as_ref().map(|g| g.dim())
                ),
            });
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    for k in 0..4 {
        let (Some(p), Some(mo)) = (slots[k].as_deref_mut(), state.slots[k].as_mut()) else {
            continue;
        };
        let lr = if k == 3 { lrs.emb } else { lrs.gcn };
        let zero;
        let g = match grad_slots[k] {
            Some(g) => g,
            None => {
                zero = Array2::zeros(p.raw_dim());
                &zero
            }
        };
        Zip::from(p)
            .and(&mut mo.m)
            .and(&mut mo.v)
            .and(g)
            .for_each(|p, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_macro_f1: Option<f64>,
    pub dev_weighted_f1: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,dev_macro_f1,dev_weighted_f1\n");
        for r in &self.records {
            writeln!(
                s,
                "{},{},{},{}",
                r.epoch,
                r.train_loss,
                opt(r.dev_macro_f1),
                opt(r.dev_weighted_f1)
            )
            .unwrap();
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("epoch,train_loss,dev_macro_f1,dev_weighted_f1") {
            return Err(Error::Config("history CSV has an unexpected header".into()));
        }
        let bad = |line: &str| Error::Config(format!("bad history row {line:?}"));
        let parse_opt = |s: &str, line: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(line))
            }
        };
        let records = lines
            .map(|line| {
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 4 {
                    return Err(bad(line));
                }
                Ok(EpochRecord {
                    epoch: f[0].parse().map_err(|_| bad(line))?,
                    train_loss: f[1].parse().map_err(|_| bad(line))?,
                    dev_macro_f1: parse_opt(f[2], line)?,
                    dev_weighted_f1: parse_opt(f[3], line)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(TrainHistory { records })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.train_loss).collect()
    }
}

/// Metrics of one split from a forward pass; `None` when the split has no
/// labeled documents.
pub fn evaluate_split(
    pass: &ForwardPass,
    corpus: &Corpus,
    split: Split,
) -> Result<Option<MetricsReport>> {
    let labeled = corpus.labeled(split);
    if labeled.is_empty() {
        return Ok(None);
    }
    let preds = pass.predictions();
    let golds: Vec<usize> = labeled.iter().map(|&(_, y)| y).collect();
    let picked: Vec<usize> = labeled.iter().map(|&(i, _)| preds[i]).collect();
    MetricsReport::evaluate(&golds, &picked, corpus.labels().names()).map(Some)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the last update.
    pub params: ModelParams,
    pub history: TrainHistory,
    /// Parameters with the best dev macro F1 (final parameters when there
    /// is no dev split).
    pub best: Checkpoint,
    pub best_dev: Option<(f64, f64)>,
}

/// Full-batch training. Each epoch runs one forward pass, records the train
/// loss and dev scores of the current parameters, then applies one Adam
/// update.
pub fn train(
    graph: &TextGraph,
    features: &NodeFeatures,
    corpus: &Corpus,
    arch: Architecture,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if graph.n_doc != corpus.n_docs() || features.n_doc != corpus.n_docs() {
        return Err(Error::DimensionMismatch {
            context: "training inputs",
            expected: format!("{} documents", corpus.n_docs()),
            found: format!("graph {}, features {}", graph.n_doc, features.n_doc),
        });
    }
    if features.n_nodes() != graph.n_nodes() {
        return Err(Error::DimensionMismatch {
            context: "training inputs",
            expected: format!("{} feature rows", graph.n_nodes()),
            found: format!("{}", features.n_nodes()),
        });
    }
    let targets = corpus.training_targets();
    if targets.is_empty() {
        return Err(Error::EmptyMask);
    }
    let has_dev = !corpus.labeled(Split::Dev).is_empty();
    if config.patience.is_some() && !has_dev && config.max_epochs > 0 {
        return Err(Error::NoDevDocuments);
    }

    let mut params = ModelParams::init(
        arch,
        features,
        config.hidden_dim,
        corpus.n_classes(),
        config.seed,
    );
    let mut state = AdamState::new(&params);
    let mut history = TrainHistory::default();
    let checkpoint = |params: &ModelParams, epoch| Checkpoint {
        arch,
        params: params.clone(),
        seed: config.seed,
        epoch,
    };
    let mut best = checkpoint(&params, 0);
    let mut best_dev: Option<(f64, f64)> = None;
    let mut stale = 0;
    let a_norm = &graph.normalized;

    for epoch in 1..=config.max_epochs {
        let pass = model::forward(arch, a_norm, features, &params)?;
        let loss = model::nll_loss(&pass.z, &targets)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, loss });
        }
        let dev = evaluate_split(&pass, corpus, Split::Dev)?;
        history.records.push(EpochRecord {
            epoch,
            train_loss: loss,
            dev_macro_f1: dev.as_ref().map(|r| r.macro_f1),
            dev_weighted_f1: dev.as_ref().map(|r| r.weighted_f1),
        });
        // Ties move the checkpoint forward; only strict gains reset patience.
        if let Some(r) = &dev {
            let previous = best_dev.map(|(m, _)| m);
            if previous.is_none_or(|m| r.macro_f1 >= m) {
                best_dev = Some((r.macro_f1, r.weighted_f1));
                best = checkpoint(&params, epoch - 1);
            }
            if previous.is_none_or(|m| r.macro_f1 > m) {
                stale = 0;
            } else {
                stale += 1;
            }
        }

        let grads = model::backward(&pass, a_norm, &params, &targets)?;
        adam_step(&mut params, &grads, &mut state, config.learning_rates())?;
        if !params.all_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                loss: f64::NAN,
            });
        }
        if config.patience.is_some_and(|p| stale >= p) {
            break;
        }
    }
    if !has_dev {
        best = checkpoint(&params, history.records.len());
    }
    Ok(TrainOutcome {
        params,
        history,
        best,
        best_dev,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub lambda: f64,
    pub dev_macro_f1: f64,
    pub dev_weighted_f1: f64,
}

pub fn default_lambda_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Highest dev macro F1; ties go to the larger λ.
pub fn pick_lambda(points: &[SweepPoint]) -> Result<f64> {
    points
        .iter()
        .max_by(|a, b| {
            a.dev_macro_f1
                .total_cmp(&b.dev_macro_f1)
                .then(a.lambda.total_cmp(&b.lambda))
        })
        .map(|p| p.lambda)
        .ok_or(Error::EmptyGrid)
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = String::from("lambda,dev_macro_f1,dev_weighted_f1\n");
    for p in points {
        writeln!(s, "{},{},{}", p.lambda, p.dev_macro_f1, p.dev_weighted_f1).unwrap();
    }
    s
}

/// Trains one fused model per grid value (same seed each time) and returns
/// the selected λ with every grid point's best dev scores.
pub fn select_lambda(
    graph: &TextGraph,
    features: &NodeFeatures,
    corpus: &Corpus,
    config: &TrainConfig,
    grid: &[f64],
) -> Result<(f64, Vec<SweepPoint>)> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if corpus.labeled(Split::Dev).is_empty() {
        return Err(Error::NoDevDocuments);
    }
    let archs = grid
        .iter()
        .map(|&l| Architecture::fused(l))
        .collect::<Result<Vec<_>>>()?;
    let points = grid
        .par_iter()
        .zip(archs)
        .map(|(&lambda, arch)| {
            let out = train(graph, features, corpus, arch, config)?;
            let (m, w) = out.best_dev.unwrap_or((0.0, 0.0));
            Ok(SweepPoint {
                lambda,
                dev_macro_f1: m,
                dev_weighted_f1: w,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((pick_lambda(&points)?, points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AuxHeadParams;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn scalar_params(w: f64, x: f64) -> ModelParams {
        ModelParams {
            gcn: None,
            aux: Some(AuxHeadParams { w_aux: array![[w]] }),
            x_doc: Some(array![[x]]),
        }
    }

    fn grads(w: f64, x: f64) -> Gradients {
        Gradients {
            w1: None,
            w2: None,
            w_aux: Some(array![[w]]),
            x_doc: Some(array![[x]]),
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = scalar_params(0.3, -0.2);
        let before = p.clone();
        let mut s = AdamState::new(&p);
        adam_step(
            &mut p,
            &grads(0.0, 0.0),
            &mut s,
            TrainConfig::default().learning_rates(),
        )
        .unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_magnitude() {
        let mut p = scalar_params(0.0, 0.0);
        let mut s = AdamState::new(&p);
        adam_step(
            &mut p,
            &grads(1.0, 0.0),
            &mut s,
            TrainConfig::default().learning_rates(),
        )
        .unwrap();
        let moved = -p.aux.unwrap().w_aux[[0, 0]];
        assert_abs_diff_eq!(moved, 1e-3 / (1.0 + 1e-8), epsilon = 1e-18);
        assert_abs_diff_eq!(moved, 9.99999990e-4, epsilon = 1e-12);
    }

    #[test]
    fn group_learning_rates() {
        let mut p = scalar_params(0.0, 0.0);
        let mut s = AdamState::new(&p);
        adam_step(
            &mut p,
            &grads(0.5, 0.5),
            &mut s,
            TrainConfig::default().learning_rates(),
        )
        .unwrap();
        let w = p.aux.unwrap().w_aux[[0, 0]];
        let x = p.x_doc.unwrap()[[0, 0]];
        assert_abs_diff_eq!(w / x, 100.0, epsilon = 1e-9);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = scalar_params(0.0, 0.0);
        let mut s = AdamState::new(&p);
        let mut g = grads(1.0, 1.0);
        g.w_aux = Some(array![[1.0, 2.0]]);
        assert!(adam_step(&mut p, &g, &mut s, TrainConfig::default().learning_rates()).is_err());
        let mut g = grads(1.0, 1.0);
        g.w1 = Some(array![[1.0]]);
        assert!(adam_step(&mut p, &g, &mut s, TrainConfig::default().learning_rates()).is_err());
    }

    #[test]
    fn lambda_selection() {
        let pts = |scores: &[f64], grid: &[f64]| -> Vec<SweepPoint> {
            grid.iter()
                .zip(scores)
                .map(|(&lambda, &m)| SweepPoint {
                    lambda,
                    dev_macro_f1: m,
                    dev_weighted_f1: m,
                })
                .collect()
        };
        assert_eq!(
            pick_lambda(&pts(&[0.5, 0.9, 0.7], &[0.0, 0.6, 1.0])).unwrap(),
            0.6
        );
        assert_eq!(
            pick_lambda(&pts(&[0.4, 0.4, 0.4], &[0.0, 0.6, 1.0])).unwrap(),
            1.0
        );
        assert!(matches!(pick_lambda(&[]), Err(Error::EmptyGrid)));
    }

    #[test]
    fn default_grid_has_endpoints() {
        let g = default_lambda_grid();
        assert_eq!(g.len(), 11);
        assert_eq!((g[0], g[10]), (0.0, 1.0));
        assert_eq!(g[6], 0.6);
    }

    #[test]
    fn history_csv_round_trip() {
        let h = TrainHistory {
            records: vec![
                EpochRecord {
                    epoch: 1,
                    train_loss: std::f64::consts::LN_2,
                    dev_macro_f1: Some(0.5),
                    dev_weighted_f1: Some(1.0 / 3.0),
                },
                EpochRecord {
                    epoch: 2,
                    train_loss: 0.1,
                    dev_macro_f1: None,
                    dev_weighted_f1: None,
                },
            ],
        };
        assert_eq!(TrainHistory::from_csv(&h.to_csv()).unwrap(), h);
    }
}
