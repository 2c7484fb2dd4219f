//! Confusion matrix, per-class precision/recall/F1, macro and weighted F1.
//!
//! Any 0/0 ratio is reported as 0, so classes that are never predicted or
//! never present still count (as zeros) in the macro average.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are gold classes, columns are predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Gold count per class.
    pub fn supports(&self) -> Vec<u64> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }
}

pub fn confusion(golds: &[usize], preds: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if golds.len() != preds.len() {
        return Err(Error::LengthMismatch {
            golds: golds.len(),
            preds: preds.len(),
        });
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&g, &p) in golds.iter().zip(preds) {
        for label in [g, p] {
            if label >= n_classes {
                return Err(Error::IndexOutOfRange {
                    what: "label",
                    index: label,
                    limit: n_classes,
                });
            }
        }
        counts[g][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassMetrics {
    pub fn support(&self) -> u64 {
        self.tp + self.fn_
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn per_class_prf(cm: &ConfusionMatrix) -> Vec<ClassMetrics> {
    let n = cm.n_classes();
    let total = cm.total();
    (0..n)
        .map(|k| {
            let tp = cm.counts[k][k];
            let gold: u64 = cm.counts[k].iter().sum();
            let predicted: u64 = cm.counts.iter().map(|row| row[k]).sum();
            let (fp, fn_) = (predicted - tp, gold - tp);
            let tn = total - tp - fp - fn_;
            let precision = ratio(tp as f64, (tp + fp) as f64);
            let recall = ratio(tp as f64, (tp + fn_) as f64);
            let f1 = ratio(2.0 * precision * recall, precision + recall);
            ClassMetrics {
                tp,
                fp,
                fn_,
                tn,
                precision,
                recall,
                f1,
            }
        })
        .collect()
}

pub fn macro_f1(classes: &[ClassMetrics]) -> Result<f64> {
    if classes.is_empty() {
        return Err(Error::EmptyClassList);
    }
    Ok(classes.iter().map(|c| c.f1).sum::<f64>() / classes.len() as f64)
}

pub fn weighted_f1(classes: &[ClassMetrics], supports: &[u64]) -> Result<f64> {
    if classes.is_empty() {
        return Err(Error::EmptyClassList);
    }
    if classes.len() != supports.len() {
        return Err(Error::LengthMismatch {
            golds: supports.len(),
            preds: classes.len(),
        });
    }
    let total: u64 = supports.iter().sum();
    if total == 0 {
        return Err(Error::ZeroSupport);
    }
    let weighted: f64 = classes
        .iter()
        .zip(supports)
        .map(|(c, &w)| c.f1 * w as f64)
        .sum();
    Ok(weighted / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub class_names: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    /// Gold support per class, the weights of the weighted average.
    pub class_weights: Vec<u64>,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

impl MetricsReport {
    pub fn evaluate(golds: &[usize], preds: &[usize], class_names: &[String]) -> Result<Self> {
        let confusion = confusion(golds, preds, class_names.len())?;
        let per_class = per_class_prf(&confusion);
        let class_weights = confusion.supports();
        let macro_f1 = macro_f1(&per_class)?;
        let weighted_f1 = weighted_f1(&per_class, &class_weights)?;
        Ok(MetricsReport {
            class_names: class_names.to_vec(),
            confusion,
            per_class,
            class_weights,
            macro_f1,
            weighted_f1,
        })
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::MalformedHeader {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}
