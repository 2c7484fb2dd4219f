use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub weighted_f1: f64,
    pub macro_f1: f64,
}

impl Scores {
    pub fn minus(self, other: Scores) -> Scores {
        Scores {
            weighted_f1: self.weighted_f1 - other.weighted_f1,
            macro_f1: self.macro_f1 - other.macro_f1,
        }
    }
}

pub const FULL: &str = "full model";
pub const WITHOUT_GCN: &str = "w/o GCN";
pub const WITHOUT_EMBEDDING: &str = "w/o embedding head";

/// Three configurations per task plus the drop of each ablation relative to
/// the full model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub tasks: Vec<String>,
    pub full: Vec<Scores>,
    pub without_gcn: Vec<Scores>,
    pub without_embedding: Vec<Scores>,
}

impl AblationReport {
    pub fn new() -> Self {
        AblationReport {
            tasks: Vec::new(),
            full: Vec::new(),
            without_gcn: Vec::new(),
            without_embedding: Vec::new(),
        }
    }

    pub fn push(
        &mut self,
        task: &str,
        full: Scores,
        without_gcn: Scores,
        without_embedding: Scores,
    ) {
        self.tasks.push(task.to_owned());
        self.full.push(full);
        self.without_gcn.push(without_gcn);
        self.without_embedding.push(without_embedding);
    }

    pub fn decrease_without_gcn(&self) -> Vec<Scores> {
        self.full
            .iter()
            .zip(&self.without_gcn)
            .map(|(f, a)| f.minus(*a))
            .collect()
    }

    pub fn decrease_without_embedding(&self) -> Vec<Scores> {
        self.full
            .iter()
            .zip(&self.without_embedding)
            .map(|(f, a)| f.minus(*a))
            .collect()
    }

    fn rows(&self) -> [(&'static str, Vec<Scores>); 5] {
        [
            (FULL, self.full.clone()),
            (WITHOUT_GCN, self.without_gcn.clone()),
            ("decrease w/o GCN", self.decrease_without_gcn()),
            (WITHOUT_EMBEDDING, self.without_embedding.clone()),
            (
                "decrease w/o embedding head",
                self.decrease_without_embedding(),
            ),
        ]
    }

    /// `row,task,weighted_f1,macro_f1`, one line per row and task.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,task,weighted_f1,macro_f1\n");
        for (name, scores) in self.rows() {
            for (task, sc) in self.tasks.iter().zip(scores) {
                writeln!(s, "{name},{task},{},{}", sc.weighted_f1, sc.macro_f1).unwrap();
            }
        }
        s
    }

    /// Parses the configuration rows back; decrease rows are recomputed and
    /// checked against the file.
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Config(format!("ablation CSV: {msg}"));
        let mut lines = text.lines();
        if lines.next() != Some("row,task,weighted_f1,macro_f1") {
            return Err(bad("unexpected header".into()));
        }
        let mut rows: Vec<(String, String, Scores)> = Vec::new();
        for line in lines {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad(format!("bad line {line:?}")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| bad(format!("bad number {s:?}")))
            };
            rows.push((
                f[0].to_owned(),
                f[1].to_owned(),
                Scores {
                    weighted_f1: num(f[2])?,
                    macro_f1: num(f[3])?,
                },
            ));
        }
        let mut report = AblationReport::new();
        let pick = |name: &str| -> Vec<(String, Scores)> {
            rows.iter()
                .filter(|(n, _, _)| n == name)
                .map(|(_, t, s)| (t.clone(), *s))
                .collect()
        };
        let (full, wo_gcn, wo_emb) = (pick(FULL), pick(WITHOUT_GCN), pick(WITHOUT_EMBEDDING));
        if full.len() != wo_gcn.len() || full.len() != wo_emb.len() {
            return Err(bad("configuration rows do not line up".into()));
        }
        for ((f, g), e) in full.iter().zip(&wo_gcn).zip(&wo_emb) {
            report.push(&f.0, f.1, g.1, e.1);
        }
        if report.to_csv() != text {
            return Err(bad("decrease rows disagree with configuration rows".into()));
        }
        Ok(report)
    }

    /// Human-readable table with one column pair (wF1, mF1) per task, in
    /// percent.
    pub fn to_table(&self, feature_note: &str) -> String {
        let mut s = String::new();
        writeln!(s, "Ablation ({feature_note})").unwrap();
        write!(s, "{:<30}", "").unwrap();
        for t in &self.tasks {
            write!(s, "{:>22}", t).unwrap();
        }
        writeln!(s).unwrap();
        write!(s, "{:<30}", "").unwrap();
        for _ in &self.tasks {
            write!(s, "{:>11}{:>11}", "wF1", "mF1").unwrap();
        }
        writeln!(s).unwrap();
        for (name, scores) in self.rows() {
            write!(s, "{name:<30}").unwrap();
            for sc in scores {
                write!(
                    s,
                    "{:>11.2}{:>11.2}",
                    sc.weighted_f1 * 100.0,
                    sc.macro_f1 * 100.0
                )
                .unwrap();
            }
            writeln!(s).unwrap();
        }
        s
    }
}

impl Default for AblationReport {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sc(w: f64, m: f64) -> Scores {
        Scores {
            weighted_f1: w,
            macro_f1: m,
        }
    }

    #[test]
    fn decrease_is_subtraction() {
        let mut r = AblationReport::new();
        r.push("t", sc(0.90, 0.88), sc(0.85, 0.80), sc(0.70, 0.60));
        let d = r.decrease_without_gcn()[0];
        assert!((d.weighted_f1 - 0.05).abs() < 1e-12);
        assert!((d.macro_f1 - 0.08).abs() < 1e-12);
        let d = r.decrease_without_embedding()[0];
        assert!((d.weighted_f1 - 0.20).abs() < 1e-12);
    }

    #[test]
    fn layout_and_round_trip() {
        let mut r = AblationReport::new();
        r.push("sentiment", sc(0.9, 0.8), sc(0.85, 0.7), sc(0.6, 0.5));
        r.push("topic", sc(0.95, 0.9), sc(0.9, 0.85), sc(0.8, 0.75));
        let csv = r.to_csv();
        let config_rows = csv
            .lines()
            .skip(1)
            .filter(|l| !l.starts_with("decrease"))
            .count();
        assert_eq!(config_rows, 3 * 2);
        assert_eq!(AblationReport::from_csv(&csv).unwrap(), r);
        let table = r.to_table("identity features");
        assert!(table.contains("w/o GCN"));
        assert!(table.contains("90.00"));
    }
}
