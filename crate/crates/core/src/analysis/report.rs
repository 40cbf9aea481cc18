use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dataset-level evaluation summary. Metrics that were not computed are
/// `None` (`na` in the key=value form).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub shapes: usize,
    pub err_int: Option<f64>,
    pub err_int_vertices: usize,
    pub err_int_excluded: usize,
    pub acc_lr: Option<f64>,
    pub acc_lr_refined: Option<f64>,
    pub avg_components: Option<f64>,
    pub avg_components_refined: Option<f64>,
    pub err_mat: Option<f64>,
    pub err_mat_pairs: usize,
    /// `name: reason` for shapes left out of some metric.
    pub skipped: Vec<String>,
}

impl EvalReport {
    pub fn validate(&self) -> Result<()> {
        for acc in [self.acc_lr, self.acc_lr_refined].into_iter().flatten() {
            if !(0.5..=1.0).contains(&acc) {
                return Err(Error::Internal(format!("accuracy {acc} outside [0.5, 1]")));
            }
        }
        for e in [self.err_int, self.err_mat].into_iter().flatten() {
            if !(e >= 0.0) {
                return Err(Error::Internal(format!("negative or NaN error {e}")));
            }
        }
        Ok(())
    }

    /// One `key=value` per line in a fixed key order.
    pub fn to_key_value(&self) -> String {
        let opt = |x: Option<f64>| x.map_or_else(|| "na".to_owned(), |v| v.to_string());
        let mut out = String::new();
        let _ = writeln!(out, "shapes={}", self.shapes);
        let _ = writeln!(out, "err_int={}", opt(self.err_int));
        let _ = writeln!(out, "err_int_vertices={}", self.err_int_vertices);
        let _ = writeln!(out, "err_int_excluded={}", self.err_int_excluded);
        let _ = writeln!(out, "acc_lr={}", opt(self.acc_lr));
        let _ = writeln!(out, "acc_lr_refined={}", opt(self.acc_lr_refined));
        let _ = writeln!(out, "avg_components={}", opt(self.avg_components));
        let _ = writeln!(out, "avg_components_refined={}", opt(self.avg_components_refined));
        let _ = writeln!(out, "err_mat={}", opt(self.err_mat));
        let _ = writeln!(out, "err_mat_pairs={}", self.err_mat_pairs);
        for s in &self.skipped {
            let _ = writeln!(out, "skipped={s}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("report", format!("line {}", e.line()), e.to_string()))
    }
}
