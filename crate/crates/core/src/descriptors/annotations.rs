//! Ground-truth annotation files.
//!
//! ASCII, one line per vertex: `<sym_index> <lr_label> [<template_index>]`.
//! `sym_index` is `-1` for unannotated vertices, `lr_label` is `-1` or `+1`,
//! and the optional third column gives the vertex's index on a shared
//! template, from which inter-shape correspondences are derived. Text after
//! `#` is ignored; blank lines are skipped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    /// Intrinsic symmetric counterpart of each vertex (`None` = unannotated).
    pub sym_map: Vec<Option<usize>>,
    /// Left/right label in `{-1, +1}`.
    pub lr_labels: Vec<i8>,
    /// Index on a shared template, when the shape has one.
    pub template: Option<Vec<usize>>,
}

impl GroundTruth {
    pub fn vertex_count(&self) -> usize {
        self.lr_labels.len()
    }

    pub fn validate(&self, vertex_count: usize) -> Result<()> {
        if self.sym_map.len() != vertex_count || self.lr_labels.len() != vertex_count {
            return Err(Error::shape(
                "ground_truth",
                format!(
                    "{} symmetry entries and {} labels for {vertex_count} vertices",
                    self.sym_map.len(),
                    self.lr_labels.len()
                ),
            ));
        }
        if let Some(v) = self.sym_map.iter().flatten().find(|&&v| v >= vertex_count) {
            return Err(Error::invalid(format!("symmetry index {v} out of range")));
        }
        if let Some(l) = self.lr_labels.iter().find(|&&l| l != 1 && l != -1) {
            return Err(Error::invalid(format!("left/right label {l} is not -1 or +1")));
        }
        if let Some(t) = &self.template {
            if t.len() != vertex_count {
                return Err(Error::shape("ground_truth", "template column length mismatch"));
            }
        }
        Ok(())
    }

    /// For each vertex of `self`, the vertex of `target` with the same
    /// template index (`None` when either shape lacks a template or the
    /// index is absent on the target).
    pub fn correspondence_to(&self, target: &GroundTruth) -> Option<Vec<Option<usize>>> {
        let (src, dst) = (self.template.as_ref()?, target.template.as_ref()?);
        let mut lookup = std::collections::HashMap::with_capacity(dst.len());
        for (i, &t) in dst.iter().enumerate() {
            lookup.entry(t).or_insert(i);
        }
        Some(src.iter().map(|t| lookup.get(t).copied()).collect())
    }
}

pub fn parse_annotations(text: &str, origin: &str) -> Result<GroundTruth> {
    let mut sym_map = Vec::new();
    let mut lr_labels = Vec::new();
    let mut template: Vec<usize> = Vec::new();
    let mut columns = None;
    for (ln, line) in text.lines().enumerate() {
        let loc = || format!("line {}", ln + 1);
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&tok.len()) {
            return Err(Error::parse(origin, loc(), "expected `<sym_index> <lr_label> [<template_index>]`"));
        }
        match columns {
            None => columns = Some(tok.len()),
            Some(c) if c != tok.len() => {
                return Err(Error::parse(origin, loc(), "inconsistent column count"));
            }
            _ => {}
        }
        let sym: i64 = tok[0]
            .parse()
            .map_err(|_| Error::parse(origin, loc(), format!("bad symmetry index `{}`", tok[0])))?;
        sym_map.push(match sym {
            -1 => None,
            s if s >= 0 => Some(s as usize),
            s => return Err(Error::parse(origin, loc(), format!("negative symmetry index {s}"))),
        });
        let lr: i8 = match tok[1].trim_start_matches('+') {
            "1" => 1,
            "-1" => -1,
            other => return Err(Error::parse(origin, loc(), format!("bad left/right label `{other}`"))),
        };
        lr_labels.push(lr);
        if let Some(t) = tok.get(2) {
            template.push(
                t.parse()
                    .map_err(|_| Error::parse(origin, loc(), format!("bad template index `{t}`")))?,
            );
        }
    }
    let truth = GroundTruth {
        sym_map,
        template: (columns == Some(3)).then_some(template),
        lr_labels,
    };
    truth
        .validate(truth.lr_labels.len())
        .map_err(|e| Error::parse(origin, "end of file", e.to_string()))?;
    Ok(truth)
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<GroundTruth> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text, &path.display().to_string())
}

pub fn save_annotations(truth: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("# sym_index lr_label");
    if truth.template.is_some() {
        out += " template_index";
    }
    out.push('\n');
    for i in 0..truth.vertex_count() {
        let sym = truth.sym_map[i].map_or(-1, |s| s as i64);
        let _ = write!(out, "{sym} {}", truth.lr_labels[i]);
        if let Some(t) = &truth.template {
            let _ = write!(out, " {}", t[i]);
        }
        out.push('\n');
    }
    let path = path.as_ref();
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_with_comments_and_sentinel() {
        let gt = parse_annotations("# header\n1 -1\n0 +1 # pair\n\n-1 1\n", "mem").unwrap();
        assert_eq!(gt.sym_map, vec![Some(1), Some(0), None]);
        assert_eq!(gt.lr_labels, vec![-1, 1, 1]);
        assert!(gt.template.is_none());
    }

    #[test]
    fn bad_lines_rejected() {
        assert!(parse_annotations("0 2\n", "mem").is_err());
        assert!(parse_annotations("5 1\n", "mem").is_err());
        assert!(parse_annotations("0 1 0\n0 1\n", "mem").is_err());
        let err = parse_annotations("0 1\nx 1\n", "mem").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn template_correspondence() {
        let a = parse_annotations("1 1 10\n0 -1 11\n", "mem").unwrap();
        let b = parse_annotations("1 1 11\n0 -1 10\n", "mem").unwrap();
        assert_eq!(a.correspondence_to(&b).unwrap(), vec![Some(1), Some(0)]);
    }

    #[test]
    fn save_load_round_trip() {
        let gt = GroundTruth {
            sym_map: vec![Some(2), None, Some(0)],
            lr_labels: vec![1, 1, -1],
            template: Some(vec![0, 1, 2]),
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ann");
        save_annotations(&gt, &p).unwrap();
        assert_eq!(load_annotations(&p).unwrap(), gt);
    }
}
