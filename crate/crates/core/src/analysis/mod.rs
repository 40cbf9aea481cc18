//! Evaluation procedures: two-cluster partitioning, symmetry detection,
//! left/right accuracy, connected components, inter-shape matching and the
//! geodesic error metrics.

mod assembly;
mod report;

pub use assembly::{assembly_by_name, assembly_names, AssemblyInputs, FeatureAssembly};
pub use report::EvalReport;

use std::collections::HashMap;

use crate::descriptors::GroundTruth;
use crate::error::{Error, Result};
use crate::mesh::{GeodesicSolver, TriMesh};
use crate::numkernel::{Matrix, NORM_EPS};

/// 1-D two-means (Lloyd) started at the extremes. Label 1 is the cluster of
/// larger values.
pub fn cluster_two(chi: &[f64]) -> Result<Vec<u8>> {
    if chi.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 values to cluster, got {}", chi.len())));
    }
    if chi.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("non-finite chirality value"));
    }
    let mut lo = chi.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = chi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::invalid("degenerate chirality field"));
    }
    let assign = |lo: f64, hi: f64| -> Vec<u8> {
        let mid = 0.5 * (lo + hi);
        chi.iter().map(|&x| u8::from(x > mid)).collect()
    };
    let mut labels = assign(lo, hi);
    loop {
        // the extremes never cross the midpoint, so neither cluster empties
        let mean = |k: u8| {
            let (s, n) = chi
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == k)
                .fold((0.0, 0usize), |(s, n), (&x, _)| (s + x, n + 1));
            s / n as f64
        };
        lo = mean(0);
        hi = mean(1);
        let next = assign(lo, hi);
        if next == labels {
            return Ok(labels);
        }
        labels = next;
    }
}

/// `{0, 1}` labels as `{-1, +1}` chirality values.
pub fn labels_to_signs(labels: &[u8]) -> Vec<f64> {
    labels.iter().map(|&l| if l == 0 { -1.0 } else { 1.0 }).collect()
}

/// `{-1, +1}` ground-truth labels as `{0, 1}`.
pub fn lr_to_labels(lr: &[i8]) -> Vec<u8> {
    lr.iter().map(|&l| u8::from(l > 0)).collect()
}

fn unit_rows(m: &Matrix) -> Matrix {
    m.row_l2_normalize(NORM_EPS)
}

/// Row-wise argmax of `x y^T` over target columns accepted by `allow`,
/// lowest index on ties.
fn argmax_cosine(x: &Matrix, y: &Matrix, allow: impl Fn(usize, usize) -> bool) -> Result<Vec<Option<usize>>> {
    if x.cols() != y.cols() {
        return Err(Error::shape("match", format!("feature widths {} and {}", x.cols(), y.cols())));
    }
    let sim = unit_rows(x).matmul_nt(&unit_rows(y))?;
    Ok((0..x.rows())
        .map(|i| {
            let row = sim.row(i);
            let mut best: Option<usize> = None;
            for (j, &s) in row.iter().enumerate() {
                if allow(i, j) && best.map_or(true, |b| s > row[b]) {
                    best = Some(j);
                }
            }
            best
        })
        .collect())
}

/// Maps each vertex to the most similar vertex of the opposite label.
pub fn detect_symmetry(labels: &[u8], features: &Matrix) -> Result<Vec<usize>> {
    if labels.len() != features.rows() {
        return Err(Error::shape(
            "detect_symmetry",
            format!("{} labels for {} feature rows", labels.len(), features.rows()),
        ));
    }
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::invalid("empty opposite cluster"));
    }
    let best = argmax_cosine(features, features, |i, j| labels[i] != labels[j])?;
    Ok(best.into_iter().map(|b| b.expect("opposite cluster non-empty")).collect())
}

/// Maps each source vertex to its most similar target vertex.
pub fn match_shapes(source: &Matrix, target: &Matrix) -> Result<Vec<usize>> {
    if target.rows() == 0 {
        return Err(Error::invalid("target shape has no vertices"));
    }
    let best = argmax_cosine(source, target, |_, _| true)?;
    Ok(best.into_iter().map(|b| b.expect("target non-empty")).collect())
}

/// Geodesic distances normalized by `sqrt(area)`, one solve per source.
pub struct NormalizedGeodesics<'a> {
    solver: GeodesicSolver,
    scale: f64,
    cache: HashMap<usize, Vec<f64>>,
    mesh: &'a TriMesh,
}

impl<'a> NormalizedGeodesics<'a> {
    pub fn new(mesh: &'a TriMesh) -> Result<Self> {
        let area = mesh.surface_area();
        if !(area > 0.0) {
            return Err(Error::invalid("mesh has zero surface area"));
        }
        Ok(Self {
            solver: GeodesicSolver::new(mesh),
            scale: 1.0 / area.sqrt(),
            cache: HashMap::new(),
            mesh,
        })
    }

    pub fn distance(&mut self, a: usize, b: usize) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        let n = self.mesh.vertex_count();
        if a >= n || b >= n {
            return Err(Error::invalid(format!("vertex index out of range for {n} vertices")));
        }
        if !self.cache.contains_key(&b) {
            self.cache.insert(b, self.solver.distances_from(b)?);
        }
        Ok(self.cache[&b][a] * self.scale)
    }
}

/// Mean error and how many vertices entered it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicError {
    pub mean: f64,
    pub evaluated: usize,
    pub excluded: usize,
}

fn mean_geodesic_error(pred: &[usize], gt: &[Option<usize>], target: &TriMesh) -> Result<GeodesicError> {
    if pred.len() != gt.len() {
        return Err(Error::shape("geodesic_error", format!("{} predictions for {} references", pred.len(), gt.len())));
    }
    let mut geo = NormalizedGeodesics::new(target)?;
    let (mut sum, mut evaluated) = (0.0, 0usize);
    for (&p, g) in pred.iter().zip(gt) {
        if let Some(g) = *g {
            sum += geo.distance(p, g)?;
            evaluated += 1;
        }
    }
    if evaluated == 0 {
        return Err(Error::invalid("no annotated vertices to evaluate"));
    }
    Ok(GeodesicError {
        mean: sum / evaluated as f64,
        evaluated,
        excluded: pred.len() - evaluated,
    })
}

/// Mean normalized geodesic distance between predicted and annotated
/// symmetric counterparts; unannotated vertices are excluded.
pub fn err_intrinsic(pred: &[usize], gt: &GroundTruth, mesh: &TriMesh) -> Result<GeodesicError> {
    if pred.len() != mesh.vertex_count() {
        return Err(Error::shape("err_intrinsic", "prediction length differs from vertex count"));
    }
    mean_geodesic_error(pred, &gt.sym_map, mesh)
}

/// Mean normalized geodesic distance on the target between predicted and
/// ground-truth correspondences.
pub fn err_matching(pred: &[usize], gt: &[Option<usize>], target: &TriMesh) -> Result<GeodesicError> {
    mean_geodesic_error(pred, gt, target)
}

/// `max(hit, 1 - hit)`, where `hit` is the mean over shapes of the fraction
/// of vertices whose chirality sign (0 counts as +1) matches the label.
pub fn acc_left_right<P: AsRef<[f64]>, G: AsRef<[i8]>>(pred: &[P], gt: &[G]) -> Result<f64> {
    if pred.is_empty() || pred.len() != gt.len() {
        return Err(Error::shape("acc_left_right", format!("{} predictions for {} shapes", pred.len(), gt.len())));
    }
    // hit and 1 - hit are accumulated separately so a global sign flip
    // swaps them exactly
    let (mut hit, mut miss) = (0.0, 0.0);
    for (p, g) in pred.iter().zip(gt) {
        let (p, g) = (p.as_ref(), g.as_ref());
        if p.len() != g.len() || p.is_empty() {
            return Err(Error::shape("acc_left_right", format!("{} values for {} labels", p.len(), g.len())));
        }
        let agree = p.iter().zip(g).filter(|(&x, &l)| (if x >= 0.0 { 1 } else { -1 }) == l).count();
        hit += agree as f64 / p.len() as f64;
        miss += (p.len() - agree) as f64 / p.len() as f64;
    }
    let shapes = pred.len() as f64;
    Ok((hit / shapes).max(miss / shapes))
}

/// Mean connected-component count of labeled meshes.
pub fn avg_components(shapes: &[(&TriMesh, &[u8])]) -> Result<f64> {
    if shapes.is_empty() {
        return Err(Error::invalid("no shapes"));
    }
    let mut total = 0usize;
    for (mesh, labels) in shapes {
        total += mesh.connected_components(labels)?;
    }
    Ok(total as f64 / shapes.len() as f64)
}

/// Vertices whose prediction lands on the mirror image of the true target.
pub fn count_mirror_flips(pred: &[usize], gt: &[Option<usize>], target_sym: &[Option<usize>]) -> usize {
    pred.iter()
        .zip(gt)
        .filter(|(&p, g)| match g {
            Some(g) => p != *g && target_sym.get(*g).copied().flatten() == Some(p),
            None => false,
        })
        .count()
}
