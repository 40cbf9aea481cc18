//! The five unsupervised training losses and their weighted total.
//!
//! Every loss is recorded on a [`Graph`] so gradients flow back to the model
//! parameters; the plain functions (`loss_dis`, ...) evaluate the same
//! recordings on constant inputs.

mod registry;

pub use registry::{
    record_objective, BoundaryLoss, ConsistencyLoss, DisentangleLoss, LossInputs, LossRegistry, LossTerm, Objective,
    ReconstructionLoss, SimilarityLoss,
};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::TupleSets;
use crate::numkernel::{Graph, Matrix, Var};

/// Denominator guard of the min-max normalization in the consistency loss.
pub const MIN_MAX_EPS: f64 = 1e-12;

/// Default number of vertices sampled for the consistency loss.
pub const DEFAULT_CONSISTENCY_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Weight of the similarity loss.
    pub sim: f64,
    /// Weight of the reconstruction loss.
    pub rec: f64,
    /// Weight of the boundary loss.
    pub bou: f64,
    /// Weight of the consistency loss.
    pub con: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            sim: 1.0,
            rec: 0.2,
            bou: 10.0,
            con: 2.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("sim", self.sim), ("rec", self.rec), ("bou", self.bou), ("con", self.con)] {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::invalid(format!("loss weight `{name}` must be finite and >= 0, got {w}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossComponents {
    pub dis: f64,
    pub sim: f64,
    pub rec: f64,
    pub bou: f64,
    pub con: f64,
}

impl LossComponents {
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "dis" => self.dis,
            "sim" => self.sim,
            "rec" => self.rec,
            "bou" => self.bou,
            "con" => self.con,
            _ => return None,
        })
    }

    pub(crate) fn set(&mut self, name: &str, value: f64) {
        match name {
            "dis" => self.dis = value,
            "sim" => self.sim = value,
            "rec" => self.rec = value,
            "bou" => self.bou = value,
            "con" => self.con = value,
            _ => {}
        }
    }
}

/// `dis + sim*w.sim + rec*w.rec + bou*w.bou + con*w.con`. A zero weight drops
/// its term entirely.
pub fn loss_total(c: &LossComponents, w: &LossWeights) -> Result<f64> {
    w.validate()?;
    let terms = [(c.dis, 1.0), (c.sim, w.sim), (c.rec, w.rec), (c.bou, w.bou), (c.con, w.con)];
    if let Some((v, _)) = terms.iter().find(|(v, _)| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite loss component {v}")));
    }
    Ok(terms.iter().filter(|(_, w)| *w != 0.0).map(|(v, w)| v * w).sum())
}

fn inv_sqrt_rows(g: &Graph, v: Var) -> f64 {
    1.0 / (g.value(v).rows().max(1) as f64).sqrt()
}

fn same_shape(g: &Graph, op: &'static str, a: Var, b: Var) -> Result<()> {
    if g.value(a).shape() != g.value(b).shape() {
        return Err(Error::shape(op, format!("{:?} vs {:?}", g.value(a).shape(), g.value(b).shape())));
    }
    Ok(())
}

/// `-||chi - chi_flipped|| / sqrt(|V|)`.
pub fn record_dis(g: &mut Graph, chi: Var, chi_flipped: Var) -> Result<Var> {
    same_shape(g, "loss_dis", chi, chi_flipped)?;
    let s = inv_sqrt_rows(g, chi);
    let d = g.sub(chi, chi_flipped)?;
    let n = g.norm(d);
    Ok(g.scale(n, -s))
}

/// `||agno - agno_flipped||_F / sqrt(|V|)`.
pub fn record_sim(g: &mut Graph, agno: Var, agno_flipped: Var) -> Result<Var> {
    same_shape(g, "loss_sim", agno, agno_flipped)?;
    let s = inv_sqrt_rows(g, agno);
    let d = g.sub(agno, agno_flipped)?;
    let n = g.norm(d);
    Ok(g.scale(n, s))
}

/// `||input - reconstruction||_F / sqrt(|V|)`.
pub fn record_rec(g: &mut Graph, input: Var, reconstruction: Var) -> Result<Var> {
    same_shape(g, "loss_rec", input, reconstruction)?;
    let s = inv_sqrt_rows(g, input);
    let d = g.sub(input, reconstruction)?;
    let n = g.norm(d);
    Ok(g.scale(n, s))
}

fn boundary_branch(g: &mut Graph, tuples: &TupleSets, chi: Var, cosine: Var) -> Result<Var> {
    let cu = g.gather_rows(chi, tuples.first())?;
    let cv = g.gather_rows(chi, tuples.middle())?;
    let cw = g.gather_rows(chi, tuples.last())?;
    let a = g.sub(cu, cv)?;
    let b = g.sub(cv, cw)?;
    let a2 = g.square(a);
    let b2 = g.square(b);
    let l = g.add(a2, b2)?;
    let score = g.sub(l, cosine)?;
    let mins = g.segment_min(score, tuples.offsets())?;
    Ok(g.sum(mins))
}

/// Boundary loss: per vertex, the best straight-through tuple score of each
/// branch, averaged over all vertices.
pub fn record_bou(g: &mut Graph, tuples: &TupleSets, chi: Var, chi_flipped: Var) -> Result<Var> {
    same_shape(g, "loss_bou", chi, chi_flipped)?;
    let n = g.value(chi).rows();
    if tuples.vertex_count() != n || g.value(chi).cols() != 1 {
        return Err(Error::shape(
            "loss_bou",
            format!("tuple sets cover {} vertices, chi is {:?}", tuples.vertex_count(), g.value(chi).shape()),
        ));
    }
    let cosine = g.input(Matrix::column(tuples.cosine()));
    let a = boundary_branch(g, tuples, chi, cosine)?;
    let b = boundary_branch(g, tuples, chi_flipped, cosine)?;
    let s = g.add(a, b)?;
    Ok(g.scale(s, 1.0 / n.max(1) as f64))
}

/// Checks that consistency sample indices are distinct and below `n`.
pub fn validate_sample(sample: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in sample {
        if i >= n {
            return Err(Error::invalid(format!("sample index {i} out of range for {n} vertices")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::invalid(format!("duplicate sample index {i}")));
        }
    }
    if sample.is_empty() {
        return Err(Error::invalid("consistency sample is empty"));
    }
    Ok(())
}

/// `min(n, m)` distinct indices drawn uniformly, in ascending order.
pub fn sample_consistency<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> Vec<usize> {
    let mut v = index::sample(rng, n, m.min(n)).into_vec();
    v.sort_unstable();
    v
}

/// Vars of the consistency intermediates of one branch.
#[derive(Debug, Clone, Copy)]
pub struct ConsistencyVars {
    /// Squared chi differences.
    pub w: Var,
    /// Agnostic cosine similarities.
    pub c: Var,
    /// Soft assignment.
    pub pi: Var,
}

pub fn record_assignment(g: &mut Graph, chi: Var, agno: Var, sample: &[usize]) -> Result<ConsistencyVars> {
    let cs = g.gather_rows(chi, sample)?;
    let w = g.pairwise_sq_diff(cs)?;
    let s = g.gather_rows(agno, sample)?;
    let c = g.matmul_nt(s, s)?;
    let nw = g.min_max_normalize(w, MIN_MAX_EPS);
    let nc = g.min_max_normalize(c, MIN_MAX_EPS);
    let pi = g.mul(nw, nc)?;
    Ok(ConsistencyVars { w, c, pi })
}

/// `I - pi * pi` for a square assignment.
pub fn record_involution_residual(g: &mut Graph, pi: Var) -> Result<Var> {
    let m = g.value(pi).rows();
    let sq = g.matmul(pi, pi)?;
    let eye = g.input(Matrix::identity(m));
    g.sub(eye, sq)
}

/// Consistency loss: `||[I - pi^2, I - pibar^2]||_F / m` over the sampled
/// vertices.
pub fn record_con(g: &mut Graph, chi: Var, agno: Var, chi_flipped: Var, agno_flipped: Var, sample: &[usize]) -> Result<Var> {
    same_shape(g, "loss_con", chi, chi_flipped)?;
    same_shape(g, "loss_con", agno, agno_flipped)?;
    let n = g.value(chi).rows();
    if g.value(agno).rows() != n {
        return Err(Error::shape("loss_con", "chi and agno row counts differ"));
    }
    validate_sample(sample, n)?;
    let a = record_assignment(g, chi, agno, sample)?;
    let b = record_assignment(g, chi_flipped, agno_flipped, sample)?;
    let ra = record_involution_residual(g, a.pi)?;
    let rb = record_involution_residual(g, b.pi)?;
    let r = g.concat_cols(ra, rb)?;
    let nr = g.norm(r);
    Ok(g.scale(nr, 1.0 / sample.len() as f64))
}

fn col(g: &mut Graph, xs: &[f64]) -> Var {
    g.input(Matrix::column(xs))
}

pub fn loss_dis(chi: &[f64], chi_flipped: &[f64]) -> Result<f64> {
    let mut g = Graph::new();
    let (a, b) = (col(&mut g, chi), col(&mut g, chi_flipped));
    let l = record_dis(&mut g, a, b)?;
    Ok(g.scalar(l))
}

pub fn loss_sim(agno: &Matrix, agno_flipped: &Matrix) -> Result<f64> {
    let mut g = Graph::new();
    let (a, b) = (g.input(agno.clone()), g.input(agno_flipped.clone()));
    let l = record_sim(&mut g, a, b)?;
    Ok(g.scalar(l))
}

pub fn loss_rec(input_stack: &Matrix, reconstruction: &Matrix) -> Result<f64> {
    let mut g = Graph::new();
    let (a, b) = (g.input(input_stack.clone()), g.input(reconstruction.clone()));
    let l = record_rec(&mut g, a, b)?;
    Ok(g.scalar(l))
}

pub fn loss_bou(tuples: &TupleSets, chi: &[f64], chi_flipped: &[f64]) -> Result<f64> {
    let mut g = Graph::new();
    let (a, b) = (col(&mut g, chi), col(&mut g, chi_flipped));
    let l = record_bou(&mut g, tuples, a, b)?;
    Ok(g.scalar(l))
}

pub fn loss_con(chi: &[f64], agno: &Matrix, chi_flipped: &[f64], agno_flipped: &Matrix, sample: &[usize]) -> Result<f64> {
    let mut g = Graph::new();
    let (a, b) = (col(&mut g, chi), col(&mut g, chi_flipped));
    let (sa, sb) = (g.input(agno.clone()), g.input(agno_flipped.clone()));
    let l = record_con(&mut g, a, sa, b, sb, sample)?;
    Ok(g.scalar(l))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyIntermediates {
    pub w: Matrix,
    pub c: Matrix,
    pub pi: Matrix,
}

pub fn consistency_intermediates(chi: &[f64], agno: &Matrix, sample: &[usize]) -> Result<ConsistencyIntermediates> {
    validate_sample(sample, chi.len())?;
    let mut g = Graph::new();
    let a = col(&mut g, chi);
    let s = g.input(agno.clone());
    let v = record_assignment(&mut g, a, s, sample)?;
    Ok(ConsistencyIntermediates {
        w: g.value(v.w).clone(),
        c: g.value(v.c).clone(),
        pi: g.value(v.pi).clone(),
    })
}

/// `||I - pi^2||_F`, the contribution of one branch before the `1/m` scale.
pub fn involution_residual(pi: &Matrix) -> Result<f64> {
    if pi.rows() != pi.cols() {
        return Err(Error::shape("involution_residual", format!("{:?} is not square", pi.shape())));
    }
    let mut g = Graph::new();
    let p = g.input(pi.clone());
    let r = record_involution_residual(&mut g, p)?;
    Ok(g.value(r).frobenius_norm())
}
