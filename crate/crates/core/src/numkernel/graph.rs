//! Tape-based reverse-mode differentiation over dense matrices.
//!
//! Operations are recorded eagerly: every call computes its value and pushes
//! a node. [`Graph::backward`] walks the tape in reverse from a scalar root.

use crate::error::{Error, Result};

use super::matrix::Matrix;
use super::params::ParamSet;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddRow(Var, Var),
    Square(Var),
    Relu(Var),
    RowNormalize { x: Var, norms: Vec<f64>, eps: f64 },
    MinMaxNormalize { x: Var, argmin: usize, argmax: usize, range: f64 },
    Norm(Var),
    Sum(Var),
    ConcatCols(Var, Var),
    SliceCols { x: Var, start: usize },
    GatherRows { x: Var, index: Vec<usize> },
    SegmentMin { x: Var, argmin: Vec<Option<usize>> },
    PairwiseSqDiff(Var),
    SkewPart(Var),
    Cayley { s: Var, lhs: Matrix },
}

struct Node {
    value: Matrix,
    op: Op,
    param: Option<String>,
}

/// Recording of a forward computation.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of a scalar root with respect to every recorded node.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
    params: Vec<(String, usize)>,
}

impl Gradients {
    /// Gradient for an arbitrary node; zeros when the root does not depend on it.
    pub fn wrt(&self, v: Var) -> Matrix {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Matrix::zeros(r, c)
            }
        }
    }

    /// Gradient of a named parameter leaf.
    pub fn param(&self, name: &str) -> Option<Matrix> {
        self.params
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, i)| self.wrt(Var(i)))
    }

    /// Gradients for every parameter of `set`, in the set's order.
    pub fn for_params(&self, set: &ParamSet) -> Result<Vec<Matrix>> {
        set.iter()
            .map(|(name, m)| {
                Ok(self
                    .param(name)
                    .unwrap_or_else(|| Matrix::zeros(m.rows(), m.cols())))
            })
            .collect()
    }
}

fn shape_err(op: &'static str, a: &Matrix, b: &Matrix) -> Error {
    Error::shape(op, format!("{:?} vs {:?}", a.shape(), b.shape()))
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        debug_assert!(value.is_finite(), "non-finite value from {op:?}");
        self.nodes.push(Node {
            value,
            op,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    /// Named trainable leaf.
    pub fn param(&mut self, name: &str, value: Matrix) -> Var {
        let v = self.push(value, Op::Leaf);
        self.nodes[v.0].param = Some(name.to_owned());
        v
    }

    /// Registers every matrix of a parameter set as a named leaf.
    pub fn params(&mut self, set: &ParamSet) -> Vec<Var> {
        set.iter().map(|(n, m)| self.param(n, m.clone())).collect()
    }

    /// Untracked input (gradients still computed, but not reported by name).
    pub fn input(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    /// `a * b^T`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul_nt(self.value(b))?;
        Ok(self.push(v, Op::MatMulNt(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).scale(s);
        self.push(v, Op::Scale(a, s))
    }

    /// Adds a `1 x c` row vector to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, b) = (self.value(a), self.value(row));
        if b.rows() != 1 || b.cols() != x.cols() {
            return Err(shape_err("add_row", x, b));
        }
        let mut v = x.clone();
        for r in 0..v.rows() {
            for (o, bv) in v.row_mut(r).iter_mut().zip(b.data()) {
                *o += bv;
            }
        }
        Ok(self.push(v, Op::AddRow(a, row)))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x * x);
        self.push(v, Op::Square(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn row_normalize(&mut self, a: Var, eps: f64) -> Var {
        let x = self.value(a);
        let norms: Vec<f64> = (0..x.rows())
            .map(|r| x.row(r).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let v = x.row_l2_normalize(eps);
        self.push(v, Op::RowNormalize { x: a, norms, eps })
    }

    /// Global min-max rescaling `(x - min) / (max - min + eps)`.
    pub fn min_max_normalize(&mut self, a: Var, eps: f64) -> Var {
        let x = self.value(a);
        let (mut argmin, mut argmax) = (0, 0);
        for (i, &v) in x.data().iter().enumerate() {
            if v < x.data()[argmin] {
                argmin = i;
            }
            if v > x.data()[argmax] {
                argmax = i;
            }
        }
        let (lo, hi) = match x.data().len() {
            0 => (0.0, 0.0),
            _ => (x.data()[argmin], x.data()[argmax]),
        };
        let range = hi - lo + eps;
        let v = x.map(|t| (t - lo) / range);
        self.push(
            v,
            Op::MinMaxNormalize {
                x: a,
                argmin,
                argmax,
                range,
            },
        )
    }

    /// Frobenius norm (the L2 norm for vectors), as a 1x1 node.
    pub fn norm(&mut self, a: Var) -> Var {
        let v = Matrix::scalar(self.value(a).frobenius_norm());
        self.push(v, Op::Norm(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Matrix::scalar(self.value(a).data().iter().sum());
        self.push(v, Op::Sum(a))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).concat_cols(self.value(b))?;
        Ok(self.push(v, Op::ConcatCols(a, b)))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let v = self.value(a).slice_cols(start, len)?;
        Ok(self.push(v, Op::SliceCols { x: a, start }))
    }

    pub fn gather_rows(&mut self, a: Var, index: &[usize]) -> Result<Var> {
        let v = self.value(a).gather_rows(index)?;
        Ok(self.push(
            v,
            Op::GatherRows {
                x: a,
                index: index.to_vec(),
            },
        ))
    }

    /// Minimum of each contiguous segment of a column vector.
    ///
    /// `offsets` has one more entry than there are segments; segment `k`
    /// covers rows `offsets[k]..offsets[k + 1]`. Empty segments yield 0 and
    /// pass no gradient. Ties go to the lowest row.
    pub fn segment_min(&mut self, a: Var, offsets: &[usize]) -> Result<Var> {
        let x = self.value(a);
        if x.cols() != 1 || offsets.last().copied().unwrap_or(0) != x.rows() {
            return Err(Error::shape(
                "segment_min",
                format!("column of {} rows with offsets ending at {:?}", x.rows(), offsets.last()),
            ));
        }
        let segments = offsets.len().saturating_sub(1);
        let mut out = Vec::with_capacity(segments);
        let mut argmin = Vec::with_capacity(segments);
        for k in 0..segments {
            let seg = &x.data()[offsets[k]..offsets[k + 1]];
            let mut best: Option<usize> = None;
            for (i, &v) in seg.iter().enumerate() {
                if best.map_or(true, |b| v < seg[b]) {
                    best = Some(i);
                }
            }
            out.push(best.map_or(0.0, |b| seg[b]));
            argmin.push(best.map(|b| offsets[k] + b));
        }
        let v = Matrix::column(&out);
        Ok(self.push(v, Op::SegmentMin { x: a, argmin }))
    }

    /// `n x n` matrix of `(x_i - x_j)^2` from an `n x 1` column.
    pub fn pairwise_sq_diff(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.cols() != 1 {
            return Err(Error::shape("pairwise_sq_diff", format!("{:?} is not a column", x.shape())));
        }
        let n = x.rows();
        let xs = x.data();
        let mut v = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let d = xs[i] - xs[j];
                v.set(i, j, d * d);
            }
        }
        Ok(self.push(v, Op::PairwiseSqDiff(a)))
    }

    /// `(s - s^T) / 2`.
    pub fn skew_part(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a);
        if s.rows() != s.cols() {
            return Err(Error::shape("skew_part", format!("{:?} is not square", s.shape())));
        }
        let v = s.sub(&s.transpose())?.scale(0.5);
        Ok(self.push(v, Op::SkewPart(a)))
    }

    /// Cayley transform `(I - S)^{-1} (I + S)`.
    pub fn cayley(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a);
        if s.rows() != s.cols() {
            return Err(Error::shape("cayley", format!("{:?} is not square", s.shape())));
        }
        let eye = Matrix::identity(s.rows());
        let lhs = eye.sub(s)?;
        let v = lhs.solve(&eye.add(s)?)?;
        Ok(self.push(v, Op::Cayley { s: a, lhs }))
    }

    /// Reverse sweep from a 1x1 root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let rv = self.value(root);
        if rv.shape() != (1, 1) {
            return Err(Error::shape(
                "backward",
                format!("root must be scalar, got {:?}", rv.shape()),
            ));
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }

        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.param.clone().map(|p| (p, i)))
            .collect();
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
            params,
        })
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) -> Result<()> {
        let mut acc = |v: Var, delta: Matrix| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                acc(*a, g.matmul_nt(self.value(*b))?);
                acc(*b, self.value(*a).matmul_tn(g)?);
            }
            Op::MatMulNt(a, b) => {
                // y = a b^T: da = g b, db = g^T a
                acc(*a, g.matmul(self.value(*b))?);
                acc(*b, g.matmul_tn(self.value(*a))?);
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.scale(-1.0));
            }
            Op::Mul(a, b) => {
                acc(*a, g.hadamard(self.value(*b))?);
                acc(*b, g.hadamard(self.value(*a))?);
            }
            Op::Scale(a, s) => acc(*a, g.scale(*s)),
            Op::AddRow(a, row) => {
                acc(*a, g.clone());
                let mut col_sums = Matrix::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for (o, v) in col_sums.data_mut().iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
                acc(*row, col_sums);
            }
            Op::Square(a) => acc(*a, g.hadamard(&self.value(*a).scale(2.0))?),
            Op::Relu(a) => {
                let x = self.value(*a);
                let mut d = g.clone();
                for (o, &xv) in d.data_mut().iter_mut().zip(x.data()) {
                    if xv <= 0.0 {
                        *o = 0.0;
                    }
                }
                acc(*a, d);
            }
            Op::RowNormalize { x, norms, eps } => {
                let y = &node.value;
                let mut d = Matrix::zeros(g.rows(), g.cols());
                for r in 0..g.rows() {
                    if norms[r] <= *eps {
                        continue;
                    }
                    let yr = y.row(r);
                    let gr = g.row(r);
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((o, &yv), &gv) in d.row_mut(r).iter_mut().zip(yr).zip(gr) {
                        *o = (gv - yv * dot) / norms[r];
                    }
                }
                acc(*x, d);
            }
            Op::MinMaxNormalize {
                x,
                argmin,
                argmax,
                range,
            } => {
                let y = &node.value;
                let mut d = g.scale(1.0 / range);
                if !d.data().is_empty() {
                    let mut dmin = 0.0;
                    let mut dmax = 0.0;
                    for (&gv, &yv) in g.data().iter().zip(y.data()) {
                        dmin += gv * (yv - 1.0) / range;
                        dmax -= gv * yv / range;
                    }
                    d.data_mut()[*argmin] += dmin;
                    d.data_mut()[*argmax] += dmax;
                }
                acc(*x, d);
            }
            Op::Norm(a) => {
                let n = node.value.data()[0];
                let x = self.value(*a);
                if n > 0.0 {
                    acc(*a, x.scale(g.data()[0] / n));
                } else {
                    acc(*a, Matrix::zeros(x.rows(), x.cols()));
                }
            }
            Op::Sum(a) => {
                let (r, c) = self.value(*a).shape();
                acc(*a, Matrix::filled(r, c, g.data()[0]));
            }
            Op::ConcatCols(a, b) => {
                let ca = self.value(*a).cols();
                let cb = self.value(*b).cols();
                acc(*a, g.slice_cols(0, ca)?);
                acc(*b, g.slice_cols(ca, cb)?);
            }
            Op::SliceCols { x, start } => {
                let xv = self.value(*x);
                let mut d = Matrix::zeros(xv.rows(), xv.cols());
                for r in 0..g.rows() {
                    d.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                }
                acc(*x, d);
            }
            Op::GatherRows { x, index } => {
                let xv = self.value(*x);
                let mut d = Matrix::zeros(xv.rows(), xv.cols());
                for (k, &i) in index.iter().enumerate() {
                    for (o, v) in d.row_mut(i).iter_mut().zip(g.row(k)) {
                        *o += v;
                    }
                }
                acc(*x, d);
            }
            Op::SegmentMin { x, argmin } => {
                let xv = self.value(*x);
                let mut d = Matrix::zeros(xv.rows(), 1);
                for (k, am) in argmin.iter().enumerate() {
                    if let Some(i) = am {
                        d.data_mut()[*i] += g.data()[k];
                    }
                }
                acc(*x, d);
            }
            Op::PairwiseSqDiff(a) => {
                let xs = self.value(*a).data();
                let n = xs.len();
                let mut d = vec![0.0; n];
                for i in 0..n {
                    for j in 0..n {
                        let t = 2.0 * (xs[i] - xs[j]) * g.get(i, j);
                        d[i] += t;
                        d[j] -= t;
                    }
                }
                acc(*a, Matrix::column(&d));
            }
            Op::SkewPart(a) => acc(*a, g.sub(&g.transpose())?.scale(0.5)),
            Op::Cayley { s, lhs } => {
                // A = M^{-1} N with M = I - S, N = I + S:
                // dL/dS = M^{-T} G (I + A)^T
                let eye = Matrix::identity(lhs.rows());
                let right = eye.add(&node.value)?;
                let t = lhs.transpose().solve(g)?;
                acc(*s, t.matmul_nt(&right)?);
            }
        }
        Ok(())
    }
}
