use crate::error::{Error, Result};
use crate::numkernel::NORM_EPS;

use super::{dot, norm, sub, Point, TriMesh};

/// Undirected edges plus the directed edge set in compressed adjacency form.
///
/// Every undirected edge `{u, v}` appears as both `(u, v)` and `(v, u)` in the
/// directed set. Neighbor lists are sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSets {
    undirected: Vec<[usize; 2]>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl EdgeSets {
    pub fn from_mesh(mesh: &TriMesh) -> Self {
        let mut pairs: Vec<[usize; 2]> = mesh
            .faces()
            .iter()
            .flat_map(|&[a, b, c]| [[a, b], [b, c], [c, a]])
            .map(|[u, v]| [u.min(v), u.max(v)])
            .collect();
        pairs.sort_unstable();
        pairs.dedup();

        let n = mesh.vertex_count();
        let mut degree = vec![0usize; n];
        for &[u, v] in &pairs {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut targets = vec![0usize; offsets[n]];
        for &[u, v] in &pairs {
            targets[fill[u]] = v;
            fill[u] += 1;
            targets[fill[v]] = u;
            fill[v] += 1;
        }
        for v in 0..n {
            targets[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Self {
            undirected: pairs,
            offsets,
            targets,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Sorted `(min, max)` pairs.
    pub fn undirected(&self) -> &[[usize; 2]] {
        &self.undirected
    }

    pub fn directed(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.vertex_count()).flat_map(move |v| self.neighbors(v).iter().map(move |&w| (v, w)))
    }

    pub fn directed_count(&self) -> usize {
        self.targets.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        u < self.vertex_count() && self.neighbors(u).binary_search(&v).is_ok()
    }
}

/// Cosine between the incoming direction `v - u'` and outgoing direction
/// `w' - v`, where `u'`, `w'` are projections into the plane through `v`
/// with normal `n`. Returns 0 when a projected edge is degenerate.
pub(crate) fn projected_cosine(pu: Point, pv: Point, pw: Point, n: Point) -> f64 {
    let project = |e: Point| {
        let h = dot(e, n);
        [e[0] - h * n[0], e[1] - h * n[1], e[2] - h * n[2]]
    };
    let a = project(sub(pu, pv));
    let b = project(sub(pw, pv));
    let (la, lb) = (norm(a), norm(b));
    if la <= NORM_EPS || lb <= NORM_EPS {
        return 0.0;
    }
    // incoming direction is -a
    (-dot(a, b) / (la * lb)).clamp(-1.0, 1.0)
}

/// Tangential cosine similarity of the vertex path `u -> v -> w`.
pub fn tangential_cosine(
    mesh: &TriMesh,
    edges: &EdgeSets,
    normals: &[Point],
    u: usize,
    v: usize,
    w: usize,
) -> Result<f64> {
    if !edges.contains(u, v) || !edges.contains(v, w) {
        return Err(Error::invalid(format!(
            "({u}, {v}, {w}) is not a path of mesh edges"
        )));
    }
    let p = mesh.positions();
    Ok(projected_cosine(p[u], p[v], p[w], normals[v]))
}

/// For each vertex `v`, all ordered neighbor pairs `(u, w)` (including
/// `u == w`) with their tangential cosine.
///
/// Tuples are stored flat and grouped by middle vertex: the tuples of `v`
/// occupy `offsets[v]..offsets[v + 1]`, ordered by `(u, w)` ascending.
#[derive(Debug, Clone)]
pub struct TupleSets {
    offsets: Vec<usize>,
    first: Vec<usize>,
    middle: Vec<usize>,
    last: Vec<usize>,
    cosine: Vec<f64>,
}

impl TupleSets {
    pub fn build(mesh: &TriMesh, edges: &EdgeSets) -> Self {
        let normals = mesh.vertex_normals();
        let p = mesh.positions();
        let n = mesh.vertex_count();
        let mut out = TupleSets {
            offsets: Vec::with_capacity(n + 1),
            first: Vec::new(),
            middle: Vec::new(),
            last: Vec::new(),
            cosine: Vec::new(),
        };
        out.offsets.push(0);
        for v in 0..n {
            let nb = edges.neighbors(v);
            for &u in nb {
                for &w in nb {
                    out.first.push(u);
                    out.middle.push(v);
                    out.last.push(w);
                    out.cosine.push(projected_cosine(p[u], p[v], p[w], normals[v]));
                }
            }
            out.offsets.push(out.first.len());
        }
        out
    }

    pub fn from_mesh(mesh: &TriMesh) -> Self {
        Self::build(mesh, &mesh.edges())
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn first(&self) -> &[usize] {
        &self.first
    }

    pub fn middle(&self) -> &[usize] {
        &self.middle
    }

    pub fn last(&self) -> &[usize] {
        &self.last
    }

    pub fn cosine(&self) -> &[f64] {
        &self.cosine
    }

    /// `(u, v, w, cosine)` tuples of one vertex.
    pub fn of(&self, v: usize) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        (self.offsets[v]..self.offsets[v + 1])
            .map(move |k| (self.first[k], self.middle[k], self.last[k], self.cosine[k]))
    }
}
