use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

use super::{norm, sub, TriMesh};

/// Dijkstra on the mesh edge graph with Euclidean edge lengths.
///
/// This approximates surface geodesics from above; distances are exact
/// shortest paths along edges.
#[derive(Debug, Clone)]
pub struct GeodesicSolver {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    lengths: Vec<f64>,
}

#[derive(PartialEq)]
struct Entry {
    dist: f64,
    vertex: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then vertex index
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl GeodesicSolver {
    pub fn new(mesh: &TriMesh) -> Self {
        let edges = mesh.edges();
        let p = mesh.positions();
        let n = mesh.vertex_count();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::with_capacity(edges.directed_count());
        let mut lengths = Vec::with_capacity(edges.directed_count());
        offsets.push(0);
        for v in 0..n {
            for &w in edges.neighbors(v) {
                targets.push(w);
                lengths.push(norm(sub(p[w], p[v])));
            }
            offsets.push(targets.len());
        }
        Self {
            offsets,
            targets,
            lengths,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Distances from `source` to every vertex; unreachable vertices get `+inf`.
    pub fn distances_from(&self, source: usize) -> Result<Vec<f64>> {
        let n = self.vertex_count();
        if source >= n {
            return Err(Error::invalid(format!(
                "geodesic source {source} out of range for {n} vertices"
            )));
        }
        let mut dist = vec![f64::INFINITY; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Entry {
            dist: 0.0,
            vertex: source,
        });
        while let Some(Entry { dist: d, vertex: v }) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for k in self.offsets[v]..self.offsets[v + 1] {
                let w = self.targets[k];
                let nd = d + self.lengths[k];
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push(Entry { dist: nd, vertex: w });
                }
            }
        }
        Ok(dist)
    }
}

pub fn geodesic_from(mesh: &TriMesh, source: usize) -> Result<Vec<f64>> {
    GeodesicSolver::new(mesh).distances_from(source)
}
