//! Triangle meshes: validation, I/O, edge topology, tangent-plane geometry,
//! edge-graph geodesics and labeling-aware connected components.

mod geodesic;
mod io;
pub mod primitives;
mod topology;

pub use geodesic::{geodesic_from, GeodesicSolver};
pub use io::{load_mesh, load_ply, save_obj, save_ply, PlyData, PlyFormat};
pub use topology::{tangential_cosine, EdgeSets, TupleSets};

use crate::error::{Error, Result};

pub type Point = [f64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    positions: Vec<Point>,
    faces: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Validates indices and vertex count.
    pub fn new(positions: Vec<Point>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if positions.len() < 3 {
            return Err(Error::invalid(format!(
                "mesh needs at least 3 vertices, got {}",
                positions.len()
            )));
        }
        let n = positions.len();
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i >= n) {
                return Err(Error::invalid(format!(
                    "face {fi} references vertex {bad} but mesh has {n} vertices"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::invalid(format!("face {fi} repeats a vertex: {f:?}")));
            }
        }
        if let Some(i) = positions.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::invalid(format!("vertex {i} has a non-finite coordinate")));
        }
        Ok(Self { positions, faces })
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn edges(&self) -> EdgeSets {
        EdgeSets::from_mesh(self)
    }

    /// Twice-area normal of a face (unnormalized cross product).
    fn face_cross(&self, f: &[usize; 3]) -> Point {
        let [a, b, c] = f.map(|i| self.positions[i]);
        cross(sub(b, a), sub(c, a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * norm(self.face_cross(&self.faces[face]))
    }

    pub fn surface_area(&self) -> f64 {
        self.faces.iter().map(|f| 0.5 * norm(self.face_cross(f))).sum()
    }

    /// Area-weighted vertex normals; vertices without faces get a zero normal.
    pub fn vertex_normals(&self) -> Vec<Point> {
        let mut acc = vec![[0.0; 3]; self.positions.len()];
        for f in &self.faces {
            // |cross| = 2 * area, so summing raw cross products weights by area
            let c = self.face_cross(f);
            for &i in f {
                for k in 0..3 {
                    acc[i][k] += c[k];
                }
            }
        }
        acc.into_iter()
            .map(|n| {
                let l = norm(n);
                if l > crate::numkernel::NORM_EPS {
                    scale(n, 1.0 / l)
                } else {
                    [0.0; 3]
                }
            })
            .collect()
    }

    /// Number of maximal edge-connected vertex sets carrying a single label.
    pub fn connected_components<L: PartialEq>(&self, labels: &[L]) -> Result<usize> {
        if labels.len() != self.vertex_count() {
            return Err(Error::shape(
                "connected_components",
                format!("{} labels for {} vertices", labels.len(), self.vertex_count()),
            ));
        }
        let mut parent: Vec<usize> = (0..labels.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for [u, v] in self.edges().undirected() {
            if labels[*u] == labels[*v] {
                let (ru, rv) = (find(&mut parent, *u), find(&mut parent, *v));
                if ru != rv {
                    parent[ru.max(rv)] = ru.min(rv);
                }
            }
        }
        Ok((0..labels.len()).filter(|&i| find(&mut parent, i) == i).count())
    }
}

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}
