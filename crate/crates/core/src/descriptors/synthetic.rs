//! Synthetic bilaterally symmetric shapes with planted descriptors.
//!
//! The surface is a bumpy ellipsoid built from its `x >= 0` half, a polar
//! cap around the `+x` axis, mirrored across `x = 0` and welded along the
//! seam ring. Every
//! vertex carries a latent `z = [c, s]`: a signed chirality
//! `c = sign(x) tanh(4|x|)` and a unit vector `s` that depends only on
//! `(|x|, y, z)` of the canonical (unit sphere) template position, so mirror
//! pairs share `s`. Descriptors are `F = z Q + noise` and
//! `F_flipped = [-c, s] Q + noise` for a seeded orthonormal `Q`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};
use crate::numkernel::Matrix;

use super::{DescriptorField, GroundTruth};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticParams {
    /// Drives geometry and noise.
    pub seed: u64,
    /// Drives the orthonormal basis and the agnostic-feature frequencies;
    /// shapes of one corpus share it.
    pub basis_seed: u64,
    /// The mirror-plane ring has `2n` vertices and each half `max(n/2, 1)`
    /// rings, so `n = 28` gives 1514 vertices.
    pub half_resolution: usize,
    pub dim: usize,
    /// Standard deviation of the additive Gaussian descriptor noise.
    pub noise: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            seed: 0,
            basis_seed: 0,
            half_resolution: 28,
            dim: 16,
            noise: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticShape {
    pub mesh: TriMesh,
    pub field: DescriptorField,
    pub truth: GroundTruth,
    /// Planted chirality `c` per vertex.
    pub latent_chi: Vec<f64>,
    /// Planted unit agnostic features `s`, `|V| x (d - 1)`.
    pub latent_agno: Matrix,
    /// The orthonormal basis `Q`.
    pub basis: Matrix,
    /// Canonical template positions on the unit sphere.
    pub template_positions: Vec<Point>,
    /// Vertices on the mirror plane.
    pub seam: Vec<bool>,
}

/// Orthonormal `d x d` matrix from modified Gram-Schmidt on a seeded
/// Gaussian matrix.
pub fn orthonormal_basis(dim: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    loop {
        let mut cols: Vec<Vec<f64>> = (0..dim)
            .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let mut ok = true;
        for k in 0..dim {
            for j in 0..k {
                let d: f64 = (0..dim).map(|i| cols[k][i] * cols[j][i]).sum();
                for i in 0..dim {
                    cols[k][i] -= d * cols[j][i];
                }
            }
            let n = cols[k].iter().map(|x| x * x).sum::<f64>().sqrt();
            if n < 1e-8 {
                ok = false;
                break;
            }
            cols[k].iter_mut().for_each(|x| *x /= n);
        }
        if ok {
            let mut q = Matrix::zeros(dim, dim);
            for (c, col) in cols.iter().enumerate() {
                for (r, &v) in col.iter().enumerate() {
                    q.set(r, c, v);
                }
            }
            return q;
        }
    }
}

struct Shape {
    axes: [f64; 3],
    bumps: [(f64, f64, f64); 2],
}

impl Shape {
    fn sample(rng: &mut ChaCha8Rng) -> Self {
        Self {
            axes: [
                rng.random_range(0.8..1.1),
                rng.random_range(1.2..1.6),
                rng.random_range(0.6..0.9),
            ],
            bumps: [
                (
                    rng.random_range(0.05..0.15),
                    rng.random_range(1.5..3.5),
                    rng.random_range(0.0..std::f64::consts::TAU),
                ),
                (
                    rng.random_range(0.03..0.10),
                    rng.random_range(1.5..3.5),
                    rng.random_range(0.0..std::f64::consts::TAU),
                ),
            ],
        }
    }

    /// Embedding of a template direction with `x >= 0`.
    fn embed(&self, t: Point) -> Point {
        let (a1, k1, p1) = self.bumps[0];
        let (a2, k2, p2) = self.bumps[1];
        let r = 1.0 + a1 * (k1 * t[1] + p1).cos() * (2.0 * t[0]).cos() + a2 * (k2 * t[2] + p2).sin();
        [t[0] * self.axes[0] * r, t[1] * self.axes[1] * r, t[2] * self.axes[2] * r]
    }
}

/// Cap around the `+x` axis: a pole, then rings `1..=rings` of `columns`
/// vertices each; the last ring lies on the mirror plane.
struct HalfSphere {
    rings: usize,
    columns: usize,
}

impl HalfSphere {
    fn new(n: usize) -> Self {
        Self {
            rings: (n / 2).max(1),
            columns: 2 * n,
        }
    }

    fn ring_index(&self, i: usize, j: usize) -> usize {
        1 + (i - 1) * self.columns + j % self.columns
    }

    fn mirror_base(&self) -> usize {
        1 + self.rings * self.columns
    }

    fn direction(&self, i: usize, j: usize) -> Point {
        let theta = std::f64::consts::FRAC_PI_2 * i as f64 / self.rings as f64;
        let phi = std::f64::consts::TAU * j as f64 / self.columns as f64;
        let x = if i == self.rings { 0.0 } else { theta.cos() };
        [x, theta.sin() * phi.cos(), theta.sin() * phi.sin()]
    }
}

pub fn generate_synthetic(params: &SyntheticParams) -> Result<SyntheticShape> {
    let SyntheticParams {
        seed,
        basis_seed,
        half_resolution: n,
        dim,
        noise,
    } = *params;
    if dim < 8 {
        return Err(Error::invalid(format!("synthetic descriptors need d >= 8, got {dim}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::invalid(format!("noise level must be >= 0, got {noise}")));
    }
    if n < 2 {
        return Err(Error::invalid("half resolution must be at least 2"));
    }

    let mut geo_rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = Shape::sample(&mut geo_rng);
    let half = HalfSphere::new(n);

    let mut template: Vec<Point> = vec![[1.0, 0.0, 0.0]];
    for i in 1..=half.rings {
        for j in 0..half.columns {
            template.push(half.direction(i, j));
        }
    }
    let mut faces = Vec::new();
    for j in 0..half.columns {
        faces.push([0, half.ring_index(1, j), half.ring_index(1, j + 1)]);
    }
    for i in 1..half.rings {
        for j in 0..half.columns {
            let a = half.ring_index(i, j);
            let b = half.ring_index(i + 1, j);
            let c = half.ring_index(i + 1, j + 1);
            let d = half.ring_index(i, j + 1);
            faces.extend([[a, b, c], [a, c, d]]);
        }
    }

    // mirror everything off the plane, weld the last ring
    let mut mirror: Vec<usize> = (0..template.len()).collect();
    let mut reflect = |src: usize, template: &mut Vec<Point>| {
        let t = template[src];
        mirror[src] = template.len();
        mirror.push(src);
        template.push([-t[0], t[1], t[2]]);
    };
    debug_assert_eq!(template.len(), half.mirror_base());
    reflect(0, &mut template);
    for i in 1..half.rings {
        for j in 0..half.columns {
            reflect(half.ring_index(i, j), &mut template);
        }
    }
    let half_faces = faces.len();
    for k in 0..half_faces {
        let [a, b, c] = faces[k];
        faces.push([mirror[a], mirror[c], mirror[b]]);
    }

    let positions: Vec<Point> = template
        .iter()
        .map(|&t| {
            let p = shape.embed([t[0].abs(), t[1], t[2]]);
            if t[0] < 0.0 {
                [-p[0], p[1], p[2]]
            } else {
                p
            }
        })
        .collect();
    let mesh = TriMesh::new(positions, faces)?;
    let count = template.len();

    // planted latents
    let mut basis_rng = ChaCha8Rng::seed_from_u64(basis_seed.wrapping_add(0x5eed));
    let freqs: Vec<[f64; 4]> = (0..dim - 1)
        .map(|_| {
            [
                basis_rng.random_range(-2.5..2.5),
                basis_rng.random_range(-2.5..2.5),
                basis_rng.random_range(-2.5..2.5),
                basis_rng.random_range(0.0..std::f64::consts::TAU),
            ]
        })
        .collect();
    let basis = orthonormal_basis(dim, basis_seed);

    let seam: Vec<bool> = template.iter().map(|t| t[0] == 0.0).collect();
    let latent_chi: Vec<f64> = template
        .iter()
        .map(|t| {
            let c = (4.0 * t[0].abs()).tanh();
            if t[0] < 0.0 {
                -c
            } else {
                c
            }
        })
        .collect();
    let mut latent_agno = Matrix::zeros(count, dim - 1);
    for (v, t) in template.iter().enumerate() {
        let row = latent_agno.row_mut(v);
        for (k, f) in freqs.iter().enumerate() {
            row[k] = (f[0] * t[0].abs() + f[1] * t[1] + f[2] * t[2] + f[3]).cos();
        }
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        row.iter_mut().for_each(|x| *x /= norm);
    }

    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd1b5_4a32_d192_ed03);
    let mut build = |sign: f64| -> Result<Matrix> {
        let mut z = Matrix::zeros(count, dim);
        for v in 0..count {
            let row = z.row_mut(v);
            row[0] = sign * latent_chi[v];
            row[1..].copy_from_slice(latent_agno.row(v));
        }
        let mut f = z.matmul(&basis)?;
        if noise > 0.0 {
            for x in f.data_mut() {
                let e: f64 = StandardNormal.sample(&mut noise_rng);
                *x += noise * e;
            }
        }
        Ok(f)
    };
    let values = build(1.0)?;
    let flipped = build(-1.0)?;
    let field = DescriptorField::new(values, flipped)?;

    let truth = GroundTruth {
        sym_map: mirror.iter().map(|&m| Some(m)).collect(),
        lr_labels: template.iter().map(|t| if t[0] < 0.0 { -1 } else { 1 }).collect(),
        template: Some((0..count).collect()),
    };

    Ok(SyntheticShape {
        mesh,
        field,
        truth,
        latent_chi,
        latent_agno,
        basis,
        template_positions: template,
        seam,
    })
}
