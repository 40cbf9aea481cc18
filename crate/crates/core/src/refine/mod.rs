//! Binary MRF refinement of the chirality channel.
//!
//! The energy is `sum_v theta_v(x_v) + sum_(u,v) w_uv [x_u != x_v]` with
//! `theta_v(0) = c_v`, `theta_v(1) = 1 - c_v` for the min-max normalized
//! chirality `c`. Potts terms on binary labels are submodular, so the
//! minimum s-t cut gives the global optimum.

mod maxflow;

pub use maxflow::{max_flow_by_name, max_flow_names, BoykovKolmogorov, Capacity, Dinic, FlowNetwork, MaxFlow};

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::numkernel::exact_sum;

/// Default Potts weight.
pub const DEFAULT_OMEGA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MrfInstance {
    /// `(theta_v(0), theta_v(1))`.
    unary: Vec<[f64; 2]>,
    edges: Vec<[usize; 2]>,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryLabeling {
    pub labels: Vec<u8>,
    pub energy: f64,
}

/// Min-max rescaling to `[0, 1]`; constant input maps to 0.5.
pub fn normalize_unit(chi: &[f64]) -> Result<Vec<f64>> {
    if let Some(x) = chi.iter().find(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("non-finite chirality value {x}")));
    }
    let lo = chi.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = chi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Ok(vec![0.5; chi.len()]);
    }
    Ok(chi.iter().map(|&x| ((x - lo) / (hi - lo)).clamp(0.0, 1.0)).collect())
}

impl MrfInstance {
    pub fn new(unary: Vec<[f64; 2]>, edges: Vec<[usize; 2]>, weights: Vec<f64>) -> Result<Self> {
        if edges.len() != weights.len() {
            return Err(Error::shape("mrf", format!("{} edges but {} weights", edges.len(), weights.len())));
        }
        let n = unary.len();
        if let Some(e) = edges.iter().find(|e| e[0] >= n || e[1] >= n || e[0] == e[1]) {
            return Err(Error::invalid(format!("bad edge {e:?} for {n} vertices")));
        }
        let bad = |x: f64| !x.is_finite() || x < 0.0;
        if unary.iter().flatten().chain(&weights).any(|&x| bad(x)) {
            return Err(Error::invalid("potentials must be finite and >= 0"));
        }
        Ok(Self { unary, edges, weights })
    }

    /// Unaries from the normalized chirality, Potts weight `omega` on every
    /// mesh edge.
    pub fn build(chi: &[f64], mesh: &TriMesh, omega: f64) -> Result<Self> {
        if chi.len() != mesh.vertex_count() {
            return Err(Error::shape(
                "mrf_build",
                format!("{} chirality values for {} vertices", chi.len(), mesh.vertex_count()),
            ));
        }
        if !omega.is_finite() || omega < 0.0 {
            return Err(Error::invalid(format!("pairwise weight must be finite and >= 0, got {omega}")));
        }
        let unary = normalize_unit(chi)?.into_iter().map(|c| [c, 1.0 - c]).collect();
        let edges = mesh.edges().undirected().to_vec();
        let weights = vec![omega; edges.len()];
        Self::new(unary, edges, weights)
    }

    pub fn vertex_count(&self) -> usize {
        self.unary.len()
    }

    pub fn unary(&self) -> &[[f64; 2]] {
        &self.unary
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Energy of `labels`, correctly rounded so equal-valued labelings get
    /// bit-identical energies.
    pub fn energy(&self, labels: &[u8]) -> Result<f64> {
        if labels.len() != self.vertex_count() {
            return Err(Error::shape(
                "energy",
                format!("{} labels for {} vertices", labels.len(), self.vertex_count()),
            ));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::invalid(format!("label {l} is not 0 or 1")));
        }
        let unary = self.unary.iter().zip(labels).map(|(t, &l)| t[l as usize]);
        let pairwise = self
            .edges
            .iter()
            .zip(&self.weights)
            .filter(|(e, _)| labels[e[0]] != labels[e[1]])
            .map(|(_, &w)| w);
        Ok(exact_sum(unary.chain(pairwise)))
    }

    /// Number of edges whose endpoints disagree.
    pub fn boundary_edges(&self, labels: &[u8]) -> usize {
        self.edges.iter().filter(|e| labels[e[0]] != labels[e[1]]).count()
    }

    /// Label 1 wherever `theta_v(1) < theta_v(0)`.
    pub fn threshold_labeling(&self) -> Vec<u8> {
        self.unary.iter().map(|t| u8::from(t[1] < t[0])).collect()
    }

    fn fixed_point_exponent(&self) -> i32 {
        let total: f64 = self.unary.iter().flatten().sum::<f64>() + 2.0 * self.weights.iter().sum::<f64>();
        if total <= 0.0 {
            return 0;
        }
        // keep the sum of all capacities below 2^120
        (120 - total.log2().ceil() as i32 - 1).clamp(-1000, 1000)
    }

    /// Globally optimal labeling. Among optima, every vertex takes label 0
    /// unless label 1 is forced in all of them.
    pub fn solve(&self, algo: &dyn MaxFlow) -> Result<BinaryLabeling> {
        let n = self.vertex_count();
        let (s, t) = (n, n + 1);
        let scale = 2f64.powi(self.fixed_point_exponent());
        let fixed = |x: f64| (x * scale) as Capacity;
        let mut net = FlowNetwork::new(n + 2);
        for (v, th) in self.unary.iter().enumerate() {
            // v on the sink side (label 1) cuts s -> v; source side cuts v -> t
            net.add_edge(s, v, fixed(th[1]), 0);
            net.add_edge(v, t, fixed(th[0]), 0);
        }
        for (e, &w) in self.edges.iter().zip(&self.weights) {
            let c = fixed(w);
            net.add_edge(e[0], e[1], c, c);
        }
        algo.max_flow(&mut net, s, t);
        let to_sink = net.reaches(t);
        if to_sink[s] {
            return Err(Error::Internal(format!("{} left an augmenting path", algo.name())));
        }
        let labels: Vec<u8> = (0..n).map(|v| u8::from(to_sink[v])).collect();
        let energy = self.energy(&labels)?;
        Ok(BinaryLabeling { labels, energy })
    }
}

/// Builds and solves the instance for a chirality field.
pub fn refine_chirality(chi: &[f64], mesh: &TriMesh, omega: f64, algo: &dyn MaxFlow) -> Result<BinaryLabeling> {
    MrfInstance::build(chi, mesh, omega)?.solve(algo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives::{grid, unit_square};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn path3(chi: &[f64]) -> MrfInstance {
        let unary = normalize_unit(chi).unwrap().into_iter().map(|c| [c, 1.0 - c]).collect();
        MrfInstance::new(unary, vec![[0, 1], [1, 2]], vec![1.0, 1.0]).unwrap()
    }

    fn brute_force(inst: &MrfInstance) -> f64 {
        let n = inst.vertex_count();
        (0..1u32 << n)
            .map(|m| inst.energy(&(0..n).map(|v| ((m >> v) & 1) as u8).collect::<Vec<_>>()).unwrap())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_unit(&[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(normalize_unit(&[0.3, 0.3]).unwrap(), vec![0.5, 0.5]);
        let n = normalize_unit(&[0.2, 0.8, 0.5]).unwrap();
        assert_eq!(n[0], 0.0);
        assert_eq!(n[1], 1.0);
        assert!((n[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn build_from_mesh() {
        let mesh = unit_square();
        let inst = MrfInstance::build(&[0.0, 1.0, 1.0, 0.0], &mesh, 1.0).unwrap();
        assert_eq!(inst.unary(), &[[0.0, 1.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(inst.edges().len(), 5);
        assert!(inst.weights().iter().all(|&w| w == 1.0));
        assert!(MrfInstance::build(&[0.0; 4], &mesh, -1.0).is_err());
        assert!(MrfInstance::build(&[0.0; 3], &mesh, 1.0).is_err());
    }

    #[test]
    fn path_example() {
        let inst = path3(&[0.0, 1.0, 0.0]);
        for algo in max_flow_names() {
            let sol = inst.solve(max_flow_by_name(algo).unwrap().as_ref()).unwrap();
            assert_eq!(sol.labels, vec![0, 0, 0]);
            assert_eq!(sol.energy, 1.0);
        }
        assert_eq!(inst.energy(&[0, 1, 0]).unwrap(), 2.0);
    }

    #[test]
    fn all_zero_preference_and_constant_ties() {
        let inst = MrfInstance::new(vec![[0.0, 1.0]; 4], vec![[0, 1], [2, 3]], vec![1.0, 1.0]).unwrap();
        let sol = inst.solve(&BoykovKolmogorov).unwrap();
        assert_eq!((sol.labels, sol.energy), (vec![0; 4], 0.0));
        let mesh = grid(3, 3, 1.0);
        let sol = refine_chirality(&[0.7; 9], &mesh, 1.0, &Dinic).unwrap();
        assert_eq!(sol.labels, vec![0; 9]);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let n = rng.random_range(1..=10);
            let unary = (0..n)
                .map(|_| {
                    let c: f64 = rng.random_range(0.0..1.0);
                    [c, 1.0 - c]
                })
                .collect();
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.random_bool(0.35) {
                        edges.push([u, v]);
                    }
                }
            }
            let omega = [0.1, 1.0, 5.0][rng.random_range(0..3)];
            let weights = vec![omega; edges.len()];
            let inst = MrfInstance::new(unary, edges, weights).unwrap();
            let best = brute_force(&inst);
            for algo in [&BoykovKolmogorov as &dyn MaxFlow, &Dinic] {
                let sol = inst.solve(algo).unwrap();
                assert_eq!(sol.energy, best, "{}", algo.name());
                assert!(sol.energy <= inst.energy(&inst.threshold_labeling()).unwrap());
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(MrfInstance::new(vec![[0.0, -1.0]], vec![], vec![]).is_err());
        assert!(MrfInstance::new(vec![[0.0, 1.0]; 2], vec![[0, 2]], vec![1.0]).is_err());
        assert!(normalize_unit(&[f64::NAN]).is_err());
        let inst = path3(&[0.0, 1.0, 0.0]);
        assert!(inst.energy(&[0, 1]).is_err());
        assert!(inst.energy(&[0, 2, 0]).is_err());
    }
}
