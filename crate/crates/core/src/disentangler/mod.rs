//! Autoencoder with an orthonormal projection that splits each descriptor
//! into a scalar symmetry-informative channel and a unit-norm
//! symmetry-agnostic remainder.
//!
//! Encoder and decoder are three-layer ReLU MLPs of width `d` wrapped in a
//! skip connection (`x + mlp(x)`). The projection `A` is the Cayley
//! transform of a skew-symmetric generator, so it stays orthonormal at every
//! optimizer step.

mod checkpoint;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::descriptors::DescriptorField;
use crate::error::{Error, Result};
use crate::numkernel::{Graph, Matrix, ParamSet, Var, NORM_EPS};

pub const LAYERS: usize = 3;
pub const SKEW: &str = "skew";

/// Standard deviation of the inner weights at initialization.
pub const INIT_STD: f64 = 1e-3;

fn weight_name(net: &str, layer: usize) -> String {
    format!("{net}.w{layer}")
}

fn bias_name(net: &str, layer: usize) -> String {
    format!("{net}.b{layer}")
}

/// Trainable parameters: encoder, decoder and the skew generator of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    dim: usize,
    set: ParamSet,
}

impl ModelParams {
    /// Parameter layout with every entry produced by `fill(name, rows, cols)`.
    fn build(dim: usize, mut fill: impl FnMut(&str, usize, usize) -> Matrix) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid(format!("model dimension must be >= 2, got {dim}")));
        }
        let mut set = ParamSet::new();
        for net in ["enc", "dec"] {
            for l in 0..LAYERS {
                let w = weight_name(net, l);
                set.insert(w.clone(), fill(&w, dim, dim));
                let b = bias_name(net, l);
                set.insert(b.clone(), fill(&b, 1, dim));
            }
        }
        set.insert(SKEW, fill(SKEW, dim, dim));
        Ok(Self { dim, set })
    }

    /// Near-identity start: small Gaussian inner weights, zero biases, `A = I`.
    pub fn init(dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        Self::build(dim, |name, r, c| {
            if name.contains(".w") {
                Matrix::from_vec(r, c, (0..r * c).map(|_| normal.sample(&mut rng)).collect()).unwrap()
            } else {
                Matrix::zeros(r, c)
            }
        })
    }

    /// All inner weights zero: encoder and decoder are exact identities.
    pub fn identity(dim: usize) -> Result<Self> {
        Self::build(dim, |_, r, c| Matrix::zeros(r, c))
    }

    /// Every entry Gaussian with the given scale, generator skew-symmetric.
    pub fn random(dim: usize, seed: u64, scale: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, scale).map_err(|e| Error::invalid(e.to_string()))?;
        let mut p = Self::build(dim, |_, r, c| {
            Matrix::from_vec(r, c, (0..r * c).map(|_| normal.sample(&mut rng)).collect()).unwrap()
        })?;
        let s = p.set.require(SKEW)?.clone();
        p.set.insert(SKEW, s.sub(&s.transpose())?.scale(0.5));
        Ok(p)
    }

    pub(crate) fn from_set(dim: usize, set: ParamSet) -> Result<Self> {
        let template = Self::identity(dim)?;
        if set.len() != template.set.len() {
            return Err(Error::invalid(format!(
                "expected {} parameter matrices, found {}",
                template.set.len(),
                set.len()
            )));
        }
        for (name, m) in template.set.iter() {
            let got = set
                .get(name)
                .ok_or_else(|| Error::invalid(format!("missing parameter `{name}`")))?;
            if got.shape() != m.shape() {
                return Err(Error::shape(
                    "model_params",
                    format!("`{name}` is {:?}, expected {:?}", got.shape(), m.shape()),
                ));
            }
        }
        // keep canonical order
        let mut ordered = ParamSet::new();
        for (name, _) in template.set.iter() {
            ordered.insert(name, set.get(name).unwrap().clone());
        }
        Ok(Self { dim, set: ordered })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &ParamSet {
        &self.set
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.set
    }

    pub fn skew(&self) -> &Matrix {
        self.set.get(SKEW).expect("skew present")
    }

    /// Current orthonormal projection `A`.
    pub fn projection(&self) -> Result<Matrix> {
        cayley(self.skew())
    }
}

/// Cayley transform `(I - S)^{-1} (I + S)` of a skew-symmetric matrix.
pub fn cayley(skew: &Matrix) -> Result<Matrix> {
    if skew.rows() != skew.cols() {
        return Err(Error::shape("cayley", format!("{:?} is not square", skew.shape())));
    }
    let asym = skew.add(&skew.transpose())?.max_abs();
    if asym > 1e-12 * (1.0 + skew.max_abs()) {
        return Err(Error::invalid(format!("generator is not skew-symmetric (|S + S^T| = {asym:e})")));
    }
    let eye = Matrix::identity(skew.rows());
    eye.sub(skew)?
        .solve(&eye.add(skew)?)
        .map_err(|e| Error::Internal(format!("I - S singular for skew S: {e}")))
}

/// `max |A^T A - I|`.
pub fn orthonormality_error(a: &Matrix) -> f64 {
    a.matmul_tn(a)
        .and_then(|g| g.sub(&Matrix::identity(a.cols())))
        .map(|d| d.max_abs())
        .unwrap_or(f64::INFINITY)
}

/// Graph handles for every model parameter.
#[derive(Debug, Clone)]
pub struct ModelVars {
    enc: [(Var, Var); LAYERS],
    dec: [(Var, Var); LAYERS],
    skew: Var,
}

impl ModelVars {
    pub fn register(g: &mut Graph, params: &ModelParams) -> Self {
        let mut lookup = |name: String| g.param(&name, params.set.get(&name).expect("layout").clone());
        let mut layers = |net: &str| -> [(Var, Var); LAYERS] {
            std::array::from_fn(|l| (lookup(weight_name(net, l)), lookup(bias_name(net, l))))
        };
        let enc = layers("enc");
        let dec = layers("dec");
        let skew = g.param(SKEW, params.skew().clone());
        Self { enc, dec, skew }
    }
}

fn mlp_with_skip(g: &mut Graph, layers: &[(Var, Var); LAYERS], x: Var) -> Result<Var> {
    let mut h = x;
    for (l, &(w, b)) in layers.iter().enumerate() {
        h = g.matmul(h, w)?;
        h = g.add_row(h, b)?;
        if l + 1 < LAYERS {
            h = g.relu(h);
        }
    }
    g.add(x, h)
}

/// Disentangled channels of one input branch.
#[derive(Debug, Clone, Copy)]
pub struct BranchVars {
    /// Encoder output before normalization.
    pub mid: Var,
    /// `|V| x 1` symmetry-informative channel.
    pub chi: Var,
    /// `|V| x (d-1)` unit-row symmetry-agnostic channel.
    pub agno: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    pub direct: BranchVars,
    pub flipped: BranchVars,
    pub projection: Var,
    /// `[F, F_flipped]`, `|V| x 2d`.
    pub input_stack: Var,
    /// Decoder output for both branches, `|V| x 2d`.
    pub reconstruction: Var,
}

fn record_branch(g: &mut Graph, vars: &ModelVars, projection: Var, input: Var, dim: usize) -> Result<BranchVars> {
    let mid = mlp_with_skip(g, &vars.enc, input)?;
    let unit = g.row_normalize(mid, NORM_EPS);
    let proj = g.matmul(unit, projection)?;
    let chi = g.slice_cols(proj, 0, 1)?;
    let rest = g.slice_cols(proj, 1, dim - 1)?;
    let agno = g.row_normalize(rest, NORM_EPS);
    Ok(BranchVars { mid, chi, agno })
}

/// Records the full forward pass on `g`.
pub fn record_forward(g: &mut Graph, vars: &ModelVars, params: &ModelParams, field: &DescriptorField) -> Result<ForwardVars> {
    if field.dim() != params.dim() {
        return Err(Error::shape(
            "forward",
            format!("descriptor dimension {} but model dimension {}", field.dim(), params.dim()),
        ));
    }
    let skew = g.skew_part(vars.skew)?;
    let projection = g.cayley(skew)?;
    let f = g.input(field.values().clone());
    let fbar = g.input(field.flipped().clone());
    let direct = record_branch(g, vars, projection, f, params.dim())?;
    let flipped = record_branch(g, vars, projection, fbar, params.dim())?;
    let rec_a = mlp_with_skip(g, &vars.dec, direct.mid)?;
    let rec_b = mlp_with_skip(g, &vars.dec, flipped.mid)?;
    let reconstruction = g.concat_cols(rec_a, rec_b)?;
    let input_stack = g.concat_cols(f, fbar)?;
    Ok(ForwardVars {
        direct,
        flipped,
        projection,
        input_stack,
        reconstruction,
    })
}

/// Disentangled features of one field.
#[derive(Debug, Clone, PartialEq)]
pub struct DisentangledFeatures {
    pub chi: Vec<f64>,
    pub agno: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub direct: DisentangledFeatures,
    pub flipped: DisentangledFeatures,
    pub reconstruction: Matrix,
    pub mid: Matrix,
    pub mid_flipped: Matrix,
}

/// Evaluates the model on a descriptor field.
pub fn forward(params: &ModelParams, field: &DescriptorField) -> Result<ForwardOutput> {
    let mut g = Graph::new();
    let vars = ModelVars::register(&mut g, params);
    let fv = record_forward(&mut g, &vars, params, field)?;
    let features = |b: &BranchVars| DisentangledFeatures {
        chi: g.value(b.chi).data().to_vec(),
        agno: g.value(b.agno).clone(),
    };
    Ok(ForwardOutput {
        direct: features(&fv.direct),
        flipped: features(&fv.flipped),
        reconstruction: g.value(fv.reconstruction).clone(),
        mid: g.value(fv.direct.mid).clone(),
        mid_flipped: g.value(fv.flipped.mid).clone(),
    })
}
