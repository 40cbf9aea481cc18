use crate::disentangler::ForwardVars;
use crate::error::{Error, Result};
use crate::mesh::TupleSets;
use crate::numkernel::{Graph, Matrix, Var};

use super::{record_bou, record_con, record_dis, record_rec, record_sim, LossComponents, LossWeights};

/// What a loss term may read from one recorded forward pass.
pub struct LossInputs<'a> {
    pub forward: &'a ForwardVars,
    pub tuples: &'a TupleSets,
    /// Vertices used by the consistency loss.
    pub sample: &'a [usize],
}

pub trait LossTerm: Send + Sync {
    fn name(&self) -> &'static str;
    fn weight(&self, weights: &LossWeights) -> f64;
    fn record(&self, g: &mut Graph, inputs: &LossInputs<'_>) -> Result<Var>;
}

pub struct DisentangleLoss;
pub struct SimilarityLoss;
pub struct ReconstructionLoss;
pub struct BoundaryLoss;
pub struct ConsistencyLoss;

impl LossTerm for DisentangleLoss {
    fn name(&self) -> &'static str {
        "dis"
    }
    fn weight(&self, _: &LossWeights) -> f64 {
        1.0
    }
    fn record(&self, g: &mut Graph, i: &LossInputs<'_>) -> Result<Var> {
        record_dis(g, i.forward.direct.chi, i.forward.flipped.chi)
    }
}

impl LossTerm for SimilarityLoss {
    fn name(&self) -> &'static str {
        "sim"
    }
    fn weight(&self, w: &LossWeights) -> f64 {
        w.sim
    }
    fn record(&self, g: &mut Graph, i: &LossInputs<'_>) -> Result<Var> {
        record_sim(g, i.forward.direct.agno, i.forward.flipped.agno)
    }
}

impl LossTerm for ReconstructionLoss {
    fn name(&self) -> &'static str {
        "rec"
    }
    fn weight(&self, w: &LossWeights) -> f64 {
        w.rec
    }
    fn record(&self, g: &mut Graph, i: &LossInputs<'_>) -> Result<Var> {
        record_rec(g, i.forward.input_stack, i.forward.reconstruction)
    }
}

impl LossTerm for BoundaryLoss {
    fn name(&self) -> &'static str {
        "bou"
    }
    fn weight(&self, w: &LossWeights) -> f64 {
        w.bou
    }
    fn record(&self, g: &mut Graph, i: &LossInputs<'_>) -> Result<Var> {
        record_bou(g, i.tuples, i.forward.direct.chi, i.forward.flipped.chi)
    }
}

impl LossTerm for ConsistencyLoss {
    fn name(&self) -> &'static str {
        "con"
    }
    fn weight(&self, w: &LossWeights) -> f64 {
        w.con
    }
    fn record(&self, g: &mut Graph, i: &LossInputs<'_>) -> Result<Var> {
        let (d, f) = (&i.forward.direct, &i.forward.flipped);
        record_con(g, d.chi, d.agno, f.chi, f.agno, i.sample)
    }
}

/// Named loss terms, evaluated in registration order.
pub struct LossRegistry {
    terms: Vec<Box<dyn LossTerm>>,
}

impl Default for LossRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

impl LossRegistry {
    pub fn empty() -> Self {
        Self { terms: Vec::new() }
    }

    /// `dis`, `sim`, `rec`, `bou`, `con`.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(DisentangleLoss));
        r.register(Box::new(SimilarityLoss));
        r.register(Box::new(ReconstructionLoss));
        r.register(Box::new(BoundaryLoss));
        r.register(Box::new(ConsistencyLoss));
        r
    }

    /// Adds a term, replacing any term of the same name in place.
    pub fn register(&mut self, term: Box<dyn LossTerm>) {
        match self.terms.iter().position(|t| t.name() == term.name()) {
            Some(i) => self.terms[i] = term,
            None => self.terms.push(term),
        }
    }

    pub fn get(&self, name: &str) -> Option<&dyn LossTerm> {
        self.terms.iter().find(|t| t.name() == name).map(|t| t.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.terms.iter().map(|t| t.name()).collect()
    }

    /// Registry restricted to `names`, in the given order.
    pub fn select(names: &[&str]) -> Result<Self> {
        let all = Self::standard();
        let mut out = Self::empty();
        for name in names {
            let idx = all
                .terms
                .iter()
                .position(|t| t.name() == *name)
                .ok_or_else(|| Error::invalid(format!("unknown loss term `{name}` (known: {})", all.names().join(", "))))?;
            out.terms.push(match idx {
                0 => Box::new(DisentangleLoss) as Box<dyn LossTerm>,
                1 => Box::new(SimilarityLoss),
                2 => Box::new(ReconstructionLoss),
                3 => Box::new(BoundaryLoss),
                _ => Box::new(ConsistencyLoss),
            });
        }
        Ok(out)
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn LossTerm> {
        self.terms.iter().map(|t| t.as_ref())
    }
}

/// Recorded loss terms and their weighted total.
#[derive(Debug, Clone)]
pub struct Objective {
    pub terms: Vec<(&'static str, Var)>,
    pub total: Var,
}

impl Objective {
    pub fn components(&self, g: &Graph) -> LossComponents {
        let mut c = LossComponents::default();
        for &(name, v) in &self.terms {
            c.set(name, g.scalar(v));
        }
        c
    }
}

/// Records every registered term and the weighted sum of those with nonzero
/// weight.
pub fn record_objective(
    g: &mut Graph,
    registry: &LossRegistry,
    inputs: &LossInputs<'_>,
    weights: &LossWeights,
) -> Result<Objective> {
    weights.validate()?;
    let mut terms = Vec::new();
    let mut total: Option<Var> = None;
    for term in registry.iter() {
        let v = term.record(g, inputs)?;
        terms.push((term.name(), v));
        let w = term.weight(weights);
        if w != 0.0 {
            let scaled = if w == 1.0 { v } else { g.scale(v, w) };
            total = Some(match total {
                Some(t) => g.add(t, scaled)?,
                None => scaled,
            });
        }
    }
    let total = total.unwrap_or_else(|| g.input(Matrix::scalar(0.0)));
    Ok(Objective { terms, total })
}
