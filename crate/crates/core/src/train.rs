//! Training loop: one shape per optimizer step, shapes visited in order.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::descriptors::DescriptorField;
use crate::disentangler::{record_forward, ModelParams, ModelVars};
use crate::error::{Error, Result};
use crate::losses::{
    record_objective, sample_consistency, LossComponents, LossInputs, LossRegistry, LossWeights,
    DEFAULT_CONSISTENCY_SAMPLES,
};
use crate::mesh::{TriMesh, TupleSets};
use crate::numkernel::{Adam, AdamConfig, Graph, Matrix};

/// Learning rate tuned on the synthetic corpus.
pub const DEFAULT_LEARNING_RATE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub adam: AdamConfig,
    pub weights: LossWeights,
    pub consistency_samples: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            adam: AdamConfig {
                lr: DEFAULT_LEARNING_RATE,
                ..AdamConfig::default()
            },
            weights: LossWeights::default(),
            consistency_samples: DEFAULT_CONSISTENCY_SAMPLES,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.consistency_samples == 0 {
            return Err(Error::invalid("consistency sample size must be >= 1"));
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && a.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", a.lr)));
        }
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return Err(Error::invalid("optimizer betas must lie in [0, 1) and eps must be positive"));
        }
        Ok(())
    }
}

/// A shape prepared for training: descriptors plus its boundary tuples.
#[derive(Debug, Clone)]
pub struct TrainingShape {
    pub name: String,
    pub field: DescriptorField,
    pub tuples: TupleSets,
}

impl TrainingShape {
    pub fn new(name: impl Into<String>, mesh: &TriMesh, field: DescriptorField) -> Result<Self> {
        if field.vertex_count() != mesh.vertex_count() {
            return Err(Error::shape(
                "training_shape",
                format!("{} descriptor rows for {} vertices", field.vertex_count(), mesh.vertex_count()),
            ));
        }
        Ok(Self {
            name: name.into(),
            field,
            tuples: TupleSets::from_mesh(mesh),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub components: LossComponents,
    pub total: f64,
}

/// Loss components, weighted total and per-parameter gradients.
pub fn loss_and_gradients(
    params: &ModelParams,
    shape: &TrainingShape,
    registry: &LossRegistry,
    weights: &LossWeights,
    sample: &[usize],
) -> Result<(LossComponents, f64, Vec<Matrix>)> {
    let mut g = Graph::new();
    let vars = ModelVars::register(&mut g, params);
    let fv = record_forward(&mut g, &vars, params, &shape.field)?;
    let inputs = LossInputs {
        forward: &fv,
        tuples: &shape.tuples,
        sample,
    };
    let obj = record_objective(&mut g, registry, &inputs, weights)?;
    let grads = g.backward(obj.total)?.for_params(params.params())?;
    Ok((obj.components(&g), g.scalar(obj.total), grads))
}

pub struct Trainer {
    params: ModelParams,
    adam: Adam,
    rng: ChaCha8Rng,
    config: TrainConfig,
    registry: LossRegistry,
    step: usize,
}

impl Trainer {
    pub fn new(params: ModelParams, config: TrainConfig, registry: LossRegistry) -> Result<Self> {
        config.validate()?;
        let adam = Adam::new(config.adam, params.params());
        Ok(Self {
            params,
            adam,
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_c0de),
            config,
            registry,
            step: 0,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn into_params(self) -> ModelParams {
        self.params
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// One optimizer step on `shape`. The record holds the losses before
    /// the update.
    pub fn step(&mut self, shape: &TrainingShape) -> Result<StepRecord> {
        if shape.field.dim() != self.params.dim() {
            return Err(Error::invalid(format!(
                "shape `{}` has descriptor dimension {}, model expects {}",
                shape.name,
                shape.field.dim(),
                self.params.dim()
            )));
        }
        let n = shape.field.vertex_count();
        let sample = sample_consistency(&mut self.rng, n, self.config.consistency_samples);
        let (components, total, grads) =
            loss_and_gradients(&self.params, shape, &self.registry, &self.config.weights, &sample)?;
        self.adam
            .step(self.params.params_mut(), &grads)
            .map_err(|e| Error::NonFiniteGradient(format!("step {} on `{}`: {e}", self.step, shape.name)))?;
        let record = StepRecord {
            step: self.step,
            components,
            total,
        };
        self.step += 1;
        Ok(record)
    }
}

/// Runs `config.steps` steps cycling through `shapes`; `observer` sees every
/// record together with the updated parameters.
pub fn train(
    params: ModelParams,
    shapes: &[TrainingShape],
    config: TrainConfig,
    mut observer: impl FnMut(&StepRecord, &ModelParams) -> Result<()>,
) -> Result<(ModelParams, Vec<StepRecord>)> {
    if shapes.is_empty() {
        return Err(Error::invalid("no training shapes"));
    }
    let mut trainer = Trainer::new(params, config, LossRegistry::standard())?;
    let mut log = Vec::with_capacity(config.steps);
    for k in 0..config.steps {
        let rec = trainer.step(&shapes[k % shapes.len()])?;
        observer(&rec, trainer.params())?;
        log.push(rec);
    }
    Ok((trainer.into_params(), log))
}

pub const LOSS_LOG_HEADER: &str = "step,L_dis,L_sim,L_rec,L_bou,L_con,total";

pub fn loss_log_csv(records: &[StepRecord]) -> String {
    let mut out = String::from(LOSS_LOG_HEADER);
    out.push('\n');
    for r in records {
        let c = &r.components;
        let _ = writeln!(out, "{},{},{},{},{},{},{}", r.step, c.dis, c.sim, c.rec, c.bou, c.con, r.total);
    }
    out
}
