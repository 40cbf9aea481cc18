use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::losses::{LossRegistry, LossWeights, DEFAULT_CONSISTENCY_SAMPLES};
use crate::numkernel::AdamConfig;
use crate::refine::{max_flow_by_name, DEFAULT_OMEGA};
use crate::analysis::assembly_by_name;
use crate::train::{TrainConfig, DEFAULT_LEARNING_RATE};

use super::partition_by_name;

/// Settings shared by every command. Text form is flat `key=value` with
/// `#` comments; later assignments win, so command-line flags are applied
/// with [`RunConfig::set`] after the file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: PathBuf,
    /// Directories holding `<name>.ply`, `<name>.sdf` and `<name>.ann`;
    /// `None` means the manifest's directory.
    pub mesh_dir: Option<PathBuf>,
    pub descriptor_dir: Option<PathBuf>,
    pub annotation_dir: Option<PathBuf>,
    pub checkpoint: PathBuf,
    pub output_dir: PathBuf,
    pub dim: usize,
    pub weights: LossWeights,
    /// Comma-separated loss terms to record.
    pub losses: String,
    pub samples: usize,
    pub lr: f64,
    pub steps: usize,
    pub seed: u64,
    /// Write `checkpoint_<step>.sdck` every this many steps (0 = final only).
    pub checkpoint_every: usize,
    pub omega: f64,
    pub maxflow: String,
    /// Bipartition used for symmetry detection: `gt`, `chi` or `chi-refined`.
    pub partition: String,
    /// Features for symmetry detection: `raw` or `agno`.
    pub symmetry_features: String,
    pub match_mode: String,
    pub alpha: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let w = LossWeights::default();
        Self {
            manifest: PathBuf::from("manifest.txt"),
            mesh_dir: None,
            descriptor_dir: None,
            annotation_dir: None,
            checkpoint: PathBuf::from("model.sdck"),
            output_dir: PathBuf::from("out"),
            dim: 16,
            weights: w,
            losses: LossRegistry::standard().names().join(","),
            samples: DEFAULT_CONSISTENCY_SAMPLES,
            lr: DEFAULT_LEARNING_RATE,
            steps: 2000,
            seed: 0,
            checkpoint_every: 0,
            omega: DEFAULT_OMEGA,
            maxflow: "bk".into(),
            partition: "chi".into(),
            symmetry_features: "agno".into(),
            match_mode: "agno+chi".into(),
            alpha: 1.0,
        }
    }
}

pub const CONFIG_KEYS: [&str; 23] = [
    "manifest",
    "mesh_dir",
    "descriptor_dir",
    "annotation_dir",
    "checkpoint",
    "output_dir",
    "dim",
    "lambda_sim",
    "lambda_rec",
    "lambda_bou",
    "lambda_con",
    "losses",
    "samples",
    "lr",
    "steps",
    "seed",
    "checkpoint_every",
    "omega",
    "maxflow",
    "partition",
    "symmetry_features",
    "match_mode",
    "alpha",
];

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("bad value `{value}` for `{key}`")))
}

fn optional_dir(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "manifest" => self.manifest = value.into(),
            "mesh_dir" => self.mesh_dir = optional_dir(value),
            "descriptor_dir" => self.descriptor_dir = optional_dir(value),
            "annotation_dir" => self.annotation_dir = optional_dir(value),
            "checkpoint" => self.checkpoint = value.into(),
            "output_dir" => self.output_dir = value.into(),
            "dim" => self.dim = number(key, value)?,
            "lambda_sim" => self.weights.sim = number(key, value)?,
            "lambda_rec" => self.weights.rec = number(key, value)?,
            "lambda_bou" => self.weights.bou = number(key, value)?,
            "lambda_con" => self.weights.con = number(key, value)?,
            "losses" => self.losses = value.into(),
            "samples" => self.samples = number(key, value)?,
            "lr" => self.lr = number(key, value)?,
            "steps" => self.steps = number(key, value)?,
            "seed" => self.seed = number(key, value)?,
            "checkpoint_every" => self.checkpoint_every = number(key, value)?,
            "omega" => self.omega = number(key, value)?,
            "maxflow" => self.maxflow = value.into(),
            "partition" => self.partition = value.into(),
            "symmetry_features" => self.symmetry_features = value.into(),
            "match_mode" => self.match_mode = value.into(),
            "alpha" => self.alpha = number(key, value)?,
            _ => return Err(Error::invalid(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut config = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, format!("line {}", i + 1), "expected key=value"))?;
            config
                .set(key.trim(), value)
                .map_err(|e| Error::parse(origin, format!("line {}", i + 1), e.to_string()))?;
        }
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let dir = |d: &Option<PathBuf>| d.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("manifest", self.manifest.display().to_string());
        kv("mesh_dir", dir(&self.mesh_dir));
        kv("descriptor_dir", dir(&self.descriptor_dir));
        kv("annotation_dir", dir(&self.annotation_dir));
        kv("checkpoint", self.checkpoint.display().to_string());
        kv("output_dir", self.output_dir.display().to_string());
        kv("dim", self.dim.to_string());
        kv("lambda_sim", self.weights.sim.to_string());
        kv("lambda_rec", self.weights.rec.to_string());
        kv("lambda_bou", self.weights.bou.to_string());
        kv("lambda_con", self.weights.con.to_string());
        kv("losses", self.losses.clone());
        kv("samples", self.samples.to_string());
        kv("lr", self.lr.to_string());
        kv("steps", self.steps.to_string());
        kv("seed", self.seed.to_string());
        kv("checkpoint_every", self.checkpoint_every.to_string());
        kv("omega", self.omega.to_string());
        kv("maxflow", self.maxflow.clone());
        kv("partition", self.partition.clone());
        kv("symmetry_features", self.symmetry_features.clone());
        kv("match_mode", self.match_mode.clone());
        kv("alpha", self.alpha.to_string());
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config()?.validate()?;
        self.loss_registry()?;
        if self.dim < 2 {
            return Err(Error::invalid(format!("dim must be >= 2, got {}", self.dim)));
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(Error::invalid(format!("omega must be >= 0, got {}", self.omega)));
        }
        if !self.alpha.is_finite() {
            return Err(Error::invalid("alpha must be finite"));
        }
        if max_flow_by_name(&self.maxflow).is_none() {
            return Err(Error::invalid(format!("unknown max-flow solver `{}`", self.maxflow)));
        }
        if partition_by_name(&self.partition).is_none() {
            return Err(Error::invalid(format!("unknown partition `{}`", self.partition)));
        }
        if !matches!(self.symmetry_features.as_str(), "raw" | "agno") {
            return Err(Error::invalid(format!(
                "symmetry_features must be `raw` or `agno`, got `{}`",
                self.symmetry_features
            )));
        }
        if assembly_by_name(&self.match_mode).is_none() {
            return Err(Error::invalid(format!("unknown match mode `{}`", self.match_mode)));
        }
        Ok(())
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let config = TrainConfig {
            steps: self.steps,
            adam: AdamConfig {
                lr: self.lr,
                ..AdamConfig::default()
            },
            weights: self.weights,
            consistency_samples: self.samples,
            seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn loss_registry(&self) -> Result<LossRegistry> {
        let names: Vec<&str> = self.losses.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        if names.is_empty() {
            return Err(Error::invalid("no loss terms selected"));
        }
        LossRegistry::select(&names)
    }

    fn base_dir(&self) -> PathBuf {
        self.manifest.parent().map(Path::to_path_buf).unwrap_or_default()
    }

    pub fn mesh_path(&self, name: &str) -> PathBuf {
        self.mesh_dir.clone().unwrap_or_else(|| self.base_dir()).join(format!("{name}.ply"))
    }

    pub fn descriptor_path(&self, name: &str) -> PathBuf {
        self.descriptor_dir.clone().unwrap_or_else(|| self.base_dir()).join(format!("{name}.sdf"))
    }

    pub fn annotation_path(&self, name: &str) -> PathBuf {
        self.annotation_dir.clone().unwrap_or_else(|| self.base_dir()).join(format!("{name}.ann"))
    }
}
