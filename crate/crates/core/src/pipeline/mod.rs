//! File-level commands: synthetic corpus generation, training, inference,
//! refinement, evaluation, matching and color export.
//!
//! A corpus is a manifest of shape names; shape `n` lives in `n.ply`
//! (mesh), `n.sdf` (descriptors) and optionally `n.ann` (annotations).

pub mod colors;
mod config;
pub mod files;

pub use config::{RunConfig, CONFIG_KEYS};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{
    acc_left_right, assembly_by_name, avg_components, cluster_two, detect_symmetry, err_intrinsic, err_matching,
    labels_to_signs, lr_to_labels, match_shapes, AssemblyInputs, EvalReport, GeodesicError,
};
use crate::descriptors::{
    generate_synthetic, load_annotations, load_descriptors, save_annotations, save_descriptors, DescriptorField,
    GroundTruth, SyntheticParams,
};
use crate::disentangler::{forward, load_checkpoint, save_checkpoint, ModelParams};
use crate::error::{Error, Result};
use crate::mesh::{load_mesh, save_ply, PlyFormat, TriMesh};
use crate::numkernel::Matrix;
use crate::refine::{max_flow_by_name, MaxFlow, MrfInstance};
use crate::train::{loss_log_csv, StepRecord, Trainer, TrainingShape};

pub const LOSS_LOG_FILE: &str = "loss_log.csv";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.txt";

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticCorpus {
    pub seed: u64,
    pub count: usize,
    pub resolution: usize,
    pub dim: usize,
    pub noise: f64,
}

/// Writes `shape_<i>.{ply,sdf,ann}` and the manifest. Shape `i` uses geometry
/// seed `seed + i`; all shapes share the basis drawn from `seed`.
pub fn gen_synthetic(corpus: &SyntheticCorpus, out_dir: &Path) -> Result<Vec<String>> {
    if corpus.count == 0 {
        return Err(Error::invalid("count must be >= 1"));
    }
    create_dir(out_dir)?;
    let mut names = Vec::with_capacity(corpus.count);
    for i in 0..corpus.count {
        let shape = generate_synthetic(&SyntheticParams {
            seed: corpus.seed.wrapping_add(i as u64),
            basis_seed: corpus.seed,
            half_resolution: corpus.resolution,
            dim: corpus.dim,
            noise: corpus.noise,
        })?;
        let name = format!("shape_{i:03}");
        save_ply(&shape.mesh, out_dir.join(format!("{name}.ply")), None, PlyFormat::BinaryLittleEndian)?;
        save_descriptors(&shape.field, out_dir.join(format!("{name}.sdf")))?;
        save_annotations(&shape.truth, out_dir.join(format!("{name}.ann")))?;
        names.push(name);
    }
    files::save_manifest(&names, out_dir.join(MANIFEST_FILE))?;
    Ok(names)
}

/// A corpus shape ready for the model: descriptors are row-normalized.
#[derive(Debug, Clone)]
pub struct LoadedShape {
    pub name: String,
    pub mesh: TriMesh,
    pub field: DescriptorField,
    pub truth: Option<GroundTruth>,
}

pub fn load_shape(config: &RunConfig, name: &str) -> Result<LoadedShape> {
    let mesh = load_mesh(config.mesh_path(name))?;
    let field = load_descriptors(config.descriptor_path(name))?;
    if field.vertex_count() != mesh.vertex_count() {
        return Err(Error::invalid(format!(
            "shape `{name}`: {} descriptor rows for {} mesh vertices",
            field.vertex_count(),
            mesh.vertex_count()
        )));
    }
    if field.dim() != config.dim {
        return Err(Error::invalid(format!(
            "shape `{name}`: descriptor dimension {} but config dim is {}",
            field.dim(),
            config.dim
        )));
    }
    let ann = config.annotation_path(name);
    let truth = if ann.exists() {
        let t = load_annotations(&ann)?;
        t.validate(mesh.vertex_count())?;
        Some(t)
    } else {
        None
    };
    Ok(LoadedShape {
        name: name.to_owned(),
        mesh,
        field: field.normalize(),
        truth,
    })
}

pub fn load_corpus(config: &RunConfig) -> Result<Vec<LoadedShape>> {
    files::load_manifest(&config.manifest)?
        .iter()
        .map(|name| load_shape(config, name))
        .collect()
}

pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<StepRecord>,
}

pub fn checkpoint_path(output_dir: &Path, step: usize) -> PathBuf {
    output_dir.join(format!("checkpoint_{step:06}.sdck"))
}

/// Trains from the seeded initialization, writing the loss log, periodic
/// checkpoints and the final checkpoint.
pub fn run_train(config: &RunConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let corpus = load_corpus(config)?;
    let shapes = corpus
        .iter()
        .map(|s| TrainingShape::new(s.name.clone(), &s.mesh, s.field.clone()))
        .collect::<Result<Vec<_>>>()?;
    create_dir(&config.output_dir)?;
    let params = ModelParams::init(config.dim, config.seed)?;
    let mut trainer = Trainer::new(params, config.train_config()?, config.loss_registry()?)?;
    let mut log = Vec::with_capacity(config.steps);
    for k in 0..config.steps {
        log.push(trainer.step(&shapes[k % shapes.len()])?);
        if config.checkpoint_every > 0 && (k + 1) % config.checkpoint_every == 0 {
            save_checkpoint(trainer.params(), checkpoint_path(&config.output_dir, k + 1))?;
        }
    }
    write_file(&config.output_dir.join(LOSS_LOG_FILE), loss_log_csv(&log))?;
    write_file(&config.output_dir.join("config.txt"), config.to_text())?;
    let params = trainer.into_params();
    save_checkpoint(&params, &config.checkpoint)?;
    Ok(TrainOutcome { params, log })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub chi: Vec<f64>,
    pub agno: Matrix,
    pub agno_flipped: Matrix,
}

pub fn infer(params: &ModelParams, field: &DescriptorField) -> Result<Inference> {
    let out = forward(params, &field.normalize())?;
    Ok(Inference {
        chi: out.direct.chi,
        agno: out.direct.agno,
        agno_flipped: out.flipped.agno,
    })
}

/// Writes chi as a vector file and the agnostic features (direct and
/// flipped) as an SDF1 file.
pub fn run_infer(checkpoint: &Path, descriptors: &Path, chi_out: &Path, agno_out: &Path) -> Result<Inference> {
    let params = load_checkpoint(checkpoint)?;
    let field = load_descriptors(descriptors)?;
    let inf = infer(&params, &field)?;
    files::save_vector(&inf.chi, chi_out)?;
    save_descriptors(&DescriptorField::new(inf.agno.clone(), inf.agno_flipped.clone())?, agno_out)?;
    Ok(inf)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineReport {
    pub solver: String,
    pub omega: f64,
    pub vertices: usize,
    pub ones: usize,
    pub energy: f64,
    pub boundary_edges: usize,
    pub components: usize,
    /// Same quantities for the 0.5-threshold labeling of the normalized field.
    pub threshold_energy: f64,
    pub threshold_boundary_edges: usize,
    pub threshold_components: usize,
}

impl RefineReport {
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "solver={}", self.solver);
        let _ = writeln!(out, "omega={}", self.omega);
        let _ = writeln!(out, "vertices={}", self.vertices);
        let _ = writeln!(out, "ones={}", self.ones);
        let _ = writeln!(out, "energy={}", self.energy);
        let _ = writeln!(out, "boundary_edges={}", self.boundary_edges);
        let _ = writeln!(out, "components={}", self.components);
        let _ = writeln!(out, "threshold_energy={}", self.threshold_energy);
        let _ = writeln!(out, "threshold_boundary_edges={}", self.threshold_boundary_edges);
        let _ = writeln!(out, "threshold_components={}", self.threshold_components);
        out
    }
}

fn solver(name: &str) -> Result<Box<dyn MaxFlow>> {
    max_flow_by_name(name).ok_or_else(|| Error::invalid(format!("unknown max-flow solver `{name}`")))
}

pub fn refine_field(chi: &[f64], mesh: &TriMesh, omega: f64, solver_name: &str) -> Result<(Vec<u8>, RefineReport)> {
    let algo = solver(solver_name)?;
    let inst = MrfInstance::build(chi, mesh, omega)?;
    let sol = inst.solve(&*algo)?;
    let thr = inst.threshold_labeling();
    let report = RefineReport {
        solver: solver_name.to_owned(),
        omega,
        vertices: chi.len(),
        ones: sol.labels.iter().filter(|&&l| l == 1).count(),
        energy: sol.energy,
        boundary_edges: inst.boundary_edges(&sol.labels),
        components: mesh.connected_components(&sol.labels)?,
        threshold_energy: inst.energy(&thr)?,
        threshold_boundary_edges: inst.boundary_edges(&thr),
        threshold_components: mesh.connected_components(&thr)?,
    };
    Ok((sol.labels, report))
}

pub fn run_refine(
    chi_path: &Path,
    mesh_path: &Path,
    omega: f64,
    solver_name: &str,
    labels_out: &Path,
    report_out: &Path,
) -> Result<RefineReport> {
    let chi = files::load_vector(chi_path)?;
    let mesh = load_mesh(mesh_path)?;
    let (labels, report) = refine_field(&chi, &mesh, omega, solver_name)?;
    files::save_labels(&labels, labels_out)?;
    write_file(report_out, report.to_key_value())?;
    Ok(report)
}

/// Inputs available to a bipartition strategy.
pub struct PartitionInputs<'a> {
    pub mesh: &'a TriMesh,
    pub chi: &'a [f64],
    pub truth: Option<&'a GroundTruth>,
    pub omega: f64,
    pub solver: &'a dyn MaxFlow,
}

/// Splits a shape into the two sides used by symmetry detection.
pub trait Partitioner: Send + Sync {
    fn name(&self) -> &'static str;
    fn partition(&self, x: &PartitionInputs<'_>) -> Result<Vec<u8>>;
}

struct GroundTruthSides;
struct ClusteredChi;
struct RefinedChi;

impl Partitioner for GroundTruthSides {
    fn name(&self) -> &'static str {
        "gt"
    }

    fn partition(&self, x: &PartitionInputs<'_>) -> Result<Vec<u8>> {
        let t = x.truth.ok_or_else(|| Error::invalid("`gt` partition needs annotations"))?;
        Ok(lr_to_labels(&t.lr_labels))
    }
}

impl Partitioner for ClusteredChi {
    fn name(&self) -> &'static str {
        "chi"
    }

    fn partition(&self, x: &PartitionInputs<'_>) -> Result<Vec<u8>> {
        cluster_two(x.chi)
    }
}

impl Partitioner for RefinedChi {
    fn name(&self) -> &'static str {
        "chi-refined"
    }

    fn partition(&self, x: &PartitionInputs<'_>) -> Result<Vec<u8>> {
        Ok(MrfInstance::build(x.chi, x.mesh, x.omega)?.solve(x.solver)?.labels)
    }
}

pub fn partition_names() -> Vec<&'static str> {
    vec!["gt", "chi", "chi-refined"]
}

pub fn partition_by_name(name: &str) -> Option<Box<dyn Partitioner>> {
    match name {
        "gt" => Some(Box::new(GroundTruthSides)),
        "chi" => Some(Box::new(ClusteredChi)),
        "chi-refined" => Some(Box::new(RefinedChi)),
        _ => None,
    }
}

/// Per-shape model outputs used by evaluation and matching.
#[derive(Debug, Clone)]
pub struct ShapeOutputs {
    pub inference: Inference,
    pub clustered: Vec<u8>,
    pub refined: Vec<u8>,
}

pub fn shape_outputs(params: &ModelParams, shape: &LoadedShape, config: &RunConfig) -> Result<ShapeOutputs> {
    let inference = infer(params, &shape.field)?;
    let clustered = cluster_two(&inference.chi)?;
    let (refined, _) = refine_field(&inference.chi, &shape.mesh, config.omega, &config.maxflow)?;
    Ok(ShapeOutputs {
        inference,
        clustered,
        refined,
    })
}

fn assemble(config: &RunConfig, shape: &LoadedShape, out: &ShapeOutputs) -> Result<Matrix> {
    let mode = assembly_by_name(&config.match_mode)
        .ok_or_else(|| Error::invalid(format!("unknown match mode `{}`", config.match_mode)))?;
    mode.assemble(
        &AssemblyInputs {
            raw: shape.field.values(),
            chi: &out.inference.chi,
            agno: &out.inference.agno,
            refined: Some(&out.refined),
        },
        config.alpha,
    )
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Symmetry detection, left/right accuracy, component counts and
/// consecutive-pair matching over the corpus. Shapes without annotations
/// only enter the component averages.
pub fn evaluate(config: &RunConfig, params: &ModelParams, corpus: &[LoadedShape]) -> Result<EvalReport> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::invalid("empty corpus"));
    }
    let partitioner = partition_by_name(&config.partition)
        .ok_or_else(|| Error::invalid(format!("unknown partition `{}`", config.partition)))?;
    let algo = solver(&config.maxflow)?;
    let mut report = EvalReport {
        shapes: corpus.len(),
        ..EvalReport::default()
    };
    let outputs = corpus
        .iter()
        .map(|s| shape_outputs(params, s, config))
        .collect::<Result<Vec<_>>>()?;

    let (mut err_means, mut chis, mut refined, mut gts) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (shape, out) in corpus.iter().zip(&outputs) {
        let Some(truth) = &shape.truth else {
            report.skipped.push(format!("{}: no annotations", shape.name));
            continue;
        };
        let sides = partitioner.partition(&PartitionInputs {
            mesh: &shape.mesh,
            chi: &out.inference.chi,
            truth: Some(truth),
            omega: config.omega,
            solver: &*algo,
        })?;
        let features = match config.symmetry_features.as_str() {
            "raw" => shape.field.values(),
            _ => &out.inference.agno,
        };
        let e = err_intrinsic(&detect_symmetry(&sides, features)?, truth, &shape.mesh)?;
        err_means.push(e.mean);
        report.err_int_vertices += e.evaluated;
        report.err_int_excluded += e.excluded;
        chis.push(out.inference.chi.clone());
        refined.push(labels_to_signs(&out.refined));
        gts.push(truth.lr_labels.clone());
    }
    report.err_int = mean(&err_means);
    if !gts.is_empty() {
        report.acc_lr = Some(acc_left_right(&chis, &gts)?);
        report.acc_lr_refined = Some(acc_left_right(&refined, &gts)?);
    }
    let clustered: Vec<(&TriMesh, &[u8])> = corpus.iter().zip(&outputs).map(|(s, o)| (&s.mesh, &o.clustered[..])).collect();
    let refined_sets: Vec<(&TriMesh, &[u8])> = corpus.iter().zip(&outputs).map(|(s, o)| (&s.mesh, &o.refined[..])).collect();
    report.avg_components = Some(avg_components(&clustered)?);
    report.avg_components_refined = Some(avg_components(&refined_sets)?);

    let mut mat_means = Vec::new();
    for k in 1..corpus.len() {
        let (src, dst) = (&corpus[k - 1], &corpus[k]);
        let gt = match (&src.truth, &dst.truth) {
            (Some(a), Some(b)) => a.correspondence_to(b),
            _ => None,
        };
        let Some(gt) = gt else {
            report.skipped.push(format!("{} -> {}: no template correspondence", src.name, dst.name));
            continue;
        };
        let pred = match_shapes(&assemble(config, src, &outputs[k - 1])?, &assemble(config, dst, &outputs[k])?)?;
        mat_means.push(err_matching(&pred, &gt, &dst.mesh)?.mean);
    }
    report.err_mat = mean(&mat_means);
    report.err_mat_pairs = mat_means.len();
    report.validate()?;
    Ok(report)
}

pub fn run_eval(config: &RunConfig) -> Result<EvalReport> {
    let params = load_checkpoint(&config.checkpoint)?;
    let corpus = load_corpus(config)?;
    let report = evaluate(config, &params, &corpus)?;
    create_dir(&config.output_dir)?;
    write_file(&config.output_dir.join(REPORT_TEXT_FILE), report.to_key_value())?;
    write_file(&config.output_dir.join(REPORT_JSON_FILE), report.to_json())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    pub map: Vec<usize>,
    /// Present when both shapes carry template annotations.
    pub error: Option<GeodesicError>,
}

pub fn format_map(map: &[usize]) -> String {
    let mut out = format!("# {} source vertices -> target vertex\n", map.len());
    for m in map {
        let _ = writeln!(out, "{m}");
    }
    out
}

/// Matches two corpus shapes with the configured feature assembly and
/// writes the vertex map.
pub fn run_match(config: &RunConfig, source: &str, target: &str, map_out: &Path) -> Result<MatchOutcome> {
    config.validate()?;
    let params = load_checkpoint(&config.checkpoint)?;
    let (src, dst) = (load_shape(config, source)?, load_shape(config, target)?);
    let (so, to) = (shape_outputs(&params, &src, config)?, shape_outputs(&params, &dst, config)?);
    let map = match_shapes(&assemble(config, &src, &so)?, &assemble(config, &dst, &to)?)?;
    write_file(map_out, format_map(&map))?;
    let error = match (&src.truth, &dst.truth) {
        (Some(a), Some(b)) => match a.correspondence_to(b) {
            Some(gt) => Some(err_matching(&map, &gt, &dst.mesh)?),
            None => None,
        },
        _ => None,
    };
    Ok(MatchOutcome { map, error })
}

/// Colors a mesh by a chi vector or labels file and writes an ascii PLY.
pub fn run_export_colors(mesh_path: &Path, field_path: &Path, out: &Path) -> Result<Vec<[u8; 3]>> {
    let mesh = load_mesh(mesh_path)?;
    let values = files::load_scalar_field(field_path)?;
    if values.len() != mesh.vertex_count() {
        return Err(Error::invalid(format!(
            "{} field values for {} mesh vertices",
            values.len(),
            mesh.vertex_count()
        )));
    }
    let colors = colors::field_colors(&values)?;
    save_ply(&mesh, out, Some(&colors), PlyFormat::Ascii)?;
    Ok(colors)
}
