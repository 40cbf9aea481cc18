//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints one PASS/FAIL line; exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use symdis::analysis::{acc_left_right, err_intrinsic, err_matching, match_shapes, EvalReport};
use symdis::descriptors::DescriptorField;
use symdis::disentangler::{orthonormality_error, record_forward, ModelParams, ModelVars};
use symdis::losses::{
    loss_bou, loss_con, loss_dis, loss_rec, loss_sim, record_objective, LossInputs, LossRegistry, LossWeights,
    MIN_MAX_EPS,
};
use symdis::mesh::{TriMesh, TupleSets};
use symdis::numkernel::{Graph, Matrix};
use symdis::pipeline::{self, LoadedShape, RunConfig, SyntheticCorpus};
use symdis::refine::{max_flow_by_name, MrfInstance};
use symdis::train::{Trainer, TrainingShape};

// ---- tolerances ----

const MRF_SMALL_INSTANCES: usize = 100;
const MRF_MAX_VERTICES: usize = 16;
const MRF_EXACT_BUDGET: Duration = Duration::from_secs(5);
const DOMINANCE_PAIRS: usize = 1000;
const FD_STEP: f64 = 1e-5;
const FD_REL_TOL: f64 = 1e-4;
const FD_FIXTURES: usize = 10;
const FD_BUDGET: Duration = Duration::from_secs(30);
const ORTHO_TOL: f64 = 1e-6;
const ORTHO_STEPS: usize = 500;
const ORACLE_TOL: f64 = 1e-12;
const ORACLE_FIXTURES: usize = 50;
const E2E_SHAPES: usize = 20;
const E2E_NOISE: f64 = 0.01;
const E2E_RESOLUTION: usize = 28;
const E2E_DIM: usize = 16;
const E2E_STEPS: usize = 2000;
const E2E_MIN_ACC: f64 = 0.95;
const E2E_MAX_ERR_RATIO: f64 = 0.5;
const E2E_BUDGET: Duration = Duration::from_secs(15 * 60);
const REFINED_MAX_COMPONENTS: f64 = 3.0;
const REFINED_ACC_SLACK: f64 = 0.01;

type Outcome = Result<String, String>;

fn check(cond: bool, pass: String, fail: String) -> Outcome {
    if cond {
        Ok(pass)
    } else {
        Err(fail)
    }
}

// ---- random fixtures ----

/// Jittered `nx x ny` grid with a random diagonal per quad.
fn random_grid(rng: &mut ChaCha8Rng, nx: usize, ny: usize) -> TriMesh {
    let mut pos = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            pos.push([
                i as f64 + rng.random_range(-0.2..0.2),
                j as f64 + rng.random_range(-0.2..0.2),
                rng.random_range(-0.3..0.3),
            ]);
        }
    }
    let mut faces = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let (a, b, c, d) = (j * nx + i, j * nx + i + 1, (j + 1) * nx + i + 1, (j + 1) * nx + i);
            if rng.random_bool(0.5) {
                faces.extend([[a, b, c], [a, c, d]]);
            } else {
                faces.extend([[a, b, d], [b, c, d]]);
            }
        }
    }
    TriMesh::new(pos, faces).unwrap()
}

fn jittered_octahedron(rng: &mut ChaCha8Rng) -> TriMesh {
    let base = [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ];
    let pos = base
        .iter()
        .map(|p: &[f64; 3]| std::array::from_fn(|k| p[k] + rng.random_range(-0.2..0.2)))
        .collect();
    let faces = vec![
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ];
    TriMesh::new(pos, faces).unwrap()
}

/// Random mesh with at most `max_v` vertices.
fn random_mesh(rng: &mut ChaCha8Rng, max_v: usize) -> TriMesh {
    loop {
        if max_v >= 6 && rng.random_bool(0.25) {
            return jittered_octahedron(rng);
        }
        let nx = rng.random_range(2..=5);
        let ny = rng.random_range(2..=5);
        if nx * ny <= max_v {
            return random_grid(rng, nx, ny);
        }
    }
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_vec(r, c, rand_vec(rng, r * c)).unwrap()
}

fn unit_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for i in 0..m.rows() {
        let n = (0..m.cols()).map(|j| m.get(i, j).powi(2)).sum::<f64>().sqrt();
        for j in 0..m.cols() {
            out.set(i, j, m.get(i, j) / n.max(1e-12));
        }
    }
    out
}

fn random_field(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DescriptorField {
    DescriptorField::new(rand_matrix(rng, n, d), rand_matrix(rng, n, d)).unwrap().normalize()
}

// ---- 1, 2: MRF ----

/// Exact integer energies: every potential is an integer multiple of
/// 2^-SHIFT (asserted), so sums are exact in i128.
const SHIFT: i32 = 100;

fn to_fixed(x: f64) -> i128 {
    let y = x * 2f64.powi(SHIFT);
    assert_eq!(y.fract(), 0.0, "{x} not representable at 2^-{SHIFT}");
    y as i128
}

fn brute_force_min(inst: &MrfInstance) -> (i128, Vec<u8>) {
    let n = inst.vertex_count();
    let unary: Vec<[i128; 2]> = inst.unary().iter().map(|t| [to_fixed(t[0]), to_fixed(t[1])]).collect();
    let w: Vec<i128> = inst.weights().iter().map(|&x| to_fixed(x)).collect();
    let mut best = (i128::MAX, Vec::new());
    for mask in 0u32..(1 << n) {
        let x: Vec<u8> = (0..n).map(|v| ((mask >> v) & 1) as u8).collect();
        let mut e: i128 = (0..n).map(|v| unary[v][x[v] as usize]).sum();
        for (edge, &wi) in inst.edges().iter().zip(&w) {
            if x[edge[0]] != x[edge[1]] {
                e += wi;
            }
        }
        if e < best.0 {
            best = (e, x);
        }
    }
    best
}

fn fixed_energy(inst: &MrfInstance, x: &[u8]) -> i128 {
    let mut e: i128 = inst.unary().iter().zip(x).map(|(t, &l)| to_fixed(t[l as usize])).sum();
    for (edge, &w) in inst.edges().iter().zip(inst.weights()) {
        if x[edge[0]] != x[edge[1]] {
            e += to_fixed(w);
        }
    }
    e
}

fn mrf_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let start = Instant::now();
    let mut mismatches = Vec::new();
    for k in 0..MRF_SMALL_INSTANCES {
        let mesh = random_mesh(&mut rng, MRF_MAX_VERTICES);
        let chi = rand_vec(&mut rng, mesh.vertex_count());
        let omega = [0.1, 1.0, 5.0][k % 3];
        let inst = MrfInstance::build(&chi, &mesh, omega).unwrap();
        let (best, _) = brute_force_min(&inst);
        let best_f64 = best as f64 / 2f64.powi(SHIFT);
        for solver in ["bk", "dinic"] {
            let sol = inst.solve(&*max_flow_by_name(solver).unwrap()).unwrap();
            if fixed_energy(&inst, &sol.labels) != best || sol.energy != best_f64 {
                mismatches.push(format!("instance {k} ({solver}): {} vs {best_f64}", sol.energy));
            }
        }
    }
    let t = start.elapsed();
    check(
        mismatches.is_empty() && t < MRF_EXACT_BUDGET,
        format!("{MRF_SMALL_INSTANCES} instances, bk and dinic equal brute force exactly, {t:.2?}"),
        format!("{} mismatches {:?}, {t:.2?} (budget {MRF_EXACT_BUDGET:?})", mismatches.len(), mismatches.first()),
    )
}

fn optimality_dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut violations = 0;
    let mut pairs = 0;
    while pairs < DOMINANCE_PAIRS {
        let (nx, ny) = (rng.random_range(2..=12), rng.random_range(2..=12));
        let mesh = random_grid(&mut rng, nx, ny);
        let n = mesh.vertex_count();
        let chi = rand_vec(&mut rng, n);
        let omega = rng.random_range(0.0..3.0);
        let inst = MrfInstance::build(&chi, &mesh, omega).unwrap();
        let solver = if pairs % 2 == 0 { "bk" } else { "dinic" };
        let sol = inst.solve(&*max_flow_by_name(solver).unwrap()).unwrap();
        let mut candidates = vec![inst.threshold_labeling(), vec![0; n], vec![1; n]];
        for _ in 0..5 {
            candidates.push((0..n).map(|_| rng.random_range(0..2u8)).collect());
            let mut near = sol.labels.clone();
            for _ in 0..rng.random_range(1..=3) {
                let v = rng.random_range(0..n);
                near[v] ^= 1;
            }
            candidates.push(near);
        }
        for c in candidates.into_iter().take(DOMINANCE_PAIRS - pairs) {
            pairs += 1;
            if sol.energy > inst.energy(&c).unwrap() {
                violations += 1;
            }
        }
    }
    check(
        violations == 0,
        format!("{pairs} pairs, 0 violations"),
        format!("{violations} of {pairs} candidates beat the solver"),
    )
}

// ---- 3: gradients ----

const TERMS: [&str; 5] = ["dis", "sim", "rec", "bou", "con"];

/// `[dis, sim, rec, bou, con, total]` under the default weights.
fn objective_values(params: &ModelParams, field: &DescriptorField, tuples: &TupleSets, sample: &[usize]) -> [f64; 6] {
    let mut g = Graph::new();
    let vars = ModelVars::register(&mut g, params);
    let fv = record_forward(&mut g, &vars, params, field).unwrap();
    let inputs = LossInputs {
        forward: &fv,
        tuples,
        sample,
    };
    let obj = record_objective(&mut g, &LossRegistry::standard(), &inputs, &LossWeights::default()).unwrap();
    let c = obj.components(&g);
    let mut out = [0.0; 6];
    for (k, t) in TERMS.iter().enumerate() {
        out[k] = c.get(t).unwrap();
    }
    out[5] = g.scalar(obj.total);
    out
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut worst = [0.0f64; 6];
    let mut checked = 0usize;
    for f in 0..FD_FIXTURES {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + f as u64);
        let mesh = if f % 2 == 0 {
            jittered_octahedron(&mut rng)
        } else {
            random_grid(&mut rng, 3, 2)
        };
        let n = mesh.vertex_count();
        let tuples = TupleSets::from_mesh(&mesh);
        let field = random_field(&mut rng, n, 8);
        let params = ModelParams::random(8, 400 + f as u64, 0.3).unwrap();
        let sample: Vec<usize> = if f % 3 == 0 { vec![0, 2, 3, 5] } else { (0..n).collect() };

        let mut g = Graph::new();
        let vars = ModelVars::register(&mut g, &params);
        let fv = record_forward(&mut g, &vars, &params, &field).unwrap();
        let inputs = LossInputs {
            forward: &fv,
            tuples: &tuples,
            sample: &sample,
        };
        let obj = record_objective(&mut g, &LossRegistry::standard(), &inputs, &LossWeights::default()).unwrap();
        let mut roots: Vec<_> = TERMS
            .iter()
            .map(|t| obj.terms.iter().find(|(name, _)| name == t).unwrap().1)
            .collect();
        roots.push(obj.total);
        let grads: Vec<_> = roots.iter().map(|&r| g.backward(r).unwrap()).collect();

        for (name, m) in params.params().iter() {
            let analytic: Vec<Matrix> = grads
                .iter()
                .map(|gr| gr.param(name).unwrap_or_else(|| Matrix::zeros(m.rows(), m.cols())))
                .collect();
            for k in 0..m.data().len() {
                let mut p = params.clone();
                p.params_mut().get_mut(name).unwrap().data_mut()[k] += FD_STEP;
                let up = objective_values(&p, &field, &tuples, &sample);
                p.params_mut().get_mut(name).unwrap().data_mut()[k] -= 2.0 * FD_STEP;
                let down = objective_values(&p, &field, &tuples, &sample);
                for t in 0..6 {
                    let num = (up[t] - down[t]) / (2.0 * FD_STEP);
                    let a = analytic[t].data()[k];
                    worst[t] = worst[t].max((a - num).abs() / a.abs().max(1.0));
                }
                checked += 1;
            }
        }
    }
    let t = start.elapsed();
    let max = worst.iter().copied().fold(0.0, f64::max);
    let detail = format!(
        "{FD_FIXTURES} fixtures, {checked} scalars, max rel err dis {:.1e} sim {:.1e} rec {:.1e} bou {:.1e} con {:.1e} total {:.1e}, {t:.2?}",
        worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]
    );
    check(max < FD_REL_TOL && t < FD_BUDGET, detail.clone(), format!("{detail} (tol {FD_REL_TOL:e}, budget {FD_BUDGET:?})"))
}

// ---- 4: orthonormality ----

fn orthonormality() -> Outcome {
    let shape = symdis::descriptors::generate_synthetic(&symdis::descriptors::SyntheticParams {
        seed: 9,
        basis_seed: 9,
        half_resolution: 8,
        dim: 16,
        noise: 0.01,
    })
    .unwrap();
    let ts = TrainingShape::new("s", &shape.mesh, shape.field.normalize()).unwrap();
    let params = ModelParams::init(16, 0).unwrap();
    let mut worst = orthonormality_error(&params.projection().unwrap());
    let init = worst;
    let config = RunConfig::default().train_config().unwrap();
    let mut trainer = Trainer::new(params, config, LossRegistry::standard()).unwrap();
    for _ in 0..ORTHO_STEPS {
        trainer.step(&ts).unwrap();
        worst = worst.max(orthonormality_error(&trainer.params().projection().unwrap()));
    }
    check(
        worst < ORTHO_TOL,
        format!("init {init:.1e}, max over {ORTHO_STEPS} steps {worst:.1e}"),
        format!("max |A^T A - I| = {worst:e} (tol {ORTHO_TOL:e})"),
    )
}

// ---- 5: loss oracles ----

fn oracle_dis(c: &[f64], cb: &[f64]) -> f64 {
    -c.iter().zip(cb).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / (c.len() as f64).sqrt()
}

fn oracle_frob(a: &Matrix, b: &Matrix) -> f64 {
    let mut s = 0.0;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            s += (a.get(i, j) - b.get(i, j)).powi(2);
        }
    }
    s.sqrt() / (a.rows() as f64).sqrt()
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Boundary loss by enumerating every neighbor pair of every vertex,
/// with neighbors, normals and tangent projections rebuilt from the faces.
fn oracle_bou(mesh: &TriMesh, c: &[f64], cb: &[f64]) -> f64 {
    let n = mesh.vertex_count();
    let p = mesh.positions();
    let mut nbrs = vec![Vec::new(); n];
    let mut normal = vec![[0.0; 3]; n];
    for f in mesh.faces() {
        let cr = cross3(sub3(p[f[1]], p[f[0]]), sub3(p[f[2]], p[f[0]]));
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            if !nbrs[a].contains(&b) {
                nbrs[a].push(b);
                nbrs[b].push(a);
            }
            for t in 0..3 {
                normal[f[k]][t] += cr[t];
            }
        }
    }
    let mut total = 0.0;
    for v in 0..n {
        let l = dot3(normal[v], normal[v]).sqrt();
        let nv = normal[v].map(|x| x / l);
        let tangent = |u: usize| {
            let e = sub3(p[u], p[v]);
            let h = dot3(e, nv);
            [e[0] - h * nv[0], e[1] - h * nv[1], e[2] - h * nv[2]]
        };
        for x in [c, cb] {
            let mut best = f64::INFINITY;
            for &u in &nbrs[v] {
                for &w in &nbrs[v] {
                    let (a, b) = (tangent(u), tangent(w));
                    let (la, lb) = (dot3(a, a).sqrt(), dot3(b, b).sqrt());
                    let cos = if la <= 1e-12 || lb <= 1e-12 {
                        0.0
                    } else {
                        (-dot3(a, b) / (la * lb)).clamp(-1.0, 1.0)
                    };
                    best = best.min((x[u] - x[v]).powi(2) + (x[v] - x[w]).powi(2) - cos);
                }
            }
            total += best;
        }
    }
    total / n as f64
}

fn min_max(x: &[f64]) -> Vec<f64> {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    x.iter().map(|v| (v - lo) / (hi - lo + MIN_MAX_EPS)).collect()
}

fn oracle_con(c: &[f64], s: &Matrix, cb: &[f64], sb: &Matrix, sample: &[usize]) -> f64 {
    let m = sample.len();
    let branch = |c: &[f64], s: &Matrix| {
        let mut w = Vec::with_capacity(m * m);
        let mut cs = Vec::with_capacity(m * m);
        for &i in sample {
            for &j in sample {
                w.push((c[i] - c[j]).powi(2));
                cs.push((0..s.cols()).map(|t| s.get(i, t) * s.get(j, t)).sum::<f64>());
            }
        }
        let pi: Vec<f64> = min_max(&w).iter().zip(min_max(&cs)).map(|(a, b)| a * b).collect();
        let mut r = 0.0;
        for i in 0..m {
            for j in 0..m {
                let sq: f64 = (0..m).map(|k| pi[i * m + k] * pi[k * m + j]).sum();
                r += ((i == j) as u8 as f64 - sq).powi(2);
            }
        }
        r
    };
    (branch(c, s) + branch(cb, sb)).sqrt() / m as f64
}

fn concat_cols(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), a.cols() + b.cols());
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            out.set(i, j, a.get(i, j));
        }
        for j in 0..b.cols() {
            out.set(i, a.cols() + j, b.get(i, j));
        }
    }
    out
}

fn loss_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst = [0.0f64; 6];
    for f in 0..ORACLE_FIXTURES {
        let mesh = random_mesh(&mut rng, 20);
        let n = mesh.vertex_count();
        let tuples = TupleSets::from_mesh(&mesh);
        let (c, cb) = (rand_vec(&mut rng, n), rand_vec(&mut rng, n));
        let (s, sb) = (unit_rows(&rand_matrix(&mut rng, n, 4)), unit_rows(&rand_matrix(&mut rng, n, 4)));
        let (x, r) = (rand_matrix(&mut rng, n, 6), rand_matrix(&mut rng, n, 6));
        let m = rng.random_range(2..=n);
        let mut sample: Vec<usize> = rand::seq::index::sample(&mut rng, n, m).into_vec();
        sample.sort_unstable();

        let diffs = [
            (loss_dis(&c, &cb).unwrap() - oracle_dis(&c, &cb)).abs(),
            (loss_sim(&s, &sb).unwrap() - oracle_frob(&s, &sb)).abs(),
            (loss_rec(&x, &r).unwrap() - oracle_frob(&x, &r)).abs(),
            (loss_bou(&tuples, &c, &cb).unwrap() - oracle_bou(&mesh, &c, &cb)).abs(),
            (loss_con(&c, &s, &cb, &sb, &sample).unwrap() - oracle_con(&c, &s, &cb, &sb, &sample)).abs(),
        ];
        for (w, d) in worst.iter_mut().zip(diffs) {
            *w = w.max(d);
        }

        // the wired objective on a real forward pass against the same oracles
        let field = random_field(&mut rng, n, 5);
        let params = ModelParams::random(5, f as u64, 0.3).unwrap();
        let out = symdis::disentangler::forward(&params, &field).unwrap();
        let (d, fl) = (&out.direct, &out.flipped);
        let expect = [
            oracle_dis(&d.chi, &fl.chi),
            oracle_frob(&d.agno, &fl.agno),
            oracle_frob(&concat_cols(field.values(), field.flipped()), &out.reconstruction),
            oracle_bou(&mesh, &d.chi, &fl.chi),
            oracle_con(&d.chi, &d.agno, &fl.chi, &fl.agno, &sample),
        ];
        let w = LossWeights::default();
        let expect_total = expect[0] + w.sim * expect[1] + w.rec * expect[2] + w.bou * expect[3] + w.con * expect[4];
        let mut g = Graph::new();
        let vars = ModelVars::register(&mut g, &params);
        let fv = record_forward(&mut g, &vars, &params, &field).unwrap();
        let inputs = LossInputs {
            forward: &fv,
            tuples: &tuples,
            sample: &sample,
        };
        let obj = record_objective(&mut g, &LossRegistry::standard(), &inputs, &w).unwrap();
        let comp = obj.components(&g);
        for (k, t) in TERMS.iter().enumerate() {
            worst[k] = worst[k].max((comp.get(t).unwrap() - expect[k]).abs());
        }
        worst[5] = worst[5].max((g.scalar(obj.total) - expect_total).abs());
    }
    let max = worst.iter().copied().fold(0.0, f64::max);
    let detail = format!(
        "{ORACLE_FIXTURES} fixtures, max abs diff dis {:.1e} sim {:.1e} rec {:.1e} bou {:.1e} con {:.1e} total {:.1e}",
        worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]
    );
    check(max < ORACLE_TOL, detail.clone(), format!("{detail} (tol {ORACLE_TOL:e})"))
}

// ---- 6, 7, 8: shared synthetic run ----

struct Trained {
    _dir: tempfile::TempDir,
    corpus: Vec<LoadedShape>,
    params: ModelParams,
    ours: EvalReport,
    baseline: EvalReport,
    elapsed: Duration,
}

fn train_corpus() -> Trained {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    pipeline::gen_synthetic(
        &SyntheticCorpus {
            seed: 0,
            count: E2E_SHAPES,
            resolution: E2E_RESOLUTION,
            dim: E2E_DIM,
            noise: E2E_NOISE,
        },
        dir.path(),
    )
    .unwrap();
    let mut config = RunConfig::default();
    config.manifest = dir.path().join(pipeline::MANIFEST_FILE);
    config.output_dir = dir.path().join("out");
    config.checkpoint = dir.path().join("out/model.sdck");
    config.dim = E2E_DIM;
    config.steps = E2E_STEPS;
    let params = pipeline::run_train(&config).unwrap().params;
    let corpus = pipeline::load_corpus(&config).unwrap();
    let ours = pipeline::evaluate(&config, &params, &corpus).unwrap();
    let mut raw = config.clone();
    raw.symmetry_features = "raw".into();
    let baseline = pipeline::evaluate(&raw, &params, &corpus).unwrap();
    Trained {
        _dir: dir,
        corpus,
        params,
        ours,
        baseline,
        elapsed: start.elapsed(),
    }
}

fn synthetic_recovery(t: &Trained) -> Outcome {
    let acc = t.ours.acc_lr.unwrap();
    let (ours, base) = (t.ours.err_int.unwrap(), t.baseline.err_int.unwrap());
    let detail = format!(
        "acc_lr {acc:.4}, err_int {ours:.4} vs raw-feature {base:.4} (ratio {:.3}), {:.1?}",
        ours / base,
        t.elapsed
    );
    check(
        acc >= E2E_MIN_ACC && ours <= E2E_MAX_ERR_RATIO * base && t.elapsed < E2E_BUDGET,
        detail.clone(),
        format!("{detail} (need acc >= {E2E_MIN_ACC}, ratio <= {E2E_MAX_ERR_RATIO}, time < {E2E_BUDGET:?})"),
    )
}

fn refinement_effect(t: &Trained) -> Outcome {
    let r = &t.ours;
    let (cc, cr) = (r.avg_components.unwrap(), r.avg_components_refined.unwrap());
    let (acc, accr) = (r.acc_lr.unwrap(), r.acc_lr_refined.unwrap());
    let detail = format!("components {cc:.2} -> {cr:.2}, acc_lr {acc:.4} -> {accr:.4}");
    check(
        cr <= cc && cr <= REFINED_MAX_COMPONENTS && accr >= acc - REFINED_ACC_SLACK,
        detail.clone(),
        format!("{detail} (need refined <= unrefined, <= {REFINED_MAX_COMPONENTS}, acc drop <= {REFINED_ACC_SLACK})"),
    )
}

fn metric_identities(t: &Trained) -> Outcome {
    let mut failures = Vec::new();
    let mut chis = Vec::new();
    let mut gts = Vec::new();
    for s in &t.corpus {
        let truth = s.truth.as_ref().unwrap();
        let n = s.mesh.vertex_count();
        let sym: Vec<usize> = truth.sym_map.iter().map(|m| m.unwrap()).collect();
        let e = err_intrinsic(&sym, truth, &s.mesh).unwrap();
        if e.mean != 0.0 {
            failures.push(format!("{}: err_intrinsic(gt) = {}", s.name, e.mean));
        }
        let identity: Vec<usize> = (0..n).collect();
        let gt_self = truth.correspondence_to(truth).unwrap();
        let e = err_matching(&identity, &gt_self, &s.mesh).unwrap();
        if e.mean != 0.0 || e.evaluated != n {
            failures.push(format!("{}: err_matching(identity) = {}", s.name, e.mean));
        }
        let self_match = match_shapes(s.field.values(), s.field.values()).unwrap();
        if err_matching(&self_match, &gt_self, &s.mesh).unwrap().mean != 0.0 {
            failures.push(format!("{}: raw self-match not exact", s.name));
        }
        let chi = pipeline::infer(&t.params, &s.field).unwrap().chi;
        let neg: Vec<f64> = chi.iter().map(|x| -x).collect();
        let (a, b) = (
            acc_left_right(&[&chi[..]], &[&truth.lr_labels[..]]).unwrap(),
            acc_left_right(&[&neg[..]], &[&truth.lr_labels[..]]).unwrap(),
        );
        if a != b && chi.iter().all(|&x| x != 0.0) {
            failures.push(format!("{}: acc {a} vs flipped {b}", s.name));
        }
        chis.push(chi);
        gts.push(truth.lr_labels.clone());
    }
    let negs: Vec<Vec<f64>> = chis.iter().map(|c| c.iter().map(|x| -x).collect()).collect();
    let (a, b) = (acc_left_right(&chis, &gts).unwrap(), acc_left_right(&negs, &gts).unwrap());
    if a != b {
        failures.push(format!("corpus acc {a} vs flipped {b}"));
    }
    check(
        failures.is_empty(),
        format!("{} shapes, all identities exact", t.corpus.len()),
        format!("{} failures, first: {:?}", failures.len(), failures.first()),
    )
}

// ---- 9: determinism ----

fn full_run(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let data = dir.join("data");
    pipeline::gen_synthetic(
        &SyntheticCorpus {
            seed: 13,
            count: 4,
            resolution: 8,
            dim: 8,
            noise: 0.01,
        },
        &data,
    )
    .unwrap();
    let out = dir.join("out");
    let mut config = RunConfig::default();
    config.manifest = data.join(pipeline::MANIFEST_FILE);
    config.output_dir = out.clone();
    config.checkpoint = out.join("model.sdck");
    config.dim = 8;
    config.steps = 200;
    config.seed = 5;
    config.checkpoint_every = 100;
    pipeline::run_train(&config).unwrap();
    pipeline::run_infer(&config.checkpoint, &data.join("shape_002.sdf"), &out.join("s.chi"), &out.join("s.agno.sdf")).unwrap();
    pipeline::run_refine(&out.join("s.chi"), &data.join("shape_002.ply"), 1.0, "bk", &out.join("s.labels"), &out.join("s.refine.txt")).unwrap();
    pipeline::run_eval(&config).unwrap();
    let mut files: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    // same location both times so echoed paths match too
    let dir = tempfile::tempdir().unwrap();
    let fa = full_run(dir.path());
    for sub in ["data", "out"] {
        std::fs::remove_dir_all(dir.path().join(sub)).unwrap();
    }
    let fb = full_run(dir.path());
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    let required = ["loss_log.csv", "model.sdck", "checkpoint_000100.sdck", "checkpoint_000200.sdck", "report.txt", "report.json"];
    let missing: Vec<_> = required.iter().filter(|r| !names.contains(r)).collect();
    let differing: Vec<&str> = fa
        .iter()
        .zip(&fb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    check(
        missing.is_empty() && differing.is_empty() && fa.len() == fb.len(),
        format!("{} output files byte-identical across two runs", fa.len()),
        format!("missing {missing:?}, differing {differing:?}"),
    )
}

fn run(id: u32, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let t = start.elapsed();
    match &result {
        Ok(d) => println!("criterion {id} {name}: PASS ({d}) [{t:.1?}]"),
        Err(d) => println!("criterion {id} {name}: FAIL ({d}) [{t:.1?}]"),
    }
    result.is_ok()
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    // `cargo test` forwards harness flags; only `--list` needs an answer
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let mut ok = true;
    ok &= run(1, "mrf exactness", mrf_exactness);
    ok &= run(2, "optimality dominance", optimality_dominance);
    ok &= run(3, "gradient suite", gradient_suite);
    ok &= run(4, "orthonormality", orthonormality);
    ok &= run(5, "loss oracles", loss_oracles);
    let trained = catch_unwind(train_corpus);
    match &trained {
        Ok(t) => {
            ok &= run(6, "synthetic recovery", || synthetic_recovery(t));
            ok &= run(7, "refinement effect", || refinement_effect(t));
            ok &= run(8, "metric identities", || metric_identities(t));
        }
        Err(_) => {
            for (id, name) in [(6, "synthetic recovery"), (7, "refinement effect"), (8, "metric identities")] {
                println!("criterion {id} {name}: FAIL (training run panicked)");
            }
            ok = false;
        }
    }
    ok &= run(9, "determinism", determinism);
    if !ok {
        std::process::exit(1);
    }
}
