//! `symdis` command-line front end.
//!
//! Failures print one line `error[<kind>]: <message>` on stderr, where kind
//! is `validation`, `io` or `internal`, and exit with 1, 2 or 3.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use symdis::pipeline::{self, RunConfig, SyntheticCorpus};
use symdis::{Error, ErrorKind};

#[derive(Parser)]
#[command(name = "symdis", version, about = "Symmetry-aware descriptor disentanglement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded corpus of bilateral synthetic shapes.
    GenSynthetic {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        count: usize,
        /// Rings per half; 28 gives about 1.5k vertices.
        #[arg(long, default_value_t = 28)]
        resolution: usize,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on the manifest's shapes and write the checkpoint and loss log.
    Train(ConfigArgs),
    /// Run a checkpoint on one descriptor file.
    Infer {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        descriptors: PathBuf,
        #[arg(long)]
        chi_out: PathBuf,
        #[arg(long)]
        agno_out: PathBuf,
    },
    /// Refine a chirality vector into binary labels on a mesh.
    Refine {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        chi: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        labels_out: PathBuf,
        #[arg(long)]
        report_out: PathBuf,
    },
    /// Evaluate a checkpoint over the manifest and write report.txt/report.json.
    Eval(ConfigArgs),
    /// Match two manifest shapes and write the vertex map.
    Match {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        source: String,
        #[arg(long)]
        target: String,
        #[arg(long)]
        map_out: PathBuf,
    },
    /// Color a mesh by a chirality vector or labels file (ascii PLY).
    ExportColors {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// A config file plus one flag per config key; flags win over the file.
#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<String>,
    #[arg(long)]
    mesh_dir: Option<String>,
    #[arg(long)]
    descriptor_dir: Option<String>,
    #[arg(long)]
    annotation_dir: Option<String>,
    #[arg(long)]
    checkpoint: Option<String>,
    #[arg(long)]
    output_dir: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    lambda_sim: Option<String>,
    #[arg(long)]
    lambda_rec: Option<String>,
    #[arg(long)]
    lambda_bou: Option<String>,
    #[arg(long)]
    lambda_con: Option<String>,
    #[arg(long)]
    losses: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    checkpoint_every: Option<String>,
    #[arg(long)]
    omega: Option<String>,
    #[arg(long)]
    maxflow: Option<String>,
    #[arg(long)]
    partition: Option<String>,
    #[arg(long)]
    symmetry_features: Option<String>,
    #[arg(long)]
    match_mode: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
}

impl ConfigArgs {
    fn overrides(&self) -> [(&'static str, &Option<String>); 23] {
        [
            ("manifest", &self.manifest),
            ("mesh_dir", &self.mesh_dir),
            ("descriptor_dir", &self.descriptor_dir),
            ("annotation_dir", &self.annotation_dir),
            ("checkpoint", &self.checkpoint),
            ("output_dir", &self.output_dir),
            ("dim", &self.dim),
            ("lambda_sim", &self.lambda_sim),
            ("lambda_rec", &self.lambda_rec),
            ("lambda_bou", &self.lambda_bou),
            ("lambda_con", &self.lambda_con),
            ("losses", &self.losses),
            ("samples", &self.samples),
            ("lr", &self.lr),
            ("steps", &self.steps),
            ("seed", &self.seed),
            ("checkpoint_every", &self.checkpoint_every),
            ("omega", &self.omega),
            ("maxflow", &self.maxflow),
            ("partition", &self.partition),
            ("symmetry_features", &self.symmetry_features),
            ("match_mode", &self.match_mode),
            ("alpha", &self.alpha),
        ]
    }

    fn resolve(&self) -> symdis::Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        for (key, value) in self.overrides() {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        config.validate()?;
        Ok(config)
    }
}

fn ensure_parent(path: &Path) -> symdis::Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })
        }
        _ => Ok(()),
    }
}

fn run(command: Command) -> symdis::Result<()> {
    match command {
        Command::GenSynthetic {
            seed,
            count,
            resolution,
            dim,
            noise,
            out,
        } => {
            let names = pipeline::gen_synthetic(
                &SyntheticCorpus {
                    seed,
                    count,
                    resolution,
                    dim,
                    noise,
                },
                &out,
            )?;
            println!("wrote {} shapes to {}", names.len(), out.display());
        }
        Command::Train(args) => {
            let config = args.resolve()?;
            ensure_parent(&config.checkpoint)?;
            let outcome = pipeline::run_train(&config)?;
            if let Some(last) = outcome.log.last() {
                println!("step={} total={}", last.step, last.total);
            }
            println!("checkpoint={}", config.checkpoint.display());
        }
        Command::Infer {
            config,
            descriptors,
            chi_out,
            agno_out,
        } => {
            let config = config.resolve()?;
            ensure_parent(&chi_out)?;
            ensure_parent(&agno_out)?;
            let inf = pipeline::run_infer(&config.checkpoint, &descriptors, &chi_out, &agno_out)?;
            println!("vertices={}", inf.chi.len());
        }
        Command::Refine {
            config,
            chi,
            mesh,
            labels_out,
            report_out,
        } => {
            let config = config.resolve()?;
            ensure_parent(&labels_out)?;
            ensure_parent(&report_out)?;
            let report = pipeline::run_refine(&chi, &mesh, config.omega, &config.maxflow, &labels_out, &report_out)?;
            print!("{}", report.to_key_value());
        }
        Command::Eval(args) => {
            let config = args.resolve()?;
            print!("{}", pipeline::run_eval(&config)?.to_key_value());
        }
        Command::Match {
            config,
            source,
            target,
            map_out,
        } => {
            let config = config.resolve()?;
            ensure_parent(&map_out)?;
            let outcome = pipeline::run_match(&config, &source, &target, &map_out)?;
            match outcome.error {
                Some(e) => println!("err_mat={} evaluated={} excluded={}", e.mean, e.evaluated, e.excluded),
                None => println!("err_mat=na"),
            }
        }
        Command::ExportColors { mesh, field, out } => {
            ensure_parent(&out)?;
            let colors = pipeline::run_export_colors(&mesh, &field, &out)?;
            println!("colored {} vertices", colors.len());
        }
    }
    Ok(())
}

fn fail(kind: &str, code: u8, message: &str) -> ExitCode {
    let line = message.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(" ");
    eprintln!("error[{kind}]: {line}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("bad arguments");
            return fail("validation", 1, first.trim_start_matches("error: "));
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => match e.kind() {
            ErrorKind::Validation => fail("validation", 1, &e.to_string()),
            ErrorKind::Io => fail("io", 2, &e.to_string()),
            ErrorKind::Internal => fail("internal", 3, &e.to_string()),
        },
    }
}
