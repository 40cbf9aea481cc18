use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn symdis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symdis")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr_line(out: &Output) -> String {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(text.lines().count(), 1, "{text}");
    text.trim_end().to_owned()
}

fn gen(dir: &Path) {
    let out = symdis(&[
        "gen-synthetic",
        "--seed",
        "3",
        "--count",
        "3",
        "--resolution",
        "6",
        "--dim",
        "8",
        "--out",
        path(dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("run.cfg");
    let text = format!(
        "# small run\nmanifest={}\noutput_dir={}\ncheckpoint={}\ndim=8\nsteps=6\nseed=1\nomega=0.5\n",
        path(&dir.join("data/manifest.txt")),
        path(&dir.join("out")),
        path(&dir.join("out/model.sdck")),
    );
    fs::write(&cfg, text).unwrap();
    cfg
}

#[test]
fn full_pipeline_through_the_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    gen(&dir.join("data"));
    let cfg = write_config(dir);
    let cfg = path(&cfg);

    let out = symdis(&["train", "--config", cfg, "--steps", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = fs::read_to_string(dir.join("out/loss_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 5, "flag overrides file");
    assert!(fs::read_to_string(dir.join("out/config.txt")).unwrap().contains("steps=4\n"));

    let chi = dir.join("out/s0.chi");
    let out = symdis(&[
        "infer",
        "--config",
        cfg,
        "--descriptors",
        path(&dir.join("data/shape_000.sdf")),
        "--chi-out",
        path(&chi),
        "--agno-out",
        path(&dir.join("out/s0.agno.sdf")),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = symdis(&[
        "refine",
        "--config",
        cfg,
        "--maxflow",
        "dinic",
        "--chi",
        path(&chi),
        "--mesh",
        path(&dir.join("data/shape_000.ply")),
        "--labels-out",
        path(&dir.join("out/s0.labels")),
        "--report-out",
        path(&dir.join("out/s0.refine.txt")),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.starts_with("solver=dinic\nomega=0.5\n"), "{report}");

    let out = symdis(&["eval", "--config", cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout, fs::read_to_string(dir.join("out/report.txt")).unwrap());
    assert!(stdout.contains("err_mat_pairs=2\n"));

    let out = symdis(&[
        "match",
        "--config",
        cfg,
        "--source",
        "shape_000",
        "--target",
        "shape_001",
        "--map-out",
        path(&dir.join("out/map.txt")),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("err_mat="));

    let colored = dir.join("out/colors.ply");
    let out = symdis(&[
        "export-colors",
        "--mesh",
        path(&dir.join("data/shape_000.ply")),
        "--field",
        path(&dir.join("out/s0.labels")),
        "--out",
        path(&colored),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(&colored).unwrap().contains("property uchar red"));
}

#[test]
fn gen_is_byte_identical_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    gen(&tmp.path().join("a"));
    gen(&tmp.path().join("b"));
    for name in ["manifest.txt", "shape_000.ply", "shape_001.sdf", "shape_002.ann"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(name)).unwrap(),
            fs::read(tmp.path().join("b").join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn validation_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    gen(&tmp.path().join("data"));
    let cfg = write_config(tmp.path());
    for args in [
        vec!["train", "--config", path(&cfg), "--lambda-bou", "-1"],
        vec!["train", "--config", path(&cfg), "--dim", "12"],
        vec!["train", "--config", path(&cfg), "--steps", "many"],
        vec!["eval", "--config", path(&cfg), "--maxflow", "push-relabel"],
        vec!["train", "--no-such-flag"],
    ] {
        let out = symdis(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(stderr_line(&out).starts_with("error[validation]: "), "{args:?}");
    }
    fs::write(tmp.path().join("bad.cfg"), "steps=3\nwhat\n").unwrap();
    let out = symdis(&["train", "--config", path(&tmp.path().join("bad.cfg"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_line(&out).contains("line 2"));
}

#[test]
fn missing_files_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = symdis(&["train", "--manifest", path(&tmp.path().join("none.txt"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).starts_with("error[io]: "));
    let out = symdis(&["train", "--config", path(&tmp.path().join("none.cfg"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_exits_0() {
    let out = symdis(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in ["gen-synthetic", "train", "infer", "refine", "eval", "match", "export-colors"] {
        assert!(text.contains(sub), "{sub}");
    }
}
