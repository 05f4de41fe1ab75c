use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_proxkit"))
}

/// Fresh scratch directory under the system temp dir.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("proxkit-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("run").arg(config).arg("--out").arg(out).args(extra).env_remove("PROXKIT_SEED_OFFSET").output().unwrap()
}

fn bundle(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

const LASSO: &str = "problem.kind = lasso\nproblem.d = 10\nproblem.m = 20\nproblem.lambda = 0.1\n\
                     solver.name = proxlinear\nsolver.outer_iters = 20\nrun.seeds = 1, 2\n";

#[test]
fn lists_problems_and_solvers() {
    let out = bin().args(["run", "--list-problems"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for kind in ["phase_retrieval", "lasso", "ridge", "erm_logistic"] {
        assert!(text.lines().any(|l| l == kind), "{text}");
    }
    let out = bin().args(["run", "--list-solvers"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["proximal_point", "proxlinear", "pgsg", "catalyst", "gd", "svrg"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{text}");
    }
}

#[test]
fn invalid_config_exits_2_naming_the_line() {
    let dir = scratch("invalid");
    let cfg = dir.join("bad.cfg");
    fs::write(&cfg, "problem.kind = lasso\nproblem.d = 10\nproblem.m = 20\nproblem.lambda = 0.1\nproblem.lamda = 0.1\n").unwrap();
    let out = run(&cfg, &dir.join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 5") && err.contains("problem.lamda"), "{err}");
}

#[test]
fn missing_config_exits_2() {
    let dir = scratch("missing");
    let out = run(&dir.join("nope.cfg"), &dir.join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = scratch("rerun");
    let cfg = dir.join("lasso.cfg");
    fs::write(&cfg, LASSO).unwrap();
    let a = run(&cfg, &dir.join("a"), &[]);
    let b = run(&cfg, &dir.join("b"), &["--jobs", "2"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(b.status.success(), "{}", String::from_utf8_lossy(&b.stderr));
    let (a, b) = (bundle(&dir.join("a")), bundle(&dir.join("b")));
    assert!(a.len() >= 3);
    assert_eq!(a, b);
}

#[test]
fn seed_offset_changes_the_runs() {
    let dir = scratch("offset");
    let cfg = dir.join("lasso.cfg");
    fs::write(&cfg, LASSO).unwrap();
    assert!(run(&cfg, &dir.join("a"), &[]).status.success());
    let shifted = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("b"))
        .env("PROXKIT_SEED_OFFSET", "5")
        .output()
        .unwrap();
    assert!(shifted.status.success());
    assert_ne!(bundle(&dir.join("a")), bundle(&dir.join("b")));

    let bad = bin().arg("run").arg(&cfg).arg("--out").arg(dir.join("c")).env("PROXKIT_SEED_OFFSET", "-1").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn solver_failure_exits_3_and_keeps_outputs() {
    let dir = scratch("failure");
    let cfg = dir.join("starved.cfg");
    fs::write(
        &cfg,
        "problem.kind = ridge\nproblem.d = 10\nproblem.m = 50\nproblem.cond = 1e4\n\
         solver.name = catalyst\nsolver.inner_budget = 1\nsolver.eps = 1e-12\nrun.seeds = 1\n",
    )
    .unwrap();
    let out = run(&cfg, &dir.join("out"), &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let files = bundle(&dir.join("out"));
    let manifest = files.iter().find(|(n, _)| n == "MANIFEST").expect("manifest written");
    assert!(String::from_utf8_lossy(&manifest.1).to_lowercase().contains("fail"));
}
