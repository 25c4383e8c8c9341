use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// Small two-variable study on a coarse mesh, cheap enough for every test.
const STUDY: &str = r#"
seed = 3

[plate]
a = 1.0
b = 1.0
mesh = [6, 6]

[materials.graphite]
e1 = 173e9
e2 = 7.2e9
g12 = 3.76e9
g13 = 3.76e9
g23 = 3.76e9
nu12 = 0.29
rho = 1540.0

[[plate.plies]]
material = "graphite"
thickness = 0.005
theta = [0.0, 45.0]

[[plate.plies]]
material = "graphite"
thickness = 0.005
theta = [0.0, 45.0]

[[variables]]
name = "rho"
target = "rho"
family = "lognormal"
mean = 1540.0
cov = 0.036

[[variables]]
name = "t"
target = "thickness"
per_ply = true
family = "lognormal"
mean = 0.005
cov = 0.04

[surrogate]
samples = [120]

[surrogate.train]
hidden = 4
max_epochs = 3000
min_epochs = 500

[method.mcs]
samples = 20000

[method.sensitivity]
samples = 20000
samples_is = 5000

[validate]
meshes = [4, 6]
modes = 2
"#;

fn vscl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vscl")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("study.toml");
    fs::write(&p, text).unwrap();
    p
}

fn run_ok(config: &Path, out: &Path, cache: &Path, extra: &[&str]) -> String {
    let mut args = vec!["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--cache", cache.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = vscl(&args);
    assert!(o.status.success(), "{:?} failed: {}", extra, String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn error_line(o: &Output) -> String {
    let err = String::from_utf8_lossy(&o.stderr);
    let lines: Vec<&str> = err.lines().filter(|l| l.starts_with("error[")).collect();
    assert_eq!(lines.len(), 1, "stderr: {err}");
    lines[0].to_string()
}

fn run_field(out: &Path, command: &str, key: &str) -> i64 {
    let text = fs::read_to_string(out.join(format!("run_{command}.toml"))).unwrap();
    let v: toml::Value = toml::from_str(&text).unwrap();
    v[key].as_integer().unwrap()
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &STUDY.replace("seed = 3", "seed = 3\nsede = 4"));
    let o = vscl(&["--config", cfg.to_str().unwrap(), "validate-fem"]);
    assert_eq!(o.status.code(), Some(2));
    let line = error_line(&o);
    assert!(line.starts_with("error[config]") && line.contains("sede"), "{line}");
}

#[test]
fn bad_arguments_exit_with_config_code() {
    assert_eq!(vscl(&["reliability", "bogus"]).status.code(), Some(2));
    assert_eq!(vscl(&["validate-fem"]).status.code(), Some(2));
}

#[test]
fn missing_net_points_at_train() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), STUDY);
    let out = dir.path().join("out");
    let o = vscl(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "reliability", "form"]);
    assert_eq!(o.status.code(), Some(2));
    let line = error_line(&o);
    assert!(line.contains("missing-artifact") && line.contains("vscl train"), "{line}");
}

#[test]
fn validate_fem_writes_table_and_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), STUDY);
    let out = dir.path().join("out");
    let text = run_ok(&cfg, &out, &dir.path().join("cache"), &["validate-fem"]);
    assert_eq!(text.lines().count(), 1 + 2 * 2);
    let record = fs::read_to_string(out.join("run_validate-fem.toml")).unwrap();
    assert_eq!(record.matches("name = \"validate_fem.tsv\"").count(), 1);
}

#[test]
fn pipeline_cache_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), STUDY);
    let (out, cache) = (dir.path().join("out"), dir.path().join("cache"));

    run_ok(&cfg, &out, &cache, &["train"]);
    // The reference frequency at the means is one extra solve.
    assert_eq!(run_field(&out, "train", "fem_calls"), 121);
    let net = fs::read(out.join("net.bin")).unwrap();

    run_ok(&cfg, &out, &cache, &["train"]);
    assert_eq!(run_field(&out, "train", "fem_calls"), 0);
    assert_eq!(run_field(&out, "train", "cache_hits"), 121);
    assert_eq!(fs::read(out.join("net.bin")).unwrap(), net);

    for m in ["form", "sorm", "mcs", "mcis"] {
        run_ok(&cfg, &out, &cache, &["reliability", m]);
    }
    run_ok(&cfg, &out, &cache, &["sensitivity"]);
    let report = run_ok(&cfg, &out, &cache, &["report"]);
    for tag in ["FORM", "SORM", "ANN-MCS", "ANN-MCIS"] {
        assert!(report.lines().any(|l| l.starts_with(&format!("{tag}\t"))), "{report}");
    }

    // An exhausted MPP budget is a convergence failure.
    let starved = write_config(dir.path(), &format!("{STUDY}\n[method.form]\nmax_iter = 1\n"));
    let o = vscl(&["--config", starved.to_str().unwrap(), "--out", out.to_str().unwrap(), "reliability", "form"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(error_line(&o).starts_with("error[no-convergence]"));
}

#[test]
fn small_design_records_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &STUDY.replace("samples = [120]", "samples = [30]"));
    let out = dir.path().join("out");
    run_ok(&cfg, &out, &dir.path().join("cache"), &["train"]);
    let record = fs::read_to_string(out.join("run_train.toml")).unwrap();
    assert!(record.contains("recommended"), "{record}");
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), STUDY);
    let outs: Vec<PathBuf> = ["1", "3"]
        .iter()
        .map(|t| {
            let out = dir.path().join(format!("out{t}"));
            let cache = dir.path().join(format!("cache{t}"));
            for cmd in [&["train"][..], &["reliability", "mcis"], &["sensitivity"]] {
                let mut args = vec!["--threads", t];
                args.extend_from_slice(cmd);
                run_ok(&cfg, &out, &cache, &args);
            }
            out
        })
        .collect();
    let mut compared = 0;
    for entry in fs::read_dir(&outs[0]).unwrap() {
        let name = entry.unwrap().file_name();
        if name.to_string_lossy().starts_with("run_") {
            continue;
        }
        let a = fs::read(outs[0].join(&name)).unwrap();
        let b = fs::read(outs[1].join(&name)).unwrap();
        assert!(a == b, "{name:?} differs between thread counts");
        compared += 1;
    }
    assert!(compared >= 15);
}
