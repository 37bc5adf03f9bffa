use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "[mesh]\ntheta = 0.5\nn_layers = 2\n[experiment]\nsweep = [1e-2, 5e-3, 2.5e-3]\nrefine_check = false\n[output]\nemit_svg = true\n";

fn gaplab(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gaplab"));
    cmd.args(args).env_remove("GAPLAB_OUT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("run gaplab")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn asymptotics_prints_the_unit_gamma_constant() {
    let o = gaplab(&["asymptotics", "--gamma", "1"], &[]);
    assert!(o.status.success());
    let first = stdout(&o).lines().next().unwrap().to_string();
    let value: f64 = first.split('=').nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    assert!((value - std::f64::consts::PI).abs() < 1e-10, "{first}");
}

#[test]
fn invalid_config_exits_with_one_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[geometry]\ngamma = 1.5\n");
    let o = gaplab(&["--config", &cfg, "validate"], &[]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("gamma") && err.contains("line 2"), "{err}");
}

#[test]
fn validate_accepts_the_defaults() {
    let o = gaplab(&["validate"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).lines().all(|l| l.ends_with("ok")));
}

#[test]
fn mesh_command_writes_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = gaplab(&["--config", &cfg, "--out", out.to_str().unwrap(), "mesh", "--epsilon", "1e-2"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["effective_config.toml", "mesh.gapmesh", "mesh.svg", "mesh_gap.svg"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn environment_overrides_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let flag = dir.path().join("flag");
    let env = dir.path().join("env");
    let o = gaplab(&["--config", &cfg, "--out", flag.to_str().unwrap(), "mesh"], &[("GAPLAB_OUT", &env)]);
    assert!(o.status.success());
    assert!(env.join("mesh.gapmesh").is_file());
    assert!(!flag.exists());
}

#[test]
fn sweep_is_reproducible_and_reports_rerender() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = gaplab(&["--config", &cfg, "--out", out.to_str().unwrap(), "sweep"], &[]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("slope of max |grad u|"));
        out
    };
    let a = run("a");
    let b = run("b");
    let csv = std::fs::read(a.join("sweep.csv")).unwrap();
    assert_eq!(csv, std::fs::read(b.join("sweep.csv")).unwrap());
    for f in ["rate_max_grad.svg", "rate_c_diff.svg", "envelope.svg", "gap_heatmap.svg"] {
        assert!(a.join(f).is_file(), "{f}");
    }

    let re = dir.path().join("re");
    let o = gaplab(&["--out", re.to_str().unwrap(), "report", "--csv", a.join("sweep.csv").to_str().unwrap()], &[]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(re.join("rate_max_grad.svg")).unwrap(), std::fs::read(a.join("rate_max_grad.svg")).unwrap());
}

#[test]
fn report_on_a_missing_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = gaplab(&["--out", dir.path().to_str().unwrap(), "report", "--csv", "/nonexistent/sweep.csv"], &[]);
    assert!(!o.status.success());
}
