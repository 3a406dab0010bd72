use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sgdlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgdlab"))
        .args(args)
        .env_remove("SGDLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(config: &Path) -> Output {
    sgdlab(&["run", config.to_str().unwrap()])
}

const WEAK: &str = "\
experiment = weak-error
family = example1
phi = sin
seed = 5
output = weak.csv

[weak-error]
x = 1
horizon = 5
eta_grid = 1/2, 1/4, 1/8, 1/16
n_samples = 2e4
";

const GRID: &str = "\
experiment = expansion-grid
family = example1
output = grid/surface.csv

[expansion-grid]
eta = 0.01
x_range = -4, 4
x_points = 9
t_range = 0, 2
t_points = 5
";

#[test]
fn empty_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&write_config(dir.path(), "empty.ini", ""));
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("missing field: experiment"), "{stderr}");
    let line: serde_json::Value = serde_json::from_str(stderr.lines().next().unwrap()).unwrap();
    assert_eq!(line["kind"], "config");
}

#[test]
fn unknown_family_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&write_config(dir.path(), "c.ini", &WEAK.replace("example1", "example9")));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn start_outside_the_ball_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&write_config(dir.path(), "c.ini", &WEAK.replace("x = 1\n", "x = 7\n")));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("support outside ball"));
}

#[test]
fn list_examples_text_and_json() {
    let out = sgdlab(&["list-examples"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for id in ["example1", "example2", "ou"] {
        assert!(text.contains(id), "{text}");
    }
    assert!(text.contains("3/26"), "{text}");

    let out = sgdlab(&["list-examples", "--json"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let families = doc["families"].as_array().unwrap();
    assert_eq!(families.len(), 3);
    let ex1 = families.iter().find(|f| f["id"] == "example1").unwrap();
    assert!((ex1["certificate"]["eta0"].as_f64().unwrap() - 3.0 / 26.0).abs() < 1e-15);
    assert!(doc["observables"].as_array().unwrap().iter().any(|o| o == "f-itself"));
}

#[test]
fn version_reports_the_package() {
    let out = sgdlab(&["version"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with(concat!("sgdlab ", env!("CARGO_PKG_VERSION"))));
}

#[test]
fn expansion_grid_writes_the_surface() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&write_config(dir.path(), "grid.ini", GRID));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("grid/surface.csv")).unwrap();
    let mut lines = csv.split("\r\n");
    let header: serde_json::Value = serde_json::from_str(lines.next().unwrap().strip_prefix("# ").unwrap()).unwrap();
    assert_eq!(header["config"]["family"], "example1");
    assert!(header["git_describe"].is_string());
    assert_eq!(lines.next().unwrap(), "x,t,u0,u1,u_trunc,method");
    let rows: Vec<&str> = lines.filter(|l| !l.is_empty()).collect();
    assert_eq!(rows.len(), 45);
    assert!(rows.iter().all(|r| r.ends_with(",closed_form")));
    assert!(!dir.path().join("grid/surface.svg").exists());
}

#[test]
fn weak_error_writes_csv_and_annotated_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&write_config(dir.path(), "weak.ini", WEAK));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["rows"], 4);
    assert!(summary["results"]["slope"].is_number());

    let csv = fs::read_to_string(dir.path().join("weak.csv")).unwrap();
    assert_eq!(csv.split("\r\n").filter(|l| !l.is_empty()).count(), 6);
    let svg = fs::read_to_string(dir.path().join("weak.svg")).unwrap();
    assert!(svg.contains("slope "));
    assert!(svg.contains("least-squares fit"));
    assert!(svg.contains(csv.split("\r\n").nth(1).unwrap()));
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "weak.ini", WEAK);
    assert!(run(&config).status.success());
    let first = fs::read(dir.path().join("weak.csv")).unwrap();
    let out = sgdlab(&["--threads", "1", "run", config.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(first, fs::read(dir.path().join("weak.csv")).unwrap());
}

#[test]
fn dumped_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "weak.ini", WEAK);
    let out = sgdlab(&["run", config.to_str().unwrap(), "--dump-config"]);
    assert!(out.status.success());
    let dumped = String::from_utf8(out.stdout).unwrap();
    assert!(!dir.path().join("weak.csv").exists());
    let again = write_config(dir.path(), "again.ini", &dumped);
    let out = sgdlab(&["run", again.to_str().unwrap(), "--dump-config"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), dumped);
}

#[test]
fn failed_assertion_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{WEAK}slope_min = 5\n");
    let out = run(&write_config(dir.path(), "weak.ini", &text));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"kind\":\"assertion\""));
    assert!(dir.path().join("weak.csv").exists());
}

#[test]
fn ou_check_matches_the_exact_moments() {
    let dir = tempfile::tempdir().unwrap();
    let text = "experiment = ou-check\nfamily = ou\nphi = cos\nseed = 2\noutput = ou.csv\n[ou-check]\neta = 0.1\nx0 = 1\nt_end = 1\nn_paths = 4000\nmax_sigmas = 5\n";
    let out = run(&write_config(dir.path(), "ou.ini", text));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("ou.csv")).unwrap();
    assert!(csv.contains("\r\nidentity,"));
    assert!(csv.contains("\r\ncos,"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "ini") {
            let out = sgdlab(&["run", path.to_str().unwrap(), "--dump-config"]);
            assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
            seen += 1;
        }
    }
    assert!(seen >= 7);
}
