//! End-to-end behaviour of the `otoc` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use otoc::output::{read_rows, BOUND_HEADER, OTOC_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_otoc"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], config: &Path) -> Output {
    bin().args(args).arg(config).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const CLOSED: &str = r#"
scheme = "closed"
[chain]
sites = 2
family = "ising_zz"
couplings = [1.0]
fields = [0.3, -0.2]
[observables]
w = ["x0"]
v = ["x1"]
[grid]
t_max = 0.0
points = 1
[output]
path = "closed.csv"
"#;

#[test]
fn closed_run_at_zero_time() {
    let dir = scratch("closed_zero");
    let out = run(&["run"], &write_config(&dir, CLOSED));
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.join("closed.csv")).unwrap();
    assert!(text.lines().any(|l| l == OTOC_HEADER));
    assert!(text.lines().any(|l| l.starts_with("# config: {")));
    let rows = read_rows(&text);
    assert_eq!(rows, vec![vec![0.0, 1.0, 0.0, 1.0]]);
    let summary: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(summary["scheme"], "closed");
    assert_eq!(summary["points"], 1);
}

fn grid(text: &str) -> String {
    text.replace("t_max = 0.0\npoints = 1", "t_max = 5.0\npoints = 12")
}

#[test]
fn zero_coupling_open_run_matches_closed_run() {
    let dir = scratch("zero_coupling");
    let closed = grid(CLOSED);
    assert!(run(&["run"], &write_config(&dir, &closed)).status.success());
    let rows_closed = read_rows(&std::fs::read_to_string(dir.join("closed.csv")).unwrap());
    for scheme in ["fbte", "pbte"] {
        let open = closed.replace("scheme = \"closed\"", &format!("scheme = \"{scheme}\"")).replace("closed.csv", "open.csv")
            + "[bath]\ns = 1.0\ncoupling = 0.0\ntemperature = 1.0\nn_max = 3\n";
        let out = run(&["run"], &write_config(&dir, &open));
        assert!(out.status.success(), "{}", stderr(&out));
        let rows = read_rows(&std::fs::read_to_string(dir.join("open.csv")).unwrap());
        assert_eq!(rows.len(), rows_closed.len());
        for (a, b) in rows.iter().zip(&rows_closed) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-10, "{scheme}: {a:?} vs {b:?}");
            }
        }
    }
}

const DEPHASING: &str = r#"
scheme = "fbte"
engine = "exact"
[chain]
sites = 2
family = "ising_zz"
couplings = [0.7]
fields = [0.2, 0.0]
[observables]
w = ["x0", "y1"]
v = ["x1"]
[bath]
s = 1.0
coupling = 0.2
beta = 2.0
modes = [{ omega = 1.3, coupling = 0.8 }]
n_max = 6
[grid]
t_max = 3.0
points = 7
[truncation]
start = 4
ceiling = 8
tolerance = 1e-3
[output]
path = "dephasing.csv"
"#;

#[test]
fn influence_engine_agrees_with_exact_engine() {
    let dir = scratch("influence");
    let out = run(&["run"], &write_config(&dir, DEPHASING));
    assert!(out.status.success(), "{}", stderr(&out));
    let summary: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(summary["truncation"]["converged"], true);
    let exact = read_rows(&std::fs::read_to_string(dir.join("dephasing.csv")).unwrap());
    let influence = DEPHASING.replace("engine = \"exact\"", "engine = \"influence\"").replace("dephasing.csv", "paths.csv");
    let influence = influence[..influence.find("[truncation]").unwrap()].to_string() + "[output]\npath = \"paths.csv\"\n";
    let out = run(&["run"], &write_config(&dir, &influence));
    assert!(out.status.success(), "{}", stderr(&out));
    let paths = read_rows(&std::fs::read_to_string(dir.join("paths.csv")).unwrap());
    for (a, b) in exact.iter().zip(&paths) {
        assert!((a[1] - b[1]).abs() < 1e-6 && (a[2] - b[2]).abs() < 1e-6, "{a:?} vs {b:?}");
    }
}

#[test]
fn long_chain_runs_through_the_product_path_sum() {
    let dir = scratch("long_chain");
    let text = r#"
scheme = "pbte"
engine = "influence"
[chain]
sites = 8
family = "ising_zz"
couplings = [1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4]
fields = [0.0, 0.1, 0.0, 0.1, 0.0, 0.1, 0.0, 0.1]
[observables]
w = ["x0"]
v = ["x7"]
[bath]
s = 3.0
coupling = 0.1
temperature = 0.5
kernel = "continuous"
[grid]
t_max = 2.0
points = 5
[output]
path = "long.csv"
"#;
    let out = run(&["run"], &write_config(&dir, text));
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = read_rows(&std::fs::read_to_string(dir.join("long.csv")).unwrap());
    assert_eq!(rows.len(), 5);
    assert!((rows[0][1] - 1.0).abs() < 1e-12);
    assert!(rows.iter().all(|r| r[3] <= 1.0 + 1e-12));
}

#[test]
fn bound_run_writes_bound_columns() {
    let dir = scratch("bound");
    let text = CLOSED.replace("scheme = \"closed\"", "scheme = \"fbte\"\nengine = \"bound\"").replace(
        "t_max = 0.0\npoints = 1",
        "t_max = 2.0\npoints = 5",
    ) + "[bath]\ns = 3.0\ncoupling = 0.1\ntemperature = 1.0\n";
    let out = run(&["run"], &write_config(&dir, &text));
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.join("closed.csv")).unwrap();
    assert!(csv.lines().any(|l| l == BOUND_HEADER));
    assert!(csv.contains("# d_method: closed_form_hurwitz_zeta"));
    let rows = read_rows(&csv);
    assert_eq!(rows[0][3], 1.0);
    assert!(rows.iter().all(|r| r.len() == 6));
}

#[test]
fn validate_reports_dimension() {
    let dir = scratch("validate_ok");
    let out = run(&["validate"], &write_config(&dir, DEPHASING));
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("OK"), "{text}");
    assert!(text.contains("joint_dimension=144"), "{text}");
    assert!(text.contains("truncation_tail="), "{text}");
}

#[test]
fn validate_names_the_non_commuting_term() {
    let dir = scratch("validate_capability");
    let text = DEPHASING
        .replace("engine = \"exact\"", "engine = \"influence\"")
        .replace("family = \"ising_zz\"", "family = \"transverse_ising\"\ntransverse = [0.0, 0.4]");
    let out = run(&["validate"], &write_config(&dir, &text));
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("transverse[1]"), "{}", stderr(&out));
    let out = run(&["run"], &write_config(&dir, &text));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn validate_forecasts_the_dimension_cap() {
    let dir = scratch("validate_cap");
    let text = r#"
scheme = "fbte"
[chain]
sites = 10
family = "ising_zz"
couplings = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]
fields = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
[observables]
w = ["x0"]
v = ["x9"]
[bath]
s = 1.0
coupling = 0.1
temperature = 1.0
modes_per_site = 2
n_max = 8
[grid]
t_max = 1.0
points = 2
[output]
path = "never.csv"
"#;
    let out = run(&["validate"], &write_config(&dir, text));
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    // 2^10 * 8^20 = 2^70
    assert!(err.contains("2^10*8^20") && err.contains(&(1u128 << 70).to_string()), "{err}");
}

#[test]
fn schema_errors_name_the_key() {
    let dir = scratch("schema");
    let out = run(&["run"], &write_config(&dir, &CLOSED.replace("points = 1", "points = 1\nstep = 0.1")));
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("step"), "{}", stderr(&out));
    let out = run(&["validate"], &write_config(&dir, &CLOSED.replace("couplings = [1.0]", "couplings = [1.0, 2.0]")));
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("couplings"), "{}", stderr(&out));
    let out = bin().args(["run", "/nonexistent/config.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unconverged_truncation_is_a_numerical_failure() {
    let dir = scratch("truncation");
    let strict = DEPHASING.replace("start = 4\nceiling = 8\ntolerance = 1e-3", "start = 2\nceiling = 4\ntolerance = 1e-12");
    let out = run(&["run"], &write_config(&dir, &strict));
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(!dir.join("dephasing.csv").exists());
    let report = strict.replace("tolerance = 1e-12", "tolerance = 1e-12\nmode = \"report\"");
    let out = run(&["run"], &write_config(&dir, &report));
    assert!(out.status.success(), "{}", stderr(&out));
    let summary: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(summary["truncation"]["converged"], false);
    let csv = std::fs::read_to_string(dir.join("dephasing.csv")).unwrap();
    assert!(csv.contains("converged=false"));
}

#[test]
fn thread_variable_is_validated() {
    let dir = scratch("threads");
    let out = bin().arg("run").arg(write_config(&dir, CLOSED)).env("OTOC_THREADS", "many").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("OTOC_THREADS"));
}

#[test]
fn figure2_writes_every_panel() {
    let dir = scratch("figure2");
    let out = bin().args(["figure2", "--out-dir"]).arg(&dir).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    for name in ["s1_lowT", "s1_midT", "s3_lowT", "s3_midT", "s1_midT_lowT_form"] {
        let text = std::fs::read_to_string(dir.join(format!("{name}.csv"))).unwrap();
        assert!(text.contains("# sites: 20") && text.contains("# coupling: 0.1"), "{name}");
        assert!(text.lines().any(|l| l == BOUND_HEADER));
        assert_eq!(read_rows(&text).len(), 101);
    }
    let s1_mid = std::fs::read_to_string(dir.join("s1_midT.csv")).unwrap();
    assert!(s1_mid.contains("# d_method: quadrature"));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let out = run(&["validate"], &path);
            assert!(out.status.success(), "{}: {}", path.display(), stderr(&out));
            count += 1;
        }
    }
    assert!(count >= 3);
}
