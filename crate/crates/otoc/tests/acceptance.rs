//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: PASS|FAIL ...` line before asserting.
//!
//! Run with `cargo test -p otoc --test acceptance -- --nocapture --test-threads 1`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use otoc::figure2;
use otoc::output::read_rows;
use otoc::validity::{self, ValidityCase};
use otoc_core::bath::{
    d_closed_s1, d_closed_s_gt1, dephasing_integral_d, dephasing_integral_d_with_tolerance, SpectralDensity,
    ThermalContext,
};
use otoc_core::influence::{constant_branch_table, dephasing_otoc, Conventions, ContinuousKernel, DiscreteKernel};
use otoc_core::model::{
    build_chain_hamiltonian, local_operator, Axis, BathMode, BathModes, BathSpec, ChainFamily, ObservableSpec,
    SpinChainSpec,
};
use otoc_core::otoc::{otoc_series, otoc_series_converged, OtocProblem, Scheme, TruncationGate};
use otoc_core::quantum::{Operator, State};
use otoc_core::special::{digamma, hurwitz_zeta};
use otoc_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(n: u32, ok: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n}: {detail}");
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| if k + 1 == n { b } else { a + (b - a) * k as f64 / (n - 1) as f64 }).collect()
}

fn max_dev(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn criterion_1_zero_coupling_reduces_to_closed() {
    let start = Instant::now();
    let spec = SpinChainSpec::new(2, ChainFamily::IsingZz { couplings: vec![1.0], fields: vec![0.5, -0.3] }).unwrap();
    let h = build_chain_hamiltonian(&spec).unwrap();
    let w = local_operator(2, &ObservableSpec::single(0, Axis::X)).unwrap();
    let v = local_operator(2, &ObservableSpec::single(1, Axis::X)).unwrap();
    let bath = BathSpec {
        spectral: SpectralDensity::new(1.0, 1.0).unwrap(),
        coupling: 0.0,
        site_couplings: None,
        beta: 1.0,
        modes: BathModes::Discretized { per_site: 1, omega_max: 10.0 },
        n_max: 4,
    };
    let problem = OtocProblem::new(h, w, v, State::maximally_mixed(&[2, 2]), Some(bath)).unwrap();
    let times = linspace(0.0, 5.0, 20);
    let closed = otoc_series(Scheme::Closed, &problem, &times).unwrap().values;
    let fbte = otoc_series(Scheme::Fbte, &problem, &times).unwrap().values;
    let pbte = otoc_series(Scheme::Pbte, &problem, &times).unwrap().values;
    let (df, dp) = (max_dev(&fbte, &closed), max_dev(&pbte, &closed));
    let elapsed = start.elapsed();
    verdict(
        1,
        df < 1e-10 && dp < 1e-10 && elapsed < Duration::from_secs(10),
        format!("max|F_fbte-F_closed|={df:.2e} max|F_pbte-F_closed|={dp:.2e} (tol 1e-10) runtime={elapsed:.2?} (limit 10s)"),
    );
}

#[test]
fn criterion_2_path_sum_matches_exact_engine() {
    let start = Instant::now();
    let case = ValidityCase::single_mode();
    let h = Operator::zeros(&[2]);
    let x = local_operator(1, &ObservableSpec::single(0, Axis::X)).unwrap();
    let rho = State::maximally_mixed(&[2]);
    let problem = OtocProblem::new(h.clone(), x.clone(), x.clone(), rho.clone(), Some(case.bath.clone())).unwrap();
    // irregular points not used anywhere else in the test suite
    let times: Vec<f64> = (0..10).map(|k| 0.13 + 0.487 * k as f64).collect();
    let kernel = DiscreteKernel::new(vec![BathMode::new(1.0, 1.0).unwrap()], &ThermalContext::new(1.0).unwrap());
    let mut details = Vec::new();
    let mut ok = true;
    for scheme in [Scheme::Fbte, Scheme::Pbte] {
        let exact = otoc_series_converged(scheme, &problem, &times, TruncationGate::new(10, 80)).unwrap();
        let paths: Vec<Complex64> =
            times.iter().map(|&t| dephasing_otoc(scheme, &h, &x, &x, &rho, &kernel, 0.2, t).unwrap()).collect();
        let dev = max_dev(&exact.values, &paths);
        let n_max = exact.truncation.as_ref().map_or(0, |r| r.n_max);
        ok &= dev < 1e-6;
        details.push(format!("{scheme}: max dev {dev:.2e} at converged n_max={n_max}"));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(60);
    verdict(2, ok, format!("{} (tol 1e-6) runtime={elapsed:.2?} (limit 60s)", details.join("; ")));
}

#[test]
fn criterion_3_ohmic_low_temperature_form() {
    let j = SpectralDensity::new(1.0, 1.0).unwrap();
    let ctx = ThermalContext::from_temperature(1e-3).unwrap();
    let times: Vec<f64> = (1..=20).map(|k| 0.5 * k as f64).collect();
    let mut worst_rel: f64 = 0.0;
    let mut worst_self: f64 = 0.0;
    for &t in &times {
        let quad = dephasing_integral_d(&j, &ctx, t).unwrap();
        let closed = d_closed_s1(1.0, &ctx, t);
        worst_rel = worst_rel.max(((closed - quad) / quad).abs());
        let coarse = dephasing_integral_d_with_tolerance(&j, &ctx, t, 1e-9).unwrap();
        let fine = dephasing_integral_d_with_tolerance(&j, &ctx, t, 5e-10).unwrap();
        worst_self = worst_self.max((coarse - fine).abs());
    }
    verdict(
        3,
        worst_rel <= 1e-3 && worst_self <= 1e-8,
        format!("max relative error {worst_rel:.2e} (tol 1e-3); quadrature tolerance-halving change {worst_self:.2e} (tol 1e-8)"),
    );
}

#[test]
fn criterion_4_superohmic_closed_forms() {
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for s in [3.0, 2.0] {
        let j = SpectralDensity::new(s, 1.0).unwrap();
        for kt in [1e-2, 1.0] {
            let ctx = ThermalContext::from_temperature(kt).unwrap();
            let mut panel: f64 = 0.0;
            for t in [0.5, 1.0, 5.0] {
                let quad = dephasing_integral_d(&j, &ctx, t).unwrap();
                let closed = d_closed_s_gt1(&j, &ctx, t).unwrap();
                panel = panel.max(((closed - quad) / quad).abs());
            }
            worst = worst.max(panel);
            lines.push(format!("s={s} kT={kt}: {panel:.2e}"));
        }
    }
    verdict(4, worst <= 1e-6, format!("max relative error {worst:.2e} (tol 1e-6) [{}]", lines.join(", ")));
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_otoc")
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn criterion_5_figure_panels() {
    let out = scratch("acceptance_figure2");
    let start = Instant::now();
    let status = Command::new(bin()).args(["figure2", "--out-dir"]).arg(&out).output().unwrap();
    let elapsed = start.elapsed();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let mut problems = Vec::new();
    for panel in figure2::PANELS {
        let text = std::fs::read_to_string(out.join(format!("{}.csv", panel.name))).unwrap();
        let rows = read_rows(&text);
        let mut issues = Vec::new();
        if rows.len() != figure2::POINTS {
            issues.push(format!("{} rows", rows.len()));
        }
        // columns: t, D_t, D_3t, fbte_factor, pbte_factor, diff_bound
        for (col, name) in [(3, "fbte"), (4, "pbte")] {
            if rows.iter().any(|r| !(r[col] > 0.0 && r[col] <= 1.0)) {
                issues.push(format!("{name} factor outside (0,1]"));
            }
            if rows[0][col] != 1.0 {
                issues.push(format!("{name} factor at t=0 is {}", rows[0][col]));
            }
            let rises: Vec<f64> = rows.windows(2).filter(|w| w[1][col] > w[0][col]).map(|w| w[1][0]).collect();
            if let (Some(first), Some(last)) = (rises.first(), rises.last()) {
                issues.push(format!("{name} factor increases at {} grid steps in t∈[{first}, {last}]", rises.len()));
            }
        }
        if panel.s == 3.0 {
            let below: Vec<f64> = rows.iter().filter(|r| r[4] < r[3]).map(|r| r[0]).collect();
            if let (Some(first), Some(last)) = (below.first(), below.last()) {
                issues.push(format!("pbte < fbte at {} points in t∈[{first}, {last}]", below.len()));
            }
        }
        if !issues.is_empty() {
            problems.push(format!("{}: {}", panel.name, issues.join(", ")));
        }
    }
    let ok = problems.is_empty() && elapsed < Duration::from_secs(30);
    let detail = if problems.is_empty() { "all panel assertions hold".to_string() } else { problems.join("; ") };
    verdict(5, ok, format!("{detail}; runtime={elapsed:.2?} (limit 30s)"));
}

#[test]
fn criterion_6_influence_phase_magnitude() {
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for s in [1.0, 2.0, 3.0] {
        for beta in [1.0, 100.0] {
            let kernel = ContinuousKernel::new(SpectralDensity::new(s, 1.0).unwrap(), ThermalContext::new(beta).unwrap());
            for t in [0.1, 0.5, 1.0, 3.0, 10.0] {
                for scheme in [Scheme::Fbte, Scheme::Pbte] {
                    for phi in constant_branch_table(scheme, &kernel, t, Conventions::CALIBRATED).unwrap() {
                        worst = worst.min(phi.re);
                        count += 1;
                    }
                }
            }
        }
    }
    verdict(6, worst >= -1e-12, format!("min Re Phi = {worst:.3e} over {count} configurations (tol -1e-12)"));
}

#[test]
fn criterion_7_bound_validity_report() {
    let times = validity::grid();
    let tables: Vec<_> = [ValidityCase::single_mode(), ValidityCase::ohmic_three_modes()]
        .iter()
        .map(|c| validity::tabulate(c, &times).unwrap())
        .collect();
    let report = validity::render(&tables);
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../reports");
    let path = dir.join("bound_validity.md");
    otoc::output::write_atomic(&path, &report).unwrap();
    let written = std::fs::read_to_string(&path).unwrap() == report;
    let summary: Vec<String> = tables
        .iter()
        .map(|t| {
            format!(
                "{}: {} rows, {} violations, exact n_max={} converged={}",
                t.case.name,
                t.rows.len(),
                t.violations().len(),
                t.truncation[0].n_max,
                t.truncation[0].converged && t.truncation[1].converged
            )
        })
        .collect();
    let complete = tables.iter().all(|t| t.rows.len() == 20);
    verdict(7, written && complete, format!("report archived at reports/bound_validity.md; {}", summary.join("; ")));
}

/// Σ_{n<N} (q+n)^{-2} plus Euler–Maclaurin tail terms.
fn zeta2_series(q: Complex64, n: usize) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    for k in (0..n).rev() {
        sum += (q + k as f64).powi(-2);
    }
    let a = q + n as f64;
    sum + a.inv() + a.powi(-2) * 0.5 + a.powi(-3) / 6.0
}

#[test]
fn criterion_8_special_functions() {
    let one = Complex64::new(1.0, 0.0);
    let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
    let apery = 1.202_056_903_159_594_3;
    let euler_gamma = 0.577_215_664_901_532_9;
    let e_z2 = (hurwitz_zeta(2.0, one).unwrap() - pi2_6).norm();
    let e_z3 = (hurwitz_zeta(3.0, one).unwrap() - apery).norm();
    let q = Complex64::new(1.0, 1.0);
    let e_zq = (hurwitz_zeta(2.0, q).unwrap() - zeta2_series(q, 1_000_000)).norm();
    let e_psi = (digamma(one).unwrap() + euler_gamma).norm();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut e_rec: f64 = 0.0;
    for _ in 0..100 {
        let q = Complex64::new(rng.gen_range(0.05..20.0), rng.gen_range(-30.0..30.0));
        let lhs = digamma(q + 1.0).unwrap() - digamma(q).unwrap();
        e_rec = e_rec.max((lhs - q.inv()).norm() / q.inv().norm().max(1.0));
    }
    let ok = e_z2 < 1e-12 && e_z3 < 1e-12 && e_zq < 1e-10 && e_psi < 1e-12 && e_rec < 1e-11;
    verdict(
        8,
        ok,
        format!(
            "zeta(2,1) {e_z2:.1e}, zeta(3,1) {e_z3:.1e}, zeta(2,1+i) {e_zq:.1e}, psi(1) {e_psi:.1e}, recurrence {e_rec:.1e}"
        ),
    );
}

const DETERMINISM_CONFIG: &str = r#"
scheme = "pbte"
engine = "exact"
initial_state = "ground"

[chain]
sites = 2
family = "transverse_ising"
couplings = [0.8]
fields = [0.2, -0.1]
transverse = [0.5, 0.3]

[observables]
w = ["x0"]
v = ["z1"]

[bath]
s = 1.0
coupling = 0.15
temperature = 1.0
modes_per_site = 1
n_max = 4

[grid]
t_min = 0.0
t_max = 4.0
points = 24

[truncation]
ceiling = 8
mode = "report"

[output]
path = "out.csv"
"#;

#[test]
fn criterion_9_deterministic_output() {
    let dir = scratch("acceptance_determinism");
    let config = dir.join("run.toml");
    std::fs::write(&config, DETERMINISM_CONFIG).unwrap();
    let max_threads = std::thread::available_parallelism().map_or(8, |n| n.get()).max(4);
    let mut outputs = Vec::new();
    for threads in [1, max_threads, max_threads, 1] {
        let out = Command::new(bin()).arg("run").arg(&config).env("OTOC_THREADS", threads.to_string()).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(std::fs::read(dir.join("out.csv")).unwrap());
    }
    let identical = outputs.windows(2).all(|w| w[0] == w[1]);
    verdict(
        9,
        identical && !outputs[0].is_empty(),
        format!("{} runs with OTOC_THREADS in {{1, {max_threads}}}: byte-identical={identical}", outputs.len()),
    );
}
