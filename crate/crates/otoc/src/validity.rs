//! Empirical check of the dephasing lower bounds |F_OS| ≥ |F_closed|·factor
//! against the exact finite-bath engine and the path-sum engine.

use std::fmt::Write as _;

use otoc_core::bath::{SpectralDensity, ThermalContext};
use otoc_core::bounds::{fbte_factor_from_d, pbte_factor_from_d};
use otoc_core::influence::{dephasing_otoc, CorrelationKernel, DiscreteKernel};
use otoc_core::model::{local_operator, Axis, BathMode, BathModes, BathSpec, ObservableSpec};
use otoc_core::otoc::{otoc_series_gated_with, OtocProblem, PreparedOtoc, Scheme, TruncationGate, TruncationReport};
use otoc_core::quantum::{Operator, State};
use otoc_core::Complex64;
use rayon::prelude::*;

use crate::error::CliError;
use crate::output::num;

/// Margins below this count as violations.
pub const VIOLATION_TOLERANCE: f64 = 1e-12;

/// A single spin with H_S = 0, W = V = σ_x and ρ_S = I/2.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidityCase {
    pub name: &'static str,
    pub bath: BathSpec,
    pub gate: TruncationGate,
}

impl ValidityCase {
    /// One mode at ω = Λ with unit coupling constant, λ = 0.2, βΛ = 1.
    pub fn single_mode() -> Self {
        Self {
            name: "single_mode",
            bath: BathSpec {
                spectral: SpectralDensity::new(1.0, 1.0).expect("ohmic"),
                coupling: 0.2,
                site_couplings: None,
                beta: 1.0,
                modes: BathModes::Explicit(vec![BathMode::new(1.0, 1.0).expect("mode")]),
                n_max: 10,
            },
            gate: TruncationGate::new(10, 80),
        }
    }

    /// Three Gauss–Legendre modes of an ohmic density on (0, 10Λ], λ = 0.2,
    /// βΛ = 1. The dense cap keeps the cutoff small, so the exact column is
    /// not expected to converge; the path-sum column is exact in the bath.
    pub fn ohmic_three_modes() -> Self {
        Self {
            name: "ohmic_three_modes",
            bath: BathSpec {
                spectral: SpectralDensity::new(1.0, 1.0).expect("ohmic"),
                coupling: 0.2,
                site_couplings: None,
                beta: 1.0,
                modes: BathModes::Discretized { per_site: 3, omega_max: 10.0 },
                n_max: 3,
            },
            gate: TruncationGate::new(3, 6),
        }
    }

    pub fn parameters(&self) -> String {
        let modes = self.bath.site_modes().unwrap_or_default();
        let modes: Vec<String> = modes.iter().map(|m| format!("({:.6}, {:.6})", m.omega, m.coupling)).collect();
        format!(
            "N=1, H_S=0, W=V=sigma_x, rho_S=I/2, lambda={}, beta={}, s={}, modes (omega, c)=[{}]",
            self.bath.coupling,
            self.bath.beta,
            self.bath.spectral.exponent(),
            modes.join(", ")
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidityRow {
    pub t: f64,
    pub closed: f64,
    pub fbte_factor: f64,
    pub pbte_factor: f64,
    pub fbte_exact: f64,
    pub pbte_exact: f64,
    pub fbte_paths: f64,
    pub pbte_paths: f64,
}

impl ValidityRow {
    pub fn margins(&self) -> [f64; 4] {
        [
            self.fbte_exact - self.closed * self.fbte_factor,
            self.pbte_exact - self.closed * self.pbte_factor,
            self.fbte_paths - self.closed * self.fbte_factor,
            self.pbte_paths - self.closed * self.pbte_factor,
        ]
    }
}

pub const MARGIN_COLUMNS: [&str; 4] = ["fbte_exact", "pbte_exact", "fbte_paths", "pbte_paths"];

#[derive(Clone, Debug, PartialEq)]
pub struct ValidityTable {
    pub case: ValidityCase,
    pub rows: Vec<ValidityRow>,
    pub truncation: [TruncationReport; 2],
}

impl ValidityTable {
    /// `(t, column, margin)` for every margin below `-VIOLATION_TOLERANCE`.
    pub fn violations(&self) -> Vec<(f64, &'static str, f64)> {
        let mut out = Vec::new();
        for r in &self.rows {
            for (m, col) in r.margins().into_iter().zip(MARGIN_COLUMNS) {
                if m < -VIOLATION_TOLERANCE {
                    out.push((r.t, col, m));
                }
            }
        }
        out
    }

    /// Largest ln(|F_paths| / |F_closed|) / ln(factor) over rows with a
    /// non-trivial factor, for FBTE and PBTE. A ratio above one means the
    /// decay outruns the bound.
    pub fn decay_ratios(&self) -> [f64; 2] {
        let worst = |pick: fn(&ValidityRow) -> (f64, f64)| {
            self.rows
                .iter()
                .filter_map(|r| {
                    let (f, factor) = pick(r);
                    (factor < 1.0 - 1e-12 && f > 0.0 && r.closed > 0.0).then(|| (f / r.closed).ln() / factor.ln())
                })
                .fold(f64::NAN, f64::max)
        };
        [worst(|r| (r.fbte_paths, r.fbte_factor)), worst(|r| (r.pbte_paths, r.pbte_factor))]
    }
}

fn sigma_x() -> Operator {
    local_operator(1, &ObservableSpec::single(0, Axis::X)).expect("one site")
}

/// Twenty points on (0, 5].
pub fn grid() -> Vec<f64> {
    (1..=20).map(|k| 0.25 * k as f64).collect()
}

pub fn tabulate(case: &ValidityCase, times: &[f64]) -> Result<ValidityTable, CliError> {
    let h = Operator::zeros(&[2]);
    let x = sigma_x();
    let rho = State::maximally_mixed(&[2]);
    let problem = OtocProblem::new(h.clone(), x.clone(), x.clone(), rho.clone(), Some(case.bath.clone()))?;
    let par = |p: &PreparedOtoc, ts: &[f64]| ts.par_iter().map(|&t| p.evaluate(t)).collect();
    let closed = otoc_series_gated_with(Scheme::Closed, &problem, times, case.gate, par)?;
    let fbte = otoc_series_gated_with(Scheme::Fbte, &problem, times, case.gate, par)?;
    let pbte = otoc_series_gated_with(Scheme::Pbte, &problem, times, case.gate, par)?;
    let kernel = DiscreteKernel::new(case.bath.site_modes()?, &ThermalContext::new(case.bath.beta)?);
    let lambda = case.bath.coupling;
    let paths = |scheme: Scheme| -> Result<Vec<Complex64>, CliError> {
        Ok(times
            .par_iter()
            .map(|&t| dephasing_otoc(scheme, &h, &x, &x, &rho, &kernel, lambda, t))
            .collect::<otoc_core::Result<_>>()?)
    };
    let (fp, pp) = (paths(Scheme::Fbte)?, paths(Scheme::Pbte)?);
    let mut rows = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let d = kernel.double_integral(t)?.re;
        let d3 = kernel.double_integral(3.0 * t)?.re;
        rows.push(ValidityRow {
            t,
            closed: closed.values[k].norm(),
            fbte_factor: fbte_factor_from_d(lambda, 1, d),
            pbte_factor: pbte_factor_from_d(lambda, 1, d3),
            fbte_exact: fbte.values[k].norm(),
            pbte_exact: pbte.values[k].norm(),
            fbte_paths: fp[k].norm(),
            pbte_paths: pp[k].norm(),
        });
    }
    let report = |r: Option<TruncationReport>| r.expect("open schemes run the gate");
    Ok(ValidityTable { case: case.clone(), rows, truncation: [report(fbte.truncation), report(pbte.truncation)] })
}

/// Markdown report of several tables.
pub fn render(tables: &[ValidityTable]) -> String {
    let mut s = String::new();
    writeln!(s, "# Dephasing lower-bound validity\n").unwrap();
    writeln!(
        s,
        "Margins are |F_OS| - |F_closed| * factor. A margin below -{VIOLATION_TOLERANCE:e} is a violation. \
         `exact` columns come from the finite-bath engine, `paths` columns from the path-sum engine with the \
         same discrete modes. Factors use D(t) of those modes.\n"
    )
    .unwrap();
    for table in tables {
        writeln!(s, "## {}\n", table.case.name).unwrap();
        writeln!(s, "Parameters: {}\n", table.case.parameters()).unwrap();
        for (scheme, r) in ["fbte", "pbte"].iter().zip(&table.truncation) {
            writeln!(
                s,
                "Exact-engine truncation ({scheme}): n_max={} deviation={:.3e} converged={}{}",
                r.n_max,
                r.deviation,
                r.converged,
                if r.capped { " (stopped by the dimension cap)" } else { "" }
            )
            .unwrap();
        }
        writeln!(
            s,
            "\n| t | abs_F_closed | fbte_factor | pbte_factor | abs_F_fbte_exact | abs_F_pbte_exact | abs_F_fbte_paths | abs_F_pbte_paths | margin_fbte_exact | margin_pbte_exact | margin_fbte_paths | margin_pbte_paths |"
        )
        .unwrap();
        writeln!(s, "|{}", "---|".repeat(12)).unwrap();
        for r in &table.rows {
            let m = r.margins();
            let cells = [
                r.t, r.closed, r.fbte_factor, r.pbte_factor, r.fbte_exact, r.pbte_exact, r.fbte_paths, r.pbte_paths, m[0],
                m[1], m[2], m[3],
            ];
            let cells: Vec<String> = cells.iter().map(|&c| num(c)).collect();
            writeln!(s, "| {} |", cells.join(" | ")).unwrap();
        }
        let [rf, rp] = table.decay_ratios();
        writeln!(s, "\nLargest decay ratio ln(|F_paths|/|F_closed|) / ln(factor): fbte {rf:.4}, pbte {rp:.4}").unwrap();
        let v = table.violations();
        if v.is_empty() {
            writeln!(s, "\nViolations: none.\n").unwrap();
        } else {
            writeln!(s, "\nViolations ({}), parameters: {}\n", v.len(), table.case.parameters()).unwrap();
            for (t, col, m) in v {
                writeln!(s, "- t={t} column={col} margin={}", num(m)).unwrap();
            }
            writeln!(s).unwrap();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins_flag_only_negative_values() {
        let row = ValidityRow {
            t: 1.0,
            closed: 1.0,
            fbte_factor: 0.5,
            pbte_factor: 0.9,
            fbte_exact: 0.6,
            pbte_exact: 0.8,
            fbte_paths: 0.5,
            pbte_paths: 0.95,
        };
        let table = ValidityTable {
            case: ValidityCase::single_mode(),
            rows: vec![row],
            truncation: [
                TruncationReport { n_max: 4, deviation: 0.0, converged: true, history: vec![], capped: false },
                TruncationReport { n_max: 4, deviation: 0.0, converged: true, history: vec![], capped: false },
            ],
        };
        let v = table.violations();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].1, "pbte_exact");
        assert!(render(&[table]).contains("column=pbte_exact"));
    }
}
