//! Exact OTOC evaluation on the chain space (closed) and on the truncated
//! joint chain-plus-oscillator space (full and partial backward evolution).
//!
//! All traces are evaluated in the eigenbasis of the forward Hamiltonian, so
//! a grid of times reuses one eigendecomposition and each time point costs a
//! handful of dense products.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;

use crate::linalg::{matmul, scale_rows_cols, trace_of_product, CMatrix};
use crate::model::{assemble_joint_capped, environment_state, lift_to_joint, BathSpec, Variant};
use crate::quantum::{kron, HermitianEigen, Operator, State, DEFAULT_DIMENSION_CAP};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Closed,
    /// Full backward time evolution: system and environment are both reversed.
    Fbte,
    /// Partial backward time evolution: only the system Hamiltonian is reversed.
    Pbte,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Closed => "closed",
            Scheme::Fbte => "fbte",
            Scheme::Pbte => "pbte",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" => Ok(Scheme::Closed),
            "fbte" => Ok(Scheme::Fbte),
            "pbte" => Ok(Scheme::Pbte),
            other => Err(Error::InvalidParameter(format!("unknown scheme '{other}' (expected closed, fbte or pbte)"))),
        }
    }
}

/// Chain Hamiltonian, observables and initial chain state, plus the bath for
/// the open schemes.
#[derive(Clone, Debug)]
pub struct OtocProblem {
    pub chain: Operator,
    pub w: Operator,
    pub v: Operator,
    pub rho: State,
    pub bath: Option<BathSpec>,
    pub dimension_cap: usize,
}

impl OtocProblem {
    pub fn new(chain: Operator, w: Operator, v: Operator, rho: State, bath: Option<BathSpec>) -> Result<Self> {
        for (name, dims) in [("W", w.dims()), ("V", v.dims()), ("initial state", rho.dims())] {
            if dims != chain.dims() {
                return Err(Error::DimensionMismatch(format!(
                    "{name} acts on {dims:?}, chain space is {:?}",
                    chain.dims()
                )));
            }
        }
        if let Some(b) = &bath {
            b.validate(chain.dims().len())?;
        }
        Ok(Self { chain, w, v, rho, bath, dimension_cap: DEFAULT_DIMENSION_CAP })
    }

    pub fn with_dimension_cap(self, cap: usize) -> Self {
        Self { dimension_cap: cap, ..self }
    }

    /// Same problem with the bath truncated at `n_max`.
    pub fn with_n_max(&self, n_max: usize) -> Self {
        Self { bath: self.bath.as_ref().map(|b| b.with_n_max(n_max)), ..self.clone() }
    }
}

/// Eigenbasis data for one scheme, ready to evaluate any time.
#[derive(Clone, Debug)]
pub struct PreparedOtoc {
    scheme: Scheme,
    forward: HermitianEigen,
    /// W in the forward eigenbasis
    w: CMatrix,
    /// V† in the forward eigenbasis
    v_dag: CMatrix,
    /// V ρ in the forward eigenbasis
    v_rho: CMatrix,
    reversed: Option<Reversed>,
}

/// Eigenvalues of the system-reversed generator and the overlap Q₁†Q₂.
#[derive(Clone, Debug)]
struct Reversed {
    values: Vec<f64>,
    overlap: CMatrix,
    overlap_adj: CMatrix,
}

impl PreparedOtoc {
    pub fn new(scheme: Scheme, problem: &OtocProblem) -> Result<Self> {
        let (h, w, v, rho) = match scheme {
            Scheme::Closed => (
                problem.chain.clone(),
                problem.w.clone(),
                problem.v.clone(),
                problem.rho.operator().clone(),
            ),
            Scheme::Fbte | Scheme::Pbte => {
                let bath = problem
                    .bath
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParameter(format!("{scheme} scheme needs a bath")))?;
                let h = assemble_joint_capped(&problem.chain, bath, Variant::Forward, problem.dimension_cap)?;
                let dims = h.dims().to_vec();
                let rho_e = environment_state(bath, problem.chain.dims().len())?;
                let rho = kron(problem.rho.operator(), rho_e.operator())?;
                (h, lift_to_joint(&problem.w, &dims)?, lift_to_joint(&problem.v, &dims)?, rho)
            }
        };
        let forward = HermitianEigen::new(&h)?;
        let w_t = forward.to_eigenbasis(w.matrix());
        let v_t = forward.to_eigenbasis(v.matrix());
        let rho_t = forward.to_eigenbasis(rho.matrix());
        let reversed = if scheme == Scheme::Pbte {
            let bath = problem.bath.as_ref().expect("checked above");
            let h_rev = assemble_joint_capped(&problem.chain, bath, Variant::SystemReversed, problem.dimension_cap)?;
            let rev = HermitianEigen::new(&h_rev)?;
            let overlap = matmul(&forward.vectors().adjoint(), rev.vectors());
            Some(Reversed { values: rev.values().to_vec(), overlap_adj: overlap.adjoint(), overlap })
        } else {
            None
        };
        Ok(Self { scheme, v_rho: matmul(&v_t, &rho_t), v_dag: v_t.adjoint(), w: w_t, forward, reversed })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn evaluate(&self, t: f64) -> Result<Complex64> {
        check_time(t)?;
        let d = self.forward.phases(t);
        let dc: Vec<Complex64> = d.iter().map(|z| z.conj()).collect();
        // A = U† W U in the eigenbasis
        let a = scale_rows_cols(&dc, &self.w, &d);
        let a_dag = a.adjoint();
        match &self.reversed {
            None => {
                // Tr(A† V† A V ρ)
                let left = matmul(&a_dag, &self.v_dag);
                Ok(trace_of_product(&left, &matmul(&a, &self.v_rho)))
            }
            Some(rev) => {
                // X = U_{SE†} = M diag(e^{+iE₂t}) M†, Y = U_{S†E} = X†
                let ones = vec![Complex64::new(1.0, 0.0); rev.values.len()];
                let d2c: Vec<Complex64> = rev.values.iter().map(|&e| Complex64::from_polar(1.0, e * t)).collect();
                let x = matmul(&scale_rows_cols(&ones, &rev.overlap, &d2c), &rev.overlap_adj);
                let y = x.adjoint();
                // Tr(U† X U† W† U V† Y W U V ρ) = Tr(D̄ X A† V† · Y W D V ρ)
                let left = matmul(&x, &matmul(&a_dag, &self.v_dag));
                let left = scale_rows_cols(&dc, &left, &ones);
                let wd = scale_rows_cols(&ones, &self.w, &d);
                let right = matmul(&y, &matmul(&wd, &self.v_rho));
                Ok(trace_of_product(&left, &right))
            }
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// Rejects empty, negative, non-finite or non-ascending grids.
pub fn validate_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("time grid is empty".into()));
    }
    for &t in times {
        check_time(t)?;
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("time grid must be strictly ascending".into()));
    }
    Ok(())
}

/// Tr(W_t† V† W_t V ρ) with W_t = e^{iHt} W e^{-iHt}.
pub fn closed_otoc(h: &Operator, w: &Operator, v: &Operator, rho: &State, t: f64) -> Result<Complex64> {
    let problem = OtocProblem::new(h.clone(), w.clone(), v.clone(), rho.clone(), None)?;
    PreparedOtoc::new(Scheme::Closed, &problem)?.evaluate(t)
}

/// Tr(U† W† U V† U† W U V ρ_S⊗ρ_E) on the truncated joint space.
pub fn fbte_otoc(problem: &OtocProblem, t: f64) -> Result<Complex64> {
    PreparedOtoc::new(Scheme::Fbte, problem)?.evaluate(t)
}

/// Tr(U† U_{SE†} U† W† U V† U_{S†E} W U V ρ_S⊗ρ_E) with
/// U_{S†E} = e^{-i(-H_S + H_E + H_{S:E})t} and U_{SE†} its adjoint.
pub fn pbte_otoc(problem: &OtocProblem, t: f64) -> Result<Complex64> {
    PreparedOtoc::new(Scheme::Pbte, problem)?.evaluate(t)
}

/// Fock-cutoff doubling protocol.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationGate {
    /// Accept when the maximum grid deviation between n and 2n is below this.
    pub tolerance: f64,
    pub start: usize,
    /// Largest cutoff that may be tried.
    pub ceiling: usize,
}

impl TruncationGate {
    pub const DEFAULT_TOLERANCE: f64 = 1e-8;

    pub fn new(start: usize, ceiling: usize) -> Self {
        Self { tolerance: Self::DEFAULT_TOLERANCE, start, ceiling }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruncationReport {
    /// Cutoff whose values are reported.
    pub n_max: usize,
    /// Max grid deviation between the last two cutoffs.
    pub deviation: f64,
    pub converged: bool,
    /// `(n_max, deviation from the previous cutoff)`; the first entry has NaN.
    pub history: Vec<(usize, f64)>,
    /// Set when the dimension cap stopped the doubling before the ceiling.
    pub capped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OtocSeries {
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
    pub scheme: Scheme,
    pub truncation: Option<TruncationReport>,
}

/// Sequential evaluation of a prepared engine over a grid.
pub fn evaluate_grid(prepared: &PreparedOtoc, times: &[f64]) -> Result<Vec<Complex64>> {
    times.iter().map(|&t| prepared.evaluate(t)).collect()
}

/// One evaluation at the problem's own cutoff.
pub fn otoc_series(scheme: Scheme, problem: &OtocProblem, times: &[f64]) -> Result<OtocSeries> {
    validate_grid(times)?;
    let prepared = PreparedOtoc::new(scheme, problem)?;
    Ok(OtocSeries { times: times.to_vec(), values: evaluate_grid(&prepared, times)?, scheme, truncation: None })
}

/// Runs the doubling gate and returns the series at the last cutoff with its
/// report, converged or not. `eval` maps a prepared engine over the grid,
/// which lets callers parallelise.
pub fn otoc_series_gated_with<F>(
    scheme: Scheme,
    problem: &OtocProblem,
    times: &[f64],
    gate: TruncationGate,
    mut eval: F,
) -> Result<OtocSeries>
where
    F: FnMut(&PreparedOtoc, &[f64]) -> Result<Vec<Complex64>>,
{
    validate_grid(times)?;
    if scheme == Scheme::Closed || problem.bath.is_none() {
        let prepared = PreparedOtoc::new(scheme, problem)?;
        return Ok(OtocSeries { times: times.to_vec(), values: eval(&prepared, times)?, scheme, truncation: None });
    }
    if gate.start < 2 || gate.ceiling < gate.start || !(gate.tolerance > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "truncation gate needs 2 <= start <= ceiling and tolerance > 0, got {gate:?}"
        )));
    }
    let mut n = gate.start;
    let mut values = eval(&PreparedOtoc::new(scheme, &problem.with_n_max(n))?, times)?;
    let mut history = vec![(n, f64::NAN)];
    let mut deviation = f64::INFINITY;
    let mut capped = false;
    while n * 2 <= gate.ceiling {
        let next_problem = problem.with_n_max(n * 2);
        let prepared = match PreparedOtoc::new(scheme, &next_problem) {
            Ok(p) => p,
            Err(Error::DimensionCap { .. }) => {
                capped = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let next = eval(&prepared, times)?;
        deviation = values.iter().zip(&next).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        n *= 2;
        values = next;
        history.push((n, deviation));
        if deviation < gate.tolerance {
            break;
        }
    }
    let converged = deviation < gate.tolerance;
    Ok(OtocSeries {
        times: times.to_vec(),
        values,
        scheme,
        truncation: Some(TruncationReport { n_max: n, deviation, converged, history, capped }),
    })
}

/// Doubling gate that fails with [`Error::Truncation`] unless it converges.
pub fn otoc_series_converged(scheme: Scheme, problem: &OtocProblem, times: &[f64], gate: TruncationGate) -> Result<OtocSeries> {
    let series = otoc_series_gated_with(scheme, problem, times, gate, evaluate_grid)?;
    if let Some(r) = &series.truncation {
        if !r.converged {
            return Err(Error::Truncation { deviation: r.deviation, n_max: r.n_max });
        }
    }
    Ok(series)
}
