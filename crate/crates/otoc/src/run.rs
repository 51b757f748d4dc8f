//! `run` and `validate`: turn a [`RunConfig`] into a CSV and a summary.

use std::path::{Path, PathBuf};

use otoc_core::bath::ThermalContext;
use otoc_core::bounds::{bound_series, BoundParams, BoundSeries};
use otoc_core::influence::{
    dephasing_otoc_product, require_dephasing_chain, Conventions, ContinuousKernel, CorrelationKernel,
    DephasingEngine, DiscreteKernel, ENUMERATION_MAX_SITES,
};
use otoc_core::model::{build_chain_hamiltonian, local_operator, BathSpec, ChainFamily, SpinChainSpec};
use otoc_core::otoc::{otoc_series_gated_with, OtocProblem, OtocSeries, PreparedOtoc, Scheme, TruncationReport};
use otoc_core::quantum::{dimension_forecast, HermitianEigen, Operator, State, DEFAULT_DIMENSION_CAP};
use otoc_core::Complex64;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{EngineName, InitialState, KernelName, RunConfig, TruncationMode};
use crate::error::CliError;
use crate::output::{bound_csv, num, otoc_csv, truncation_line, write_atomic, Provenance};

/// Result of a run before anything touches the file system.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub csv: String,
    pub summary: serde_json::Value,
}

/// The first term of the chain Hamiltonian that does not commute with σ_z,
/// named for error messages.
pub fn non_commuting_term(chain: &SpinChainSpec) -> Option<String> {
    match &chain.family {
        ChainFamily::TransverseIsing { transverse, .. } => transverse
            .iter()
            .position(|&g| g != 0.0)
            .map(|k| format!("transverse field term transverse[{k}] * sigma_x on site {k}")),
        ChainFamily::Xxz { couplings, .. } => couplings.iter().position(|&j| j != 0.0).map(|k| {
            format!("exchange term couplings[{k}] * (sigma_x sigma_x + sigma_y sigma_y) on bond {k}-{}", k + 1)
        }),
        ChainFamily::IsingZz { .. } | ChainFamily::CustomDiagonal { .. } => None,
    }
}

fn require_influence_chain(chain: &SpinChainSpec) -> Result<(), CliError> {
    match non_commuting_term(chain) {
        Some(term) => Err(CliError::Capability(format!(
            "the influence engine needs a chain that commutes with the sigma_z bath coupling; {term} does not"
        ))),
        None => Ok(()),
    }
}

fn state_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

/// Uniform mixture over the eigenvectors whose energy lies within a relative
/// 1e-9 of the minimum.
pub fn ground_state(h: &Operator) -> Result<State, CliError> {
    let eig = HermitianEigen::new(h)?;
    let e0 = eig.values().iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * e0.abs().max(1.0);
    let cols: Vec<usize> = (0..eig.values().len()).filter(|&k| eig.values()[k] - e0 <= tol).collect();
    let q = eig.vectors();
    let n = h.dim();
    let mut rho = otoc_core::quantum::Operator::zeros(h.dims()).into_matrix();
    for &c in &cols {
        let v = q.column(c);
        rho += v * v.adjoint();
    }
    rho /= Complex64::new(cols.len() as f64, 0.0);
    debug_assert_eq!(rho.nrows(), n);
    Ok(State::new(Operator::new(rho, h.dims().to_vec())?)?)
}

/// Chain state as a full density matrix.
fn chain_state(initial: &InitialState, sites: usize, h: &Operator) -> Result<State, CliError> {
    let dims = vec![2; sites];
    Ok(match initial {
        InitialState::MaximallyMixed => State::maximally_mixed(&dims),
        InitialState::Basis(bits) => State::basis(state_index(bits), dims)?,
        InitialState::Ground => ground_state(h)?,
    })
}

/// Chain state as per-site factors, when it is a product.
fn site_states(initial: &InitialState, sites: usize) -> Result<Vec<State>, CliError> {
    match initial {
        InitialState::MaximallyMixed => Ok(vec![State::maximally_mixed(&[2]); sites]),
        InitialState::Basis(bits) => bits.iter().map(|&b| Ok(State::basis(b as usize, vec![2])?)).collect(),
        InitialState::Ground => Err(CliError::Capability(format!(
            "chains longer than {ENUMERATION_MAX_SITES} sites need a product initial state for the influence engine; \
             use maximally_mixed or basis:<bits>"
        ))),
    }
}

fn exact_dimension(cfg: &RunConfig, bath: Option<&BathSpec>) -> u128 {
    let sites = cfg.chain.sites;
    match (Scheme::from(cfg.scheme), bath) {
        (Scheme::Fbte | Scheme::Pbte, Some(b)) => dimension_forecast(b.joint_dims(sites)),
        _ => dimension_forecast(std::iter::repeat_n(2, sites)),
    }
}

fn dimension_text(cfg: &RunConfig, bath: Option<&BathSpec>) -> String {
    let sites = cfg.chain.sites;
    match (Scheme::from(cfg.scheme), bath) {
        (Scheme::Fbte | Scheme::Pbte, Some(b)) => {
            format!("2^{sites}*{}^{}", b.n_max, sites * b.modes_per_site())
        }
        _ => format!("2^{sites}"),
    }
}

fn check_cap(cfg: &RunConfig, bath: Option<&BathSpec>) -> Result<u128, CliError> {
    let d = exact_dimension(cfg, bath);
    if d > DEFAULT_DIMENSION_CAP as u128 {
        return Err(CliError::Capability(format!(
            "forecast joint dimension {} = {d} exceeds the dense cap {DEFAULT_DIMENSION_CAP}",
            dimension_text(cfg, bath)
        )));
    }
    Ok(d)
}

fn bath_spec(cfg: &RunConfig) -> Result<Option<BathSpec>, CliError> {
    cfg.bath.as_ref().map(|b| b.spec(cfg.chain.sites)).transpose()
}

fn truncation_json(report: &Option<TruncationReport>) -> serde_json::Value {
    match report {
        None => serde_json::Value::Null,
        Some(r) => json!({
            "n_max": r.n_max,
            "deviation": if r.deviation.is_finite() { json!(r.deviation) } else { json!(num(r.deviation)) },
            "converged": r.converged,
            "capped": r.capped,
        }),
    }
}

fn base_provenance(cfg: &RunConfig) -> Provenance {
    let mut p = Provenance::new();
    p.push("scheme", Scheme::from(cfg.scheme).as_str())
        .push("engine", cfg.engine.as_str())
        .push("config", serde_json::to_string(cfg).expect("config serialises"));
    p
}

fn par_eval(p: &PreparedOtoc, times: &[f64]) -> otoc_core::Result<Vec<Complex64>> {
    times.par_iter().map(|&t| p.evaluate(t)).collect()
}

fn run_exact(cfg: &RunConfig, times: &[f64]) -> Result<(OtocSeries, Provenance), CliError> {
    let scheme = Scheme::from(cfg.scheme);
    let chain = cfg.chain_spec()?;
    let bath = if scheme == Scheme::Closed { None } else { bath_spec(cfg)? };
    check_cap(cfg, bath.as_ref())?;
    let h = build_chain_hamiltonian(&chain)?;
    let (w, v) = cfg.observables()?;
    let rho = chain_state(&cfg.initial_state()?, chain.sites, &h)?;
    let (wo, vo) = (local_operator(chain.sites, &w)?, local_operator(chain.sites, &v)?);
    let problem = OtocProblem::new(h, wo, vo, rho, bath)?;
    let series = match cfg.gate() {
        Some((gate, mode)) if scheme != Scheme::Closed => {
            let s = otoc_series_gated_with(scheme, &problem, times, gate, par_eval)?;
            if let (TruncationMode::Strict, Some(r)) = (mode, &s.truncation) {
                if !r.converged {
                    return Err(CliError::Numerical(format!(
                        "Fock truncation did not converge: deviation {:e} at n_max = {} (ceiling {}{})",
                        r.deviation,
                        r.n_max,
                        gate.ceiling,
                        if r.capped { ", stopped by the dimension cap" } else { "" }
                    )));
                }
            }
            s
        }
        _ => {
            let prepared = PreparedOtoc::new(scheme, &problem)?;
            OtocSeries { times: times.to_vec(), values: par_eval(&prepared, times)?, scheme, truncation: None }
        }
    };
    let mut prov = base_provenance(cfg);
    match &series.truncation {
        Some(r) => prov.push("truncation", truncation_line(r)),
        None => match &problem.bath {
            Some(b) => prov.push("truncation", format!("fixed n_max={}", b.n_max)),
            None => prov.push("truncation", "none"),
        },
    };
    Ok((series, prov))
}

fn run_influence(cfg: &RunConfig, times: &[f64]) -> Result<(OtocSeries, Provenance), CliError> {
    let scheme = Scheme::from(cfg.scheme);
    let chain = cfg.chain_spec()?;
    require_influence_chain(&chain)?;
    let bath_cfg = cfg.bath.as_ref().expect("checked at load");
    let bath = bath_cfg.spec(chain.sites)?;
    let thermal = ThermalContext::new(bath.beta)?;
    let discrete;
    let continuous;
    let kernel: &(dyn CorrelationKernel + Sync) = match bath_cfg.kernel {
        KernelName::Discrete => {
            discrete = DiscreteKernel::new(bath.site_modes()?, &thermal);
            &discrete
        }
        KernelName::Continuous => {
            continuous = ContinuousKernel::new(bath.spectral, thermal);
            &continuous
        }
    };
    let couplings: Vec<f64> = (0..chain.sites).map(|k| bath.site_coupling(k)).collect();
    let (w, v) = cfg.observables()?;
    let conv = Conventions::CALIBRATED;
    let n = chain.sites;
    let (values, path) = if n <= ENUMERATION_MAX_SITES {
        let h = build_chain_hamiltonian(&chain)?;
        require_dephasing_chain(&h)?;
        let rho = chain_state(&cfg.initial_state()?, n, &h)?;
        let (wo, vo) = (local_operator(n, &w)?, local_operator(n, &v)?);
        let engine = DephasingEngine::new(scheme, &h, &wo, &vo, &rho, kernel, &couplings, conv)?;
        let values = times.par_iter().map(|&t| engine.evaluate(t)).collect::<otoc_core::Result<Vec<_>>>()?;
        (values, format!("enumeration over {} basis-label paths", engine.path_count()))
    } else {
        let states = site_states(&cfg.initial_state()?, n)?;
        let values = times
            .par_iter()
            .map(|&t| dephasing_otoc_product(scheme, &chain, &w, &v, &states, kernel, &couplings, t, conv))
            .collect::<otoc_core::Result<Vec<_>>>()?;
        (values, "site-factorised transfer matrices".to_string())
    };
    let mut prov = base_provenance(cfg);
    prov.push("kernel", format!("{:?}", bath_cfg.kernel).to_lowercase())
        .push("path_sum", path)
        .push("truncation", "none (influence phases are exact in the bath)");
    Ok((OtocSeries { times: times.to_vec(), values, scheme, truncation: None }, prov))
}

fn bound_params(cfg: &RunConfig) -> Result<BoundParams, CliError> {
    let b = cfg.bath.as_ref().expect("checked at load");
    if let Some(ls) = &b.site_couplings {
        if ls.iter().any(|&l| l != b.coupling) {
            return Err(CliError::Capability("the bound engine needs a uniform coupling; drop bath.site_couplings".into()));
        }
    }
    Ok(BoundParams::new(b.coupling, cfg.chain.sites, b.spectral()?, b.thermal()?)?)
}

fn run_bound(cfg: &RunConfig, times: &[f64]) -> Result<(BoundSeries, Provenance), CliError> {
    let params = bound_params(cfg)?;
    let series = bound_series(&params, times)?;
    let mut prov = base_provenance(cfg);
    prov.push("d_method", series.method.as_str());
    Ok((series, prov))
}

/// Computes everything a run produces without writing it.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let times = cfg.times()?;
    let scheme = Scheme::from(cfg.scheme);
    let mut summary = json!({
        "status": "ok",
        "scheme": scheme.as_str(),
        "engine": cfg.engine.as_str(),
        "points": times.len(),
        "truncation": null,
    });
    let csv = match cfg.engine {
        EngineName::Exact | EngineName::Influence => {
            let (series, prov) =
                if cfg.engine == EngineName::Exact { run_exact(cfg, &times)? } else { run_influence(cfg, &times)? };
            summary["truncation"] = truncation_json(&series.truncation);
            summary["max_abs_F"] = json!(series.values.iter().map(|f| f.norm()).fold(0.0, f64::max));
            otoc_csv(&series, &prov)
        }
        EngineName::Bound => {
            let (series, prov) = run_bound(cfg, &times)?;
            summary["d_method"] = json!(series.method.as_str());
            bound_csv(&series, &prov)
        }
    };
    Ok(RunOutput { csv, summary })
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().filter(|p| !p.as_os_str().is_empty()).map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

/// `run <config>`: compute, write the CSV atomically, return the summary.
pub fn run_file(path: &Path) -> Result<serde_json::Value, CliError> {
    let cfg = RunConfig::load(path)?;
    let out = execute(&cfg)?;
    let target = cfg.output_path(&config_dir(path));
    write_atomic(&target, &out.csv)?;
    let mut summary = out.summary;
    summary["output"] = json!(target.display().to_string());
    Ok(summary)
}

/// Diagnostics from `validate`.
#[derive(Clone, Debug, PartialEq)]
pub struct Validation {
    pub engine: EngineName,
    pub scheme: Scheme,
    /// Dense dimension the exact engine would allocate; `None` for engines
    /// that never build the joint space.
    pub joint_dimension: Option<u128>,
    /// Largest thermal weight dropped by the Fock cutoff, e^{-βω n_max}.
    pub truncation_tail: Option<f64>,
    /// Largest doubled cutoff the gate can reach under the dimension cap.
    pub gate_reach: Option<usize>,
    pub notes: Vec<String>,
}

impl Validation {
    pub fn render(&self) -> String {
        let mut s = format!("OK engine={} scheme={}", self.engine.as_str(), self.scheme.as_str());
        if let Some(d) = self.joint_dimension {
            s.push_str(&format!(" joint_dimension={d} cap={DEFAULT_DIMENSION_CAP}"));
        }
        if let Some(t) = self.truncation_tail {
            s.push_str(&format!(" truncation_tail={t:.3e}"));
        }
        if let Some(n) = self.gate_reach {
            s.push_str(&format!(" gate_reach_n_max={n}"));
        }
        for note in &self.notes {
            s.push_str(&format!("\nnote: {note}"));
        }
        s
    }
}

fn truncation_tail(bath: &BathSpec) -> Result<f64, CliError> {
    Ok(bath
        .site_modes()?
        .iter()
        .map(|m| (-bath.beta * m.omega * bath.n_max as f64).exp())
        .fold(0.0, f64::max))
}

/// Schema and physics checks without running any engine.
pub fn validate(cfg: &RunConfig) -> Result<Validation, CliError> {
    let scheme = Scheme::from(cfg.scheme);
    let chain = cfg.chain_spec()?;
    cfg.observables()?;
    cfg.times()?;
    let bath = bath_spec(cfg)?;
    let mut v = Validation {
        engine: cfg.engine,
        scheme,
        joint_dimension: None,
        truncation_tail: None,
        gate_reach: None,
        notes: Vec::new(),
    };
    match cfg.engine {
        EngineName::Exact => {
            let open = scheme != Scheme::Closed;
            let bath = if open { bath.as_ref() } else { None };
            v.joint_dimension = Some(check_cap(cfg, bath)?);
            if let Some(b) = bath {
                v.truncation_tail = Some(truncation_tail(b)?);
                if let Some((gate, _)) = cfg.gate() {
                    let mut n = gate.start;
                    while n * 2 <= gate.ceiling
                        && dimension_forecast(b.with_n_max(n * 2).joint_dims(chain.sites)) <= DEFAULT_DIMENSION_CAP as u128
                    {
                        n *= 2;
                    }
                    v.gate_reach = Some(n);
                    if n * 2 <= gate.ceiling {
                        v.notes.push(format!(
                            "the dimension cap stops the doubling gate at n_max = {n} before the ceiling {}",
                            gate.ceiling
                        ));
                    }
                }
            }
        }
        EngineName::Influence => {
            require_influence_chain(&chain)?;
            if chain.sites <= ENUMERATION_MAX_SITES {
                v.joint_dimension = Some(chain.dimension());
            } else {
                if !matches!(chain.family, ChainFamily::IsingZz { .. }) {
                    return Err(CliError::Capability(format!(
                        "chains longer than {ENUMERATION_MAX_SITES} sites need the ising_zz family for the influence engine"
                    )));
                }
                site_states(&cfg.initial_state()?, chain.sites)?;
                v.notes.push("product path sum over site transfer matrices".into());
            }
        }
        EngineName::Bound => {
            bound_params(cfg)?;
            v.notes.push("bound engine uses only the site count of the chain".into());
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use otoc_core::model::ChainFamily;

    #[test]
    fn ground_state_mixes_degenerate_levels() {
        // H = σz σz: ground space spanned by |01> and |10>
        let spec = SpinChainSpec::new(2, ChainFamily::IsingZz { couplings: vec![1.0], fields: vec![0.0, 0.0] }).unwrap();
        let rho = ground_state(&build_chain_hamiltonian(&spec).unwrap()).unwrap();
        let d: Vec<f64> = (0..4).map(|k| rho.matrix()[(k, k)].re).collect();
        for (got, want) in d.iter().zip([0.0, 0.5, 0.5, 0.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn non_commuting_terms_are_named() {
        let ti = SpinChainSpec::new(
            2,
            ChainFamily::TransverseIsing { couplings: vec![1.0], fields: vec![0.0; 2], transverse: vec![0.0, 0.5] },
        )
        .unwrap();
        assert!(non_commuting_term(&ti).unwrap().contains("transverse[1]"));
        let xxz = SpinChainSpec::new(2, ChainFamily::Xxz { couplings: vec![1.0], anisotropy: 0.3, fields: vec![0.0; 2] })
            .unwrap();
        assert!(non_commuting_term(&xxz).unwrap().contains("exchange"));
        let zero = SpinChainSpec::new(
            2,
            ChainFamily::TransverseIsing { couplings: vec![1.0], fields: vec![0.0; 2], transverse: vec![0.0; 2] },
        )
        .unwrap();
        assert!(non_commuting_term(&zero).is_none());
    }

    #[test]
    fn basis_labels_put_site_zero_first() {
        assert_eq!(state_index(&[1, 0, 0]), 4);
        assert_eq!(state_index(&[0, 1, 1]), 3);
    }
}
