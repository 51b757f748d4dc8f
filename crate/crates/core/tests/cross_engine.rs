//! Path-sum influence engine against exact joint-space evaluation.

use otoc_core::bath::{SpectralDensity, ThermalContext};
use otoc_core::influence::{calibrate, Conventions, DephasingEngine, DiscreteKernel};
use otoc_core::model::{build_chain_hamiltonian, local_operator, Axis, BathMode, BathModes, BathSpec, ChainFamily, ObservableSpec, SpinChainSpec};
use otoc_core::otoc::{evaluate_grid, otoc_series_gated_with, OtocProblem, Scheme, TruncationGate};
use otoc_core::quantum::{pauli, Operator, State};
use otoc_core::Complex64;

fn bath(modes: Vec<BathMode>, coupling: f64, beta: f64) -> BathSpec {
    BathSpec {
        spectral: SpectralDensity::new(1.0, 1.0).unwrap(),
        coupling,
        site_couplings: None,
        beta,
        modes: BathModes::Explicit(modes),
        n_max: 10,
    }
}

struct Case {
    chain: Operator,
    w: Operator,
    v: Operator,
    rho: State,
    bath: BathSpec,
}

fn exact(case: &Case, scheme: Scheme, times: &[f64], gate: TruncationGate) -> Vec<(f64, Complex64)> {
    let p = OtocProblem::new(case.chain.clone(), case.w.clone(), case.v.clone(), case.rho.clone(), Some(case.bath.clone())).unwrap();
    let s = otoc_series_gated_with(scheme, &p, times, gate, evaluate_grid).unwrap();
    assert!(s.truncation.as_ref().unwrap().deviation < 1e-5, "{:?}", s.truncation);
    times.iter().copied().zip(s.values).collect()
}

fn path_sum(case: &Case, scheme: Scheme, conv: Conventions, t: f64) -> Complex64 {
    let kernel = DiscreteKernel::new(case.bath.site_modes().unwrap(), &ThermalContext::new(case.bath.beta).unwrap());
    let n = case.chain.dims().len();
    let couplings = vec![case.bath.coupling; n];
    DephasingEngine::new(scheme, &case.chain, &case.w, &case.v, &case.rho, &kernel, &couplings, conv)
        .unwrap()
        .evaluate(t)
        .unwrap()
}

fn single_spin() -> Case {
    let x = pauli(Axis::X);
    Case {
        chain: Operator::zeros(&[2]),
        w: x.clone(),
        v: x,
        rho: State::maximally_mixed(&[2]),
        bath: bath(vec![BathMode::new(1.0, 1.0).unwrap()], 0.2, 1.0),
    }
}

fn two_site() -> Case {
    let spec = SpinChainSpec::new(2, ChainFamily::IsingZz { couplings: vec![0.6], fields: vec![0.4, -0.3] }).unwrap();
    let psi = [Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.1), Complex64::new(0.3, -0.4), Complex64::new(0.0, 0.5)];
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let psi: Vec<Complex64> = psi.iter().map(|z| z / norm).collect();
    Case {
        chain: build_chain_hamiltonian(&spec).unwrap(),
        w: local_operator(2, &ObservableSpec::new(vec![(0, Axis::X), (1, Axis::Y)])).unwrap(),
        v: local_operator(2, &ObservableSpec::single(1, Axis::X)).unwrap(),
        rho: State::pure(&psi, vec![2, 2]).unwrap(),
        bath: bath(vec![BathMode::new(1.0, 0.9).unwrap()], 0.25, 3.0),
    }
}

fn assert_calibrated_is_best(case: &Case, gate: TruncationGate, times: &[f64]) {
    for scheme in [Scheme::Fbte, Scheme::Pbte] {
        let reference = exact(case, scheme, times, gate);
        let cal = calibrate(&Conventions::candidates(), &reference, |c, t| Ok(path_sum(case, scheme, c, t))).unwrap();
        let best = cal.best().1;
        let calibrated = cal.ranking.iter().find(|(c, _)| *c == Conventions::CALIBRATED).unwrap().1;
        assert!(calibrated < 1e-8, "{scheme}: calibrated deviation {calibrated:e}");
        assert!(calibrated <= best + 1e-12);
        let printed = cal.ranking.iter().find(|(c, _)| *c == Conventions::AS_PRINTED).unwrap().1;
        if scheme == Scheme::Pbte {
            assert!(printed > 1e-2, "printed conventions unexpectedly agree: {printed:e}");
        }
    }
}

#[test]
fn single_spin_engines_agree() {
    assert_calibrated_is_best(&single_spin(), TruncationGate::new(10, 80), &[0.4, 1.3, 2.7, 4.9]);
}

#[test]
fn two_site_chain_engines_agree() {
    assert_calibrated_is_best(&two_site(), TruncationGate::new(8, 16), &[0.4, 1.3, 2.7]);
}

#[test]
fn zero_time_sum_rule() {
    let case = two_site();
    let kernel = DiscreteKernel::new(case.bath.site_modes().unwrap(), &ThermalContext::new(case.bath.beta).unwrap());
    let expected = otoc_core::quantum::trace_product(&[&case.w.adjoint(), &case.v.adjoint(), &case.w, &case.v], &case.rho).unwrap();
    for scheme in [Scheme::Fbte, Scheme::Pbte] {
        let f = DephasingEngine::new(scheme, &case.chain, &case.w, &case.v, &case.rho, &kernel, &[0.3, 0.3], Conventions::CALIBRATED)
            .unwrap()
            .evaluate(0.0)
            .unwrap();
        assert!((f - expected).norm() < 1e-12);
    }
}
