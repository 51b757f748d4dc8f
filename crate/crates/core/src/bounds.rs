//! Dephasing lower bounds on |F^{OS}_t| and the Taylor difference bound.
//!
//! With D(t) = ∫₀^t dt'∫₀^{t'} dt'' Re ξ(t'-t''), the bound factors are
//! e^{-4λ²N D(t)} for full backward evolution and e^{-λ²N D(3t)} for the
//! partial scheme. The difference bound is e^{4λ²N A(t)} - 1 with A the same
//! double integral of |ξ|.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use crate::bath::{abs_xi_double_integral, abs_xi_series, d_series, d_with_method, select_d_method, DMethod, SpectralDensity, ThermalContext};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundParams {
    pub coupling: f64,
    pub sites: usize,
    pub spectral: SpectralDensity,
    pub thermal: ThermalContext,
}

impl BoundParams {
    pub fn new(coupling: f64, sites: usize, spectral: SpectralDensity, thermal: ThermalContext) -> Result<Self> {
        if !(coupling.is_finite() && coupling >= 0.0) {
            return Err(Error::InvalidParameter(format!("coupling must be >= 0, got {coupling}")));
        }
        if sites == 0 {
            return Err(Error::InvalidParameter("bounds need at least one site".into()));
        }
        Ok(Self { coupling, sites, spectral, thermal })
    }

    fn strength(&self) -> f64 {
        self.coupling * self.coupling * self.sites as f64
    }

    pub fn d_method(&self) -> DMethod {
        select_d_method(&self.spectral, &self.thermal)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
    }
    Ok(())
}

/// e^{-4λ²N d}
pub fn fbte_factor_from_d(coupling: f64, sites: usize, d: f64) -> f64 {
    (-4.0 * coupling * coupling * sites as f64 * d).exp()
}

/// e^{-λ²N d3}, with d3 = D(3t).
pub fn pbte_factor_from_d(coupling: f64, sites: usize, d3: f64) -> f64 {
    (-coupling * coupling * sites as f64 * d3).exp()
}

pub fn fbte_bound_factor(params: &BoundParams, t: f64) -> Result<f64> {
    check_time(t)?;
    let d = d_with_method(&params.spectral, &params.thermal, t, params.d_method())?;
    Ok(fbte_factor_from_d(params.coupling, params.sites, d))
}

pub fn pbte_bound_factor(params: &BoundParams, t: f64) -> Result<f64> {
    check_time(t)?;
    let d3 = d_with_method(&params.spectral, &params.thermal, 3.0 * t, params.d_method())?;
    Ok(pbte_factor_from_d(params.coupling, params.sites, d3))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DifferenceBound {
    pub value: f64,
    /// Above 1 the bound says nothing about |ΔF|/|F|.
    pub saturated: bool,
}

impl DifferenceBound {
    fn from_integral(params: &BoundParams, abs_integral: f64) -> Self {
        let value = (4.0 * params.strength() * abs_integral).exp_m1();
        Self { value, saturated: value > 1.0 }
    }
}

pub fn difference_bound(params: &BoundParams, t: f64) -> Result<DifferenceBound> {
    check_time(t)?;
    let a = abs_xi_double_integral(&params.spectral, &params.thermal, t)?;
    Ok(DifferenceBound::from_integral(params, a))
}

/// First time in (0, t_max] at which the difference bound reaches 1, found
/// by bisection on the monotone exponent (to `tol` in t). `None` if it stays
/// below 1 on the whole interval.
pub fn difference_bound_crossing(params: &BoundParams, t_max: f64, tol: f64) -> Result<Option<f64>> {
    check_time(t_max)?;
    if params.coupling == 0.0 || difference_bound(params, t_max)?.value < 1.0 {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, t_max);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if difference_bound(params, mid)?.value < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundSeries {
    pub times: Vec<f64>,
    pub d_values: Vec<f64>,
    pub d3_values: Vec<f64>,
    pub fbte_factor: Vec<f64>,
    pub pbte_factor: Vec<f64>,
    pub difference: Vec<DifferenceBound>,
    pub method: DMethod,
    pub params: BoundParams,
}

/// All bound quantities on an ascending grid of non-negative times.
pub fn bound_series(params: &BoundParams, times: &[f64]) -> Result<BoundSeries> {
    bound_series_with_method(params, times, params.d_method())
}

pub fn bound_series_with_method(params: &BoundParams, times: &[f64], method: DMethod) -> Result<BoundSeries> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("time grid is empty".into()));
    }
    let tripled: Vec<f64> = times.iter().map(|t| 3.0 * t).collect();
    let d_values = d_series(&params.spectral, &params.thermal, times, method)?;
    let d3_values = d_series(&params.spectral, &params.thermal, &tripled, method)?;
    let abs = abs_xi_series(&params.spectral, &params.thermal, times)?;
    let (lam, n) = (params.coupling, params.sites);
    Ok(BoundSeries {
        times: times.to_vec(),
        fbte_factor: d_values.iter().map(|&d| fbte_factor_from_d(lam, n, d)).collect(),
        pbte_factor: d3_values.iter().map(|&d| pbte_factor_from_d(lam, n, d)).collect(),
        difference: abs.iter().map(|&a| DifferenceBound::from_integral(params, a)).collect(),
        d_values,
        d3_values,
        method,
        params: *params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(lambda: f64, s: f64, kbt: f64) -> BoundParams {
        BoundParams::new(
            lambda,
            20,
            SpectralDensity::new(s, 1.0).unwrap(),
            ThermalContext::from_temperature(kbt).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn factors_at_zero_time_and_coupling() {
        let p = params(0.1, 1.0, 1e-2);
        assert_eq!(fbte_bound_factor(&p, 0.0).unwrap(), 1.0);
        assert_eq!(pbte_bound_factor(&p, 0.0).unwrap(), 1.0);
        assert_eq!(difference_bound(&p, 0.0).unwrap().value, 0.0);
        let free = params(0.0, 3.0, 1.0);
        for t in [0.5, 2.0] {
            assert_eq!(fbte_bound_factor(&free, t).unwrap(), 1.0);
            assert_eq!(pbte_bound_factor(&free, t).unwrap(), 1.0);
            assert_eq!(difference_bound(&free, t).unwrap().value, 0.0);
        }
        assert_eq!(difference_bound_crossing(&free, 10.0, 1e-6).unwrap(), None);
    }

    #[test]
    fn exponents_follow_d() {
        let p = params(0.1, 3.0, 1.0);
        let d = crate::bath::d_closed_s_gt1(&p.spectral, &p.thermal, 1.3).unwrap();
        let d3 = crate::bath::d_closed_s_gt1(&p.spectral, &p.thermal, 3.9).unwrap();
        assert!((fbte_bound_factor(&p, 1.3).unwrap().ln() + 4.0 * 0.01 * 20.0 * d).abs() < 1e-13);
        assert!((pbte_bound_factor(&p, 1.3).unwrap().ln() + 0.01 * 20.0 * d3).abs() < 1e-13);
    }

    #[test]
    fn invalid_parameters() {
        let j = SpectralDensity::new(1.0, 1.0).unwrap();
        let c = ThermalContext::new(1.0).unwrap();
        assert!(BoundParams::new(-0.1, 1, j, c).is_err());
        assert!(BoundParams::new(0.1, 0, j, c).is_err());
        assert!(fbte_bound_factor(&params(0.1, 1.0, 1.0), -1.0).is_err());
        assert!(bound_series(&params(0.1, 1.0, 1.0), &[]).is_err());
    }

    #[test]
    fn single_point_grid() {
        let s = bound_series(&params(0.1, 1.0, 1e-2), &[0.0]).unwrap();
        assert_eq!(s.fbte_factor, [1.0]);
        assert_eq!(s.pbte_factor, [1.0]);
        assert_eq!(s.difference[0].value, 0.0);
        assert_eq!(s.method, DMethod::LowTemperatureLog);
    }
}
