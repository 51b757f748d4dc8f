//! Ohmic-family spectral densities, the bath correlation function and the
//! dephasing double integral D(t) = ∫₀^t dt' ∫₀^{t'} dt'' Re ξ(t' - t'').
//!
//! Double time integrals are reduced with ∫₀^t dt'∫₀^{t'} f(t'-t'') dt'' =
//! ∫₀^t (t - τ) f(τ) dτ. Closed forms are provided for s = 1 at low
//! temperature (logarithmic), s = 2 (digamma) and s > 2 (Hurwitz zeta).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;

use crate::quadrature::{cumulative_moments, integrate_with_points, try_integrate_with_points, Tolerance};
use crate::special::{digamma, hurwitz_zeta};
use crate::{Error, Result};

/// J(ω) = ω^s Λ^{1-s} e^{-ω/Λ}
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralDensity {
    exponent: f64,
    cutoff: f64,
}

impl SpectralDensity {
    pub fn new(exponent: f64, cutoff: f64) -> Result<Self> {
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(Error::InvalidParameter(format!("ohmicity exponent must be > 0, got {exponent}")));
        }
        if !(cutoff.is_finite() && cutoff > 0.0) {
            return Err(Error::InvalidParameter(format!("cutoff must be > 0, got {cutoff}")));
        }
        Ok(Self { exponent, cutoff })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn value(&self, omega: f64) -> f64 {
        if omega <= 0.0 {
            return 0.0;
        }
        let x = omega / self.cutoff;
        self.cutoff * x.powf(self.exponent) * (-x).exp()
    }
}

/// Inverse temperature β = 1/(k_B T).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalContext {
    beta: f64,
}

impl ThermalContext {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter(format!("inverse temperature must be > 0, got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn from_temperature(kbt: f64) -> Result<Self> {
        if !(kbt.is_finite() && kbt > 0.0) {
            return Err(Error::InvalidParameter(format!("temperature must be > 0, got {kbt}")));
        }
        Self::new(1.0 / kbt)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn temperature(&self) -> f64 {
        1.0 / self.beta
    }

    /// τ_T = 1/(π k_B T)
    pub fn thermal_time(&self) -> f64 {
        self.beta / core::f64::consts::PI
    }
}

pub(crate) fn coth(x: f64) -> f64 {
    1.0 / x.tanh()
}

/// Absolute tolerance of [`xi`].
pub const XI_TOLERANCE: f64 = 1e-10;
/// Absolute tolerance of the D(t) and |ξ| double integrals.
pub const D_TOLERANCE: f64 = 1e-9;
/// Bound on the neglected frequency tail.
pub const TAIL_TOLERANCE: f64 = 1e-12;

/// Frequency above which ∫ J(ω) coth(βω/2) dω · `weight` is below `tail`.
///
/// Uses Γ(s+1, u) ≤ u^s e^{-u} / (1 - s/u) for u > s, in units of Λ.
pub(crate) fn upper_frequency(j: &SpectralDensity, ctx: &ThermalContext, weight: f64, tail: f64) -> f64 {
    let s = j.exponent;
    let lam = j.cutoff;
    let mut u = (s + 2.0).max(4.0);
    loop {
        let bound = lam * lam * u.powf(s) * (-u).exp() / (1.0 - s / u) * coth(0.5 * ctx.beta * lam * u) * weight;
        if bound < tail || u > 2000.0 {
            return u * lam;
        }
        u += 1.0;
    }
}

/// Panel boundaries for ω-integrals: the thermal scale, the cutoff and a
/// few cutoff multiples, all below `upper`.
pub(crate) fn frequency_points(j: &SpectralDensity, ctx: &ThermalContext, upper: f64) -> Vec<f64> {
    let mut pts = vec![0.0];
    let mut inner = vec![ctx.temperature(), j.cutoff, 4.0 * j.cutoff, 10.0 * j.cutoff];
    inner.sort_by(f64::total_cmp);
    for p in inner {
        if p > 0.0 && p < upper && p > *pts.last().unwrap() * (1.0 + 1e-12) {
            pts.push(p);
        }
    }
    pts.push(upper);
    pts
}

fn require_s_at_least_one(j: &SpectralDensity) -> Result<()> {
    if j.exponent < 1.0 {
        return Err(Error::Domain(format!(
            "the bath correlation function is evaluated for s >= 1, got s = {}",
            j.exponent
        )));
    }
    Ok(())
}

/// ξ(t) = ∫₀^∞ J(ω) [coth(βω/2) cos(ωt) + i sin(ωt)] dω, with the `+i sin`
/// sign as written in the influence-phase formulas.
pub fn xi(j: &SpectralDensity, ctx: &ThermalContext, t: f64) -> Result<Complex64> {
    xi_with_tolerance(j, ctx, t, XI_TOLERANCE)
}

pub fn xi_with_tolerance(j: &SpectralDensity, ctx: &ThermalContext, t: f64, tol: f64) -> Result<Complex64> {
    require_s_at_least_one(j)?;
    let upper = upper_frequency(j, ctx, 1.0, TAIL_TOLERANCE.min(tol * 1e-2));
    let pts = frequency_points(j, ctx, upper);
    let beta = ctx.beta;
    let r = integrate_with_points(
        |w: f64| {
            let jw = j.value(w);
            if jw == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let (s, c) = (w * t).sin_cos();
            Complex64::new(jw * coth(0.5 * beta * w) * c, jw * s)
        },
        &pts,
        Tolerance::absolute(tol),
    )?;
    Ok(r.value)
}

/// Re ξ(t) only, at half the cost of [`xi`].
pub fn xi_real(j: &SpectralDensity, ctx: &ThermalContext, t: f64, tol: f64) -> Result<f64> {
    require_s_at_least_one(j)?;
    let upper = upper_frequency(j, ctx, 1.0, TAIL_TOLERANCE.min(tol * 1e-2));
    let pts = frequency_points(j, ctx, upper);
    let beta = ctx.beta;
    let r = integrate_with_points(
        |w: f64| {
            let jw = j.value(w);
            if jw == 0.0 {
                0.0
            } else {
                jw * coth(0.5 * beta * w) * (w * t).cos()
            }
        },
        &pts,
        Tolerance::absolute(tol),
    )?;
    Ok(r.value)
}

fn inner_tolerance(t: f64, tol: f64) -> f64 {
    (tol / (1.0 + t * t)).min(XI_TOLERANCE)
}

fn time_points(t: f64, scale: f64) -> Vec<f64> {
    let mut pts = vec![0.0];
    let mut x = scale;
    while x < t {
        pts.push(x);
        x *= 4.0;
    }
    pts.push(t);
    pts
}

/// D(t) by the convolution reduction ∫₀^t (t - τ) Re ξ(τ) dτ, tolerance 1e-9.
pub fn dephasing_integral_d(j: &SpectralDensity, ctx: &ThermalContext, t: f64) -> Result<f64> {
    dephasing_integral_d_with_tolerance(j, ctx, t, D_TOLERANCE)
}

pub fn dephasing_integral_d_with_tolerance(j: &SpectralDensity, ctx: &ThermalContext, t: f64, tol: f64) -> Result<f64> {
    require_s_at_least_one(j)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let inner = inner_tolerance(t, tol);
    let pts = time_points(t, 1.0 / j.cutoff);
    let r = try_integrate_with_points(|tau| Ok((t - tau) * xi_real(j, ctx, tau, inner)?), &pts, Tolerance::absolute(tol))?;
    Ok(r.value)
}

/// ∫₀^t (t - τ) |ξ(τ)| dτ, tolerance 1e-9.
pub fn abs_xi_double_integral(j: &SpectralDensity, ctx: &ThermalContext, t: f64) -> Result<f64> {
    require_s_at_least_one(j)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let inner = inner_tolerance(t, D_TOLERANCE);
    let pts = time_points(t, 1.0 / j.cutoff);
    let r = try_integrate_with_points(
        |tau| Ok((t - tau) * xi_with_tolerance(j, ctx, tau, inner)?.norm()),
        &pts,
        Tolerance::absolute(D_TOLERANCE),
    )?;
    Ok(r.value)
}

/// True in the regime k_B T ≤ 0.05 Λ where the logarithmic s = 1 form holds.
pub fn s1_closed_form_valid(cutoff: f64, ctx: &ThermalContext) -> bool {
    ctx.temperature() <= 0.05 * cutoff
}

/// ln(sinh x / x) for x ≥ 0 without overflow or cancellation.
fn ln_sinhc(x: f64) -> f64 {
    if x < 0.1 {
        let x2 = x * x;
        x2 * (1.0 / 6.0 + x2 * (-1.0 / 180.0 + x2 * (1.0 / 2835.0 + x2 * (-1.0 / 37800.0 + x2 / 467775.0))))
    } else if x > 20.0 {
        x - core::f64::consts::LN_2 - x.ln() + (-(-2.0 * x).exp()).ln_1p()
    } else {
        (x.sinh() / x).ln()
    }
}

/// Low-temperature closed form for s = 1:
/// D(t) = ln[√(1 + Λ²t²) · sinh(t/τ_T)/(t/τ_T)].
///
/// Callers should check [`s1_closed_form_valid`]; outside that regime the
/// value is still returned.
pub fn d_closed_s1(cutoff: f64, ctx: &ThermalContext, t: f64) -> f64 {
    let x = t / ctx.thermal_time();
    0.5 * (cutoff * cutoff * t * t).ln_1p() + ln_sinhc(x)
}

/// Closed form for s > 1 via Hurwitz zeta (digamma at s = 2), valid at any
/// temperature. Non-integer s in (1, 2) needs ζ(p, ·) with p < 1 and is
/// rejected; use quadrature there.
pub fn d_closed_s_gt1(j: &SpectralDensity, ctx: &ThermalContext, t: f64) -> Result<f64> {
    let z = d_closed_s_gt1_complex(j, ctx, t)?;
    if z.im.abs() > 1e-12 * z.re.abs().max(1.0) {
        return Err(Error::Domain(format!("closed form left an imaginary residue {}", z.im)));
    }
    Ok(z.re)
}

/// The closed form before discarding the imaginary part; the complex
/// conjugate terms are evaluated at conjugated arguments rather than by
/// conjugating, so the residue measures the evaluation quality.
pub fn d_closed_s_gt1_complex(j: &SpectralDensity, ctx: &ThermalContext, t: f64) -> Result<Complex64> {
    let s = j.exponent;
    if s <= 1.0 {
        return Err(Error::Domain(format!("closed form needs s > 1, got {s}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
    }
    let beta = ctx.beta;
    let lam = j.cutoff;
    let q = 1.0 / (lam * beta);
    let y = t / beta;
    let re = |x: f64| Complex64::new(x, 0.0);
    let shifted = |a: f64, sign: f64| Complex64::new(a, sign * y);
    if s == 2.0 {
        let f = |a: Complex64| digamma(a);
        let bracket = f(shifted(q, 1.0))? + f(shifted(q, -1.0))? + f(shifted(1.0 + q, 1.0))? + f(shifted(1.0 + q, -1.0))?;
        let base = f(re(q))? + f(re(1.0 + q))?;
        return Ok((bracket * 0.5 - base) / (beta * lam));
    }
    let p = s - 1.0;
    let f = |a: Complex64| hurwitz_zeta(p, a);
    let base = f(re(q))? + f(re(1.0 + q))?;
    let bracket = f(shifted(q, 1.0))? + f(shifted(1.0 + q, 1.0))? + f(shifted(q, -1.0))? + f(shifted(1.0 + q, -1.0))?;
    let prefactor = libm::tgamma(p) / (beta * lam).powf(p);
    Ok((base - bracket * 0.5) * prefactor)
}

/// How a D(t) value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DMethod {
    /// Logarithmic s = 1 form, low-temperature regime.
    LowTemperatureLog,
    /// Hurwitz zeta form, s > 2.
    HurwitzZeta,
    /// Digamma form, s = 2.
    Digamma,
    /// Convolution-reduced adaptive quadrature.
    Quadrature,
}

impl DMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            DMethod::LowTemperatureLog => "closed_form_s1_low_temperature",
            DMethod::HurwitzZeta => "closed_form_hurwitz_zeta",
            DMethod::Digamma => "closed_form_digamma",
            DMethod::Quadrature => "quadrature",
        }
    }
}

/// Closed form when one applies, quadrature otherwise.
pub fn select_d_method(j: &SpectralDensity, ctx: &ThermalContext) -> DMethod {
    let s = j.exponent;
    if s == 1.0 && s1_closed_form_valid(j.cutoff, ctx) {
        DMethod::LowTemperatureLog
    } else if s == 2.0 {
        DMethod::Digamma
    } else if s > 2.0 {
        DMethod::HurwitzZeta
    } else {
        DMethod::Quadrature
    }
}

pub fn d_with_method(j: &SpectralDensity, ctx: &ThermalContext, t: f64, method: DMethod) -> Result<f64> {
    match method {
        DMethod::LowTemperatureLog => {
            if j.exponent != 1.0 {
                return Err(Error::Domain(format!("logarithmic form is for s = 1, got s = {}", j.exponent)));
            }
            Ok(d_closed_s1(j.cutoff, ctx, t))
        }
        DMethod::HurwitzZeta | DMethod::Digamma => d_closed_s_gt1(j, ctx, t),
        DMethod::Quadrature => dephasing_integral_d(j, ctx, t),
    }
}

/// D on an ascending grid of non-negative times. The quadrature path
/// integrates each grid interval once and accumulates.
pub fn d_series(j: &SpectralDensity, ctx: &ThermalContext, times: &[f64], method: DMethod) -> Result<Vec<f64>> {
    match method {
        DMethod::Quadrature => {
            require_s_at_least_one(j)?;
            let tmax = times.iter().cloned().fold(0.0, f64::max);
            let inner = inner_tolerance(tmax, D_TOLERANCE);
            convolution_series(times, |tau| xi_real(j, ctx, tau, inner))
        }
        _ => times.iter().map(|&t| d_with_method(j, ctx, t, method)).collect(),
    }
}

/// ∫₀^t (t - τ)|ξ(τ)| dτ on an ascending grid.
pub fn abs_xi_series(j: &SpectralDensity, ctx: &ThermalContext, times: &[f64]) -> Result<Vec<f64>> {
    require_s_at_least_one(j)?;
    let tmax = times.iter().cloned().fold(0.0, f64::max);
    let inner = inner_tolerance(tmax, D_TOLERANCE);
    convolution_series(times, |tau| Ok(xi_with_tolerance(j, ctx, tau, inner)?.norm()))
}

fn convolution_series<F>(times: &[f64], f: F) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Result<f64>,
{
    if times.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return Err(Error::InvalidParameter("times must be finite and >= 0".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("times must be ascending".into()));
    }
    let mut grid = Vec::with_capacity(times.len() + 1);
    grid.push(0.0);
    grid.extend_from_slice(times);
    let moments = cumulative_moments(f, &grid, Tolerance::absolute(D_TOLERANCE / (1.0 + grid.len() as f64)))?;
    Ok(times.iter().zip(&moments[1..]).map(|(&t, m)| t * m[0] - m[1]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{E, PI};

    fn ohmic(s: f64) -> SpectralDensity {
        SpectralDensity::new(s, 1.0).unwrap()
    }

    fn temp(kbt: f64) -> ThermalContext {
        ThermalContext::from_temperature(kbt).unwrap()
    }

    #[test]
    fn spectral_values() {
        assert!((ohmic(1.0).value(1.0) - 1.0 / E).abs() < 1e-16);
        assert_eq!(ohmic(2.5).value(0.0), 0.0);
        let j = SpectralDensity::new(3.0, 2.0).unwrap();
        assert!((j.value(2.0) - 2.0 / E).abs() < 1e-15);
        assert!(SpectralDensity::new(0.0, 1.0).is_err());
        assert!(SpectralDensity::new(1.0, -1.0).is_err());
    }

    #[test]
    fn thermal_context() {
        let c = temp(0.01);
        assert!((c.beta() - 100.0).abs() < 1e-12);
        assert!((c.thermal_time() - 100.0 / PI).abs() < 1e-12);
        assert!(ThermalContext::new(0.0).is_err());
    }

    #[test]
    fn xi_at_zero_time() {
        let v = xi(&ohmic(1.0), &ThermalContext::new(1e6).unwrap(), 0.0).unwrap();
        assert_eq!(v.im, 0.0);
        assert!((v.re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn xi_rejects_subohmic() {
        assert!(matches!(xi(&ohmic(0.5), &temp(1.0), 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn xi_zero_temperature_closed_form() {
        // T → 0, s = 1: ξ(t) = ∫ ω e^{-ω} e^{iωt} dω = 1/(1 - it)²
        let ctx = ThermalContext::new(1e8).unwrap();
        for t in [0.3, 1.0, 4.0] {
            let v = xi(&ohmic(1.0), &ctx, t).unwrap();
            let exact = Complex64::new(1.0, -t).powi(-2);
            assert!((v - exact).norm() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn ln_sinhc_branches_are_continuous() {
        for x in [0.1, 20.0] {
            let lo = ln_sinhc(x * (1.0 - 1e-13));
            let hi = ln_sinhc(x * (1.0 + 1e-13));
            assert!((lo - hi).abs() < 1e-12 * lo.abs());
        }
        assert!((ln_sinhc(700.0) - (700.0 - 2f64.ln() - 700f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn s1_closed_form_values() {
        let ctx = temp(1e-2);
        assert_eq!(d_closed_s1(1.0, &ctx, 0.0), 0.0);
        let x = PI * 1e-2;
        let expected = (2f64.sqrt() * x.sinh() / x).ln();
        assert!((d_closed_s1(1.0, &ctx, 1.0) - expected).abs() < 1e-15);
        assert!(s1_closed_form_valid(1.0, &ctx));
        assert!(!s1_closed_form_valid(1.0, &temp(0.1)));
    }

    #[test]
    fn s1_closed_form_asymptote() {
        // ln(Λt) + t/τ_T - ln(2t/τ_T) at t = 50 τ_T
        let ctx = temp(1e-2);
        let t = 50.0 * ctx.thermal_time();
        let asym = t.ln() + t / ctx.thermal_time() - (2.0 * t / ctx.thermal_time()).ln();
        let v = d_closed_s1(1.0, &ctx, t);
        assert!(((v - asym) / asym).abs() < 0.01);
    }

    #[test]
    fn closed_form_vanishes_at_zero_and_rejects_s_le_1() {
        for s in [2.0, 3.0, 4.5] {
            assert!(d_closed_s_gt1(&ohmic(s), &temp(0.5), 0.0).unwrap().abs() < 1e-12);
        }
        assert!(d_closed_s_gt1(&ohmic(1.0), &temp(0.5), 1.0).is_err());
        assert!(matches!(d_closed_s_gt1(&ohmic(1.5), &temp(0.5), 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn method_selection() {
        assert_eq!(select_d_method(&ohmic(1.0), &temp(1e-2)), DMethod::LowTemperatureLog);
        assert_eq!(select_d_method(&ohmic(1.0), &temp(1.0)), DMethod::Quadrature);
        assert_eq!(select_d_method(&ohmic(2.0), &temp(1.0)), DMethod::Digamma);
        assert_eq!(select_d_method(&ohmic(3.0), &temp(1.0)), DMethod::HurwitzZeta);
        assert_eq!(select_d_method(&ohmic(1.5), &temp(1.0)), DMethod::Quadrature);
    }

    #[test]
    fn d_at_zero_and_small_times() {
        assert_eq!(dephasing_integral_d(&ohmic(1.0), &temp(1.0), 0.0).unwrap(), 0.0);
        assert_eq!(abs_xi_double_integral(&ohmic(1.0), &temp(1.0), 0.0).unwrap(), 0.0);
        assert!(dephasing_integral_d(&ohmic(1.0), &temp(1.0), -1.0).is_err());
    }

    #[test]
    fn series_matches_pointwise() {
        let j = ohmic(1.0);
        let ctx = temp(1.0);
        let times = [0.0, 0.5, 1.0, 2.5];
        let series = d_series(&j, &ctx, &times, DMethod::Quadrature).unwrap();
        for (t, d) in times.iter().zip(&series) {
            let direct = dephasing_integral_d(&j, &ctx, *t).unwrap();
            assert!((d - direct).abs() < 1e-9, "t={t}: {d} vs {direct}");
        }
        assert!(d_series(&j, &ctx, &[1.0, 0.5], DMethod::Quadrature).is_err());
    }
}
