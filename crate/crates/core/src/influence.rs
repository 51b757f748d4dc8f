//! Influence phases for piecewise-constant spin paths, the forced-oscillator
//! quantities χ and ξ, and a path-sum OTOC engine for dephasing chains.
//!
//! Every double time integral here has the form
//! `∫₀^T dt' ∫₀^{t'} dt'' a(t') K(t'-t'') b(t'')` with step functions `a`, `b`.
//! On a common refinement of the steps it reduces to values of
//! `G(x) = ∫₀^x (x-τ) K(τ) dτ`: a diagonal cell `[p, q]` contributes `G(q-p)`
//! and an ordered pair of cells contributes a four-term rectangle formula.
//! Kernels therefore only need to provide `G`, which [`CorrelationKernel`]
//! does in closed form for discrete modes and by one frequency quadrature
//! for a continuous spectral density.
//!
//! Sign conventions: the printed bath correlation is
//! `ξ(t) = ∫J(ω)[coth(βω/2)cos ωt + i sin ωt]dω`. Which terms of the
//! influence phases need ξ and which need ξ* is fixed in [`Conventions`]
//! by calibration against the exact Fock-space engine.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;

use num_complex::Complex64;
use num_traits::Float;

use crate::bath::{coth, frequency_points, upper_frequency, SpectralDensity, ThermalContext, TAIL_TOLERANCE};
use crate::model::{site_spin, BathMode, ChainFamily, ObservableSpec, SpinChainSpec, Axis};
use crate::otoc::Scheme;
use crate::quadrature::{integrate_with_points, Tolerance};
use crate::quantum::{matexp_unitary, FockSpace, Operator, State};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative tolerance used to decide that two breakpoints coincide.
const SPAN_EPS: f64 = 1e-12;

/// Piecewise-constant n_z(t) on [0, T] with values in [-1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseTrajectory {
    steps: Steps,
}

/// Unrestricted step function on [0, T]: `breaks[0] = 0`, `breaks[k]` ascending,
/// `values[k]` on `[breaks[k], breaks[k+1]]`.
#[derive(Clone, Debug, PartialEq)]
struct Steps {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl Steps {
    fn span(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    fn value_at(&self, t: f64) -> f64 {
        let k = self.breaks[1..].iter().position(|&b| t < b).unwrap_or(self.values.len() - 1);
        self.values[k]
    }

    /// `alpha * self + beta * other` on the union of breakpoints.
    fn combine(&self, alpha: f64, other: &Steps, beta: f64) -> Steps {
        let breaks = merge_breaks(&self.breaks, &other.breaks);
        let values = breaks
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                alpha * self.value_at(mid) + beta * other.value_at(mid)
            })
            .collect();
        Steps { breaks, values }
    }

    fn scale(&self, k: f64) -> Steps {
        Steps { breaks: self.breaks.clone(), values: self.values.iter().map(|v| v * k).collect() }
    }
}

fn merge_breaks(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    let scale = all.last().copied().unwrap_or(1.0).max(1.0);
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for x in all {
        match out.last() {
            Some(&last) if x - last <= SPAN_EPS * scale => {}
            _ => out.push(x),
        }
    }
    out
}

impl PiecewiseTrajectory {
    /// Segments `(t_start, t_end, n_z)`, contiguous from 0.
    pub fn new(segments: &[(f64, f64, f64)]) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidParameter("trajectory has no segments".into()));
        }
        let mut breaks = vec![0.0];
        let mut values = Vec::with_capacity(segments.len());
        for (k, &(a, b, v)) in segments.iter().enumerate() {
            let expected = breaks[k];
            if (a - expected).abs() > SPAN_EPS * b.abs().max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "segment {k} starts at {a}, expected {expected} (segments must be contiguous from 0)"
                )));
            }
            if !(b > a && b.is_finite()) {
                return Err(Error::InvalidParameter(format!("segment {k} has non-positive length")));
            }
            if !(v.is_finite() && (-1.0..=1.0).contains(&v)) {
                return Err(Error::InvalidParameter(format!("segment {k} value {v} outside [-1, 1]")));
            }
            breaks.push(b);
            values.push(v);
        }
        Ok(Self { steps: Steps { breaks, values } })
    }

    pub fn constant(value: f64, span: f64) -> Result<Self> {
        Self::new(&[(0.0, span, value)])
    }

    /// Back-to-back concatenation, each part shifted to start where the
    /// previous one ended.
    pub fn concat(parts: &[&PiecewiseTrajectory]) -> Result<Self> {
        let mut segs = Vec::new();
        let mut offset = 0.0;
        for p in parts {
            for w in 0..p.steps.values.len() {
                let (a, b) = (p.steps.breaks[w], p.steps.breaks[w + 1]);
                segs.push((offset + a, offset + b, p.steps.values[w]));
            }
            offset += p.span();
        }
        Self::new(&segs)
    }

    pub fn span(&self) -> f64 {
        self.steps.span()
    }

    pub fn segments(&self) -> Vec<(f64, f64, f64)> {
        (0..self.steps.values.len())
            .map(|k| (self.steps.breaks[k], self.steps.breaks[k + 1], self.steps.values[k]))
            .collect()
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.steps.value_at(t)
    }

    pub fn negated(&self) -> Self {
        Self { steps: self.steps.scale(-1.0) }
    }

    /// `alpha · n_z`; requires `|alpha| ≤ 1`.
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        if !(alpha.abs() <= 1.0) {
            return Err(Error::InvalidParameter(format!("scale {alpha} would leave [-1, 1]")));
        }
        Ok(Self { steps: self.steps.scale(alpha) })
    }
}

/// Source of `G(x) = ∫₀^x (x-τ) ξ(τ) dτ` for `x ≥ 0`, with ξ as printed.
pub trait CorrelationKernel {
    fn double_integral(&self, x: f64) -> Result<Complex64>;
}

/// (1 - cos ωx)/ω² and (ωx - sin ωx)/ω² without cancellation.
fn mode_weights(omega: f64, x: f64) -> (f64, f64) {
    let y = omega * x;
    let half = (0.5 * y).sin();
    let re = 2.0 * half * half / (omega * omega);
    let im = if y.abs() < 0.1 {
        let y2 = y * y;
        y * y2 / 6.0 * (1.0 - y2 / 20.0 * (1.0 - y2 / 42.0 * (1.0 - y2 / 72.0)))
    } else {
        y - y.sin()
    } / (omega * omega);
    (re, im)
}

/// J(ω) = Σ_j C_j² δ(ω - ω_j).
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteKernel {
    modes: Vec<BathMode>,
    beta: f64,
}

impl DiscreteKernel {
    pub fn new(modes: Vec<BathMode>, thermal: &ThermalContext) -> Self {
        Self { modes, beta: thermal.beta() }
    }

    pub fn modes(&self) -> &[BathMode] {
        &self.modes
    }
}

impl CorrelationKernel for DiscreteKernel {
    fn double_integral(&self, x: f64) -> Result<Complex64> {
        let mut acc = ZERO;
        for m in &self.modes {
            let (re, im) = mode_weights(m.omega, x);
            let c2 = m.coupling * m.coupling;
            acc += Complex64::new(c2 * coth(0.5 * self.beta * m.omega) * re, c2 * im);
        }
        Ok(acc)
    }
}

/// Continuous spectral density; `G` by adaptive quadrature over ω.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuousKernel {
    spectral: SpectralDensity,
    thermal: ThermalContext,
    tolerance: f64,
}

impl ContinuousKernel {
    pub const DEFAULT_TOLERANCE: f64 = 1e-10;

    pub fn new(spectral: SpectralDensity, thermal: ThermalContext) -> Self {
        Self { spectral, thermal, tolerance: Self::DEFAULT_TOLERANCE }
    }

    pub fn with_tolerance(self, tolerance: f64) -> Self {
        Self { tolerance, ..self }
    }
}

impl CorrelationKernel for ContinuousKernel {
    fn double_integral(&self, x: f64) -> Result<Complex64> {
        if x == 0.0 {
            return Ok(ZERO);
        }
        let j = &self.spectral;
        // the weights are bounded by x/ω, so scale the tail target by x
        let upper = upper_frequency(j, &self.thermal, x.max(1.0), TAIL_TOLERANCE.min(self.tolerance * 1e-2));
        let pts = frequency_points(j, &self.thermal, upper);
        let beta = self.thermal.beta();
        let r = integrate_with_points(
            |w: f64| {
                let jw = j.value(w);
                if jw == 0.0 {
                    return ZERO;
                }
                let (re, im) = mode_weights(w, x);
                Complex64::new(jw * coth(0.5 * beta * w) * re, jw * im)
            },
            &pts,
            Tolerance { abs: self.tolerance, rel: 1e-13 },
        )?;
        Ok(r.value)
    }
}

/// Memoises `G` for repeated arguments.
pub struct CachedKernel<'a, K: CorrelationKernel + ?Sized> {
    inner: &'a K,
    cache: RefCell<Vec<(u64, Complex64)>>,
}

impl<'a, K: CorrelationKernel + ?Sized> CachedKernel<'a, K> {
    pub fn new(inner: &'a K) -> Self {
        Self { inner, cache: RefCell::new(Vec::new()) }
    }
}

impl<K: CorrelationKernel + ?Sized> CorrelationKernel for CachedKernel<'_, K> {
    fn double_integral(&self, x: f64) -> Result<Complex64> {
        let key = x.to_bits();
        if let Some(&(_, v)) = self.cache.borrow().iter().find(|(k, _)| *k == key) {
            return Ok(v);
        }
        let v = self.inner.double_integral(x)?;
        self.cache.borrow_mut().push((key, v));
        Ok(v)
    }
}

/// `∫₀^T dt'∫₀^{t'} dt'' a(t') K(t'-t'') b(t'')` with `K = ξ` or `ξ*`.
fn ordered_double_integral<K: CorrelationKernel + ?Sized>(a: &Steps, b: &Steps, kernel: &K, conjugate: bool) -> Result<Complex64> {
    let p = merge_breaks(&a.breaks, &b.breaks);
    let cells = p.len() - 1;
    let av: Vec<f64> = p.windows(2).map(|w| a.value_at(0.5 * (w[0] + w[1]))).collect();
    let bv: Vec<f64> = p.windows(2).map(|w| b.value_at(0.5 * (w[0] + w[1]))).collect();
    let g = |x: f64| -> Result<Complex64> {
        if x <= 0.0 {
            return Ok(ZERO);
        }
        let v = kernel.double_integral(x)?;
        Ok(if conjugate { v.conj() } else { v })
    };
    let mut acc = ZERO;
    for i in 0..cells {
        if av[i] == 0.0 {
            continue;
        }
        let (a1, a2) = (p[i], p[i + 1]);
        if bv[i] != 0.0 {
            acc += g(a2 - a1)? * (av[i] * bv[i]);
        }
        for j in 0..i {
            if bv[j] == 0.0 {
                continue;
            }
            let (b1, b2) = (p[j], p[j + 1]);
            let rect = g(a2 - b1)? - g(a2 - b2)? - g(a1 - b1)? + g(a1 - b2)?;
            acc += rect * (av[i] * bv[j]);
        }
    }
    Ok(acc)
}

fn check_span(traj: &PiecewiseTrajectory, span: f64, what: &str) -> Result<()> {
    if (traj.span() - span).abs() > SPAN_EPS * span.max(1.0) {
        return Err(Error::SpanMismatch(format!("{what} spans [0, {}], expected [0, {span}]", traj.span())));
    }
    Ok(())
}

/// Bosonic influence phase
/// `∫₀^t dt'∫₀^{t'} dt'' (z - z')(t') [ξ(t'-t'') z(t'') - ξ*(t'-t'') z'(t'')]`.
///
/// With `conjugated` the roles of ξ and ξ* are exchanged, which is the
/// standard orientation for the `+i sin` correlation convention.
pub fn phi_b<K: CorrelationKernel + ?Sized>(
    z: &PiecewiseTrajectory,
    z_prime: &PiecewiseTrajectory,
    kernel: &K,
    t: f64,
    conjugated: bool,
) -> Result<Complex64> {
    check_span(z, t, "first trajectory")?;
    check_span(z_prime, t, "second trajectory")?;
    phi_b_steps(&z.steps, &z_prime.steps, kernel, conjugated)
}

fn phi_b_steps<K: CorrelationKernel + ?Sized>(z: &Steps, zp: &Steps, kernel: &K, conjugated: bool) -> Result<Complex64> {
    let diff = z.combine(1.0, zp, -1.0);
    if diff.values.iter().all(|&v| v == 0.0) {
        return Ok(ZERO);
    }
    Ok(ordered_double_integral(&diff, z, kernel, conjugated)? - ordered_double_integral(&diff, zp, kernel, !conjugated)?)
}

/// Which terms of the influence phases use ξ* in place of the printed ξ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Conventions {
    /// Both bosonic phases (and the single one of the partial scheme).
    pub bosonic_conjugated: bool,
    /// `∫∫ (n₁-n₂)(t') ξ (n₃-n₄)(t'')`
    pub first_cross_conjugated: bool,
    /// `∫∫ (n₃-n₄)(t') ξ (n₁-n₂)(t'')`
    pub second_cross_conjugated: bool,
}

impl Conventions {
    /// Every ξ exactly as written.
    pub const AS_PRINTED: Conventions =
        Conventions { bosonic_conjugated: false, first_cross_conjugated: false, second_cross_conjugated: false };

    /// Reproduces the exact joint-space engine (see the calibration tests).
    pub const CALIBRATED: Conventions =
        Conventions { bosonic_conjugated: true, first_cross_conjugated: false, second_cross_conjugated: true };

    /// All eight assignments, [`Self::AS_PRINTED`] first.
    pub fn candidates() -> [Conventions; 8] {
        let mut out = [Self::AS_PRINTED; 8];
        for (k, c) in out.iter_mut().enumerate() {
            *c = Conventions {
                bosonic_conjugated: k & 4 != 0,
                first_cross_conjugated: k & 2 != 0,
                second_cross_conjugated: k & 1 != 0,
            };
        }
        out
    }
}

/// Four branch trajectories per site. For the full scheme every branch spans
/// [0, t]; for the partial scheme branches 1-3 span [0, t] and branch 4
/// spans [0, 3t].
#[derive(Clone, Debug, PartialEq)]
pub struct PathConfiguration {
    pub sites: Vec<[PiecewiseTrajectory; 4]>,
}

impl PathConfiguration {
    pub fn single(branches: [PiecewiseTrajectory; 4]) -> Self {
        Self { sites: vec![branches] }
    }

    /// Constant branches `values[i]` on one site.
    pub fn constant(scheme: Scheme, values: [f64; 4], t: f64) -> Result<Self> {
        let last = match scheme {
            Scheme::Pbte => 3.0 * t,
            _ => t,
        };
        Ok(Self::single([
            PiecewiseTrajectory::constant(values[0], t)?,
            PiecewiseTrajectory::constant(values[1], t)?,
            PiecewiseTrajectory::constant(values[2], t)?,
            PiecewiseTrajectory::constant(values[3], last)?,
        ]))
    }
}

/// Per-site full-backward phase without the λ² prefactor.
pub fn phi_fbte_site<K: CorrelationKernel + ?Sized>(
    branches: &[PiecewiseTrajectory; 4],
    kernel: &K,
    t: f64,
    conv: Conventions,
) -> Result<Complex64> {
    for (i, b) in branches.iter().enumerate() {
        check_span(b, t, &format!("branch {}", i + 1))?;
    }
    let [n1, n2, n3, n4] = branches.each_ref().map(|b| &b.steps);
    let d12 = n1.combine(1.0, n2, -1.0);
    let d34 = n3.combine(1.0, n4, -1.0);
    let mut phi = phi_b_steps(n1, n2, kernel, conv.bosonic_conjugated)? + phi_b_steps(n3, n4, kernel, conv.bosonic_conjugated)?;
    if d12.values.iter().any(|&v| v != 0.0) && d34.values.iter().any(|&v| v != 0.0) {
        phi += ordered_double_integral(&d12, &d34, kernel, conv.first_cross_conjugated)?;
        phi += ordered_double_integral(&d34, &d12, kernel, conv.second_cross_conjugated)?;
    }
    Ok(phi)
}

/// Per-site partial-backward phase without the λ² prefactor: the bosonic
/// phase on [0, 3t] between the concatenated forward branches and branch 4.
pub fn phi_pbte_site<K: CorrelationKernel + ?Sized>(
    branches: &[PiecewiseTrajectory; 4],
    kernel: &K,
    t: f64,
    conv: Conventions,
) -> Result<Complex64> {
    for (i, b) in branches[..3].iter().enumerate() {
        check_span(b, t, &format!("branch {}", i + 1))?;
    }
    check_span(&branches[3], 3.0 * t, "branch 4")?;
    let forward = PiecewiseTrajectory::concat(&[&branches[0], &branches[1], &branches[2]])?;
    phi_b_steps(&forward.steps, &branches[3].steps, kernel, conv.bosonic_conjugated)
}

/// Σ_k λ² Φ_k for the full backward scheme.
pub fn phi_fbte<K: CorrelationKernel + ?Sized>(cfg: &PathConfiguration, kernel: &K, coupling: f64, t: f64, conv: Conventions) -> Result<Complex64> {
    let mut acc = ZERO;
    for site in &cfg.sites {
        acc += phi_fbte_site(site, kernel, t, conv)?;
    }
    Ok(acc * (coupling * coupling))
}

/// Σ_k λ² Φ_k for the partial backward scheme.
pub fn phi_pbte<K: CorrelationKernel + ?Sized>(cfg: &PathConfiguration, kernel: &K, coupling: f64, t: f64, conv: Conventions) -> Result<Complex64> {
    let mut acc = ZERO;
    for site in &cfg.sites {
        acc += phi_pbte_site(site, kernel, t, conv)?;
    }
    Ok(acc * (coupling * coupling))
}

/// χ = -iλC ∫₀^T e^{iωt'} n_z(t') dt', summed segment by segment.
pub fn chi_t(traj: &PiecewiseTrajectory, mode: &BathMode, coupling: f64) -> Complex64 {
    let w = mode.omega;
    let mut acc = ZERO;
    for (a, b, v) in traj.segments() {
        if v != 0.0 {
            // ∫_a^b e^{iωt} dt = (e^{iωb} - e^{iωa}) / (iω)
            let seg = (Complex64::from_polar(1.0, w * b) - Complex64::from_polar(1.0, w * a)) / (I * w);
            acc += seg * v;
        }
    }
    -I * coupling * mode.coupling * acc
}

/// ∫J(ω) ∫₀^T dt' ∫₀^{t'} dt'' n_z(t') n_z(t'') sin(ω(t'-t'')) dω: the
/// imaginary part of the ordered double integral of the kernel.
pub fn xi_phase_t<K: CorrelationKernel + ?Sized>(traj: &PiecewiseTrajectory, kernel: &K) -> Result<f64> {
    Ok(ordered_double_integral(&traj.steps, &traj.steps, kernel, false)?.im)
}

/// Truncation tolerance of [`displacement_trace_oracle`].
pub const DISPLACEMENT_TOLERANCE: f64 = 1e-12;

/// Tr(… D†(χ₄) D(χ₃) D†(χ₂) D(χ₁) ρ_th) from truncated Fock matrices:
/// entries of `chis` alternate between D (even positions) and D† (odd),
/// applied right to left starting with `chis[0]`.
///
/// The cutoff is doubled from `mode.n_max()` until two successive values
/// agree to [`DISPLACEMENT_TOLERANCE`] (at most four doublings).
pub fn displacement_trace_oracle(chis: &[Complex64], mode: &FockSpace, beta: f64) -> Result<Complex64> {
    let mut n = mode.n_max();
    let mut prev = displacement_trace_at(chis, &mode.with_cutoff(n)?, beta)?;
    let mut deviation = f64::INFINITY;
    for _ in 0..4 {
        n *= 2;
        let next = displacement_trace_at(chis, &mode.with_cutoff(n)?, beta)?;
        deviation = (next - prev).norm();
        prev = next;
        if deviation < DISPLACEMENT_TOLERANCE {
            return Ok(prev);
        }
    }
    Err(Error::Truncation { deviation, n_max: n })
}

fn displacement_trace_at(chis: &[Complex64], mode: &FockSpace, beta: f64) -> Result<Complex64> {
    let a = mode.annihilation();
    let ad = mode.creation();
    let rho = crate::quantum::thermal_state(mode, beta)?;
    let mut acc = rho.into_operator();
    for (k, &chi) in chis.iter().enumerate() {
        // D(χ) = exp(χa† - χ*a) = exp(-i H) with H = i(χa† - χ*a)
        let gen = ad.matrix().map(|z| z * chi * I) - a.matrix().map(|z| z * chi.conj() * I);
        let h = Operator::single(gen)?;
        let mut d = matexp_unitary(&h, 1.0)?;
        if k % 2 == 1 {
            d = d.adjoint();
        }
        acc = d.compose(&acc)?;
    }
    Ok(acc.trace())
}

/// Environment factor of one site from the forced-oscillator algebra:
/// each constant-coupling evolution is `e^{-iH_E t} e^{iξ} D(χ)`, products of
/// displacements pick up BCH phases, and the thermal average of `D(α)` is
/// `exp(-|α|² coth(βω/2)/2)`. The result is `e^{-λ²Φ}` for that site.
///
/// Only discrete modes admit this route; it is independent of the segment
/// formulas used by [`phi_fbte`] and [`phi_pbte`].
pub fn forced_oscillator_factor(
    scheme: Scheme,
    branches: &[PiecewiseTrajectory; 4],
    kernel: &DiscreteKernel,
    coupling: f64,
) -> Result<Complex64> {
    let l2 = coupling * coupling;
    let mut total = Complex64::new(1.0, 0.0);
    for mode in kernel.modes() {
        let single = DiscreteKernel { modes: vec![*mode], beta: kernel.beta };
        let chi = |b: &PiecewiseTrajectory| chi_t(b, mode, coupling);
        let phase = |b: &PiecewiseTrajectory| -> Result<f64> { Ok(l2 * xi_phase_t(b, &single)?) };
        let width = coth(0.5 * kernel.beta * mode.omega);
        let (chis, phases, signs): (Vec<Complex64>, Vec<f64>, [f64; 4]) = match scheme {
            Scheme::Fbte => (
                branches.iter().map(chi).collect(),
                branches.iter().map(phase).collect::<Result<_>>()?,
                [1.0, -1.0, 1.0, -1.0],
            ),
            Scheme::Pbte => {
                let forward = PiecewiseTrajectory::concat(&[&branches[0], &branches[1], &branches[2]])?;
                (
                    vec![chi(&forward), chi(&branches[3])],
                    vec![phase(&forward)?, phase(&branches[3])?],
                    [1.0, -1.0, 0.0, 0.0],
                )
            }
            Scheme::Closed => return Err(Error::Capability("closed scheme has no environment".into())),
        };
        // D(±χ_k) factors, rightmost first: D(χ₁), D(-χ₂), D(χ₃), D(-χ₄)
        let mut alpha = ZERO;
        let mut bch = 0.0;
        let mut xi_sum = 0.0;
        for (k, (&c, &p)) in chis.iter().zip(&phases).enumerate() {
            let c = c * signs[k];
            // D(c) D(alpha) = e^{i Im(c alpha*)} D(c + alpha)
            bch += (c * alpha.conj()).im;
            alpha += c;
            xi_sum += signs[k] * p;
        }
        total *= Complex64::from_polar(1.0, xi_sum + bch) * (-0.5 * alpha.norm_sqr() * width).exp();
    }
    Ok(total)
}

/// Ranking of candidate conventions against reference values.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    /// `(conventions, max |F_candidate - F_reference|)`, best first; ties keep
    /// the candidate order.
    pub ranking: Vec<(Conventions, f64)>,
}

impl Calibration {
    pub fn best(&self) -> (Conventions, f64) {
        self.ranking[0]
    }
}

/// Scores every candidate by its worst deviation from `reference` values
/// `(t, F(t))` using `evaluate(conventions, t)`.
pub fn calibrate<F>(candidates: &[Conventions], reference: &[(f64, Complex64)], mut evaluate: F) -> Result<Calibration>
where
    F: FnMut(Conventions, f64) -> Result<Complex64>,
{
    if candidates.is_empty() || reference.is_empty() {
        return Err(Error::InvalidParameter("calibration needs candidates and reference points".into()));
    }
    let mut ranking = Vec::with_capacity(candidates.len());
    for &c in candidates {
        let mut worst = 0.0f64;
        for &(t, f) in reference {
            worst = worst.max((evaluate(c, t)? - f).norm());
        }
        ranking.push((c, worst));
    }
    ranking.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(Calibration { ranking })
}

/// Largest total dimension for which [`DephasingEngine`] enumerates all
/// basis labels (N ≤ 3).
pub const ENUMERATION_MAX_SITES: usize = 3;

/// Requires ‖[H_S, σ_z,k]‖ < 1e-12 for every site.
pub fn require_dephasing_chain(chain: &Operator) -> Result<()> {
    let n = chain.dims().len();
    if chain.dims().iter().any(|&d| d != 2) {
        return Err(Error::DimensionMismatch("chain operator must act on spin-1/2 sites".into()));
    }
    for k in 0..n {
        let z = crate::model::local_operator(n, &ObservableSpec::single(k, Axis::Z))?;
        let c = chain.commutator_norm(&z)?;
        if c >= 1e-12 {
            return Err(Error::Capability(format!(
                "chain Hamiltonian does not commute with sigma_z on site {k} (|[H, Z]| = {c:e}); the influence engine needs a dephasing chain"
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
struct PathTerm {
    labels: [usize; 4],
    amplitude: Complex64,
    energy: f64,
}

/// Path-sum OTOC for σ_z-diagonal chains: every basis label sequence
/// (s₁, s₂, s₃, s₄) contributes
/// `⟨s₄|W†|s₃⟩⟨s₃|V†|s₂⟩⟨s₂|W|s₁⟩⟨s₁|Vρ|s₄⟩ e^{-it(E₁-E₂+E₃-E₄)} e^{-Φ}`
/// with constant branches n_z = σ_z eigenvalue of each label.
pub struct DephasingEngine<'k, K: CorrelationKernel + ?Sized> {
    scheme: Scheme,
    sites: usize,
    terms: Vec<PathTerm>,
    kernel: &'k K,
    couplings: Vec<f64>,
    conventions: Conventions,
}

impl<'k, K: CorrelationKernel + ?Sized> DephasingEngine<'k, K> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        scheme: Scheme,
        chain: &Operator,
        w: &Operator,
        v: &Operator,
        rho: &State,
        kernel: &'k K,
        couplings: &[f64],
        conventions: Conventions,
    ) -> Result<Self> {
        if scheme == Scheme::Closed {
            return Err(Error::Capability("the influence engine evaluates open schemes only".into()));
        }
        let n = chain.dims().len();
        if n > ENUMERATION_MAX_SITES {
            return Err(Error::Capability(format!(
                "full path enumeration is limited to {ENUMERATION_MAX_SITES} sites, got {n}; use the product-observable engine"
            )));
        }
        require_dephasing_chain(chain)?;
        for (name, op) in [("W", w), ("V", v)] {
            if op.dims() != chain.dims() {
                return Err(Error::DimensionMismatch(format!("{name} does not act on the chain space")));
            }
        }
        if rho.dims() != chain.dims() {
            return Err(Error::DimensionMismatch("initial state does not act on the chain space".into()));
        }
        if couplings.len() != n {
            return Err(Error::InvalidParameter(format!("expected {n} site couplings, got {}", couplings.len())));
        }
        let d = chain.dim();
        let energies: Vec<f64> = (0..d).map(|i| chain.matrix()[(i, i)].re).collect();
        let (wm, vm) = (w.matrix(), v.matrix());
        let v_rho = crate::linalg::matmul(vm, rho.matrix());
        let mut terms = Vec::new();
        for s1 in 0..d {
            for s4 in 0..d {
                let a1 = v_rho[(s1, s4)];
                if a1 == ZERO {
                    continue;
                }
                for s2 in 0..d {
                    let a2 = wm[(s2, s1)];
                    if a2 == ZERO {
                        continue;
                    }
                    for s3 in 0..d {
                        // ⟨s₃|V†|s₂⟩ = conj V[s₂,s₃], ⟨s₄|W†|s₃⟩ = conj W[s₃,s₄]
                        let a3 = vm[(s2, s3)].conj();
                        let a4 = wm[(s3, s4)].conj();
                        if a3 == ZERO || a4 == ZERO {
                            continue;
                        }
                        terms.push(PathTerm {
                            labels: [s1, s2, s3, s4],
                            amplitude: a1 * a2 * a3 * a4,
                            energy: energies[s1] - energies[s2] + energies[s3] - energies[s4],
                        });
                    }
                }
            }
        }
        Ok(Self { scheme, sites: n, terms, kernel, couplings: couplings.to_vec(), conventions })
    }

    /// Number of non-vanishing label sequences.
    pub fn path_count(&self) -> usize {
        self.terms.len()
    }

    pub fn evaluate(&self, t: f64) -> Result<Complex64> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
        }
        let table = constant_branch_table(self.scheme, self.kernel, t, self.conventions)?;
        let mut acc = ZERO;
        for term in &self.terms {
            let mut phi = ZERO;
            for k in 0..self.sites {
                let idx = branch_index(term.labels.map(|s| site_spin(s, k, self.sites)));
                phi += table[idx] * (self.couplings[k] * self.couplings[k]);
            }
            acc += term.amplitude * Complex64::from_polar(1.0, -t * term.energy) * (-phi).exp();
        }
        Ok(acc)
    }
}

/// Index of a ±1 branch tuple in a 16-entry table (bit i set for -1).
fn branch_index(n: [f64; 4]) -> usize {
    n.iter().enumerate().fold(0, |acc, (i, &v)| acc | (usize::from(v < 0.0) << i))
}

/// Per-site Φ (no λ²) for all 16 constant ±1 branch tuples.
pub fn constant_branch_table<K: CorrelationKernel + ?Sized>(
    scheme: Scheme,
    kernel: &K,
    t: f64,
    conv: Conventions,
) -> Result<[Complex64; 16]> {
    let mut table = [ZERO; 16];
    if t == 0.0 {
        return Ok(table);
    }
    let cached = CachedKernel::new(kernel);
    for (idx, slot) in table.iter_mut().enumerate() {
        let n = core::array::from_fn(|i| if idx >> i & 1 == 1 { -1.0 } else { 1.0 });
        let cfg = PathConfiguration::constant(scheme, n, t)?;
        *slot = match scheme {
            Scheme::Fbte => phi_fbte_site(&cfg.sites[0], &cached, t, conv)?,
            Scheme::Pbte => phi_pbte_site(&cfg.sites[0], &cached, t, conv)?,
            Scheme::Closed => ZERO,
        };
    }
    Ok(table)
}

/// One-shot [`DephasingEngine`] evaluation with the calibrated conventions.
#[allow(clippy::too_many_arguments)]
pub fn dephasing_otoc<K: CorrelationKernel + ?Sized>(
    scheme: Scheme,
    chain: &Operator,
    w: &Operator,
    v: &Operator,
    rho: &State,
    kernel: &K,
    coupling: f64,
    t: f64,
) -> Result<Complex64> {
    let couplings = vec![coupling; chain.dims().len()];
    DephasingEngine::new(scheme, chain, w, v, rho, kernel, &couplings, Conventions::CALIBRATED)?.evaluate(t)
}

/// Per-site Pauli action: the image of basis bit `b` and its amplitude.
fn pauli_on_bit(axis: Option<Axis>, b: usize) -> (usize, Complex64) {
    match axis {
        None => (b, Complex64::new(1.0, 0.0)),
        Some(Axis::X) => (b ^ 1, Complex64::new(1.0, 0.0)),
        Some(Axis::Y) => (b ^ 1, if b == 0 { I } else { -I }),
        Some(Axis::Z) => (b, Complex64::new(if b == 0 { 1.0 } else { -1.0 }, 0.0)),
    }
}

/// Path sum for nearest-neighbour Ising chains of any length with Pauli-string
/// W and V and a product initial state. Pauli strings fix s₂, s₃ and s₄ given
/// s₁ site by site, so the sum over s₁ is a product of 2×2 transfer matrices.
#[allow(clippy::too_many_arguments)]
pub fn dephasing_otoc_product<K: CorrelationKernel + ?Sized>(
    scheme: Scheme,
    chain: &SpinChainSpec,
    w: &ObservableSpec,
    v: &ObservableSpec,
    site_states: &[State],
    kernel: &K,
    couplings: &[f64],
    t: f64,
    conv: Conventions,
) -> Result<Complex64> {
    chain.validate()?;
    let n = chain.sites;
    let (bonds, fields) = match &chain.family {
        ChainFamily::IsingZz { couplings, fields } => (couplings.as_slice(), fields.as_slice()),
        other => {
            return Err(Error::Capability(format!(
                "the product path sum needs an ising_zz chain, got {}",
                other.name()
            )))
        }
    };
    w.validate(n)?;
    v.validate(n)?;
    if site_states.len() != n || site_states.iter().any(|s| s.dims() != [2]) {
        return Err(Error::InvalidParameter(format!("need {n} single-site states")));
    }
    if couplings.len() != n {
        return Err(Error::InvalidParameter(format!("expected {n} site couplings, got {}", couplings.len())));
    }
    if scheme == Scheme::Closed {
        return Err(Error::Capability("the influence engine evaluates open schemes only".into()));
    }
    let table = constant_branch_table(scheme, kernel, t, conv)?;
    let spin = |b: usize| if b == 0 { 1.0 } else { -1.0 };

    // labels[k][s1] = (s1, s2, s3, s4) bits and weight for site k
    let mut labels = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for k in 0..n {
        let (wa, va) = (w.axis_at(k), v.axis_at(k));
        let rho = site_states[k].matrix();
        let mut lab = [[0usize; 4]; 2];
        let mut wt = [ZERO; 2];
        for s1 in 0..2 {
            // Paulis are Hermitian involutions: ⟨s₃|V†|s₂⟩ = ⟨s₃|V|s₂⟩
            let (s2, aw) = pauli_on_bit(wa, s1);
            let (s3, av) = pauli_on_bit(va, s2);
            let (s4, aw2) = pauli_on_bit(wa, s3);
            // ⟨s₁|Vρ|s₄⟩ = ⟨s₁|V|m⟩ ρ[m,s₄] with ⟨s₁|V|m⟩ = conj ⟨m|V|s₁⟩
            let (m, vm) = pauli_on_bit(va, s1);
            let amp = aw * av * aw2 * vm.conj() * rho[(m, s4)];
            let n4 = [s1, s2, s3, s4].map(spin);
            let phi = table[branch_index(n4)] * (couplings[k] * couplings[k]);
            let field = fields[k] * (n4[0] - n4[1] + n4[2] - n4[3]);
            lab[s1] = [s1, s2, s3, s4];
            wt[s1] = amp * Complex64::from_polar(1.0, -t * field) * (-phi).exp();
        }
        labels.push(lab);
        weights.push(wt);
    }
    let mut vec = weights[0];
    for k in 1..n {
        let mut next = [ZERO; 2];
        for (b, slot) in next.iter_mut().enumerate() {
            for a in 0..2 {
                let (x, y) = (labels[k - 1][a].map(spin), labels[k][b].map(spin));
                let e = bonds[k - 1] * (x[0] * y[0] - x[1] * y[1] + x[2] * y[2] - x[3] * y[3]);
                *slot += vec[a] * Complex64::from_polar(1.0, -t * e);
            }
            *slot *= weights[k][b];
        }
        vec = next;
    }
    Ok(vec[0] + vec[1])
}
