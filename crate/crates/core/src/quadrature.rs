//! Adaptive Gauss–Kronrod (10/21 point) quadrature and Gauss–Legendre rules.
//!
//! The adaptive driver follows the classic global-subdivision scheme: keep a
//! list of panels, always bisect the panel with the largest error estimate,
//! and stop once the summed estimate meets `max(abs, rel * |I|)`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;

use crate::{Error, Result};

/// Values that can be integrated: real scalars, complex scalars and pairs.
pub trait QuadValue: Copy {
    fn zero() -> Self;
    fn add(self, other: Self) -> Self;
    fn scale(self, k: f64) -> Self;
    fn magnitude(self) -> f64;

    fn sub(self, other: Self) -> Self {
        self.add(other.scale(-1.0))
    }
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

impl QuadValue for [f64; 2] {
    fn zero() -> Self {
        [0.0, 0.0]
    }
    fn add(self, other: Self) -> Self {
        [self[0] + other[0], self[1] + other[1]]
    }
    fn scale(self, k: f64) -> Self {
        [self[0] * k, self[1] * k]
    }
    fn magnitude(self) -> f64 {
        self[0].hypot(self[1])
    }
}

/// Requested accuracy: the result is accepted when the error estimate is
/// below `max(abs, rel * |I|)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn absolute(abs: f64) -> Self {
        Self { abs, rel: 0.0 }
    }

    pub fn halved(self) -> Self {
        Self { abs: self.abs * 0.5, rel: self.rel * 0.5 }
    }

    fn target(self, value_magnitude: f64) -> f64 {
        self.abs.max(self.rel * value_magnitude)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
}

/// Panel budget of the adaptive driver.
pub const MAX_PANELS: usize = 4000;

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208034139900,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[derive(Clone, Copy)]
struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

/// One 21-point Kronrod panel with the QUADPACK error rescaling.
fn kronrod21<T, F>(f: &mut F, a: f64, b: f64) -> Result<Panel<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> Result<T>,
{
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre)?;
    let mut fv1 = [T::zero(); 10];
    let mut fv2 = [T::zero(); 10];
    let mut res_g = T::zero();
    let mut res_k = fc.scale(WGK[10]);
    let mut res_abs = WGK[10] * fc.magnitude();
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx)?;
        let f2 = f(centre + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        let pair = f1.add(f2);
        if j % 2 == 1 {
            res_g = res_g.add(pair.scale(WG[j / 2]));
        }
        res_k = res_k.add(pair.scale(WGK[j]));
        res_abs += WGK[j] * (f1.magnitude() + f2.magnitude());
    }
    let mean = res_k.scale(0.5);
    let mut res_asc = WGK[10] * fc.sub(mean).magnitude();
    for j in 0..10 {
        res_asc += WGK[j] * (fv1[j].sub(mean).magnitude() + fv2[j].sub(mean).magnitude());
    }
    let scale = half.abs();
    res_abs *= scale;
    res_asc *= scale;
    let mut error = res_k.sub(res_g).scale(half).magnitude();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Panel { a, b, value: res_k.scale(half), error })
}

/// Adaptive integral of a fallible integrand over the panels delimited by
/// `points` (ascending, at least two entries).
pub fn try_integrate_with_points<T, F>(mut f: F, points: &[f64], tol: Tolerance) -> Result<Integral<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> Result<T>,
{
    assert!(points.len() >= 2, "need at least one interval");
    let mut panels: Vec<Panel<T>> = Vec::with_capacity(64);
    for w in points.windows(2) {
        if w[1] > w[0] {
            panels.push(kronrod21(&mut f, w[0], w[1])?);
        }
    }
    let mut evaluations = 21 * panels.len();
    if panels.is_empty() {
        return Ok(Integral { value: T::zero(), error: 0.0, evaluations });
    }
    loop {
        let total = panels.iter().fold(T::zero(), |acc, p| acc.add(p.value));
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if error <= tol.target(total.magnitude()) {
            return Ok(Integral { value: total, error, evaluations });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bi, be), (i, p)| if p.error > be { (i, p.error) } else { (bi, be) });
        let p = panels[worst];
        let mid = 0.5 * (p.a + p.b);
        if panels.len() >= MAX_PANELS || !(mid > p.a && mid < p.b) {
            return Err(Error::Quadrature { estimate: error, tolerance: tol.target(total.magnitude()) });
        }
        let left = kronrod21(&mut f, p.a, mid)?;
        let right = kronrod21(&mut f, mid, p.b)?;
        evaluations += 42;
        panels[worst] = left;
        panels.push(right);
    }
}

pub fn try_integrate<T, F>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Integral<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> Result<T>,
{
    try_integrate_with_points(f, &[a, b], tol)
}

pub fn integrate<T, F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Integral<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    try_integrate_with_points(|x| Ok(f(x)), &[a, b], tol)
}

pub fn integrate_with_points<T, F>(mut f: F, points: &[f64], tol: Tolerance) -> Result<Integral<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    try_integrate_with_points(|x| Ok(f(x)), points, tol)
}

/// For an ascending grid starting at `grid[0]`, returns
/// `(∫ f, ∫ τ f)` over `[grid[0], grid[i]]` for every `i`, integrating each
/// grid interval once. `∫₀^t (t-τ) f(τ) dτ` is then `t·A - B`.
pub fn cumulative_moments<F>(mut f: F, grid: &[f64], tol: Tolerance) -> Result<Vec<[f64; 2]>>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = [0.0, 0.0];
    if let Some(&first) = grid.first() {
        out.push(acc);
        let mut prev = first;
        for &t in &grid[1..] {
            if t < prev {
                return Err(Error::InvalidParameter("grid must be ascending".into()));
            }
            let piece = try_integrate(
                |tau| {
                    let v = f(tau)?;
                    Ok([v, tau * v])
                },
                prev,
                t,
                tol,
            )?;
            acc = acc.add(piece.value);
            out.push(acc);
            prev = t;
        }
    }
    Ok(out)
}

/// Gauss–Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
