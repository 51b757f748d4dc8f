//! Hurwitz zeta and digamma for complex arguments.

use alloc::format;

use num_complex::Complex64;
use num_traits::Float;

use crate::{Error, Result};

/// B_2, B_4, …, B_24.
const BERNOULLI_EVEN: [f64; 12] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
];

/// Shift applied before the asymptotic tails take over.
const ZETA_SHIFT: f64 = 25.0;
const DIGAMMA_SHIFT: f64 = 15.0;

/// ζ(p, q) = Σ_{n≥0} (q + n)^{-p} for p > 1 and Re q > 0.
///
/// Sums the first terms directly until Re(q) + N reaches 25, then closes
/// with the Euler–Maclaurin tail. p ≤ 1 is rejected rather than continued.
pub fn hurwitz_zeta(p: f64, q: Complex64) -> Result<Complex64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("hurwitz_zeta needs p > 1, got {p}")));
    }
    if !(q.re > 0.0 && q.re.is_finite() && q.im.is_finite()) {
        return Err(Error::Domain(format!("hurwitz_zeta needs Re q > 0, got {q}")));
    }
    let shift = (ZETA_SHIFT - q.re).max(0.0).ceil() as usize;
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 0..shift {
        sum += (q + n as f64).powf(-p);
    }
    let a = q + shift as f64;
    let a_inv = a.inv();
    let a_pow = a.powf(-p);
    sum += a_pow * a / (p - 1.0) + a_pow * 0.5;
    // k-th term: B_2k/(2k)! · p(p+1)…(p+2k-2) · a^{-p-2k+1}
    let a_inv2 = a_inv * a_inv;
    let mut rising = p;
    let mut factorial = 2.0;
    let mut power = a_pow * a_inv;
    for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = power * (b * rising / factorial);
        sum += term;
        if term.norm() < 1e-17 * sum.norm() {
            break;
        }
        let m = 2.0 * (k as f64 + 1.0);
        rising *= (p + m - 1.0) * (p + m);
        factorial *= (m + 1.0) * (m + 2.0);
        power *= a_inv2;
    }
    Ok(sum)
}

/// ψ(q) = d/dq ln Γ(q) for Re q > 0.
pub fn digamma(q: Complex64) -> Result<Complex64> {
    if !(q.re > 0.0 && q.re.is_finite() && q.im.is_finite()) {
        return Err(Error::Domain(format!("digamma needs Re q > 0, got {q}")));
    }
    let mut z = q;
    let mut acc = Complex64::new(0.0, 0.0);
    while z.re < DIGAMMA_SHIFT {
        acc -= z.inv();
        z += 1.0;
    }
    // ψ(z) ~ ln z - 1/(2z) - Σ B_2k / (2k z^{2k})
    let z_inv2 = (z * z).inv();
    let mut power = z_inv2;
    let mut tail = Complex64::new(0.0, 0.0);
    for (k, b) in BERNOULLI_EVEN.iter().take(8).enumerate() {
        tail += power * (b / (2.0 * (k as f64 + 1.0)));
        power *= z_inv2;
    }
    Ok(acc + z.ln() - z.inv() * 0.5 - tail)
}
