//! Independent numerical oracles: composite Simpson integration on closed-form
//! spectra and a plain golden-section search. Nothing here touches the
//! library's quadrature grid or maximizer.
#![allow(dead_code)]

use std::f64::consts::PI;

/// `(1/π)∫₀^π g(ω) dω` by composite Simpson with `panels` (even) panels.
pub fn simpson_mean(g: impl Fn(f64) -> f64, panels: usize) -> f64 {
    let h = PI / panels as f64;
    let mut acc = g(0.0) + g(PI);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * g(k as f64 * h);
    }
    acc * h / 3.0 / PI
}

pub fn poisson(a: f64, w: f64) -> f64 {
    (1.0 - a * a) / (1.0 - 2.0 * a * w.cos() + a * a)
}

pub fn fejer(m: u32, w: f64) -> f64 {
    // Direct cosine series avoids the 0/0 at ω = 0.
    let mut acc = 1.0;
    for k in 1..m {
        acc += 2.0 * (1.0 - k as f64 / m as f64) * (k as f64 * w).cos();
    }
    acc
}

/// Maximizer and maximum of a unimodal `f` on `[lo, hi]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..300 {
        let c = hi - g * (hi - lo);
        let d = lo + g * (hi - lo);
        if f(c) >= f(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    let t = 0.5 * (lo + hi);
    (t, f(t))
}

/// Chernoff information between the two hypotheses for a spectrum `f`:
/// `max_{s∈[0,1]} ½·mean[log(1 + sρf) − s·log(1 + ρf)]`, `ρ = θ²/σ²`.
pub fn chernoff_information(f: impl Fn(f64) -> f64 + Copy, rho: f64) -> f64 {
    golden_max(
        |s| {
            0.5 * simpson_mean(
                |w| (1.0 + s * rho * f(w)).ln() - s * (1.0 + rho * f(w)).ln(),
                1 << 14,
            )
        },
        0.0,
        1.0,
    )
    .1
}

/// `sup_{t ≤ 0} −Λ₁(t)` for the simple quadratic detector by Simpson
/// integration; `σ² = 1`.
pub fn simple_quadratic_e1(f: impl Fn(f64) -> f64 + Copy, theta2: f64) -> f64 {
    let c = 0.5 * (1.0 / (1.0 + theta2)).ln();
    let lambda1 = |t: f64| {
        c * t
            - 0.5
                * simpson_mean(
                    |w| (1.0 - t * theta2 * (1.0 + theta2 * f(w)) / (1.0 + theta2)).ln(),
                    1 << 14,
                )
    };
    golden_max(|t| -lambda1(t), -50.0, 0.0).1
}

/// Closed-form simple-quadratic false-alarm exponent with its maximizer:
/// `t* = (1 + r/log(1 − r))/r`, `E₀ = −(t*/2)·log(1 − r) + ½·log(1 − t*r)`.
pub fn simple_quadratic_e0(sigma2: f64, theta2: f64) -> (f64, f64) {
    let r = theta2 / (sigma2 + theta2);
    let t = (1.0 + r / (1.0 - r).ln()) / r;
    (t, -(0.5 * t * (1.0 - r).ln() - 0.5 * (1.0 - t * r).ln()))
}
