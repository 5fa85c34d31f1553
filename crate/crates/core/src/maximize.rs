//! One-dimensional maximization of concave functions that may be `−∞`
//! outside their domain.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;
/// Golden-section phase stops at this relative bracket width.
const GOLDEN_REL_WIDTH: f64 = 1e-3;
/// Newton phase stops when a step falls below this relative size.
const STEP_TOL: f64 = 1e-12;
/// Finite-difference derivatives below this, or below their rounding noise,
/// count as zero.
const DERIVATIVE_FLOOR: f64 = 1e-11;
const MAX_GOLDEN: usize = 200;
const MAX_NEWTON: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Maximum {
    pub t: f64,
    pub value: f64,
}

/// Central-difference step `1e−6·(1 + |t|)`.
pub(crate) fn fd_step(t: f64) -> f64 {
    1e-6 * (1.0 + t.abs())
}

/// Central-difference derivative of `f` at `t`.
pub(crate) fn central_difference(f: impl Fn(f64) -> f64, t: f64) -> f64 {
    let h = fd_step(t);
    (f(t + h) - f(t - h)) / (2.0 * h)
}

fn scale(t: f64) -> f64 {
    t.abs().max(1.0)
}

/// Maximizes a concave `f` over `[lo, hi]`: golden section down to a
/// relative width of `1e−3`, then safeguarded Newton on finite-difference
/// derivatives, keeping the bracket around the maximizer.
pub(crate) fn maximize_concave(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<Maximum> {
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::numerical(
            format!("invalid bracket [{lo}, {hi}]"),
            f64::NAN,
        ));
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iterations = 0;
    while b - a > GOLDEN_REL_WIDTH * scale(a).max(scale(b)) && iterations < MAX_GOLDEN {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iterations += 1;
    }
    let (mut t, mut ft) = if fc >= fd { (c, fc) } else { (d, fd) };
    if b == a {
        return finish(&f, t, lo, hi);
    }

    let mut last_d1 = f64::NAN;
    for _ in 0..MAX_NEWTON {
        let mut h = fd_step(t);
        // Keep both stencil points inside the bracket.
        h = h.min(0.5 * (t - a).max(0.0)).min(0.5 * (b - t).max(0.0));
        if h <= 0.0 || b - a <= STEP_TOL * scale(t) {
            return finish(&f, t, lo, hi);
        }
        let (fp, fm) = (f(t + h), f(t - h));
        if !(fp.is_finite() && fm.is_finite() && ft.is_finite()) {
            // Bisect toward the finite side.
            if !fp.is_finite() || !ft.is_finite() {
                b = t;
            } else {
                a = t;
            }
            t = 0.5 * (a + b);
            ft = f(t);
            continue;
        }
        let d1 = (fp - fm) / (2.0 * h);
        let d2 = (fp - 2.0 * ft + fm) / (h * h);
        last_d1 = d1;
        // Rounding noise of the central difference.
        let noise = 8.0 * f64::EPSILON * ft.abs().max(fp.abs()).max(fm.abs()) / h;
        if d1.abs() <= DERIVATIVE_FLOOR.max(noise) {
            return finish(&f, t, lo, hi);
        }
        if d1 > 0.0 {
            a = t;
        } else {
            b = t;
        }
        let newton = if d2 < 0.0 { t - d1 / d2 } else { f64::NAN };
        let next = if newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - t).abs() < STEP_TOL * scale(t) {
            return finish(&f, next, lo, hi);
        }
        t = next;
        ft = f(t);
    }
    Err(Error::numerical(
        format!("maximizer did not converge: bracket [{a:e}, {b:e}], t = {t:e}"),
        last_d1,
    ))
}

/// Returns the best of `t` and the original endpoints; the endpoints cover
/// maxima sitting on the bracket edge.
fn finish(f: &impl Fn(f64) -> f64, t: f64, lo: f64, hi: f64) -> Result<Maximum> {
    let mut best = Maximum { t, value: f(t) };
    for e in [lo, hi] {
        let v = f(e);
        if v > best.value {
            best = Maximum { t: e, value: v };
        }
    }
    if best.value.is_nan() {
        return Err(Error::numerical(
            format!("objective is NaN at t = {}", best.t),
            f64::NAN,
        ));
    }
    Ok(best)
}
