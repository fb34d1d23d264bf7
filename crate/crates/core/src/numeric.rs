//! Root finding, quadrature and normal quantiles.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Relative tolerance used by every root solve in the crate.
pub const ROOT_REL_TOL: f64 = 1e-9;
const MAX_ITER: usize = 200;

/// Root of a monotone function on a bracket `[lo, hi]`.
///
/// `f(lo)` and `f(hi)` must have opposite signs (a zero at either end is
/// returned as is); anything else means the function is not monotone across
/// the bracket or the bracket is wrong, and is reported rather than
/// guessed at. Uses regula falsi with the Illinois modification, falling
/// back to bisection whenever an interpolation step fails to shrink the
/// bracket enough.
pub fn find_root<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa.is_nan() || fb.is_nan() {
        return Err(Error::numerical(format!("function is NaN at bracket [{lo}, {hi}]")));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::numerical(format!(
            "bracket [{lo}, {hi}] does not straddle a root (f = {fa}, {fb})"
        )));
    }
    let mut side = 0i8;
    for _ in 0..MAX_ITER {
        let width = b - a;
        if width.abs() <= ROOT_REL_TOL * a.abs().max(b.abs()) || width.abs() < f64::MIN_POSITIVE {
            break;
        }
        let mut c = if fa.is_finite() && fb.is_finite() {
            b - fb * (b - a) / (fb - fa)
        } else {
            f64::NAN
        };
        // keep interpolation well inside the bracket
        let margin = 0.01 * width.abs();
        if !(c.is_finite() && c > a.min(b) + margin && c < a.max(b) - margin) {
            c = 0.5 * (a + b);
            side = 0;
        }
        let fc = f(c);
        if fc.is_nan() {
            return Err(Error::numerical(format!("function is NaN at {c}")));
        }
        if fc == 0.0 {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (a + b))
}

/// Smallest `hi = start * 2^j` (j ≥ 0) where `f(hi)` has the sign of `target`
/// opposite to `f(lo)`; used to open a bracket to the right.
pub fn expand_right<F: FnMut(f64) -> f64>(mut f: F, lo: f64, start: f64) -> Result<f64> {
    let s0 = f(lo).signum();
    let mut hi = start;
    for _ in 0..1100 {
        let v = f(hi);
        if v == 0.0 || v.signum() != s0 {
            return Ok(hi);
        }
        let step = (hi - lo).max(f64::MIN_POSITIVE);
        hi = lo + 2.0 * step;
        if !hi.is_finite() {
            break;
        }
    }
    Err(Error::numerical(format!("no sign change to the right of {lo}")))
}

/// Maximizer of a unimodal function on `[a, b]` by golden-section search.
pub fn maximize_unimodal<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..300 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss–Kronrod integral of `f` over `[a, b]`.
///
/// Subdivides the interval with the largest error estimate until the total
/// error estimate is below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut parts = vec![{
        let (v, e) = gk15(&mut f, a, b);
        (a, b, v, e)
    }];
    for _ in 0..2000 {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::numerical("integrand is not finite"));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(total);
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    Err(Error::numerical("quadrature did not converge"))
}

/// `ln ∫_a^b exp(log_h(x)) dx` for a concave `log_h`.
///
/// The maximizer must lie in `[a, peak_hi]` (`peak_hi` finite, `b` may be
/// infinite). The integrand is shifted by its peak value before
/// integrating, so results far below `f64::MIN_POSITIVE` are fine; the
/// region where `log_h` is more than 50 below its peak is dropped.
pub fn ln_integral_log_concave<F: Fn(f64) -> f64>(log_h: F, a: f64, b: f64, peak_hi: f64) -> Result<f64> {
    const DROP: f64 = 50.0;
    let search_hi = peak_hi.min(b).max(a);
    let (peak, top) = if search_hi > a {
        maximize_unimodal(&log_h, a, search_hi, 1e-10 * (search_hi - a))
    } else {
        (a, log_h(a))
    };
    if !top.is_finite() {
        return Err(Error::numerical(format!("log-integrand peak is not finite ({top})")));
    }
    let below = |x: f64| log_h(x) - top + DROP;
    let left = if below(a) >= 0.0 { a } else { find_root(below, a, peak)? };
    let right = if b.is_finite() && below(b) >= 0.0 {
        b
    } else {
        let start = if peak > 0.0 { peak * 2.0 } else { 1.0 };
        let hi = expand_right(below, peak, start.min(b))?;
        find_root(below, peak, hi.min(b))?
    };
    let body = |x: f64| (log_h(x) - top).exp();
    // A single panel over a long tail can step over a sharp feature next to
    // the peak without noticing; cut each side geometrically outwards from
    // the peak, starting well inside the distance where log_h drops by 1.
    let mut area = 0.0;
    for end in [left, right] {
        if end == peak {
            continue;
        }
        let dir = (end - peak).signum();
        let unit = |x: f64| log_h(x) - top + 1.0;
        let reach = if unit(end) >= 0.0 {
            (end - peak).abs()
        } else {
            let lo = peak.min(end);
            let hi = peak.max(end);
            (find_root(unit, lo, hi)? - peak).abs()
        };
        let mut from = peak;
        let mut step = reach * 2f64.powi(-20);
        loop {
            let to = peak + dir * step;
            if (to - end) * dir >= 0.0 || to == from {
                area += integrate(body, from.min(end), from.max(end), 0.0, 1e-12)?;
                break;
            }
            area += integrate(body, from.min(to), from.max(to), 0.0, 1e-12)?;
            from = to;
            step *= 2.0;
        }
    }
    Ok(top + area.ln())
}

/// Standard normal quantile `Φ^{-1}(p)`.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// `α` such that `P(Z > α) = δ`.
pub fn z_value(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(normal_quantile(1.0 - delta))
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 0.5 {
        Ok(())
    } else {
        Err(Error::domain(format!("delta must lie in (0, 0.5], got {delta}")))
    }
}

/// Ascending order statistic at 1-based index `ceil(q * m)` (clamped to `1..=m`).
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    let idx = ((q * m as f64).ceil() as usize).clamp(1, m);
    sorted[idx - 1]
}
