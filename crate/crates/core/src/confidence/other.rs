use super::ConfidenceInterval;
use crate::error::{Error, Result};
use crate::estimators::match_mask;
use crate::numeric::{check_delta, find_root, z_value};
use crate::predicate::Predicate;
use crate::rank::RankFamily;
use crate::sketch::{BottomKSketch, KMinsSketch};

/// Chernoff bounds on `w(J)` from a PRI sketch.
///
/// Matched items with `w·τ ≥ 1` (τ = `r_{k+1}`) were certain to be sampled
/// and count exactly. The number `n'` of the others is Poisson-like with
/// mean `τ · w(light part)`; the mean is bounded by the two roots of
/// `e^{n'-x} (x/n')^{n'} = δ`, and `n' = 0` gives the upper root `-ln δ`.
pub fn pri_bounds_subpop(sketch: &BottomKSketch, predicate: &Predicate, delta: f64) -> Result<ConfidenceInterval> {
    if sketch.family() != RankFamily::Pri {
        return Err(Error::capability(format!(
            "Chernoff bounds are defined for pri sketches, not {}",
            sketch.family()
        )));
    }
    check_delta(delta)?;
    let mask = match_mask(sketch.entries(), predicate)?;
    let matched = sketch.entries().iter().zip(&mask).filter(|(_, &m)| m).map(|(e, _)| e.weight);
    let Some(tau) = sketch.r_k_plus_1().filter(|r| r.is_finite()) else {
        return Ok(ConfidenceInterval::exact(matched.sum(), delta));
    };
    let (mut heavy, mut light) = (0.0, 0usize);
    for w in matched {
        if w * tau >= 1.0 {
            heavy += w;
        } else {
            light += 1;
        }
    }
    let (lo, hi) = chernoff_counts(light, delta)?;
    Ok(ConfidenceInterval::new(heavy + lo / tau, heavy + hi / tau, delta, "pri-chernoff"))
}

// (n_low, n̄) for an observed count n'
fn chernoff_counts(observed: usize, delta: f64) -> Result<(f64, f64)> {
    if observed == 0 {
        return Ok((0.0, -delta.ln()));
    }
    let n = observed as f64;
    // log of e^{n-x}(x/n)^n / δ; positive at x = n, falling away on both sides
    let phi = |x: f64| n - x + n * (x / n).ln() - delta.ln();
    let upper = find_root(phi, n, 64.0 * n)?;
    let lower = if phi(1e-12) < 0.0 { find_root(phi, 1e-12, n)? } else { 0.0 };
    Ok((lower, upper))
}

/// Normal-approximation bounds `(1 ∓ α/√k) / r̄` on `w(I)` from a k-mins sketch.
pub fn wsr_bounds_total(sketch: &KMinsSketch, delta: f64) -> Result<ConfidenceInterval> {
    let alpha = z_value(delta)?;
    let k = sketch.k() as f64;
    let mean = sketch.mean_rank();
    let spread = alpha / k.sqrt();
    Ok(ConfidenceInterval::new(
        (1.0 - spread) / mean,
        (1.0 + spread) / mean,
        delta,
        "wsr-normal",
    ))
}
