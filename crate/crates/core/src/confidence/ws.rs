use rand::Rng;

use super::sum_exp::{solve_normal_approx, sum_exp_roots, two_sided, Side};
use super::{BoundMethod, ConfidenceInterval};
use crate::error::{Error, Result};
use crate::estimators::{ln_prod_inclusion, masked_prefix, match_mask, require_ws};
use crate::numeric::{check_delta, empirical_quantile, expand_right, find_root, ln_integral_log_concave};
use crate::predicate::Predicate;
use crate::sketch::BottomKSketch;

fn threshold(sketch: &BottomKSketch) -> Option<f64> {
    sketch.r_k_plus_1().filter(|r| r.is_finite())
}

/// Bounds on `w(I)` from a WS sketch.
///
/// With prefix sums `s_0..s_k` and `τ = r_{k+1}`, the lower bound solves
/// `Pr{v(x, s_0..s_k) ≤ τ} = δ` and the upper bound the same equation at
/// `1 - δ`; neither goes below `w(s)`. The density method instead fixes the
/// unordered sketch and solves for the unseen weight `ℓ` directly.
pub fn ws_bounds_total<R: Rng + ?Sized>(
    sketch: &BottomKSketch,
    delta: f64,
    method: BoundMethod,
    rng: &mut R,
) -> Result<ConfidenceInterval> {
    require_ws(sketch, "WS confidence bounds")?;
    check_delta(delta)?;
    let ws = sketch.sketch_weight();
    let Some(tau) = threshold(sketch) else {
        return Ok(ConfidenceInterval::exact(ws, delta));
    };
    let prefix = sketch.prefix_sums();
    let (lower, upper) = match method {
        BoundMethod::Normal => (
            solve_normal_approx(&prefix, tau, delta, Side::Lower)?.unwrap_or(ws),
            solve_normal_approx(&prefix, tau, delta, Side::Upper)?.unwrap_or(ws),
        ),
        BoundMethod::Quantile { draws } => two_sided(&sum_exp_roots(&prefix, tau, draws, rng)?, delta)?,
        BoundMethod::Density => {
            let weights: Vec<f64> = sketch.entries().iter().map(|e| e.weight).collect();
            (
                ws + solve_density(&weights, tau, delta)?,
                ws + solve_density(&weights, tau, 1.0 - delta)?,
            )
        }
    };
    Ok(ConfidenceInterval::new(lower.max(ws), upper.max(ws), delta, format!("ws-{}", method.name())))
}

/// `Pr{r_{k+1} ≤ r}` given that the `k` smallest ranks over the sketched
/// weights plus unseen weight `ell` are exactly the sketched items.
pub fn ws_density_cdf(weights: &[f64], ell: f64, r: f64) -> Result<f64> {
    if ell <= 0.0 {
        // the density escapes to infinity as ℓ → 0
        return Ok(0.0);
    }
    let k = weights.len() as f64;
    let log_h = |y: f64| -ell * y + ln_prod_inclusion(weights, y);
    let head = ln_integral_log_concave(log_h, 0.0, r, (k / ell).min(r))?;
    let tail = ln_integral_log_concave(log_h, r, f64::INFINITY, (k / ell).max(r))?;
    Ok(1.0 / (1.0 + (tail - head).exp()))
}

// unseen weight ℓ with cdf(ℓ) = target; the cdf rises from 0 (ℓ = 0) to 1
fn solve_density(weights: &[f64], r: f64, target: f64) -> Result<f64> {
    let f = |ell: f64| match ws_density_cdf(weights, ell, r) {
        Ok(p) => p - target,
        Err(_) => f64::NAN,
    };
    let start = (weights.len() as f64 + 1.0) / r;
    let hi = expand_right(f, 0.0, start)?;
    find_root(f, 0.0, hi)
}

/// Bounds on `w(J)` from a WS sketch without the total weight.
///
/// With `c` matched items and matched prefix sums `s_0..s_c`: the upper
/// bound solves `Pr{v(x, s_0..s_c) ≤ r_{k+1}} = 1 - δ` (or is `s_c`); the
/// lower bound is 0 when `c = 0` and otherwise solves
/// `Pr{v(x, s_0..s_{c-1}) ≤ r_k} = δ`, never going below `s_c`.
pub fn ws_bounds_subpop<R: Rng + ?Sized>(
    sketch: &BottomKSketch,
    predicate: &Predicate,
    delta: f64,
    method: BoundMethod,
    rng: &mut R,
) -> Result<ConfidenceInterval> {
    require_ws(sketch, "WS confidence bounds")?;
    check_delta(delta)?;
    if method == BoundMethod::Density {
        return Err(Error::capability(
            "the density method bounds total weight only; use normal or quantile for subpopulations",
        ));
    }
    let mask = match_mask(sketch.entries(), predicate)?;
    let prefix = masked_prefix(sketch, &mask, true);
    let c = prefix.len() - 1;
    let matched = prefix[c];
    let Some(tau) = threshold(sketch) else {
        return Ok(ConfidenceInterval::exact(matched, delta));
    };
    let solve = |prefix: &[f64], tau: f64, side: Side, rng: &mut R| -> Result<Option<f64>> {
        match method {
            BoundMethod::Normal => solve_normal_approx(prefix, tau, delta, side),
            BoundMethod::Quantile { draws } => {
                let roots = sum_exp_roots(prefix, tau, draws, rng)?;
                let q = if side == Side::Lower { delta } else { 1.0 - delta };
                Ok(Some(empirical_quantile(&roots, q)))
            }
            BoundMethod::Density => unreachable!(),
        }
    };
    let upper = solve(&prefix, tau, Side::Upper, rng)?.map_or(matched, |x| x.max(matched));
    let lower = if c == 0 {
        0.0
    } else {
        let r_k = sketch.largest_rank().expect("sketch has entries");
        solve(&prefix[..c], r_k, Side::Lower, rng)?.map_or(matched, |x| x.max(matched))
    };
    Ok(ConfidenceInterval::new(lower, upper, delta, format!("ws-{}", method.name())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::integrate;
    use crate::rank::{seeded_rng, RankFamily};
    use crate::sketch::{build_bottom_k_with_ranks, WeightedItem};

    fn sketch() -> BottomKSketch {
        let items: Vec<_> = (0..8)
            .map(|i| WeightedItem::new(format!("i{i}"), 1.0 + i as f64).with_attribute("odd", (i % 2).to_string()))
            .collect();
        let ranks = [0.05, 0.3, 0.02, 0.11, 0.4, 0.07, 0.2, 0.09];
        build_bottom_k_with_ranks(&items, &ranks, 5, RankFamily::Ws).unwrap()
    }

    #[test]
    fn exact_sketch_is_degenerate() {
        let items = [WeightedItem::new("a", 2.0), WeightedItem::new("b", 3.0)];
        let s = build_bottom_k_with_ranks(&items, &[0.1, 0.2], 4, RankFamily::Ws).unwrap();
        let ci = ws_bounds_total(&s, 0.05, BoundMethod::Normal, &mut seeded_rng(0, 0)).unwrap();
        assert_eq!((ci.lower, ci.upper), (5.0, 5.0));
    }

    #[test]
    fn methods_bracket_sketch_weight_and_roughly_agree() {
        let s = sketch();
        let mut rng = seeded_rng(4, 0);
        let n = ws_bounds_total(&s, 0.05, BoundMethod::Normal, &mut rng).unwrap();
        let q = ws_bounds_total(&s, 0.05, BoundMethod::Quantile { draws: 4000 }, &mut rng).unwrap();
        let d = ws_bounds_total(&s, 0.05, BoundMethod::Density, &mut rng).unwrap();
        for ci in [&n, &q, &d] {
            assert!(ci.lower >= s.sketch_weight() && ci.lower < ci.upper, "{ci:?}");
        }
        assert!((q.upper / n.upper - 1.0).abs() < 0.25, "{n:?} {q:?}");
        assert!((d.upper / q.upper - 1.0).abs() < 0.5, "{d:?} {q:?}");
    }

    #[test]
    fn density_cdf_matches_direct_quadrature() {
        let w = [1.0, 2.5, 0.7];
        let (ell, r) = (3.0, 0.4);
        let h = |y: f64| (-ell * y).exp() * w.iter().map(|&wi| 1.0 - (-wi * y).exp()).product::<f64>();
        let head = integrate(h, 0.0, r, 1e-15, 1e-13).unwrap();
        let all = head + integrate(h, r, 40.0, 1e-15, 1e-13).unwrap();
        let got = ws_density_cdf(&w, ell, r).unwrap();
        assert!((got - head / all).abs() < 1e-9, "{got} vs {}", head / all);
        assert!(ws_density_cdf(&w, 6.0, r).unwrap() > got);
    }

    #[test]
    fn subpop_rules() {
        let s = sketch();
        let mut rng = seeded_rng(1, 0);
        let none = ws_bounds_subpop(&s, &Predicate::equals("odd", "x"), 0.05, BoundMethod::Normal, &mut rng).unwrap();
        assert_eq!(none.lower, 0.0);
        assert!(none.upper > 0.0);
        let all = ws_bounds_subpop(&s, &Predicate::True, 0.05, BoundMethod::Normal, &mut rng).unwrap();
        let tot = ws_bounds_total(&s, 0.05, BoundMethod::Normal, &mut rng).unwrap();
        assert!((all.upper - tot.upper).abs() < 1e-9 * tot.upper);
        let odd = ws_bounds_subpop(&s, &Predicate::equals("odd", "1"), 0.05, BoundMethod::quantile(), &mut rng).unwrap();
        assert!(odd.lower >= 0.0 && odd.lower <= odd.upper);
        assert!(matches!(
            ws_bounds_subpop(&s, &Predicate::True, 0.05, BoundMethod::Density, &mut rng),
            Err(Error::Capability(_))
        ));
    }
}
