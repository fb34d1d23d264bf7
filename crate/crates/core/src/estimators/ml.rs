//! Maximum-likelihood estimators for WS sketches.

use rand::Rng;

use super::{match_mask, require_ws, unseen_weight};
use crate::error::{Error, Result};
use crate::numeric::find_root;
use crate::predicate::Predicate;
use crate::rank::RankFamily;
use crate::sketch::BottomKSketch;

/// Root of `Σ_h 1/(x - s_h) = tau` for `x > s_last` (the left side decreases
/// from +∞ to 0).
pub(crate) fn solve_reciprocal_sum(prefix: &[f64], tau: f64) -> Result<f64> {
    let n = prefix.len() as f64;
    let last = *prefix.last().expect("at least s_0");
    // in u = x - s_last: the last term alone reaches tau at u = 1/tau, and
    // each term is at most tau/n at u = n/tau
    let f = |u: f64| prefix.iter().map(|s| 1.0 / (u + (last - s))).sum::<f64>() - tau;
    Ok(last + find_root(f, (1.0 - 1e-12) / tau, n * (1.0 + 1e-12) / tau)?)
}

/// ML estimate of `w(I)`: the root of `Σ_{i=0}^{k} 1/(x - s_i) = r_{k+1}`.
pub fn ml_total_weight(sketch: &BottomKSketch) -> Result<f64> {
    require_ws(sketch, "the ML total-weight estimator")?;
    match sketch.r_k_plus_1() {
        None => Ok(sketch.sketch_weight()),
        Some(r) if r.is_infinite() => Ok(sketch.sketch_weight()),
        Some(r) => solve_reciprocal_sum(&sketch.prefix_sums(), r),
    }
}

/// ML total weight averaged over `redraws` reorderings of the sketch
/// obtained by redrawing entry ranks below `r_{k+1}`. `redraws = 0` is
/// [`ml_total_weight`].
pub fn ml_total_weight_redraw<R: Rng + ?Sized>(sketch: &BottomKSketch, redraws: usize, rng: &mut R) -> Result<f64> {
    if redraws == 0 || sketch.is_exact() {
        return ml_total_weight(sketch);
    }
    require_ws(sketch, "the ML total-weight estimator")?;
    let r = sketch.r_k_plus_1().expect("not exact");
    let weights: Vec<f64> = sketch.entries().iter().map(|e| e.weight).collect();
    let mut sum = 0.0;
    let mut order: Vec<usize> = (0..weights.len()).collect();
    for _ in 0..redraws {
        let ranks: Vec<f64> = weights.iter().map(|&w| RankFamily::Ws.draw_below(w, r, rng)).collect();
        order.sort_by(|&a, &b| ranks[a].total_cmp(&ranks[b]));
        let mut prefix = vec![0.0];
        for &i in &order {
            prefix.push(prefix.last().unwrap() + weights[i]);
        }
        sum += solve_reciprocal_sum(&prefix, r)?;
    }
    Ok(sum / redraws as f64)
}

/// Prefix sums `s_0..s_c` over the sketch entries selected by `mask`.
pub(crate) fn masked_prefix(sketch: &BottomKSketch, mask: &[bool], want: bool) -> Vec<f64> {
    let mut out = vec![0.0];
    for (e, &m) in sketch.entries().iter().zip(mask) {
        if m == want {
            out.push(out.last().unwrap() + e.weight);
        }
    }
    out
}

/// ML estimate of `w(J)` without the total weight.
///
/// Solves `Σ_{h<c} 1/(x - s_h) = τ` over the `c` matched prefix sums with
/// `τ = r_{k+1}`, and never reports less than the matched sketched weight.
/// On a sketch of the whole set the matched weight is exact.
pub fn ml_subpop(sketch: &BottomKSketch, predicate: &Predicate) -> Result<f64> {
    require_ws(sketch, "the ML subpopulation estimator")?;
    let mask = match_mask(sketch.entries(), predicate)?;
    let prefix = masked_prefix(sketch, &mask, true);
    let c = prefix.len() - 1;
    let matched = prefix[c];
    if c == 0 {
        return Ok(0.0);
    }
    let tau = match sketch.r_k_plus_1() {
        None => return Ok(matched),
        Some(t) if t.is_infinite() => return Ok(matched),
        Some(t) => t,
    };
    let root = solve_reciprocal_sum(&prefix[..c], tau)?;
    Ok(root.max(matched))
}

/// ML estimate of `w(J)` given the total weight `W`.
///
/// With `c` matched and `a` unmatched sketched items, solves
/// `Σ_{h<c} 1/(x - s_h) = Σ_{h<a} 1/(W - x - s'_h)`; `c = 0` gives 0 and
/// `a = 0` gives `W`. The root is kept inside `[s_c, W - s'_a]`, the range
/// consistent with the observed sketch.
pub fn ml_subpop_with_total(sketch: &BottomKSketch, predicate: &Predicate, total: f64) -> Result<f64> {
    require_ws(sketch, "the ML subpopulation estimator")?;
    unseen_weight(sketch, total)?;
    let mask = match_mask(sketch.entries(), predicate)?;
    let matched = masked_prefix(sketch, &mask, true);
    let other = masked_prefix(sketch, &mask, false);
    let (c, a) = (matched.len() - 1, other.len() - 1);
    if c == 0 {
        return Ok(0.0);
    }
    if a == 0 {
        return Ok(total);
    }
    let lo = matched[c - 1];
    let hi = total - other[a - 1];
    if !(hi > lo) {
        return Err(Error::numerical(format!("empty search range ({lo}, {hi})")));
    }
    let g = |x: f64| {
        matched[..c].iter().map(|s| 1.0 / (x - s)).sum::<f64>()
            - other[..a].iter().map(|s| 1.0 / ((total - s) - x)).sum::<f64>()
    };
    let root = find_root(g, lo, hi)?;
    Ok(root.clamp(matched[c], (total - other[a]).max(matched[c])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rank::seeded_rng;
    use crate::sketch::{build_bottom_k_with_ranks, WeightedItem};

    fn sketch(weights: &[f64], ranks: &[f64], k: usize) -> BottomKSketch {
        let items: Vec<_> = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| WeightedItem::new(format!("i{i}"), w).with_attribute("odd", (i % 2).to_string()))
            .collect();
        build_bottom_k_with_ranks(&items, ranks, k, RankFamily::Ws).unwrap()
    }

    #[test]
    fn golden_ratio_fixture() {
        let s = sketch(&[1.0, 5.0], &[0.5, 1.0], 1);
        let w = ml_total_weight(&s).unwrap();
        assert!((w - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-6);
        let lhs = 1.0 / (2.0 * w) + 1.0 / (2.0 * w - 1.0);
        assert!(lhs < 1.0);
    }

    #[test]
    fn exact_sketch_returns_sum() {
        let s = sketch(&[1.0, 2.0], &[0.5, 1.0], 3);
        assert_eq!(ml_total_weight(&s).unwrap(), 3.0);
    }

    #[test]
    fn subpop_clamps_to_matched_weight() {
        // one matched item of weight 1, τ = 2: root 1/2, clamped to 1
        let s = sketch(&[1.0, 3.0, 1.0], &[0.1, 2.0, 5.0], 1);
        let p = Predicate::equals("odd", "0");
        assert_eq!(ml_subpop(&s, &p).unwrap(), 1.0);
        assert_eq!(ml_subpop(&s, &Predicate::equals("odd", "7")).unwrap(), 0.0);
    }

    #[test]
    fn subpop_all_matches_total() {
        let s = sketch(&[1.0, 3.0, 2.0, 4.0], &[0.1, 0.2, 0.3, 0.4], 3);
        let all = ml_subpop(&s, &Predicate::True).unwrap();
        let root = solve_reciprocal_sum(&s.prefix_sums()[..3], 0.4).unwrap();
        assert!((all - root.max(6.0)).abs() < 1e-12);
    }

    #[test]
    fn with_total_edge_cases_and_symmetry() {
        let s = sketch(&[1.0, 1.0, 2.0, 2.0, 9.0], &[0.1, 0.2, 0.3, 0.4, 1.0], 4);
        // matched (odd=0): ranks 0.1, 0.3 weights 1, 2; unmatched: 1, 2 in the same order
        let p = Predicate::equals("odd", "0");
        let est = ml_subpop_with_total(&s, &p, 20.0).unwrap();
        assert!((est - 10.0).abs() < 1e-8);
        assert_eq!(ml_subpop_with_total(&s, &Predicate::True, 20.0).unwrap(), 20.0);
        assert_eq!(ml_subpop_with_total(&s, &Predicate::equals("odd", "x"), 20.0).unwrap(), 0.0);
        assert!(matches!(ml_subpop_with_total(&s, &p, 5.0), Err(Error::Input(_))));
    }

    #[test]
    fn redraw_average_is_positive_and_reproducible() {
        let s = sketch(&[1.0, 3.0, 2.0, 4.0, 1.0], &[0.1, 0.2, 0.3, 0.4, 0.5], 4);
        let a = ml_total_weight_redraw(&s, 10, &mut seeded_rng(2, 0)).unwrap();
        let b = ml_total_weight_redraw(&s, 10, &mut seeded_rng(2, 0)).unwrap();
        assert_eq!(a, b);
        assert!(a > s.sketch_weight());
    }
}
