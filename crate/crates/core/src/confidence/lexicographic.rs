//! Subpopulation bounds that use the total weight.
//!
//! Conditioning on the sketch, the observation is summarized by the pair
//! `(c, Δ)`: the number `c` of matched sketch items and
//! `Δ = r̄(unmatched ∩ s) - r̄(matched ∩ s)`, the gap between the largest
//! unmatched and the largest matched rank (an empty side counts as 0).
//! For a candidate `x = w(J)` the matched rank differences are
//! exponentials with rates `x - s_h` and the unmatched ones have rates
//! `W - x - s'_h`. The pair increases lexicographically with `x`, so for
//! each draw of uniforms there is a single `x` reproducing the observed
//! pair; the bounds are quantiles of that root.

use rand::Rng;

use super::ConfidenceInterval;
use crate::error::{Error, Result};
use crate::estimators::{masked_prefix, match_mask, require_ws, unseen_weight};
use crate::numeric::{check_delta, find_root};
use crate::predicate::Predicate;
use crate::rank::open_unit;
use crate::sketch::BottomKSketch;

/// Bounds on `w(J)` from a WS sketch and the total weight `W`.
///
/// Always inside `[w(J∩s), w(J∩s) + W - w(s)]`; the interval is degenerate
/// when there is no unseen weight.
pub fn ws_bounds_subpop_with_total<R: Rng + ?Sized>(
    sketch: &BottomKSketch,
    predicate: &Predicate,
    total: f64,
    delta: f64,
    draws: usize,
    rng: &mut R,
) -> Result<ConfidenceInterval> {
    require_ws(sketch, "WS confidence bounds")?;
    check_delta(delta)?;
    let ell = unseen_weight(sketch, total)?;
    if draws == 0 {
        return Err(Error::domain("the quantile method needs at least one draw"));
    }
    let mask = match_mask(sketch.entries(), predicate)?;
    let matched = masked_prefix(sketch, &mask, true);
    let other = masked_prefix(sketch, &mask, false);
    let (i, i2) = (matched.len() - 1, other.len() - 1);
    let seen = matched[i];
    if ell <= 1e-12 * total {
        return Ok(ConfidenceInterval::exact(seen, delta));
    }
    let top = |want: bool| {
        sketch
            .entries()
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m == want)
            .map(|(e, _)| e.rank)
            .fold(0.0, f64::max)
    };
    let gap = top(false) - top(true);

    let solver = LexSolver {
        matched: &matched,
        other: &other,
        total,
        gap,
    };
    let mut roots = Vec::with_capacity(draws);
    let (mut v, mut v2) = (vec![0.0; i + 1], vec![0.0; i2 + 1]);
    for d in 0..draws {
        for e in v.iter_mut().chain(v2.iter_mut()) {
            *e = -open_unit(rng).ln();
        }
        let m = solver
            .solve(&v, &v2)
            .map_err(|e| Error::numerical(format!("quantile draw {d}: {e}")))?;
        roots.push(m);
    }
    roots.sort_by(f64::total_cmp);
    let m = roots.len();
    let hi_idx = ((1.0 - delta) * m as f64).ceil() as usize;
    let hi_idx = hi_idx.clamp(1, m);
    let upper = roots[hi_idx - 1];
    // lower = W - Q_{1-δ}(W - M): the mirrored order statistic
    let lower = roots[m - hi_idx];
    let cap = seen + ell;
    Ok(ConfidenceInterval::new(
        lower.clamp(seen, cap),
        upper.clamp(seen, cap),
        delta,
        "ws-lexicographic",
    ))
}

struct LexSolver<'a> {
    matched: &'a [f64],
    other: &'a [f64],
    total: f64,
    gap: f64,
}

impl LexSolver<'_> {
    // A_m(x) = Σ_{h<m} e_h / (x - s_h), decreasing in x
    fn a(&self, e: &[f64], m: usize, x: f64) -> f64 {
        (0..m).map(|h| e[h] / (x - self.matched[h])).sum()
    }

    // B_m(x) = Σ_{h<m} e'_h / (W - x - s'_h), increasing in x
    fn b(&self, e: &[f64], m: usize, x: f64) -> f64 {
        (0..m).map(|h| e[h] / ((self.total - self.other[h]) - x)).sum()
    }

    /// `(L, U)`: the candidates for which exactly `i` matched items enter the sketch.
    fn range(&self, e: &[f64], e2: &[f64]) -> Result<(f64, f64)> {
        let (i, i2) = (self.matched.len() - 1, self.other.len() - 1);
        let w = self.total;
        // U: above it more than i matched items enter the sketch
        let upper = if i2 == 0 {
            w
        } else {
            let f = |x: f64| self.a(e, i + 1, x) - self.b(e2, i2, x);
            find_root(f, self.matched[i], w - self.other[i2 - 1])?
        };
        // L: below it fewer than i matched items enter
        let lower = if i == 0 {
            0.0
        } else {
            let f = |x: f64| self.a(e, i, x) - self.b(e2, i2 + 1, x);
            find_root(f, self.matched[i - 1], w - self.other[i2])?
        };
        Ok((lower.min(upper), upper.max(lower)))
    }

    /// The `x` whose rank chains reproduce `(i, Δ)` for these exponentials.
    fn solve(&self, e: &[f64], e2: &[f64]) -> Result<f64> {
        let (i, i2) = (self.matched.len() - 1, self.other.len() - 1);
        let w = self.total;
        let (lower, upper) = self.range(e, e2)?;
        // d(x) = B_{i'}(x) - A_i(x) increases in x; hold it to the bracket ends
        let d = |x: f64| self.b(e2, i2, x) - self.a(e, i, x) - self.gap;
        let m = if lower == upper || d(lower) >= 0.0 {
            lower
        } else if d(upper) <= 0.0 {
            upper
        } else {
            find_root(d, lower, upper)?
        };
        Ok(m.clamp(self.matched[i], (w - self.other[i2]).max(self.matched[i])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rank::{seeded_rng, RankFamily};
    use crate::sketch::{build_bottom_k_with_ranks, WeightedItem};

    fn sketch() -> BottomKSketch {
        let items: Vec<_> = (0..10)
            .map(|i| WeightedItem::new(format!("i{i}"), 1.0 + (i % 4) as f64).with_attribute("odd", (i % 2).to_string()))
            .collect();
        let ranks = [0.05, 0.3, 0.02, 0.11, 0.4, 0.07, 0.2, 0.09, 0.5, 0.6];
        build_bottom_k_with_ranks(&items, &ranks, 6, RankFamily::Ws).unwrap()
    }

    #[test]
    fn stays_inside_feasible_range() {
        let s = sketch();
        let total = 40.0;
        let ell = total - s.sketch_weight();
        let mut rng = seeded_rng(6, 0);
        for p in [Predicate::equals("odd", "0"), Predicate::equals("odd", "1"), Predicate::True, Predicate::equals("odd", "x")] {
            let mask = match_mask(s.entries(), &p).unwrap();
            let seen = masked_prefix(&s, &mask, true).last().copied().unwrap();
            let ci = ws_bounds_subpop_with_total(&s, &p, total, 0.05, 200, &mut rng).unwrap();
            assert!(ci.lower >= seen && ci.upper <= seen + ell + 1e-9 && ci.lower <= ci.upper, "{p}: {ci:?}");
        }
    }

    #[test]
    fn no_unseen_weight_is_degenerate() {
        let s = sketch();
        let w = s.sketch_weight();
        let ci = ws_bounds_subpop_with_total(&s, &Predicate::equals("odd", "0"), w, 0.05, 10, &mut seeded_rng(0, 0)).unwrap();
        assert_eq!(ci.lower, ci.upper);
        let all = ws_bounds_subpop_with_total(&s, &Predicate::True, w, 0.05, 10, &mut seeded_rng(0, 0)).unwrap();
        assert_eq!((all.lower, all.upper), (w, w));
        assert!(matches!(
            ws_bounds_subpop_with_total(&s, &Predicate::True, w - 1.0, 0.05, 10, &mut seeded_rng(0, 0)),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn solver_reproduces_observed_pair() {
        // plant Δ as d(x0) for an x0 inside (L, U); the solver must return x0
        let matched = [0.0, 2.0, 3.0];
        let other = [0.0, 1.0];
        let e = [0.4, 0.9, 0.3];
        let e2 = [0.7, 0.2];
        let mut solver = LexSolver { matched: &matched, other: &other, total: 20.0, gap: 0.0 };
        let (lo, hi) = solver.range(&e, &e2).unwrap();
        assert!(lo < hi, "({lo}, {hi})");
        for t in [0.2, 0.5, 0.9] {
            let x0 = lo + t * (hi - lo);
            solver.gap = solver.b(&e2, 1, x0) - solver.a(&e, 2, x0);
            let x = solver.solve(&e, &e2).unwrap();
            if x0 >= 3.0 && x0 <= 19.0 {
                assert!((x - x0).abs() < 1e-7 * x0, "{x} vs {x0}");
            }
        }
    }
}
