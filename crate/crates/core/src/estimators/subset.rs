//! Subset conditioning.
//!
//! `f(s, ℓ)` is the probability that, among the items of `s` plus extra
//! weight `ℓ`, the `|s|` smallest exponential ranks belong to `s`.
//! The subset-conditioning adjusted weight is
//! `a(i) = w(i) f(s∖{i}, ℓ) / f(s, ℓ)` with `ℓ = W - w(s)`.

use rand::Rng;

use super::rc::ws_rc;
use super::{require_ws, unseen_weight, AdjustedWeights, EstimatorKind};
use crate::error::{Error, Result};
use crate::numeric::ln_integral_log_concave;
use crate::rank::{open_unit, RankFamily};
use crate::sketch::BottomKSketch;

/// Largest set size handled by the subset recursion; larger sets use quadrature.
pub const EXACT_SUBSET_LIMIT: usize = 20;

/// Parameters of the Markov-chain approximation to subset conditioning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScParams {
    /// Draws of `r_{k+1}` per permutation.
    pub inperm: usize,
    /// Steps of the chain.
    pub permnum: usize,
}

impl ScParams {
    pub fn new(inperm: usize, permnum: usize) -> Result<Self> {
        if inperm < 1 || permnum < 1 {
            return Err(Error::input("inperm and permnum must be at least 1"));
        }
        Ok(ScParams { inperm, permnum })
    }
}

impl Default for ScParams {
    fn default() -> Self {
        ScParams {
            inperm: 20,
            permnum: 20,
        }
    }
}

fn check_args(weights: &[f64], ell: f64) -> Result<()> {
    if ell.is_nan() || ell < 0.0 || ell.is_infinite() {
        return Err(Error::domain(format!("ell must be a nonnegative real, got {ell}")));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::domain(format!("weights must be positive, got {w}")));
    }
    Ok(())
}

/// `f(s, ℓ) = ∫ ℓ e^{-ℓx} ∏_j (1 - e^{-w_j x}) dx`.
///
/// Up to [`EXACT_SUBSET_LIMIT`] weights this is evaluated exactly by a
/// recursion over subsets with only positive terms; beyond that by
/// quadrature. `ℓ = 0` gives 1.
pub fn f_subset_prob(weights: &[f64], ell: f64) -> Result<f64> {
    check_args(weights, ell)?;
    if ell == 0.0 || weights.is_empty() {
        return Ok(1.0);
    }
    if weights.len() <= EXACT_SUBSET_LIMIT {
        let table = SubsetTable::new(weights, ell);
        Ok(table.ln_f().exp())
    } else {
        Ok(ln_f_quadrature(weights, ell)?.exp())
    }
}

/// `f(s, ℓ)` by inclusion–exclusion, `Σ_{T ⊆ s} (-1)^{|T|} ℓ / (ℓ + w(T))`.
///
/// Exposed for cross-checking; the alternating sum cancels badly once
/// `f` is small.
pub fn f_subset_prob_inclusion_exclusion(weights: &[f64], ell: f64) -> Result<f64> {
    check_args(weights, ell)?;
    if weights.len() > EXACT_SUBSET_LIMIT {
        return Err(Error::capability(format!(
            "inclusion-exclusion is limited to {EXACT_SUBSET_LIMIT} weights"
        )));
    }
    if ell == 0.0 {
        return Ok(1.0);
    }
    let n = weights.len();
    let mut sums = vec![0.0; 1 << n];
    let mut total = 0.0;
    for mask in 0usize..1 << n {
        if mask > 0 {
            let low = mask.trailing_zeros() as usize;
            sums[mask] = sums[mask & (mask - 1)] + weights[low];
        }
        let term = ell / (ell + sums[mask]);
        if mask.count_ones() % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    Ok(total)
}

/// `f(s, ℓ)` by adaptive quadrature, for any number of weights.
pub fn f_subset_prob_quadrature(weights: &[f64], ell: f64) -> Result<f64> {
    check_args(weights, ell)?;
    if ell == 0.0 || weights.is_empty() {
        return Ok(1.0);
    }
    Ok(ln_f_quadrature(weights, ell)?.exp())
}

// Scaled forward recursion. With L = ℓ + w(s), let p(T) be the probability
// that the first |T| weighted draws without replacement from s ∪ X are T.
// Then p(T) = Σ_{i∈T} p(T∖i) w_i / (L - w(T) + w_i). Storing
// q(T) = p(T) L^{|T|} / ∏_{j∈T} w_j keeps values in a safe range.
struct SubsetTable {
    q: Vec<f64>,
    total: f64,
    ell: f64,
    ln_w_sum: f64,
    k: usize,
}

impl SubsetTable {
    fn new(weights: &[f64], ell: f64) -> Self {
        let k = weights.len();
        let total = ell + weights.iter().sum::<f64>();
        let full = (1usize << k) - 1;
        let mut sums = vec![0.0; full + 1];
        let mut q = vec![0.0; full + 1];
        q[0] = 1.0;
        for mask in 1..=full {
            let low = mask.trailing_zeros() as usize;
            sums[mask] = sums[mask & (mask - 1)] + weights[low];
            let rest = total - sums[mask];
            let mut acc = 0.0;
            let mut bits = mask;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                acc += q[mask ^ (1 << i)] * total / (rest + weights[i]);
            }
            q[mask] = acc;
        }
        SubsetTable {
            q,
            total,
            ell,
            ln_w_sum: weights.iter().map(|w| w.ln()).sum(),
            k,
        }
    }

    fn full(&self) -> usize {
        (1usize << self.k) - 1
    }

    fn ln_f(&self) -> f64 {
        self.q[self.full()].ln() + self.ln_w_sum - self.k as f64 * self.total.ln()
    }

    // a(i) = w_i + ℓ L / (ℓ + w_i) · q(s∖i) / q(s), from
    // f(s∖i, ℓ) = f(s, ℓ) + f(s∖i, ℓ + w_i) ℓ / (ℓ + w_i).
    fn adjusted(&self, i: usize, w: f64) -> f64 {
        let full = self.full();
        w + self.ell * self.total / (self.ell + w) * self.q[full ^ (1 << i)] / self.q[full]
    }
}

/// `ln ∏_j (1 - e^{-w_j x})`.
pub(crate) fn ln_prod_inclusion(weights: &[f64], x: f64) -> f64 {
    weights.iter().map(|&w| (-(-w * x).exp_m1()).ln()).sum()
}

// ln f by integrating the log-concave integrand around its peak, which
// lies below k/ℓ (the log-derivative is at most k/x - ℓ).
fn ln_f_quadrature(weights: &[f64], ell: f64) -> Result<f64> {
    let k = weights.len() as f64;
    let log_g = |x: f64| -ell * x + ln_prod_inclusion(weights, x);
    Ok(ell.ln() + ln_integral_log_concave(log_g, 0.0, f64::INFINITY, k / ell)?)
}

/// Exact subset-conditioning adjusted weights.
///
/// Their sum over the sketch is always `W`.
pub fn sc_adjusted_weights_exact(sketch: &BottomKSketch, total: f64) -> Result<AdjustedWeights<'_>> {
    require_ws(sketch, "subset conditioning")?;
    let ell = unseen_weight(sketch, total)?;
    let entries = sketch.entries();
    let weights: Vec<f64> = entries.iter().map(|e| e.weight).collect();
    let adjusted = if ell == 0.0 || weights.is_empty() {
        weights.clone()
    } else if weights.len() <= EXACT_SUBSET_LIMIT {
        let table = SubsetTable::new(&weights, ell);
        weights.iter().enumerate().map(|(i, &w)| table.adjusted(i, w)).collect()
    } else {
        let ln_full = ln_f_quadrature(&weights, ell)?;
        let mut out = Vec::with_capacity(weights.len());
        let mut rest = Vec::with_capacity(weights.len() - 1);
        for (i, &w) in weights.iter().enumerate() {
            rest.clear();
            rest.extend(weights.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &v)| v));
            out.push(w * (ln_f_quadrature(&rest, ell)? - ln_full).exp());
        }
        out
    };
    Ok(AdjustedWeights::from_entries(EstimatorKind::WsScExact, entries, adjusted))
}

/// Subset conditioning approximated by a Markov chain over orderings of
/// the sketched items.
///
/// Each step draws `r_{k+1}` `inperm` times from its distribution given
/// the current order (a sum of exponentials with rates `W - s_h`),
/// averages the resulting rank-conditioning weights, then redraws the
/// entry ranks below the last `r_{k+1}` and re-sorts to get the next
/// order. The chain starts from the observed order.
pub fn sc_adjusted_weights_markov<'a, R: Rng + ?Sized>(
    sketch: &'a BottomKSketch,
    total: f64,
    params: ScParams,
    rng: &mut R,
) -> Result<AdjustedWeights<'a>> {
    require_ws(sketch, "subset conditioning")?;
    ScParams::new(params.inperm, params.permnum)?;
    let ell = unseen_weight(sketch, total)?;
    let entries = sketch.entries();
    let weights: Vec<f64> = entries.iter().map(|e| e.weight).collect();
    if ell == 0.0 || weights.is_empty() {
        return Ok(AdjustedWeights::from_entries(EstimatorKind::WsScMarkov, entries, weights));
    }
    let k = weights.len();
    let mut order: Vec<usize> = (0..k).collect();
    let mut ranks = vec![0.0; k];
    let mut rates = vec![0.0; k + 1];
    let mut acc = vec![0.0; k];
    for _ in 0..params.permnum {
        let mut prefix = 0.0;
        for (h, &i) in order.iter().enumerate() {
            rates[h] = total - prefix;
            prefix += weights[i];
        }
        rates[k] = ell;
        let mut r = 0.0;
        for _ in 0..params.inperm {
            r = rates.iter().map(|&rate| -open_unit(rng).ln() / rate).sum::<f64>();
            for (a, &w) in acc.iter_mut().zip(&weights) {
                *a += ws_rc(w, r);
            }
        }
        for (x, &w) in ranks.iter_mut().zip(&weights) {
            *x = RankFamily::Ws.draw_below(w, r, rng);
        }
        order.sort_by(|&a, &b| ranks[a].total_cmp(&ranks[b]));
    }
    let n = (params.inperm * params.permnum) as f64;
    let adjusted = acc.into_iter().map(|a| a / n).collect();
    Ok(AdjustedWeights::from_entries(EstimatorKind::WsScMarkov, entries, adjusted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rank::seeded_rng;
    use crate::sketch::{build_bottom_k_with_ranks, WeightedItem};

    #[test]
    fn empty_set_and_zero_ell() {
        assert_eq!(f_subset_prob(&[], 5.0).unwrap(), 1.0);
        assert_eq!(f_subset_prob(&[1.0, 2.0], 0.0).unwrap(), 1.0);
        assert!(matches!(f_subset_prob(&[1.0], -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn single_weight_closed_form() {
        for &(w, l) in &[(1.0, 1.0), (0.3, 7.0), (12.0, 0.25)] {
            let want = w / (l + w);
            assert!((f_subset_prob(&[w], l).unwrap() - want).abs() < 1e-12);
            assert!((f_subset_prob_inclusion_exclusion(&[w], l).unwrap() - want).abs() < 1e-12);
            assert!((f_subset_prob_quadrature(&[w], l).unwrap() - want).abs() < 1e-10);
        }
    }

    #[test]
    fn two_weight_closed_form() {
        // 1 - ℓ/(ℓ+a) - ℓ/(ℓ+b) + ℓ/(ℓ+a+b)
        let (a, b, l) = (1.5, 0.5, 2.0);
        let want = 1.0 - l / (l + a) - l / (l + b) + l / (l + a + b);
        assert!((f_subset_prob(&[a, b], l).unwrap() - want).abs() < 1e-13);
        assert!((f_subset_prob_quadrature(&[a, b], l).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn quadrature_handles_tiny_probabilities() {
        let w = vec![1.0; 30];
        let v = f_subset_prob(&w, 1e4).unwrap();
        // 30! / ∏ (1e4 + j) for unit weights
        let mut want = 0.0f64;
        for j in 1..=30 {
            want += (j as f64).ln() - (1e4 + j as f64).ln();
        }
        assert!(((v.ln() - want) / want).abs() < 1e-9, "{} vs {}", v.ln(), want);
    }

    #[test]
    fn single_item_gets_total() {
        let items = [WeightedItem::new("a", 2.0), WeightedItem::new("b", 3.0)];
        let s = build_bottom_k_with_ranks(&items, &[0.1, 0.2], 1, RankFamily::Ws).unwrap();
        let a = sc_adjusted_weights_exact(&s, 5.0).unwrap();
        assert!((a.get("a").unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn no_unseen_weight_keeps_weights() {
        let items: Vec<_> = (0..4).map(|i| WeightedItem::new(i.to_string(), 1.0 + i as f64)).collect();
        let s = build_bottom_k_with_ranks(&items, &[0.1, 0.2, 0.3, 0.4], 4, RankFamily::Ws).unwrap();
        let a = sc_adjusted_weights_exact(&s, 10.0).unwrap();
        assert_eq!(a.values(), vec![1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(sc_adjusted_weights_exact(&s, 11.0), Err(Error::Input(_))));
        assert!(matches!(sc_adjusted_weights_exact(&s, 9.0), Err(Error::Input(_))));
    }

    #[test]
    fn large_sketch_quadrature_path_sums_to_total() {
        let items: Vec<_> = (0..60).map(|i| WeightedItem::new(i.to_string(), 1.0 + (i % 5) as f64)).collect();
        let ranks: Vec<f64> = (0..60).map(|i| (i as f64 + 1.0) / 100.0).collect();
        let s = build_bottom_k_with_ranks(&items, &ranks, 25, RankFamily::Ws).unwrap();
        let total: f64 = items.iter().map(|i| i.weight).sum();
        let a = sc_adjusted_weights_exact(&s, total).unwrap();
        assert!((a.total() - total).abs() < 1e-7 * total, "{}", a.total());
    }

    #[test]
    fn markov_is_deterministic_under_seed() {
        let items: Vec<_> = (0..8).map(|i| WeightedItem::new(i.to_string(), 1.0 + i as f64)).collect();
        let ranks: Vec<f64> = (0..8).map(|i| 0.05 * (8 - i) as f64).collect();
        let s = build_bottom_k_with_ranks(&items, &ranks, 3, RankFamily::Ws).unwrap();
        let p = ScParams::default();
        let a = sc_adjusted_weights_markov(&s, 36.0, p, &mut seeded_rng(1, 0)).unwrap().values();
        let b = sc_adjusted_weights_markov(&s, 36.0, p, &mut seeded_rng(1, 0)).unwrap().values();
        assert_eq!(a, b);
        assert!(ScParams::new(0, 3).is_err());
    }
}
