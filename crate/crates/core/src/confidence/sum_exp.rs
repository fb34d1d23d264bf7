use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::{check_delta, empirical_quantile, expand_right, find_root, maximize_unimodal, z_value};
use crate::rank::open_unit;

/// `v(t, s_0..s_h)`: a sum of independent exponentials with rates `t - s_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SumExpSpec {
    pub t: f64,
    pub prefix_sums: Vec<f64>,
}

impl SumExpSpec {
    pub fn new(t: f64, prefix_sums: Vec<f64>) -> Result<Self> {
        let last = *prefix_sums
            .last()
            .ok_or_else(|| Error::domain("a sum of exponentials needs at least s_0"))?;
        if prefix_sums.windows(2).any(|p| p[1] < p[0]) {
            return Err(Error::domain("prefix sums must be nondecreasing"));
        }
        if !(t > last) {
            return Err(Error::domain(format!("rate anchor {t} must exceed the last prefix sum {last}")));
        }
        Ok(SumExpSpec { t, prefix_sums })
    }

    pub fn mean(&self) -> f64 {
        self.prefix_sums.iter().map(|s| 1.0 / (self.t - s)).sum()
    }

    pub fn variance(&self) -> f64 {
        self.prefix_sums.iter().map(|s| (self.t - s).powi(-2)).sum()
    }
}

/// One draw of `v(t, ·)` from the given uniforms: `Σ -ln(v_j) / (t - s_j)`.
pub fn sample_sum_exp(spec: &SumExpSpec, uniforms: &[f64]) -> Result<f64> {
    if uniforms.len() != spec.prefix_sums.len() {
        return Err(Error::domain(format!(
            "expected {} uniforms, got {}",
            spec.prefix_sums.len(),
            uniforms.len()
        )));
    }
    let last = *spec.prefix_sums.last().expect("validated");
    if !(spec.t > last) {
        return Err(Error::domain(format!("rate anchor {} must exceed {last}", spec.t)));
    }
    let mut sum = 0.0;
    for (v, s) in uniforms.iter().zip(&spec.prefix_sums) {
        if !(*v > 0.0 && *v < 1.0) {
            return Err(Error::domain(format!("uniform {v} outside (0, 1)")));
        }
        sum += -v.ln() / (spec.t - s);
    }
    Ok(sum)
}

/// Root `x > s_h` of `Σ_j e_j / (x - s_j) = tau` for exponential variates `e_j`.
pub(crate) fn sum_exp_root(prefix: &[f64], exps: &[f64], tau: f64) -> Result<f64> {
    let last = *prefix.last().expect("at least s_0");
    // solve for u = x - s_h so the bracket keeps full relative precision
    let f = |u: f64| prefix.iter().zip(exps).map(|(s, e)| e / (u + (last - s))).sum::<f64>() - tau;
    // the last term alone reaches tau at `lo`; every term is at most e_j/u
    let lo = exps[exps.len() - 1] / tau * (1.0 - 1e-12);
    let hi = exps.iter().sum::<f64>() / tau * (1.0 + 1e-12);
    Ok(last + find_root(f, lo, hi)?)
}

/// Which tail the equation pins: `Lower` solves `Pr{v(x) ≤ τ} = δ`,
/// `Upper` solves `Pr{v(x) ≤ τ} = 1 - δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
}

/// Normal approximation: solves `E[v(x)] ∓ α √Var[v(x)] = tau` over `x > s_h`.
///
/// The upper-side function decreases from +∞ to 0, so it always has a root.
/// The lower-side function rises then falls; it has a root on the falling
/// branch only if its peak reaches `tau`, and `None` is returned otherwise.
pub fn solve_normal_approx(prefix: &[f64], tau: f64, delta: f64, side: Side) -> Result<Option<f64>> {
    let alpha = z_value(delta)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::domain(format!("tau must be positive and finite, got {tau}")));
    }
    let last = *prefix.last().ok_or_else(|| Error::domain("empty prefix"))?;
    let n = prefix.len() as f64;
    // everything below is in u = x - s_h
    let mean_sd = |u: f64| {
        let (mut e, mut v) = (0.0, 0.0);
        for s in prefix {
            let r = 1.0 / (u + (last - s));
            e += r;
            v += r * r;
        }
        (e, v.sqrt())
    };
    let u = match side {
        Side::Upper => {
            let f = |u: f64| {
                let (e, sd) = mean_sd(u);
                e + alpha * sd - tau
            };
            find_root(f, (1.0 - 1e-12) / tau, n * (1.0 + alpha) * (1.0 + 1e-12) / tau)?
        }
        Side::Lower => {
            let g = |u: f64| {
                let (e, sd) = mean_sd(u);
                e - alpha * sd - tau
            };
            let scale = n / tau;
            let (t_peak, _) = maximize_unimodal(|t: f64| g(t.exp()), (1e-12 * scale).ln(), (1e8 * scale).ln(), 1e-7);
            let peak = t_peak.exp();
            if g(peak) < 0.0 {
                return Ok(None);
            }
            let hi = expand_right(g, peak, 2.0 * peak)?;
            find_root(g, peak, hi)?
        }
    };
    Ok(Some(last + u))
}

/// Sorted roots from `draws` independent calls of `solver`.
pub fn sample_root_distribution<R, F>(mut solver: F, draws: usize, rng: &mut R) -> Result<Vec<f64>>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Result<f64>,
{
    if draws == 0 {
        return Err(Error::domain("the quantile method needs at least one draw"));
    }
    let mut roots = Vec::with_capacity(draws);
    for i in 0..draws {
        let x = solver(rng).map_err(|e| Error::numerical(format!("quantile draw {i}: {e}")))?;
        roots.push(x);
    }
    roots.sort_by(f64::total_cmp);
    Ok(roots)
}

/// Empirical `q`-quantile of the root distribution of `solver`.
pub fn quantile_method_solve<R, F>(solver: F, q: f64, draws: usize, rng: &mut R) -> Result<f64>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Result<f64>,
{
    let roots = sample_root_distribution(solver, draws, rng)?;
    Ok(empirical_quantile(&roots, q))
}

/// Sorted roots of `Σ_j -ln v_j/(x - s_j) = tau` over fresh uniforms.
pub(crate) fn sum_exp_roots<R: Rng + ?Sized>(prefix: &[f64], tau: f64, draws: usize, rng: &mut R) -> Result<Vec<f64>> {
    let mut exps = vec![0.0; prefix.len()];
    sample_root_distribution(
        |rng: &mut R| {
            for e in exps.iter_mut() {
                *e = -open_unit(rng).ln();
            }
            sum_exp_root(prefix, &exps, tau)
        },
        draws,
        rng,
    )
}

/// `(Q_δ, Q_{1-δ})` of a sorted sample.
pub(crate) fn two_sided(sorted: &[f64], delta: f64) -> Result<(f64, f64)> {
    check_delta(delta)?;
    Ok((empirical_quantile(sorted, delta), empirical_quantile(sorted, 1.0 - delta)))
}
