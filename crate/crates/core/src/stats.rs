//! Optimal-action distributions, divergences, ensemble-size bounds, and
//! regret aggregation.

use crate::env::ActionSet;
use crate::error::{Error, Result};
use crate::linalg::sample_with_factor;
use crate::linear::{argmax_action, GaussianBelief};
use crate::rng::SeededRng;

/// A probability vector over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    probs: Vec<f64>,
}

impl ActionDistribution {
    /// Accepts nonnegative entries summing to 1 within 1e-12.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid("probabilities must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("probabilities sum to {total}")));
        }
        Ok(ActionDistribution { probs })
    }

    /// Empirical distribution of action indices.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::invalid("no samples"));
        }
        let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(ActionDistribution { probs })
    }

    fn normalized(mut probs: Vec<f64>) -> Result<Self> {
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("distribution has no mass"));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(ActionDistribution { probs })
    }

    pub fn point_mass(k: usize, index: usize) -> Self {
        let mut probs = vec![0.0; k];
        probs[index] = 1.0;
        ActionDistribution { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

const QUAD_TOL: f64 = 1e-8;
const TAIL_SIGMAS: f64 = 8.0;

/// Unnormalized `P(arm k is the maximum)` for independent Gaussian arms.
pub(crate) fn exact_p_independent_raw(means: &[f64], vars: &[f64]) -> Result<Vec<f64>> {
    if means.len() != vars.len() {
        return Err(Error::DimensionMismatch {
            expected: means.len(),
            got: vars.len(),
        });
    }
    if means.is_empty() {
        return Err(Error::invalid("need at least one arm"));
    }
    if vars.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid("arm variances must be positive"));
    }
    let sds: Vec<f64> = vars.iter().map(|v| v.sqrt()).collect();
    let sd_max = sds.iter().copied().fold(0.0, f64::max);
    let lo = means.iter().copied().fold(f64::INFINITY, f64::min) - TAIL_SIGMAS * sd_max;
    let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max) + TAIL_SIGMAS * sd_max;

    // Breakpoints around every arm so narrow densities and sharp CDF steps are resolved.
    let mut cuts = vec![lo, hi];
    for (&m, &s) in means.iter().zip(&sds) {
        for k in [-TAIL_SIGMAS, -2.0, -1.0, 0.0, 1.0, 2.0, TAIL_SIGMAS] {
            let x = m + k * s;
            if x > lo && x < hi {
                cuts.push(x);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let pieces = (cuts.len() - 1).max(1) as f64;

    let probs = (0..means.len())
        .map(|k| {
            let integrand = |x: f64| {
                let mut v = normal_pdf((x - means[k]) / sds[k]) / sds[k];
                for j in 0..means.len() {
                    if j != k && v != 0.0 {
                        v *= normal_cdf((x - means[j]) / sds[j]);
                    }
                }
                v
            };
            cuts.windows(2)
                .map(|w| adaptive_simpson(&integrand, w[0], w[1], QUAD_TOL / pieces))
                .sum::<f64>()
                .max(0.0)
        })
        .collect();
    Ok(probs)
}

/// Exact optimal-action distribution for independent arms `N(μₖ, σₖ²)` by
/// one-dimensional quadrature, renormalized onto the simplex.
pub fn exact_p_independent(means: &[f64], vars: &[f64]) -> Result<ActionDistribution> {
    ActionDistribution::normalized(exact_p_independent_raw(means, vars)?)
}

/// Frequency of each action being optimal under `samples` posterior draws.
pub fn monte_carlo_p(
    belief: &GaussianBelief,
    actions: &ActionSet,
    samples: usize,
    rng: &mut SeededRng,
) -> Result<ActionDistribution> {
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let l = belief.cov().cholesky()?;
    let mut counts = vec![0u64; actions.len()];
    for _ in 0..samples {
        let theta = sample_with_factor(belief.mean(), &l, rng)?;
        counts[argmax_action(&theta, actions)] += 1;
    }
    ActionDistribution::from_counts(&counts)
}

/// `Σ p̂ₐ log(p̂ₐ/pₐ)` (natural log); `+∞` when `p̂ₐ > 0 = pₐ`.
pub fn kl_divergence(p_hat: &ActionDistribution, p: &ActionDistribution) -> Result<f64> {
    if p_hat.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: p_hat.len(),
        });
    }
    let mut kl = 0.0;
    for (&q, &r) in p_hat.probs.iter().zip(&p.probs) {
        if q == 0.0 {
            continue;
        }
        if r == 0.0 {
            return Ok(f64::INFINITY);
        }
        kl += q * (q / r).ln();
    }
    Ok(kl.max(0.0))
}

/// `Σ |p̂ₐ − pₐ|`, the un-halved L1 form.
pub fn tv_distance(p_hat: &ActionDistribution, p: &ActionDistribution) -> Result<f64> {
    if p_hat.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: p_hat.len(),
        });
    }
    Ok(p_hat.probs.iter().zip(&p.probs).map(|(a, b)| (a - b).abs()).sum())
}

/// Smallest ensemble size satisfying
/// `M ≥ (4|A|/ε²)·ln(4|A|T/ε³)`, floored at one model.
pub fn theorem1_min_m(num_actions: u64, horizon: u64, eps: f64) -> Result<u64> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    if num_actions == 0 || horizon == 0 {
        return Err(Error::invalid("action count and horizon must be at least 1"));
    }
    let a = num_actions as f64;
    let value = 4.0 * a / (eps * eps) * (4.0 * a * horizon as f64 / (eps * eps * eps)).ln();
    if !value.is_finite() || value >= u64::MAX as f64 {
        return Err(Error::invalid("bound overflows a 64-bit count"));
    }
    Ok((value.ceil() as u64).max(1))
}

/// Whether `|A|·T/(ε·δ) ≥ 9` holds with `δ = ε/2`.
pub fn theorem1_assumption_holds(num_actions: u64, horizon: u64, eps: f64) -> bool {
    let delta = eps / 2.0;
    num_actions as f64 * horizon as f64 / (eps * delta) >= 9.0
}

/// `(t+1)^|A| (M+1)^|A| e^{−Mε}`, clamped to `[0, 1]`.
pub fn concentration_bound(num_actions: u64, models: u64, eps: f64, t: u64) -> f64 {
    let a = num_actions as f64;
    let log = a * ((t + 1) as f64).ln() + a * ((models + 1) as f64).ln() - models as f64 * eps;
    log.exp().clamp(0.0, 1.0)
}

/// Monte Carlo estimate of per-period regret across realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretSummary {
    pub per_period_mean: Vec<f64>,
    /// Sample standard deviation over `√realizations`; zero for one realization.
    pub per_period_stderr: Vec<f64>,
    pub cumulative_mean: f64,
    pub realizations: usize,
}

impl RegretSummary {
    pub fn horizon(&self) -> usize {
        self.per_period_mean.len()
    }
}

/// Mean and standard error of `xs`.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn aggregate_regret(traces: &[Vec<f64>]) -> Result<RegretSummary> {
    let first = traces.first().ok_or_else(|| Error::invalid("no regret traces"))?;
    let horizon = first.len();
    if traces.iter().any(|t| t.len() != horizon) {
        return Err(Error::invalid("regret traces have different lengths"));
    }
    let mut column = vec![0.0; traces.len()];
    let mut per_period_mean = Vec::with_capacity(horizon);
    let mut per_period_stderr = Vec::with_capacity(horizon);
    for t in 0..horizon {
        for (c, trace) in column.iter_mut().zip(traces) {
            *c = trace[t];
        }
        let (m, se) = mean_and_stderr(&column);
        per_period_mean.push(m);
        per_period_stderr.push(se);
    }
    Ok(RegretSummary {
        cumulative_mean: per_period_mean.iter().sum(),
        per_period_mean,
        per_period_stderr,
        realizations: traces.len(),
    })
}
