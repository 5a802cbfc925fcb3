//! Property suites behind `enssamp verify`.
//!
//! Each suite is deterministic given its seed and reports a single pass/fail
//! with a short numeric summary.

use std::fmt;
use std::str::FromStr;

use crate::env::{ActionSet, NoiseTable};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, SpdMatrix};
use crate::linear::{batch_fit, es_init, es_init_tracked, GaussianBelief, LinearEnsemble};
use crate::neural::{loss_and_gradient, Activation, Architecture, MlpParams};
use crate::rng::{Role, SeededRng};
use crate::stats::{exact_p_independent, kl_divergence, tv_distance, ActionDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    IncrementalBatch,
    PosteriorMatch,
    CountInvariance,
    KlConcentration,
    Gradient,
    Pinsker,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::IncrementalBatch,
        Suite::PosteriorMatch,
        Suite::CountInvariance,
        Suite::KlConcentration,
        Suite::Gradient,
        Suite::Pinsker,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::IncrementalBatch => "incremental-batch",
            Suite::PosteriorMatch => "posterior-match",
            Suite::CountInvariance => "count-invariance",
            Suite::KlConcentration => "kl-concentration",
            Suite::Gradient => "gradient",
            Suite::Pinsker => "pinsker",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}: {}", self.suite, self.detail)
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    let mut rng = SeededRng::for_role(seed, Role::Verification, &[suite as u64]);
    let (passed, detail) = match suite {
        Suite::IncrementalBatch => incremental_batch(&mut rng)?,
        Suite::PosteriorMatch => posterior_match(&mut rng)?,
        Suite::CountInvariance => count_invariance(seed)?,
        Suite::KlConcentration => kl_concentration(&mut rng)?,
        Suite::Gradient => gradient(&mut rng)?,
        Suite::Pinsker => pinsker(&mut rng)?,
    };
    Ok(SuiteReport { suite, passed, detail })
}

fn random_spd(n: usize, rng: &mut SeededRng) -> Result<SpdMatrix> {
    let mut b = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = rng.standard_normal() / (n as f64).sqrt();
        }
    }
    let mut s = b.matmul(&b.transpose())?;
    for i in 0..n {
        s[(i, i)] += 0.5;
    }
    SpdMatrix::new(s)
}

fn random_vec(n: usize, rng: &mut SeededRng) -> Vec<f64> {
    (0..n).map(|_| rng.standard_normal()).collect()
}

fn relative_error(x: &[f64], reference: &[f64]) -> f64 {
    let diff: f64 = x.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = reference.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / norm.max(1e-300)
}

/// 100 random histories with `N ≤ 10`, `T ≤ 50`; every model against the batch fit.
fn incremental_batch(rng: &mut SeededRng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = 1 + rng.index(10);
        let t = rng.index(51);
        let models = 1 + rng.index(5);
        let prior_mean = random_vec(n, rng);
        let prior_cov = random_spd(n, rng)?;
        let noise_var = rng.uniform_range(0.1, 4.0);
        let mut ens = es_init_tracked(&prior_mean, &prior_cov, noise_var, models, rng)?;
        for _ in 0..t {
            let a = random_vec(n, rng);
            let r = rng.normal(0.0, 2.0);
            let w: Vec<f64> = (0..models).map(|_| noise_var.sqrt() * rng.standard_normal()).collect();
            ens.update(&a, r, &w)?;
        }
        for m in 0..models {
            let anchor = &ens.anchors().expect("tracked")[m];
            let history = ens.history_for(m).expect("tracked");
            let batch = batch_fit(anchor, &history, &prior_cov, noise_var)?;
            worst = worst.max(relative_error(ens.model(m), &batch));
        }
    }
    Ok((worst <= 1e-8, format!("max relative error {worst:.3e} (tol 1e-8)")))
}

/// Fixed 20-step action sequence, `N = 5`, `M = 10⁴`.
fn posterior_match(rng: &mut SeededRng) -> Result<(bool, String)> {
    const N: usize = 5;
    const M: usize = 10_000;
    let prior_mean = vec![0.0; N];
    let prior_cov = SpdMatrix::identity(N);
    let noise_var = 1.0;
    let theta = random_vec(N, rng);
    let mut belief = GaussianBelief::new(prior_mean.clone(), prior_cov.clone(), noise_var)?;
    let mut ens = es_init(&prior_mean, &prior_cov, noise_var, M, rng)?;
    for t in 0..20 {
        let mut a = vec![0.0; N];
        a[t % N] = 1.0;
        a[(t * 3 + 1) % N] += 0.5;
        let r = crate::linalg::dot(&theta, &a) + rng.standard_normal();
        belief.update(&a, r)?;
        let w: Vec<f64> = (0..M).map(|_| rng.standard_normal()).collect();
        ens.update(&a, r, &w)?;
    }
    let (mean, cov) = ens.empirical_moments();
    let mut mean_ok = true;
    let mut worst_z: f64 = 0.0;
    for i in 0..N {
        let sd = (belief.cov().get(i, i) / M as f64).sqrt();
        let z = (mean[i] - belief.mean()[i]).abs() / sd;
        worst_z = worst_z.max(z);
        mean_ok &= z <= 4.0;
    }
    let cov_err = cov.relative_frobenius_error(belief.cov().as_matrix())?;
    Ok((
        mean_ok && cov_err <= 0.1,
        format!("max mean deviation {worst_z:.2} sd (tol 4), covariance error {cov_err:.4} (tol 0.1)"),
    ))
}

/// State after playing `sequence` on independent arms with coupled noise.
pub fn coupled_replay(
    seed: u64,
    theta: &[f64],
    sequence: &[usize],
    models: usize,
) -> Result<(GaussianBelief, LinearEnsemble, ActionDistribution, ActionDistribution)> {
    let k = theta.len();
    let actions = ActionSet::basis(k)?;
    let noise = NoiseTable::coupled(seed);
    let prior_cov = SpdMatrix::identity(k);
    let mut belief = GaussianBelief::new(vec![0.0; k], prior_cov.clone(), 1.0)?;
    let mut init_rng = SeededRng::for_role(seed, Role::Agent, &[0]);
    let mut ens = es_init(&vec![0.0; k], &prior_cov, 1.0, models, &mut init_rng)?;
    let mut unused = SeededRng::new(0);
    let mut counts = vec![0u64; k];
    for &i in sequence {
        let a = actions.get(i);
        let n = counts[i];
        let r = theta[i] + noise.reward_noise(n, i, &mut unused);
        belief.update(a, r)?;
        let w = noise.perturbations(n, i, models, 1.0, &mut unused);
        ens.update(a, r, &w)?;
        counts[i] += 1;
    }
    let vars: Vec<f64> = (0..k).map(|i| belief.cov().get(i, i)).collect();
    let p = exact_p_independent(belief.mean(), &vars)?;
    let p_hat = ens.action_distribution(&actions);
    Ok((belief, ens, p, p_hat))
}

fn count_invariance(seed: u64) -> Result<(bool, String)> {
    let mut rng = SeededRng::for_role(seed, Role::Verification, &[Suite::CountInvariance as u64]);
    let k = 6;
    let theta = random_vec(k, &mut rng);
    let mut sequence: Vec<usize> = (0..40).map(|_| rng.index(k)).collect();
    let first = coupled_replay(seed, &theta, &sequence, 25)?;
    let mut identical = true;
    for _ in 0..5 {
        for i in (1..sequence.len()).rev() {
            sequence.swap(i, rng.index(i + 1));
        }
        let other = coupled_replay(seed, &theta, &sequence, 25)?;
        identical &= first.0 == other.0 && first.1 == other.1 && first.2 == other.2 && first.3 == other.3;
    }
    Ok((identical, format!("5 permutations of a 40-step sequence, bit-identical: {identical}")))
}

/// Mean `KL(p̂ ‖ p)` after 50 observations of a 5-arm instance, per ensemble size.
pub fn kl_by_ensemble_size(sizes: &[usize], redraws: usize, rng: &mut SeededRng) -> Result<Vec<f64>> {
    let k = 5;
    let actions = ActionSet::basis(k)?;
    let prior_cov = SpdMatrix::identity(k);
    let theta = random_vec(k, rng);
    let mut belief = GaussianBelief::new(vec![0.0; k], prior_cov.clone(), 1.0)?;
    let mut history = Vec::with_capacity(50);
    for t in 0..50 {
        let i = t % k;
        let r = theta[i] + rng.standard_normal();
        belief.update(actions.get(i), r)?;
        history.push((i, r));
    }
    let vars: Vec<f64> = (0..k).map(|i| belief.cov().get(i, i)).collect();
    let p = exact_p_independent(belief.mean(), &vars)?;
    let mut out = Vec::with_capacity(sizes.len());
    for &m in sizes {
        let mut total = 0.0;
        for _ in 0..redraws {
            let mut ens = es_init(&vec![0.0; k], &prior_cov, 1.0, m, rng)?;
            for &(i, r) in &history {
                let w: Vec<f64> = (0..m).map(|_| rng.standard_normal()).collect();
                ens.update(actions.get(i), r, &w)?;
            }
            total += kl_divergence(&ens.action_distribution(&actions), &p)?;
        }
        out.push(total / redraws as f64);
    }
    Ok(out)
}

fn kl_concentration(rng: &mut SeededRng) -> Result<(bool, String)> {
    let sizes = [10, 100, 1000, 10_000];
    let kl = kl_by_ensemble_size(&sizes, 200, rng)?;
    let monotone = kl.windows(2).all(|w| w[1] < w[0]);
    let last = kl[kl.len() - 1];
    let summary: Vec<String> = sizes.iter().zip(&kl).map(|(m, v)| format!("M={m}: {v:.3e}")).collect();
    Ok((monotone && last < 0.01, summary.join(", ")))
}

/// Smallest `|pre-activation|` over the batch, or `∞` without a hidden layer.
fn kink_distance(params: &MlpParams, inputs: &[Vec<f64>]) -> f64 {
    let arch = params.arch();
    let (n, hidden) = (arch.inputs(), arch.hidden().unwrap_or(1));
    let w1 = params.w1();
    let mut closest = f64::INFINITY;
    for a in inputs {
        for j in 0..hidden {
            let z: f64 = (0..n).map(|i| w1[j * n + i] * a[i]).sum();
            closest = closest.min(z.abs());
        }
    }
    closest
}

/// Largest relative error of the analytic gradient against central
/// differences with `h = 1e-5`, over 20 random non-kink points.
pub fn gradient_check(arch: Architecture, rng: &mut SeededRng) -> Result<f64> {
    let h = 1e-5;
    let activation = Activation::LeakyRelu;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < 20 {
        let params = MlpParams::sample_prior(arch, 1.0, rng)?;
        let anchor = MlpParams::sample_prior(arch, 1.0, rng)?;
        let inputs: Vec<Vec<f64>> = (0..8).map(|_| random_vec(arch.inputs(), rng)).collect();
        let targets = random_vec(8, rng);
        if kink_distance(&params, &inputs) < 1e-2 {
            continue;
        }
        let batch: Vec<(&[f64], f64)> = inputs.iter().map(|a| a.as_slice()).zip(targets.iter().copied()).collect();
        let (_, grad) = loss_and_gradient(&params, &anchor, &batch, 2.0, 0.5, activation)?;
        let mut numeric = vec![0.0; params.len()];
        for (i, slot) in numeric.iter_mut().enumerate() {
            let mut plus = params.clone();
            plus.as_mut_slice()[i] += h;
            let mut minus = params.clone();
            minus.as_mut_slice()[i] -= h;
            let lp = loss_and_gradient(&plus, &anchor, &batch, 2.0, 0.5, activation)?.0;
            let lm = loss_and_gradient(&minus, &anchor, &batch, 2.0, 0.5, activation)?.0;
            *slot = (lp - lm) / (2.0 * h);
        }
        for (g, fd) in grad.as_slice().iter().zip(&numeric) {
            worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-3));
        }
        checked += 1;
    }
    Ok(worst)
}

fn gradient(rng: &mut SeededRng) -> Result<(bool, String)> {
    let neuron = gradient_check(Architecture::Neuron { inputs: 6 }, rng)?;
    let two_layer = gradient_check(Architecture::TwoLayer { inputs: 5, hidden: 7 }, rng)?;
    Ok((
        neuron <= 1e-4 && two_layer <= 1e-4,
        format!("neuron {neuron:.3e}, two-layer {two_layer:.3e} (tol 1e-4)"),
    ))
}

fn random_simplex(k: usize, rng: &mut SeededRng) -> Result<ActionDistribution> {
    let raw: Vec<f64> = (0..k).map(|_| -rng.uniform().max(1e-300).ln()).collect();
    let total: f64 = raw.iter().sum();
    ActionDistribution::new(raw.into_iter().map(|x| x / total).collect())
}

/// `‖p̂ − p‖₁ ≤ √(2·KL(p̂‖p))` on random pairs.
fn pinsker(rng: &mut SeededRng) -> Result<(bool, String)> {
    let mut violations = 0;
    for _ in 0..1000 {
        let k = 2 + rng.index(9);
        let p = random_simplex(k, rng)?;
        let q = random_simplex(k, rng)?;
        let tv = tv_distance(&p, &q)?;
        let kl = kl_divergence(&p, &q)?;
        if tv > (2.0 * kl).sqrt() + 1e-12 {
            violations += 1;
        }
    }
    Ok((violations == 0, format!("{violations} violations in 1000 random pairs")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().unwrap_err().is_config());
    }

    #[test]
    fn cheap_suites_pass() {
        for s in [Suite::IncrementalBatch, Suite::CountInvariance, Suite::Gradient, Suite::Pinsker] {
            let report = run_suite(s, 5).unwrap();
            assert!(report.passed, "{report}");
        }
    }

    #[test]
    fn non_basis_actions_replay_within_rounding() {
        // General action vectors only reorder floating-point sums.
        let prior_cov = SpdMatrix::identity(3);
        let acts = [vec![1.0, 0.3, -0.2], vec![0.1, 1.0, 0.5], vec![-0.4, 0.2, 1.0]];
        let run = |order: &[usize]| {
            let mut b = GaussianBelief::new(vec![0.0; 3], prior_cov.clone(), 1.0).unwrap();
            for &i in order {
                b.update(&acts[i], i as f64 - 1.0).unwrap();
            }
            b
        };
        let x = run(&[0, 1, 2, 0, 1]);
        let y = run(&[1, 0, 0, 2, 1]);
        assert!(relative_error(x.mean(), y.mean()) < 1e-9);
    }
}
