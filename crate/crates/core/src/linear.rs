//! Exact Thompson sampling and ensemble sampling for linear-Gaussian bandits.
//!
//! Both agents share the same covariance recursion. The conjugate mean and
//! every ensemble member are conditioned with the same Kalman-style gain:
//! `x ← x + Σa·(y − aᵀx)/(σ² + aᵀΣa)`, which is the recursion
//! `Σₜ₊₁(Σₜ⁻¹x + a·y/σ²)` with the inverse eliminated.

use crate::env::ActionSet;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{cholesky, dot, sample_with_factor, Matrix, SpdMatrix};
use crate::rng::SeededRng;
use crate::stats::ActionDistribution;

/// Index of the largest `θᵀa`, lowest index on ties.
pub fn argmax_action(theta: &[f64], actions: &ActionSet) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, a) in actions.iter().enumerate() {
        let v = dot(theta, a);
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

/// Conjugate Gaussian posterior `N(μₜ, Σₜ)` for a known noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    mean: Vec<f64>,
    cov: SpdMatrix,
    noise_var: f64,
}

impl GaussianBelief {
    pub fn new(mean: Vec<f64>, cov: SpdMatrix, noise_var: f64) -> Result<Self> {
        check_dim(cov.dim(), mean.len())?;
        if !(noise_var > 0.0) {
            return Err(Error::invalid("noise variance must be positive"));
        }
        Ok(GaussianBelief { mean, cov, noise_var })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &SpdMatrix {
        &self.cov
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// In-place conjugate update with observation `(a, r)`.
    pub fn update(&mut self, a: &[f64], r: f64) -> Result<()> {
        check_dim(self.dim(), a.len())?;
        let gain = self.cov.rank_one_precision_update(a, self.noise_var)?;
        gain.condition(&mut self.mean, a, r);
        Ok(())
    }

    pub fn sample(&self, rng: &mut SeededRng) -> Result<Vec<f64>> {
        sample_with_factor(&self.mean, &self.cov.cholesky()?, rng)
    }
}

pub fn ts_update(belief: &GaussianBelief, a: &[f64], r: f64) -> Result<GaussianBelief> {
    let mut next = belief.clone();
    next.update(a, r)?;
    Ok(next)
}

/// Samples `θ̂ ∼ N(μₜ, Σₜ)` and acts greedily.
pub fn ts_select(belief: &GaussianBelief, actions: &ActionSet, rng: &mut SeededRng) -> Result<usize> {
    check_dim(belief.dim(), actions.dim())?;
    let theta = belief.sample(rng)?;
    Ok(argmax_action(&theta, actions))
}

/// One observation with the perturbation a particular model saw.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedObservation {
    pub action: Vec<f64>,
    pub reward: f64,
    pub perturbation: f64,
}

/// Regularized least squares anchored at `anchor`:
///
/// `argmin_ν (1/σ²)·Σ(r + w̃ − aᵀν)² + (ν − anchor)ᵀΣ₀⁻¹(ν − anchor)`,
///
/// solved through the normal equations and a Cholesky solve.
pub fn batch_fit(
    anchor: &[f64],
    history: &[PerturbedObservation],
    prior_cov: &SpdMatrix,
    noise_var: f64,
) -> Result<Vec<f64>> {
    let n = anchor.len();
    check_dim(prior_cov.dim(), n)?;
    if !(noise_var > 0.0) {
        return Err(Error::invalid("noise variance must be positive"));
    }
    let prior_precision = prior_cov.inverse()?;
    let mut precision = prior_precision.clone();
    let mut rhs = prior_precision.matvec(anchor)?;
    for obs in history {
        check_dim(n, obs.action.len())?;
        let y = obs.reward + obs.perturbation;
        for i in 0..n {
            rhs[i] += obs.action[i] * y / noise_var;
            for j in 0..n {
                precision[(i, j)] += obs.action[i] * obs.action[j] / noise_var;
            }
        }
    }
    cholesky(&precision)?.solve(&rhs)
}

/// `M` perturbed models sharing one covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEnsemble {
    dim: usize,
    models: Vec<f64>,
    cov: SpdMatrix,
    prior_cov: SpdMatrix,
    noise_var: f64,
    trace: Option<Trace>,
}

/// Anchors and per-model history, kept only for verification.
#[derive(Debug, Clone, PartialEq)]
struct Trace {
    anchors: Vec<Vec<f64>>,
    history: Vec<(Vec<f64>, f64, Vec<f64>)>,
}

impl LinearEnsemble {
    pub fn models(&self) -> usize {
        self.models.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn model(&self, m: usize) -> &[f64] {
        &self.models[m * self.dim..(m + 1) * self.dim]
    }

    pub fn model_vectors(&self) -> Vec<Vec<f64>> {
        self.models.chunks_exact(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn cov(&self) -> &SpdMatrix {
        &self.cov
    }

    pub fn prior_cov(&self) -> &SpdMatrix {
        &self.prior_cov
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn anchors(&self) -> Option<&[Vec<f64>]> {
        self.trace.as_ref().map(|t| t.anchors.as_slice())
    }

    /// Observation history as seen by model `m` (tracked ensembles only).
    pub fn history_for(&self, m: usize) -> Option<Vec<PerturbedObservation>> {
        let trace = self.trace.as_ref()?;
        Some(
            trace
                .history
                .iter()
                .map(|(a, r, w)| PerturbedObservation {
                    action: a.clone(),
                    reward: *r,
                    perturbation: w[m],
                })
                .collect(),
        )
    }

    /// Closed-form refit of model `m` from its anchor and history.
    pub fn batch_refit(&self, m: usize) -> Option<Result<Vec<f64>>> {
        let trace = self.trace.as_ref()?;
        let history = self.history_for(m)?;
        Some(batch_fit(&trace.anchors[m], &history, &self.prior_cov, self.noise_var))
    }

    /// In-place update: shared covariance once, then every model with its
    /// own perturbed target `r + w̃ₘ`.
    pub fn update(&mut self, a: &[f64], r: f64, perturbations: &[f64]) -> Result<()> {
        check_dim(self.dim, a.len())?;
        check_dim(self.models(), perturbations.len())?;
        let gain = self.cov.rank_one_precision_update(a, self.noise_var)?;
        for (model, w) in self.models.chunks_exact_mut(self.dim).zip(perturbations) {
            gain.condition(model, a, r + w);
        }
        if let Some(trace) = &mut self.trace {
            trace.history.push((a.to_vec(), r, perturbations.to_vec()));
        }
        Ok(())
    }

    /// Uniform model, then its greedy action.
    pub fn select(&self, actions: &ActionSet, rng: &mut SeededRng) -> usize {
        let m = rng.index(self.models());
        argmax_action(self.model(m), actions)
    }

    /// Fraction of models whose greedy action is each `a`.
    pub fn action_distribution(&self, actions: &ActionSet) -> ActionDistribution {
        let mut counts = vec![0u64; actions.len()];
        for model in self.models.chunks_exact(self.dim) {
            counts[argmax_action(model, actions)] += 1;
        }
        ActionDistribution::from_counts(&counts).expect("at least one model")
    }

    /// Empirical mean and covariance of the ensemble members.
    pub fn empirical_moments(&self) -> (Vec<f64>, Matrix) {
        crate::linalg::empirical_covariance(&self.model_vectors())
    }
}

fn init(
    prior_mean: &[f64],
    prior_cov: &SpdMatrix,
    noise_var: f64,
    models: usize,
    rng: &mut SeededRng,
    tracked: bool,
) -> Result<LinearEnsemble> {
    if models == 0 {
        return Err(Error::invalid("an ensemble needs at least one model"));
    }
    if !(noise_var > 0.0) {
        return Err(Error::invalid("noise variance must be positive"));
    }
    let dim = prior_mean.len();
    check_dim(prior_cov.dim(), dim)?;
    let l = prior_cov.cholesky()?;
    let mut data = Vec::with_capacity(models * dim);
    let mut anchors = Vec::new();
    for _ in 0..models {
        let draw = sample_with_factor(prior_mean, &l, rng)?;
        data.extend_from_slice(&draw);
        if tracked {
            anchors.push(draw);
        }
    }
    Ok(LinearEnsemble {
        dim,
        models: data,
        cov: prior_cov.clone(),
        prior_cov: prior_cov.clone(),
        noise_var,
        trace: tracked.then(|| Trace {
            anchors,
            history: Vec::new(),
        }),
    })
}

/// `M` i.i.d. draws from the prior.
pub fn es_init(
    prior_mean: &[f64],
    prior_cov: &SpdMatrix,
    noise_var: f64,
    models: usize,
    rng: &mut SeededRng,
) -> Result<LinearEnsemble> {
    init(prior_mean, prior_cov, noise_var, models, rng, false)
}

/// Like [`es_init`], additionally retaining anchors and history so every
/// model can be checked against [`batch_fit`].
pub fn es_init_tracked(
    prior_mean: &[f64],
    prior_cov: &SpdMatrix,
    noise_var: f64,
    models: usize,
    rng: &mut SeededRng,
) -> Result<LinearEnsemble> {
    init(prior_mean, prior_cov, noise_var, models, rng, true)
}

pub fn es_update(ens: &LinearEnsemble, a: &[f64], r: f64, perturbations: &[f64]) -> Result<LinearEnsemble> {
    let mut next = ens.clone();
    next.update(a, r, perturbations)?;
    Ok(next)
}

pub fn es_select(ens: &LinearEnsemble, actions: &ActionSet, rng: &mut SeededRng) -> usize {
    ens.select(actions, rng)
}

pub fn ensemble_action_dist(ens: &LinearEnsemble, actions: &ActionSet) -> ActionDistribution {
    ens.action_distribution(actions)
}
