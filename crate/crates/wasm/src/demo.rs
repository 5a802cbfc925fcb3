//! Plain-Rust demo operations; `lib.rs` wraps them for the browser.

use serde::Serialize;

use ensemble_sampling::agent::AgentSpec;
use ensemble_sampling::env::ActionSet;
use ensemble_sampling::harness::{run_experiment, EnvConfig, EnvFamilyName, ExperimentConfig, RunConfig, RunOptions};
use ensemble_sampling::linalg::SpdMatrix;
use ensemble_sampling::linear::{es_init, GaussianBelief};
use ensemble_sampling::rng::SeededRng;
use ensemble_sampling::stats::{
    concentration_bound, exact_p_independent, kl_divergence, theorem1_assumption_holds, theorem1_min_m, tv_distance,
};
use ensemble_sampling::Result;

/// Limits that keep a browser tab responsive.
pub const MAX_ARMS: usize = 50;
pub const MAX_MODELS: usize = 20_000;
pub const MAX_HORIZON: usize = 2_000;
pub const MAX_REALIZATIONS: usize = 500;

fn limit(name: &str, value: usize, max: usize) -> Result<()> {
    if value == 0 || value > max {
        return Err(ensemble_sampling::Error::InvalidArgument(format!("{name} must be in 1..={max}, got {value}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ActionDistributionDemo {
    pub theta: Vec<f64>,
    pub posterior_mean: Vec<f64>,
    pub posterior_var: Vec<f64>,
    pub exact: Vec<f64>,
    pub ensemble: Vec<f64>,
    pub kl: f64,
    pub tv: f64,
}

/// Independent Gaussian arms, `pulls` round-robin observations, then the
/// posterior optimal-action distribution against an `models`-member ensemble.
pub fn action_distribution(arms: usize, pulls: usize, models: usize, seed: u64) -> Result<ActionDistributionDemo> {
    limit("arms", arms, MAX_ARMS)?;
    limit("models", models, MAX_MODELS)?;
    let mut rng = SeededRng::new(seed);
    let actions = ActionSet::basis(arms)?;
    let prior = SpdMatrix::identity(arms);
    let theta: Vec<f64> = (0..arms).map(|_| rng.standard_normal()).collect();
    let mut belief = GaussianBelief::new(vec![0.0; arms], prior.clone(), 1.0)?;
    let mut ens = es_init(&vec![0.0; arms], &prior, 1.0, models, &mut rng)?;
    for t in 0..pulls.min(10 * MAX_HORIZON) {
        let i = t % arms;
        let r = theta[i] + rng.standard_normal();
        belief.update(actions.get(i), r)?;
        let w: Vec<f64> = (0..models).map(|_| rng.standard_normal()).collect();
        ens.update(actions.get(i), r, &w)?;
    }
    let posterior_var: Vec<f64> = (0..arms).map(|i| belief.cov().get(i, i)).collect();
    let exact = exact_p_independent(belief.mean(), &posterior_var)?;
    let p_hat = ens.action_distribution(&actions);
    Ok(ActionDistributionDemo {
        kl: kl_divergence(&p_hat, &exact)?,
        tv: tv_distance(&p_hat, &exact)?,
        theta,
        posterior_mean: belief.mean().to_vec(),
        posterior_var,
        exact: exact.probs().to_vec(),
        ensemble: p_hat.probs().to_vec(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Curve {
    pub label: String,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub cumulative: f64,
}

/// Per-period regret of Thompson sampling and ensemble sampling for each size in `models`.
pub fn regret_curves(arms: usize, horizon: usize, realizations: usize, models: &[usize], seed: u64) -> Result<Vec<Curve>> {
    limit("arms", arms, MAX_ARMS)?;
    limit("horizon", horizon, MAX_HORIZON)?;
    limit("realizations", realizations, MAX_REALIZATIONS)?;
    let mut agents = vec![AgentSpec::thompson()];
    for &m in models {
        limit("models", m, 1000)?;
        agents.push(AgentSpec::ensemble(m));
    }
    agents.dedup_by_key(|a| a.label());
    let config = ExperimentConfig::new(
        EnvConfig {
            family: EnvFamilyName::IndependentGaussian,
            actions: arms,
            dim: None,
            hidden: None,
            prior_var: None,
            noise_var: None,
        },
        agents,
        RunConfig {
            horizon,
            realizations,
            seed,
            noise_mode: Default::default(),
            output: None,
            write_traces: false,
        },
    );
    let out = run_experiment(&config, None, RunOptions::default())?;
    Ok(out
        .agents
        .into_iter()
        .map(|a| Curve {
            label: a.label,
            cumulative: a.summary.cumulative_mean,
            mean: a.summary.per_period_mean,
            stderr: a.summary.per_period_stderr,
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundDemo {
    pub models: u64,
    pub assumption_holds: bool,
    /// `(M, bound)` points of the concentration tail at period `horizon`.
    pub concentration: Vec<(u64, f64)>,
}

pub fn ensemble_size_bound(actions: u64, horizon: u64, eps: f64) -> Result<BoundDemo> {
    let models = theorem1_min_m(actions, horizon, eps)?;
    let step = (models / 40).max(1);
    let concentration = (0..=40u64)
        .map(|i| i * step)
        .map(|m| (m, concentration_bound(actions, m, eps, horizon)))
        .collect();
    Ok(BoundDemo {
        models,
        assumption_holds: theorem1_assumption_holds(actions, horizon, eps),
        concentration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distributions_are_normalized() {
        let d = action_distribution(5, 100, 500, 1).unwrap();
        assert!((d.exact.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((d.ensemble.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(d.tv <= (2.0 * d.kl).sqrt() + 1e-12);
        assert!(action_distribution(0, 10, 10, 1).is_err());
        assert!(action_distribution(3, 10, MAX_MODELS + 1, 1).is_err());
    }

    #[test]
    fn curves_include_thompson_first() {
        let c = regret_curves(4, 30, 5, &[2, 8, 8], 3).unwrap();
        let labels: Vec<&str> = c.iter().map(|x| x.label.as_str()).collect();
        assert_eq!(labels, ["ts", "es_m2", "es_m8"]);
        assert!(c.iter().all(|x| x.mean.len() == 30));
    }

    #[test]
    fn bound_matches_library() {
        let b = ensemble_size_bound(10, 100, 0.5).unwrap();
        assert_eq!(b.models, (160.0f64 * 32000f64.ln()).ceil() as u64);
        assert!(b.assumption_holds);
        assert!(b.concentration.iter().all(|&(_, p)| (0.0..=1.0).contains(&p)));
        assert_eq!(b.concentration.len(), 41);
    }
}
