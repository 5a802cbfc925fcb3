//! The agent interface used by the episode loop, and agent specifications.

use serde::{Deserialize, Serialize};

use crate::env::{ActionSet, EnvFamily, Environment, NoiseTable};
use crate::error::{Error, Result};
use crate::linear::{es_init, ts_select, GaussianBelief, LinearEnsemble};
use crate::neural::{
    default_dropout_learning_rate, DropoutAgent, EpsilonGreedyAgent, EpsilonSchedule, MinibatchMode, NeuralEnsemble,
    SgdConfig,
};
use crate::rng::SeededRng;

/// What the agent learns after acting at one period.
#[derive(Debug, Clone, Copy)]
pub struct Feedback<'a> {
    pub action_index: usize,
    pub action: &'a [f64],
    pub reward: f64,
    /// `c_{t,a}` before this pull; keys the coupled perturbations.
    pub pull_index: u64,
}

pub trait Agent: Send {
    fn select(&mut self, actions: &ActionSet, t: usize, rng: &mut SeededRng) -> Result<usize>;

    fn update(&mut self, feedback: &Feedback<'_>, noise: &NoiseTable, rng: &mut SeededRng) -> Result<()>;
}

/// Exact Thompson sampling on the conjugate posterior.
#[derive(Debug, Clone)]
pub struct ThompsonAgent(pub GaussianBelief);

impl Agent for ThompsonAgent {
    fn select(&mut self, actions: &ActionSet, _t: usize, rng: &mut SeededRng) -> Result<usize> {
        ts_select(&self.0, actions, rng)
    }

    fn update(&mut self, fb: &Feedback<'_>, _noise: &NoiseTable, _rng: &mut SeededRng) -> Result<()> {
        self.0.update(fb.action, fb.reward)
    }
}

/// Ensemble sampling with the incremental linear recursion.
#[derive(Debug, Clone)]
pub struct LinearEnsembleAgent(pub LinearEnsemble);

impl Agent for LinearEnsembleAgent {
    fn select(&mut self, actions: &ActionSet, _t: usize, rng: &mut SeededRng) -> Result<usize> {
        Ok(self.0.select(actions, rng))
    }

    fn update(&mut self, fb: &Feedback<'_>, noise: &NoiseTable, rng: &mut SeededRng) -> Result<()> {
        let sd = self.0.noise_var().sqrt();
        let w = noise.perturbations(fb.pull_index, fb.action_index, self.0.models(), sd, rng);
        self.0.update(fb.action, fb.reward, &w)
    }
}

/// ε-greedy with respect to the posterior mean.
#[derive(Debug, Clone)]
pub struct LinearEpsilonGreedy {
    pub belief: GaussianBelief,
    pub schedule: EpsilonSchedule,
}

impl Agent for LinearEpsilonGreedy {
    fn select(&mut self, actions: &ActionSet, t: usize, rng: &mut SeededRng) -> Result<usize> {
        if rng.bernoulli(self.schedule.epsilon(t)) {
            return Ok(rng.index(actions.len()));
        }
        Ok(crate::linear::argmax_action(self.belief.mean(), actions))
    }

    fn update(&mut self, fb: &Feedback<'_>, _noise: &NoiseTable, _rng: &mut SeededRng) -> Result<()> {
        self.belief.update(fb.action, fb.reward)
    }
}

/// Anchored neural ensemble.
#[derive(Debug, Clone)]
pub struct NeuralEnsembleAgent(pub NeuralEnsemble);

impl Agent for NeuralEnsembleAgent {
    fn select(&mut self, actions: &ActionSet, _t: usize, rng: &mut SeededRng) -> Result<usize> {
        Ok(self.0.select(actions, rng))
    }

    fn update(&mut self, fb: &Feedback<'_>, noise: &NoiseTable, rng: &mut SeededRng) -> Result<()> {
        let sd = self.0.noise_var().sqrt();
        let w = noise.perturbations(fb.pull_index, fb.action_index, self.0.len(), sd, rng);
        self.0.update_with(fb.action, fb.reward, &w, rng)
    }
}

impl Agent for EpsilonGreedyAgent {
    fn select(&mut self, actions: &ActionSet, t: usize, rng: &mut SeededRng) -> Result<usize> {
        Ok(EpsilonGreedyAgent::select(self, actions, t, rng))
    }

    fn update(&mut self, fb: &Feedback<'_>, _noise: &NoiseTable, rng: &mut SeededRng) -> Result<()> {
        EpsilonGreedyAgent::update(self, fb.action, fb.reward, rng)
    }
}

impl Agent for DropoutAgent {
    fn select(&mut self, actions: &ActionSet, _t: usize, rng: &mut SeededRng) -> Result<usize> {
        Ok(DropoutAgent::select(self, actions, rng))
    }

    fn update(&mut self, fb: &Feedback<'_>, _noise: &NoiseTable, rng: &mut SeededRng) -> Result<()> {
        DropoutAgent::update(self, fb.action, fb.reward, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Thompson,
    Ensemble,
    EpsilonGreedy,
    Dropout,
}

/// Agent kind plus hyperparameters, as written in experiment configs.
///
/// Which fields are allowed depends on `kind` and on the environment family;
/// see [`AgentSpec::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub kind: AgentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub models: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anneal_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sgd_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minibatch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minibatch_mode: Option<MinibatchMode>,
}

impl AgentSpec {
    fn bare(kind: AgentKind) -> Self {
        AgentSpec {
            kind,
            name: None,
            models: None,
            epsilon: None,
            anneal_k: None,
            drop_prob: None,
            learning_rate: None,
            sgd_steps: None,
            minibatch: None,
            minibatch_mode: None,
        }
    }

    pub fn thompson() -> Self {
        Self::bare(AgentKind::Thompson)
    }

    pub fn ensemble(models: usize) -> Self {
        AgentSpec {
            models: Some(models),
            ..Self::bare(AgentKind::Ensemble)
        }
    }

    pub fn epsilon_greedy(epsilon: f64) -> Self {
        AgentSpec {
            epsilon: Some(epsilon),
            ..Self::bare(AgentKind::EpsilonGreedy)
        }
    }

    pub fn annealing(k: f64) -> Self {
        AgentSpec {
            anneal_k: Some(k),
            ..Self::bare(AgentKind::EpsilonGreedy)
        }
    }

    pub fn dropout(drop_prob: f64) -> Self {
        AgentSpec {
            drop_prob: Some(drop_prob),
            ..Self::bare(AgentKind::Dropout)
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Label used in CSV output.
    pub fn label(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        match self.kind {
            AgentKind::Thompson => "ts".to_string(),
            AgentKind::Ensemble => format!("es_m{}", self.models.unwrap_or(0)),
            AgentKind::EpsilonGreedy => match (self.epsilon, self.anneal_k) {
                (Some(e), _) => format!("eps_{e}"),
                (None, Some(k)) => format!("eps_anneal_{k}"),
                _ => "eps".to_string(),
            },
            AgentKind::Dropout => format!("dropout_{}", self.drop_prob.unwrap_or(0.0)),
        }
    }

    fn has_sgd_fields(&self) -> bool {
        self.learning_rate.is_some() || self.sgd_steps.is_some() || self.minibatch.is_some() || self.minibatch_mode.is_some()
    }

    /// SGD budget with defaults: 3 steps, minibatch 64, learning rate 0.1
    /// (dropout: 0.01/0.01/0.02/0.05 by drop probability).
    pub fn sgd_config(&self) -> SgdConfig {
        let default_lr = match (self.kind, self.drop_prob) {
            (AgentKind::Dropout, Some(p)) => default_dropout_learning_rate(p),
            _ => 0.1,
        };
        let d = SgdConfig::default();
        SgdConfig {
            learning_rate: self.learning_rate.unwrap_or(default_lr),
            steps: self.sgd_steps.unwrap_or(d.steps),
            minibatch: self.minibatch.unwrap_or(d.minibatch),
            mode: self.minibatch_mode.unwrap_or(d.mode),
        }
    }

    fn schedule(&self) -> Result<EpsilonSchedule> {
        match (self.epsilon, self.anneal_k) {
            (Some(e), None) => Ok(EpsilonSchedule::Fixed(e)),
            (None, Some(k)) => Ok(EpsilonSchedule::Annealing { k }),
            _ => Err(Error::Config(format!(
                "agent '{}': epsilon_greedy needs exactly one of `epsilon` or `anneal_k`",
                self.label()
            ))),
        }
    }

    /// Checks the fields against the kind's schema for an environment family.
    pub fn validate(&self, family: EnvFamily) -> Result<()> {
        let label = self.label();
        let fail = |msg: &str| Err(Error::Config(format!("agent '{label}': {msg}")));
        let linear = matches!(family, EnvFamily::Linear | EnvFamily::IndependentGaussian);
        if linear && self.has_sgd_fields() {
            return fail("SGD settings only apply to neural environments");
        }
        match self.kind {
            AgentKind::Thompson => {
                if !linear {
                    return fail("exact Thompson sampling needs a linear-Gaussian environment");
                }
                if self.models.is_some() || self.epsilon.is_some() || self.anneal_k.is_some() || self.drop_prob.is_some() {
                    return fail("thompson takes no hyperparameters");
                }
            }
            AgentKind::Ensemble => {
                match self.models {
                    Some(m) if m >= 1 => {}
                    _ => return fail("ensemble needs `models` >= 1"),
                }
                if self.epsilon.is_some() || self.anneal_k.is_some() || self.drop_prob.is_some() {
                    return fail("ensemble takes only `models` and SGD settings");
                }
            }
            AgentKind::EpsilonGreedy => {
                self.schedule()?
                    .validate()
                    .map_err(|e| Error::Config(format!("agent '{label}': {e}")))?;
                if self.models.is_some() || self.drop_prob.is_some() {
                    return fail("epsilon_greedy takes `epsilon` or `anneal_k` and SGD settings");
                }
            }
            AgentKind::Dropout => {
                if family != EnvFamily::TwoLayer {
                    return fail("dropout needs the two_layer environment");
                }
                match self.drop_prob {
                    Some(p) if (0.0..1.0).contains(&p) => {}
                    _ => return fail("dropout needs `drop_prob` in [0, 1)"),
                }
                if self.models.is_some() || self.epsilon.is_some() || self.anneal_k.is_some() {
                    return fail("dropout takes `drop_prob` and SGD settings");
                }
            }
        }
        if !linear {
            self.sgd_config()
                .validate()
                .map_err(|e| Error::Config(format!("agent '{label}': {e}")))?;
        }
        Ok(())
    }

    /// Instantiates the agent for `env`, drawing any prior samples from `rng`.
    pub fn build(&self, env: &Environment, rng: &mut SeededRng) -> Result<Box<dyn Agent>> {
        self.validate(env.family())?;
        let noise_var = env.noise_var();
        if let Some((mean, cov)) = env.linear_prior() {
            return Ok(match self.kind {
                AgentKind::Thompson => Box::new(ThompsonAgent(GaussianBelief::new(mean, cov, noise_var)?)),
                AgentKind::Ensemble => Box::new(LinearEnsembleAgent(es_init(
                    &mean,
                    &cov,
                    noise_var,
                    self.models.unwrap_or(1),
                    rng,
                )?)),
                AgentKind::EpsilonGreedy => Box::new(LinearEpsilonGreedy {
                    belief: GaussianBelief::new(mean, cov, noise_var)?,
                    schedule: self.schedule()?,
                }),
                AgentKind::Dropout => unreachable!("rejected by validate"),
            });
        }
        let (arch, prior_var) = env.neural_prior().expect("neural family");
        let sgd = self.sgd_config();
        Ok(match self.kind {
            AgentKind::Ensemble => Box::new(NeuralEnsembleAgent(NeuralEnsemble::new(
                arch,
                self.models.unwrap_or(1),
                prior_var,
                noise_var,
                sgd,
                rng,
            )?)),
            AgentKind::EpsilonGreedy => Box::new(EpsilonGreedyAgent::new(
                arch,
                prior_var,
                noise_var,
                sgd,
                self.schedule()?,
                rng,
            )?),
            AgentKind::Dropout => Box::new(DropoutAgent::new(
                arch,
                prior_var,
                noise_var,
                sgd,
                self.drop_prob.unwrap_or(0.5),
                rng,
            )?),
            AgentKind::Thompson => unreachable!("rejected by validate"),
        })
    }
}
