use std::path::Path;

use crate::agent::{AgentSpec, Feedback};
use crate::env::{sample_env_from_prior, ActionCounts, NoiseTable};
use crate::error::Result;
use crate::rng::{stream_id, Role, SeededRng};
use crate::stats::{aggregate_regret, RegretSummary};

use super::config::ExperimentConfig;
use super::output;

/// Instantaneous mean-reward regret `R* − R̄_θ(Aₜ)` for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub realization: u64,
    pub regret: Vec<f64>,
}

impl RegretTrace {
    pub fn cumulative(&self) -> f64 {
        self.regret.iter().sum()
    }

    /// Mean over the last `window` periods.
    pub fn trailing_mean(&self, window: usize) -> f64 {
        let w = window.clamp(1, self.regret.len());
        self.regret[self.regret.len() - w..].iter().sum::<f64>() / w as f64
    }
}

/// Runs one realization of one agent.
///
/// The environment, the reward noise, and the agent each draw from their own
/// stream keyed by `(seed, role, realization)`, so every agent faces the same
/// ground truth for a given realization.
pub fn run_realization(config: &ExperimentConfig, agent: &AgentSpec, realization: u64) -> Result<RegretTrace> {
    let seed = config.run.seed;
    let spec = config.env_spec()?;
    let mut env_rng = SeededRng::for_role(seed, Role::Environment, &[realization]);
    let env = sample_env_from_prior(&spec, &mut env_rng)?;
    let mut noise_rng = SeededRng::for_role(seed, Role::RewardNoise, &[realization]);
    let noise = NoiseTable::new(
        config.run.noise_mode,
        stream_id(seed, &[Role::CoupledReward as u64, realization]),
    );
    let mut agent_rng = SeededRng::for_role(seed, Role::Agent, &[realization]);
    let mut policy = agent.build(&env, &mut agent_rng)?;

    let best = env.optimal().1;
    let horizon = config.run.horizon;
    let mut counts = ActionCounts::new(env.num_actions());
    let mut regret = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let mut step = || -> Result<f64> {
            let a = policy.select(env.actions(), t, &mut agent_rng)?;
            let pull_index = counts.get(a.min(env.num_actions() - 1));
            let reward = env.step(a, t, &mut counts, &noise, &mut noise_rng)?;
            let feedback = Feedback {
                action_index: a,
                action: env.actions().get(a),
                reward,
                pull_index,
            };
            policy.update(&feedback, &noise, &mut agent_rng)?;
            Ok(best - env.true_mean(a))
        };
        regret.push(step().map_err(|e| e.at_period(t))?);
    }
    Ok(RegretTrace { realization, regret })
}

/// Thread-count control for the realization pool.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// `None` uses the global pool.
    pub threads: Option<usize>,
}

impl RunOptions {
    pub fn threads(n: usize) -> Self {
        RunOptions { threads: Some(n) }
    }

    #[cfg(feature = "parallel")]
    pub(crate) fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.threads {
            None => Ok(f()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| crate::Error::invalid(format!("thread pool: {e}")))?;
                Ok(pool.install(f))
            }
        }
    }

    #[cfg(not(feature = "parallel"))]
    pub(crate) fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        Ok(f())
    }
}

/// Runs every realization of `agent`, ordered by realization id.
pub fn run_agent(config: &ExperimentConfig, agent: &AgentSpec, options: RunOptions) -> Result<Vec<RegretTrace>> {
    let ids = 0..config.run.realizations as u64;
    options.install(|| {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            ids.into_par_iter()
                .map(|r| run_realization(config, agent, r))
                .collect::<Result<Vec<_>>>()
        }
        #[cfg(not(feature = "parallel"))]
        {
            ids.map(|r| run_realization(config, agent, r)).collect::<Result<Vec<_>>>()
        }
    })?
}

#[derive(Debug, Clone)]
pub struct AgentResult {
    pub label: String,
    pub traces: Vec<RegretTrace>,
    pub summary: RegretSummary,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub agents: Vec<AgentResult>,
}

impl ExperimentOutput {
    pub fn get(&self, label: &str) -> Option<&AgentResult> {
        self.agents.iter().find(|a| a.label == label)
    }
}

/// Runs all agents and writes `summary.csv`, `traces.csv` (unless disabled)
/// and `run.json` when `output` is set. The output directory is checked for
/// writability before any simulation starts.
pub fn run_experiment(config: &ExperimentConfig, output: Option<&Path>, options: RunOptions) -> Result<ExperimentOutput> {
    config.validate()?;
    if config.agents.is_empty() {
        return Err(crate::Error::Config("no agents configured".into()));
    }
    if let Some(dir) = output {
        output::prepare_dir(dir)?;
    }
    let mut agents = Vec::with_capacity(config.agents.len());
    for spec in &config.agents {
        let traces = run_agent(config, spec, options)?;
        let regrets: Vec<Vec<f64>> = traces.iter().map(|t| t.regret.clone()).collect();
        agents.push(AgentResult {
            label: spec.label(),
            summary: aggregate_regret(&regrets)?,
            traces,
        });
    }
    let result = ExperimentOutput { agents };
    if let Some(dir) = output {
        output::write_experiment(dir, config, &result)?;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{EnvConfig, EnvFamilyName, RunConfig};

    fn config(actions: usize, horizon: usize, realizations: usize, agents: Vec<AgentSpec>) -> ExperimentConfig {
        ExperimentConfig::new(
            EnvConfig {
                family: EnvFamilyName::IndependentGaussian,
                actions,
                dim: None,
                hidden: None,
                prior_var: None,
                noise_var: None,
            },
            agents,
            RunConfig {
                horizon,
                realizations,
                seed: 3,
                noise_mode: Default::default(),
                output: None,
                write_traces: true,
            },
        )
    }

    #[test]
    fn single_arm_has_no_regret() {
        let c = config(1, 50, 1, vec![]);
        for spec in [AgentSpec::thompson(), AgentSpec::ensemble(3), AgentSpec::epsilon_greedy(1.0)] {
            let trace = run_realization(&c, &spec, 0).unwrap();
            assert!(trace.regret.iter().all(|&r| r == 0.0));
        }
    }

    #[test]
    fn realization_is_deterministic() {
        let c = config(5, 40, 1, vec![]);
        let a = run_realization(&c, &AgentSpec::ensemble(4), 2).unwrap();
        let b = run_realization(&c, &AgentSpec::ensemble(4), 2).unwrap();
        assert_eq!(a, b);
        assert!(a.regret.iter().all(|&r| r >= 0.0));
    }

    #[test]
    fn thompson_beats_uniform_play() {
        let mut c = config(2, 200, 1, vec![]);
        c.env.prior_var = Some(4.0);
        let (mut ts, mut uniform) = (0.0, 0.0);
        for r in 0..20 {
            ts += run_realization(&c, &AgentSpec::thompson(), r).unwrap().cumulative();
            uniform += run_realization(&c, &AgentSpec::epsilon_greedy(1.0), r).unwrap().cumulative();
        }
        assert!(ts < uniform, "{ts} vs {uniform}");
    }

    #[test]
    fn one_realization_summary_is_the_trace() {
        let c = config(4, 30, 1, vec![AgentSpec::thompson()]);
        let out = run_experiment(&c, None, RunOptions::default()).unwrap();
        let agent = &out.agents[0];
        assert_eq!(agent.summary.per_period_mean, agent.traces[0].regret);
    }

    #[test]
    fn trailing_mean_window() {
        let t = RegretTrace { realization: 0, regret: vec![1.0, 2.0, 3.0, 4.0] };
        assert_eq!(t.trailing_mean(1), 4.0);
        assert_eq!(t.trailing_mean(2), 3.5);
        assert_eq!(t.trailing_mean(10), 2.5);
    }
}
