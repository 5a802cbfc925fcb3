use std::path::Path;

use crate::agent::AgentSpec;
use crate::env::EnvFamily;
use crate::error::{Error, Result};
use crate::stats::mean_and_stderr;

use super::config::{ExperimentConfig, SearchConfig};
use super::output;
use super::runner::{run_agent, RegretTrace, RunOptions};

/// Mean over realizations of the per-realization regret estimate, with its stderr.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowEstimate {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinModelsRow {
    pub models: usize,
    pub es: WindowEstimate,
    /// Mean of the paired per-realization differences ES − TS.
    pub excess: f64,
    pub excess_stderr: f64,
    pub qualifies: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinModelsReport {
    pub eps_target: f64,
    pub trailing_window: usize,
    pub horizon: usize,
    pub ts: WindowEstimate,
    /// One row per grid point evaluated; the search stops at the first that qualifies.
    pub rows: Vec<MinModelsRow>,
    /// `None` when no grid point qualifies.
    pub minimal: Option<usize>,
}

impl MinModelsReport {
    pub fn minimal_row(&self) -> Option<&MinModelsRow> {
        self.rows.iter().find(|r| r.qualifies)
    }

    pub fn estimator_description(&self) -> String {
        if self.trailing_window <= 1 {
            format!("per-period regret at t = {} averaged over realizations", self.horizon - 1)
        } else {
            format!(
                "per-period regret averaged over t in [{}, {}] and over realizations",
                self.horizon - self.trailing_window.min(self.horizon),
                self.horizon - 1
            )
        }
    }
}

fn window_values(traces: &[RegretTrace], window: usize) -> Vec<f64> {
    traces.iter().map(|t| t.trailing_mean(window)).collect()
}

fn estimate(values: &[f64]) -> WindowEstimate {
    let (mean, stderr) = mean_and_stderr(values);
    WindowEstimate { mean, stderr }
}

/// Finds the smallest ensemble size in `search.grid` whose per-period regret
/// at the end of the horizon is within `eps_target` of Thompson sampling.
///
/// ES and TS share environments realization by realization, so the excess is
/// estimated from paired differences. Agents in `config.agents` are ignored.
pub fn min_models_search(
    config: &ExperimentConfig,
    search: &SearchConfig,
    output: Option<&Path>,
    options: RunOptions,
) -> Result<MinModelsReport> {
    config.validate()?;
    search.validate()?;
    let family = config.env_spec()?.family();
    if !matches!(family, EnvFamily::Linear | EnvFamily::IndependentGaussian) {
        return Err(Error::Config("min-models needs a linear or independent_gaussian environment".into()));
    }
    if let Some(dir) = output {
        output::prepare_dir(dir)?;
    }
    let window = search.trailing_window.min(config.run.horizon);
    let ts_values = window_values(&run_agent(config, &AgentSpec::thompson(), options)?, window);
    let ts = estimate(&ts_values);

    let mut rows = Vec::new();
    let mut minimal = None;
    for &m in &search.grid {
        let es_values = window_values(&run_agent(config, &AgentSpec::ensemble(m), options)?, window);
        let diffs: Vec<f64> = es_values.iter().zip(&ts_values).map(|(e, t)| e - t).collect();
        let (excess, excess_stderr) = mean_and_stderr(&diffs);
        let es = estimate(&es_values);
        let qualifies = es.mean <= ts.mean + search.eps_target;
        rows.push(MinModelsRow {
            models: m,
            es,
            excess,
            excess_stderr,
            qualifies,
        });
        if qualifies {
            minimal = Some(m);
            break;
        }
    }
    let report = MinModelsReport {
        eps_target: search.eps_target,
        trailing_window: window,
        horizon: config.run.horizon,
        ts,
        rows,
        minimal,
    };
    if let Some(dir) = output {
        output::write_search(dir, config, &report)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{EnvConfig, EnvFamilyName, RunConfig};

    fn config(actions: usize) -> ExperimentConfig {
        ExperimentConfig::new(
            EnvConfig {
                family: EnvFamilyName::IndependentGaussian,
                actions,
                dim: None,
                hidden: None,
                prior_var: None,
                noise_var: None,
            },
            vec![],
            RunConfig {
                horizon: 30,
                realizations: 8,
                seed: 11,
                noise_mode: Default::default(),
                output: None,
                write_traces: false,
            },
        )
    }

    #[test]
    fn huge_target_takes_first_grid_point() {
        let s = SearchConfig { eps_target: 1e9, grid: vec![2, 4], trailing_window: 1 };
        let r = min_models_search(&config(3), &s, None, RunOptions::default()).unwrap();
        assert_eq!(r.minimal, Some(2));
        assert_eq!(r.rows.len(), 1);
    }

    #[test]
    fn impossible_target_is_not_found() {
        let s = SearchConfig { eps_target: 1e-300, grid: vec![1], trailing_window: 5 };
        let mut c = config(4);
        c.env.prior_var = Some(100.0);
        let r = min_models_search(&c, &s, None, RunOptions::default()).unwrap();
        if r.minimal.is_none() {
            assert_eq!(r.rows.len(), 1);
            assert!(!r.rows[0].qualifies);
        }
        assert!(r.estimator_description().contains("[25, 29]"));
    }

    #[test]
    fn neural_family_rejected() {
        let mut c = config(3);
        c.env.family = EnvFamilyName::Neuron;
        c.env.dim = Some(2);
        let s = SearchConfig { eps_target: 0.1, grid: vec![1], trailing_window: 1 };
        assert!(min_models_search(&c, &s, None, RunOptions::default()).unwrap_err().is_config());
    }
}
