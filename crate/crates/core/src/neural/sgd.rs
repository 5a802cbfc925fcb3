use serde::{Deserialize, Serialize};

use super::mlp::{loss_and_gradient_masked, Activation, Example, MlpParams};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinibatchMode {
    /// Uniform with replacement, `min(minibatch, replay size)` examples.
    #[default]
    WithReplacement,
    /// Every stored example on every step.
    FullBatch,
}

/// Per-period SGD budget. The anchor term always enters at full strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub minibatch: usize,
    pub mode: MinibatchMode,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.1,
            steps: 3,
            minibatch: 64,
            mode: MinibatchMode::WithReplacement,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning rate must be finite and nonnegative"));
        }
        if self.minibatch == 0 {
            return Err(Error::invalid("minibatch size must be positive"));
        }
        Ok(())
    }
}

/// Everything one SGD run needs besides the parameters themselves.
pub(crate) struct FitProblem<'a> {
    pub anchor: &'a MlpParams,
    pub inputs: &'a [Vec<f64>],
    pub targets: &'a [f64],
    pub prior_var: f64,
    pub noise_var: f64,
    pub activation: Activation,
    pub sgd: SgdConfig,
    /// Hidden-unit keep probability for dropout training.
    pub keep_prob: Option<f64>,
}

pub(crate) fn run_sgd(params: &mut MlpParams, problem: &FitProblem<'_>, rng: &mut SeededRng) -> Result<()> {
    let n = problem.inputs.len();
    let hidden = params.arch().hidden().unwrap_or(1);
    let mut indices = Vec::new();
    for _ in 0..problem.sgd.steps {
        indices.clear();
        match problem.sgd.mode {
            MinibatchMode::FullBatch => indices.extend(0..n),
            MinibatchMode::WithReplacement if n > 0 => {
                indices.extend((0..problem.sgd.minibatch.min(n)).map(|_| rng.index(n)))
            }
            MinibatchMode::WithReplacement => {}
        }
        let batch: Vec<Example> = indices
            .iter()
            .map(|&i| (problem.inputs[i].as_slice(), problem.targets[i]))
            .collect();
        let masks = problem.keep_prob.map(|keep| {
            (0..batch.len())
                .map(|_| {
                    (0..hidden)
                        .map(|_| if rng.bernoulli(keep) { 1.0 / keep } else { 0.0 })
                        .collect::<Vec<f64>>()
                })
                .collect::<Vec<_>>()
        });
        let (_, grad) = loss_and_gradient_masked(
            params,
            problem.anchor,
            &batch,
            masks.as_deref(),
            problem.prior_var,
            problem.noise_var,
            problem.activation,
        )?;
        let lr = problem.sgd.learning_rate;
        for (p, g) in params.as_mut_slice().iter_mut().zip(grad.as_slice()) {
            *p -= lr * g;
        }
    }
    Ok(())
}
