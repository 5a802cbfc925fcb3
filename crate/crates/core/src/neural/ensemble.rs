use super::mlp::{Activation, Architecture, MlpParams};
use super::sgd::{run_sgd, FitProblem, SgdConfig};
use super::greedy_action;
use crate::env::ActionSet;
use crate::error::{check_dim, Error, Result};
use crate::rng::SeededRng;

/// `M` networks, each anchored at its own prior draw and fit to its own
/// perturbed copy of the data.
///
/// The perturbation for observation `τ` and model `m` is drawn once, stored
/// in the target, and reused by every later SGD pass.
#[derive(Debug, Clone)]
pub struct NeuralEnsemble {
    models: Vec<MlpParams>,
    anchors: Vec<MlpParams>,
    inputs: Vec<Vec<f64>>,
    /// `targets[m][τ] = r_τ + z̃_{τ,m}`.
    targets: Vec<Vec<f64>>,
    prior_var: f64,
    noise_var: f64,
    sgd: SgdConfig,
    activation: Activation,
}

impl NeuralEnsemble {
    pub fn new(
        arch: Architecture,
        models: usize,
        prior_var: f64,
        noise_var: f64,
        sgd: SgdConfig,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if models == 0 {
            return Err(Error::invalid("an ensemble needs at least one model"));
        }
        if !(noise_var > 0.0) {
            return Err(Error::invalid("noise variance must be positive"));
        }
        sgd.validate()?;
        let anchors = (0..models)
            .map(|_| MlpParams::sample_prior(arch, prior_var, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(NeuralEnsemble {
            models: anchors.clone(),
            anchors,
            inputs: Vec::new(),
            targets: vec![Vec::new(); models],
            prior_var,
            noise_var,
            sgd,
            activation: Activation::LeakyRelu,
        })
    }

    /// Overrides the agent-side activation (leaky ReLU by default).
    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn model(&self, m: usize) -> &MlpParams {
        &self.models[m]
    }

    pub fn anchor(&self, m: usize) -> &MlpParams {
        &self.anchors[m]
    }

    pub fn observations(&self) -> usize {
        self.inputs.len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn perturbed_targets(&self, m: usize) -> &[f64] {
        &self.targets[m]
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Appends `(a, reward + perturbations[m])` for every model.
    pub fn observe(&mut self, a: &[f64], reward: f64, perturbations: &[f64]) -> Result<()> {
        check_dim(self.models[0].arch().inputs(), a.len())?;
        check_dim(self.models.len(), perturbations.len())?;
        self.inputs.push(a.to_vec());
        for (targets, w) in self.targets.iter_mut().zip(perturbations) {
            targets.push(reward + w);
        }
        Ok(())
    }

    /// Runs the SGD budget on every model.
    pub fn train(&mut self, rng: &mut SeededRng) -> Result<()> {
        for ((model, anchor), targets) in self.models.iter_mut().zip(&self.anchors).zip(&self.targets) {
            let problem = FitProblem {
                anchor,
                inputs: &self.inputs,
                targets,
                prior_var: self.prior_var,
                noise_var: self.noise_var,
                activation: self.activation,
                sgd: self.sgd,
                keep_prob: None,
            };
            run_sgd(model, &problem, rng)?;
        }
        Ok(())
    }

    /// Draws `z̃ₘ ∼ N(0, σ²)` per model, stores the perturbed targets and trains.
    pub fn update(&mut self, a: &[f64], reward: f64, rng: &mut SeededRng) -> Result<()> {
        let sd = self.noise_var.sqrt();
        let w: Vec<f64> = (0..self.models.len()).map(|_| sd * rng.standard_normal()).collect();
        self.update_with(a, reward, &w, rng)
    }

    /// As [`update`](Self::update) with caller-supplied perturbations.
    pub fn update_with(&mut self, a: &[f64], reward: f64, perturbations: &[f64], rng: &mut SeededRng) -> Result<()> {
        self.observe(a, reward, perturbations)?;
        self.train(rng)
    }

    pub fn greedy(&self, m: usize, actions: &ActionSet) -> usize {
        greedy_action(&self.models[m], actions, self.activation, None)
    }

    /// Uniform model, then its greedy action.
    pub fn select(&self, actions: &ActionSet, rng: &mut SeededRng) -> usize {
        self.greedy(rng.index(self.models.len()), actions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SpdMatrix;
    use crate::linear::{batch_fit, PerturbedObservation};
    use crate::neural::{loss_and_gradient, MinibatchMode};

    fn sgd(lr: f64, steps: usize, mode: MinibatchMode) -> SgdConfig {
        SgdConfig {
            learning_rate: lr,
            steps,
            minibatch: 64,
            mode,
        }
    }

    #[test]
    fn zero_learning_rate_keeps_models() {
        let mut rng = SeededRng::new(0);
        let arch = Architecture::TwoLayer { inputs: 3, hidden: 4 };
        let mut ens = NeuralEnsemble::new(arch, 3, 1.0, 1.0, sgd(0.0, 3, MinibatchMode::WithReplacement), &mut rng).unwrap();
        let before: Vec<_> = (0..3).map(|m| ens.model(m).clone()).collect();
        ens.update(&[0.1, 0.2, 1.0], 2.0, &mut rng).unwrap();
        for m in 0..3 {
            assert_eq!(ens.model(m), &before[m]);
        }
    }

    #[test]
    fn one_full_batch_step_is_gradient_step() {
        let mut rng = SeededRng::new(1);
        let arch = Architecture::TwoLayer { inputs: 2, hidden: 3 };
        let cfg = sgd(0.05, 1, MinibatchMode::FullBatch);
        let mut ens = NeuralEnsemble::new(arch, 1, 2.0, 3.0, cfg, &mut rng).unwrap();
        // Move the model off its anchor first so the prior term contributes.
        ens.models[0].as_mut_slice()[0] += 0.3;
        let before = ens.model(0).clone();
        let a = [0.4, 1.0];
        ens.update_with(&a, 1.5, &[0.25], &mut rng).unwrap();
        let (_, grad) = loss_and_gradient(&before, ens.anchor(0), &[(&a, 1.75)], 2.0, 3.0, Activation::LeakyRelu).unwrap();
        for ((p, b), g) in ens.model(0).as_slice().iter().zip(before.as_slice()).zip(grad.as_slice()) {
            assert!((p - (b - 0.05 * g)).abs() < 1e-15);
        }
    }

    #[test]
    fn perturbations_persist_across_periods() {
        let mut rng = SeededRng::new(2);
        let arch = Architecture::Neuron { inputs: 2 };
        let mut ens = NeuralEnsemble::new(arch, 4, 1.0, 1.0, SgdConfig::default(), &mut rng).unwrap();
        ens.update(&[0.5, 1.0], 1.0, &mut rng).unwrap();
        let first: Vec<u64> = (0..4).map(|m| ens.perturbed_targets(m)[0].to_bits()).collect();
        for _ in 0..5 {
            ens.update(&[-0.5, 1.0], 0.0, &mut rng).unwrap();
        }
        let again: Vec<u64> = (0..4).map(|m| ens.perturbed_targets(m)[0].to_bits()).collect();
        assert_eq!(first, again);
        assert_eq!(ens.observations(), 6);
    }

    #[test]
    fn no_data_keeps_models_at_anchor() {
        let mut rng = SeededRng::new(3);
        let arch = Architecture::TwoLayer { inputs: 3, hidden: 2 };
        let mut ens = NeuralEnsemble::new(arch, 2, 1.0, 1.0, sgd(0.1, 1000, MinibatchMode::WithReplacement), &mut rng).unwrap();
        ens.train(&mut rng).unwrap();
        for m in 0..2 {
            assert_eq!(ens.model(m), ens.anchor(m));
        }
    }

    #[test]
    fn linear_activation_converges_to_batch_fit() {
        let mut rng = SeededRng::new(4);
        let arch = Architecture::Neuron { inputs: 3 };
        let prior_var = 1.5;
        let noise_var = 0.8;
        let mut ens = NeuralEnsemble::new(arch, 2, prior_var, noise_var, sgd(0.01, 0, MinibatchMode::FullBatch), &mut rng)
            .unwrap()
            .with_activation(Activation::Identity);
        for _ in 0..10 {
            let a: Vec<f64> = vec![rng.uniform_range(-1.0, 1.0), rng.uniform_range(-1.0, 1.0), 1.0];
            let w = [rng.normal(0.0, 0.9), rng.normal(0.0, 0.9)];
            ens.observe(&a, rng.standard_normal(), &w).unwrap();
        }
        ens.sgd.steps = 20_000;
        ens.train(&mut rng).unwrap();
        let prior_cov = SpdMatrix::scaled_identity(3, prior_var).unwrap();
        for m in 0..2 {
            let history: Vec<PerturbedObservation> = ens
                .inputs()
                .iter()
                .zip(ens.perturbed_targets(m))
                .map(|(a, &y)| PerturbedObservation { action: a.clone(), reward: y, perturbation: 0.0 })
                .collect();
            let fit = batch_fit(ens.anchor(m).as_slice(), &history, &prior_cov, noise_var).unwrap();
            for (x, y) in ens.model(m).as_slice().iter().zip(&fit) {
                assert!((x - y).abs() < 1e-3, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn update_is_deterministic() {
        let run = || {
            let mut rng = SeededRng::new(9);
            let arch = Architecture::TwoLayer { inputs: 3, hidden: 5 };
            let mut ens = NeuralEnsemble::new(arch, 3, 1.0, 4.0, SgdConfig::default(), &mut rng).unwrap();
            for i in 0..10 {
                ens.update(&[0.1 * i as f64, -0.3, 1.0], i as f64, &mut rng).unwrap();
            }
            (0..3).map(|m| ens.model(m).clone()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
