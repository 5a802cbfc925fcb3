use super::mlp::{Activation, Architecture, MlpParams};
use super::sgd::{run_sgd, FitProblem, SgdConfig};
use super::greedy_action;
use crate::env::ActionSet;
use crate::error::{check_dim, Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonSchedule {
    Fixed(f64),
    /// `ε(t) = min(1, k/(t+1))`.
    Annealing { k: f64 },
}

impl EpsilonSchedule {
    pub fn epsilon(&self, t: usize) -> f64 {
        match *self {
            EpsilonSchedule::Fixed(eps) => eps.clamp(0.0, 1.0),
            EpsilonSchedule::Annealing { k } => (k / (t as f64 + 1.0)).clamp(0.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EpsilonSchedule::Fixed(eps) if (0.0..=1.0).contains(&eps) => Ok(()),
            EpsilonSchedule::Annealing { k } if k >= 0.0 && k.is_finite() => Ok(()),
            _ => Err(Error::invalid(format!("invalid epsilon schedule {self:?}"))),
        }
    }
}

/// A single anchored network fit to unperturbed data.
#[derive(Debug, Clone)]
struct FittedNet {
    net: MlpParams,
    anchor: MlpParams,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    prior_var: f64,
    noise_var: f64,
    sgd: SgdConfig,
}

impl FittedNet {
    fn new(arch: Architecture, prior_var: f64, noise_var: f64, sgd: SgdConfig, rng: &mut SeededRng) -> Result<Self> {
        if !(noise_var > 0.0) {
            return Err(Error::invalid("noise variance must be positive"));
        }
        sgd.validate()?;
        let anchor = MlpParams::sample_prior(arch, prior_var, rng)?;
        Ok(FittedNet {
            net: anchor.clone(),
            anchor,
            inputs: Vec::new(),
            targets: Vec::new(),
            prior_var,
            noise_var,
            sgd,
        })
    }

    fn update(&mut self, a: &[f64], reward: f64, keep_prob: Option<f64>, rng: &mut SeededRng) -> Result<()> {
        check_dim(self.net.arch().inputs(), a.len())?;
        self.inputs.push(a.to_vec());
        self.targets.push(reward);
        let problem = FitProblem {
            anchor: &self.anchor,
            inputs: &self.inputs,
            targets: &self.targets,
            prior_var: self.prior_var,
            noise_var: self.noise_var,
            activation: Activation::LeakyRelu,
            sgd: self.sgd,
            keep_prob,
        };
        run_sgd(&mut self.net, &problem, rng)
    }
}

/// Greedy on one SGD-trained net, uniform exploration with probability `ε(t)`.
#[derive(Debug, Clone)]
pub struct EpsilonGreedyAgent {
    fit: FittedNet,
    schedule: EpsilonSchedule,
}

impl EpsilonGreedyAgent {
    pub fn new(
        arch: Architecture,
        prior_var: f64,
        noise_var: f64,
        sgd: SgdConfig,
        schedule: EpsilonSchedule,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        schedule.validate()?;
        Ok(EpsilonGreedyAgent {
            fit: FittedNet::new(arch, prior_var, noise_var, sgd, rng)?,
            schedule,
        })
    }

    pub fn net(&self) -> &MlpParams {
        &self.fit.net
    }

    pub fn schedule(&self) -> EpsilonSchedule {
        self.schedule
    }

    pub fn select(&self, actions: &ActionSet, t: usize, rng: &mut SeededRng) -> usize {
        if rng.bernoulli(self.schedule.epsilon(t)) {
            rng.index(actions.len())
        } else {
            greedy_action(&self.fit.net, actions, Activation::LeakyRelu, None)
        }
    }

    pub fn update(&mut self, a: &[f64], reward: f64, rng: &mut SeededRng) -> Result<()> {
        self.fit.update(a, reward, None, rng)
    }
}

/// Two-layer net trained with inverted dropout on hidden units; each
/// selection samples one mask and acts greedily on the masked net.
#[derive(Debug, Clone)]
pub struct DropoutAgent {
    fit: FittedNet,
    drop_prob: f64,
}

impl DropoutAgent {
    pub fn new(
        arch: Architecture,
        prior_var: f64,
        noise_var: f64,
        sgd: SgdConfig,
        drop_prob: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if arch.hidden().is_none() {
            return Err(Error::invalid("dropout needs a network with a hidden layer"));
        }
        if !(0.0..1.0).contains(&drop_prob) {
            return Err(Error::invalid(format!("drop probability must be in [0, 1), got {drop_prob}")));
        }
        Ok(DropoutAgent {
            fit: FittedNet::new(arch, prior_var, noise_var, sgd, rng)?,
            drop_prob,
        })
    }

    pub fn net(&self) -> &MlpParams {
        &self.fit.net
    }

    pub fn drop_prob(&self) -> f64 {
        self.drop_prob
    }

    fn sample_mask(&self, rng: &mut SeededRng) -> Vec<f64> {
        let keep = 1.0 - self.drop_prob;
        let hidden = self.fit.net.arch().hidden().unwrap_or(1);
        (0..hidden)
            .map(|_| if rng.bernoulli(keep) { 1.0 / keep } else { 0.0 })
            .collect()
    }

    pub fn select(&self, actions: &ActionSet, rng: &mut SeededRng) -> usize {
        let mask = self.sample_mask(rng);
        greedy_action(&self.fit.net, actions, Activation::LeakyRelu, Some(&mask))
    }

    pub fn update(&mut self, a: &[f64], reward: f64, rng: &mut SeededRng) -> Result<()> {
        self.fit.update(a, reward, Some(1.0 - self.drop_prob), rng)
    }
}

/// Default dropout learning rates per drop probability (0.25, 0.5, 0.75, 0.9).
pub fn default_dropout_learning_rate(drop_prob: f64) -> f64 {
    match drop_prob {
        p if p <= 0.5 => 1e-2,
        p if p <= 0.75 => 2e-2,
        _ => 5e-2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::make_action_set;

    #[test]
    fn schedules_stay_in_unit_interval() {
        let fixed = EpsilonSchedule::Fixed(0.1);
        let anneal = EpsilonSchedule::Annealing { k: 10.0 };
        for t in 0..1000 {
            assert_eq!(fixed.epsilon(t), 0.1);
            let e = anneal.epsilon(t);
            assert!((0.0..=1.0).contains(&e));
        }
        assert_eq!(anneal.epsilon(0), 1.0);
        assert_eq!(anneal.epsilon(19), 0.5);
        assert!(EpsilonSchedule::Fixed(1.5).validate().is_err());
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = SeededRng::new(0);
        let actions = make_action_set(5, 3, &mut rng).unwrap();
        let agent = EpsilonGreedyAgent::new(
            Architecture::Neuron { inputs: 3 },
            1.0,
            1.0,
            SgdConfig::default(),
            EpsilonSchedule::Fixed(1.0),
            &mut rng,
        )
        .unwrap();
        let n = 10_000;
        let mut counts = [0usize; 5];
        for t in 0..n {
            counts[agent.select(&actions, t, &mut rng)] += 1;
        }
        let p = 0.2;
        for c in counts {
            assert!((c as f64 / n as f64 - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt());
        }
    }

    #[test]
    fn zero_epsilon_is_greedy() {
        let mut rng = SeededRng::new(1);
        let actions = make_action_set(8, 4, &mut rng).unwrap();
        let agent = EpsilonGreedyAgent::new(
            Architecture::TwoLayer { inputs: 4, hidden: 6 },
            1.0,
            1.0,
            SgdConfig::default(),
            EpsilonSchedule::Fixed(0.0),
            &mut rng,
        )
        .unwrap();
        let greedy = greedy_action(agent.net(), &actions, Activation::LeakyRelu, None);
        assert!((0..200).all(|t| agent.select(&actions, t, &mut rng) == greedy));
    }

    #[test]
    fn zero_drop_prob_is_greedy() {
        let mut rng = SeededRng::new(2);
        let actions = make_action_set(8, 4, &mut rng).unwrap();
        let agent = DropoutAgent::new(
            Architecture::TwoLayer { inputs: 4, hidden: 6 },
            1.0,
            1.0,
            SgdConfig::default(),
            0.0,
            &mut rng,
        )
        .unwrap();
        let greedy = greedy_action(agent.net(), &actions, Activation::LeakyRelu, None);
        assert!((0..200).all(|_| agent.select(&actions, &mut rng) == greedy));
    }

    #[test]
    fn dropout_rejects_bad_configs() {
        let mut rng = SeededRng::new(3);
        let sgd = SgdConfig::default();
        assert!(DropoutAgent::new(Architecture::Neuron { inputs: 3 }, 1.0, 1.0, sgd, 0.5, &mut rng).is_err());
        let arch = Architecture::TwoLayer { inputs: 3, hidden: 2 };
        assert!(DropoutAgent::new(arch, 1.0, 1.0, sgd, 1.0, &mut rng).is_err());
    }

    #[test]
    fn dropout_training_moves_weights() {
        let mut rng = SeededRng::new(4);
        let arch = Architecture::TwoLayer { inputs: 3, hidden: 4 };
        let mut agent = DropoutAgent::new(arch, 1.0, 1.0, SgdConfig::default(), 0.5, &mut rng).unwrap();
        let before = agent.net().clone();
        agent.update(&[0.5, -0.5, 1.0], 5.0, &mut rng).unwrap();
        assert_ne!(agent.net(), &before);
    }

    #[test]
    fn dropout_learning_rates() {
        assert_eq!(default_dropout_learning_rate(0.25), 1e-2);
        assert_eq!(default_dropout_learning_rate(0.5), 1e-2);
        assert_eq!(default_dropout_learning_rate(0.75), 2e-2);
        assert_eq!(default_dropout_learning_rate(0.9), 5e-2);
    }
}
