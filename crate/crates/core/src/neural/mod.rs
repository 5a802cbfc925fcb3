//! Neural-network bandit agents trained with plain SGD.

mod baselines;
mod ensemble;
mod mlp;
mod sgd;

pub use baselines::{default_dropout_learning_rate, DropoutAgent, EpsilonGreedyAgent, EpsilonSchedule};
pub use ensemble::NeuralEnsemble;
pub use mlp::{forward, loss_and_gradient, Activation, Architecture, Example, MlpParams, LEAKY_SLOPE};
pub use sgd::{MinibatchMode, SgdConfig};

use crate::env::ActionSet;

/// Greedy action of `net`, lowest index on ties.
pub fn greedy_action(net: &MlpParams, actions: &ActionSet, activation: Activation, mask: Option<&[f64]>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, a) in actions.iter().enumerate() {
        let v = match mask {
            Some(m) => net.forward_masked(a, activation, m),
            None => net.forward(a, activation),
        }
        .expect("action dimension matches network inputs");
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}
