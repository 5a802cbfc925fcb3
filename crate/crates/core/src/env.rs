//! Bandit environments and the count-indexed noise coupling.
//!
//! Environments are immutable. Action counts are owned by the episode loop
//! and passed into [`Environment::step`], which increments them.
//!
//! Reward noise variance is called `noise_var` throughout; it plays the role
//! of both σ_w² (linear bandits) and σ_z² (neural bandits).

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, sample_gaussian, SpdMatrix};
use crate::neural::{Activation, Architecture, MlpParams};
use crate::rng::{Role, SeededRng};

/// `K` action vectors in `ℝᴺ`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    dim: usize,
    data: Vec<f64>,
}

impl ActionSet {
    pub fn new(actions: Vec<Vec<f64>>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::invalid("an action set needs at least one action"));
        }
        let dim = actions[0].len();
        if dim == 0 {
            return Err(Error::invalid("actions must have positive dimension"));
        }
        let mut data = Vec::with_capacity(actions.len() * dim);
        for a in &actions {
            check_dim(dim, a.len())?;
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid("action entries must be finite"));
            }
            data.extend_from_slice(a);
        }
        Ok(ActionSet { dim, data })
    }

    /// The standard basis of `ℝᴷ`.
    pub fn basis(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("an action set needs at least one action"));
        }
        let mut data = vec![0.0; k * k];
        for i in 0..k {
            data[i * k + i] = 1.0;
        }
        Ok(ActionSet { dim: k, data })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

/// Coordinates `1..N−1` uniform on `[−1, 1]`, last coordinate fixed at 1.
pub fn make_action_set(count: usize, dim: usize, rng: &mut SeededRng) -> Result<ActionSet> {
    if count == 0 || dim == 0 {
        return Err(Error::invalid("action count and dimension must be positive"));
    }
    let actions = (0..count)
        .map(|_| {
            let mut a: Vec<f64> = (0..dim - 1).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
            a.push(1.0);
            a
        })
        .collect();
    ActionSet::new(actions)
}

/// Per-action pull counts `c_{t,a}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionCounts(Vec<u64>);

impl ActionCounts {
    pub fn new(num_actions: usize) -> Self {
        ActionCounts(vec![0; num_actions])
    }

    pub fn get(&self, a: usize) -> u64 {
        self.0[a]
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    fn increment(&mut self, a: usize) {
        self.0[a] += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Fresh i.i.d. draws from the caller's stream.
    #[default]
    Fresh,
    /// `Z[n][a]`, `Z̃[n][a][m]` as pure functions of the base seed.
    Coupled,
}

/// Source of standard-normal reward noise and model perturbations.
///
/// In coupled mode the `n`-th pull of action `a` always sees `Z[n][a]`, and
/// model `m` always sees `Z̃[n][a][m]`, whatever order the pulls happen in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseTable {
    mode: NoiseMode,
    base_seed: u64,
}

impl NoiseTable {
    pub fn new(mode: NoiseMode, base_seed: u64) -> Self {
        NoiseTable { mode, base_seed }
    }

    pub fn fresh() -> Self {
        Self::new(NoiseMode::Fresh, 0)
    }

    pub fn coupled(base_seed: u64) -> Self {
        Self::new(NoiseMode::Coupled, base_seed)
    }

    pub fn mode(&self) -> NoiseMode {
        self.mode
    }

    /// Standard normal for the `n`-th pull (0-based) of action `a`.
    pub fn reward_noise(&self, n: u64, a: usize, rng: &mut SeededRng) -> f64 {
        match self.mode {
            NoiseMode::Fresh => rng.standard_normal(),
            NoiseMode::Coupled => {
                SeededRng::for_role(self.base_seed, Role::CoupledReward, &[n, a as u64]).standard_normal()
            }
        }
    }

    /// Standard normal perturbation for model `m` at the `n`-th pull of `a`.
    pub fn perturbation(&self, n: u64, a: usize, m: usize, rng: &mut SeededRng) -> f64 {
        match self.mode {
            NoiseMode::Fresh => rng.standard_normal(),
            NoiseMode::Coupled => SeededRng::for_role(
                self.base_seed,
                Role::CoupledPerturbation,
                &[n, a as u64, m as u64],
            )
            .standard_normal(),
        }
    }

    /// `models` perturbations scaled by `std_dev`.
    pub fn perturbations(&self, n: u64, a: usize, models: usize, std_dev: f64, rng: &mut SeededRng) -> Vec<f64> {
        (0..models).map(|m| std_dev * self.perturbation(n, a, m, rng)).collect()
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {x}")))
    }
}

/// Linear bandit: mean reward `θᵀa`.
#[derive(Debug, Clone)]
pub struct LinearBanditEnv {
    pub theta: Vec<f64>,
    pub actions: ActionSet,
    pub noise_var: f64,
    pub prior_mean: Vec<f64>,
    pub prior_cov: SpdMatrix,
}

impl LinearBanditEnv {
    pub fn new(
        theta: Vec<f64>,
        actions: ActionSet,
        noise_var: f64,
        prior_mean: Vec<f64>,
        prior_cov: SpdMatrix,
    ) -> Result<Self> {
        check_positive("noise variance", noise_var)?;
        check_dim(actions.dim(), theta.len())?;
        check_dim(actions.dim(), prior_mean.len())?;
        check_dim(actions.dim(), prior_cov.dim())?;
        Ok(LinearBanditEnv {
            theta,
            actions,
            noise_var,
            prior_mean,
            prior_cov,
        })
    }

    /// Draws `θ ∼ N(μ₀, Σ₀)`.
    pub fn sample(
        actions: ActionSet,
        noise_var: f64,
        prior_mean: Vec<f64>,
        prior_cov: SpdMatrix,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let theta = sample_gaussian(&prior_mean, &prior_cov, rng)?;
        Self::new(theta, actions, noise_var, prior_mean, prior_cov)
    }
}

/// `K` independent Gaussian arms; the linear bandit with basis actions.
#[derive(Debug, Clone)]
pub struct IndependentGaussianEnv {
    pub theta: Vec<f64>,
    pub noise_var: f64,
    pub prior_var: f64,
}

impl IndependentGaussianEnv {
    pub fn new(theta: Vec<f64>, noise_var: f64) -> Result<Self> {
        Self::with_prior(theta, noise_var, 1.0)
    }

    pub fn with_prior(theta: Vec<f64>, noise_var: f64, prior_var: f64) -> Result<Self> {
        check_positive("noise variance", noise_var)?;
        check_positive("prior variance", prior_var)?;
        if theta.is_empty() {
            return Err(Error::invalid("need at least one arm"));
        }
        Ok(IndependentGaussianEnv {
            theta,
            noise_var,
            prior_var,
        })
    }
}

/// Mean reward `max(0, θᵀa)`.
#[derive(Debug, Clone)]
pub struct NeuronEnv {
    pub theta: Vec<f64>,
    pub actions: ActionSet,
    pub prior_var: f64,
    pub noise_var: f64,
}

/// Mean reward `w2ᵀ max(0, W1·a)`.
#[derive(Debug, Clone)]
pub struct TwoLayerNetEnv {
    pub weights: MlpParams,
    pub actions: ActionSet,
    pub prior_var: f64,
    pub noise_var: f64,
}

impl TwoLayerNetEnv {
    pub fn w1(&self) -> &[f64] {
        self.weights.w1()
    }

    pub fn w2(&self) -> &[f64] {
        self.weights.w2().unwrap_or(&[])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvFamily {
    Linear,
    IndependentGaussian,
    Neuron,
    TwoLayer,
}

/// Any environment, with mean rewards precomputed.
#[derive(Debug, Clone)]
pub struct Environment {
    kind: EnvKind,
    actions: ActionSet,
    means: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum EnvKind {
    Linear(LinearBanditEnv),
    IndependentGaussian(IndependentGaussianEnv),
    Neuron(NeuronEnv),
    TwoLayer(TwoLayerNetEnv),
}

impl From<LinearBanditEnv> for Environment {
    fn from(env: LinearBanditEnv) -> Self {
        let means = env.actions.iter().map(|a| dot(&env.theta, a)).collect();
        Environment {
            actions: env.actions.clone(),
            means,
            kind: EnvKind::Linear(env),
        }
    }
}

impl From<IndependentGaussianEnv> for Environment {
    fn from(env: IndependentGaussianEnv) -> Self {
        Environment {
            actions: ActionSet::basis(env.theta.len()).expect("nonempty"),
            means: env.theta.clone(),
            kind: EnvKind::IndependentGaussian(env),
        }
    }
}

impl From<NeuronEnv> for Environment {
    fn from(env: NeuronEnv) -> Self {
        let means = env.actions.iter().map(|a| dot(&env.theta, a).max(0.0)).collect();
        Environment {
            actions: env.actions.clone(),
            means,
            kind: EnvKind::Neuron(env),
        }
    }
}

impl From<TwoLayerNetEnv> for Environment {
    fn from(env: TwoLayerNetEnv) -> Self {
        let means = env
            .actions
            .iter()
            .map(|a| env.weights.forward(a, Activation::Relu).expect("shape checked"))
            .collect();
        Environment {
            actions: env.actions.clone(),
            means,
            kind: EnvKind::TwoLayer(env),
        }
    }
}

impl Environment {
    pub fn kind(&self) -> &EnvKind {
        &self.kind
    }

    pub fn family(&self) -> EnvFamily {
        match self.kind {
            EnvKind::Linear(_) => EnvFamily::Linear,
            EnvKind::IndependentGaussian(_) => EnvFamily::IndependentGaussian,
            EnvKind::Neuron(_) => EnvFamily::Neuron,
            EnvKind::TwoLayer(_) => EnvFamily::TwoLayer,
        }
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn noise_var(&self) -> f64 {
        match &self.kind {
            EnvKind::Linear(e) => e.noise_var,
            EnvKind::IndependentGaussian(e) => e.noise_var,
            EnvKind::Neuron(e) => e.noise_var,
            EnvKind::TwoLayer(e) => e.noise_var,
        }
    }

    /// Gaussian prior `(μ₀, Σ₀)` for the linear families.
    pub fn linear_prior(&self) -> Option<(Vec<f64>, SpdMatrix)> {
        match &self.kind {
            EnvKind::Linear(e) => Some((e.prior_mean.clone(), e.prior_cov.clone())),
            EnvKind::IndependentGaussian(e) => {
                let k = e.theta.len();
                Some((vec![0.0; k], SpdMatrix::scaled_identity(k, e.prior_var).ok()?))
            }
            _ => None,
        }
    }

    /// Network shape and weight prior variance for the neural families.
    pub fn neural_prior(&self) -> Option<(Architecture, f64)> {
        match &self.kind {
            EnvKind::Neuron(e) => Some((Architecture::Neuron { inputs: e.actions.dim() }, e.prior_var)),
            EnvKind::TwoLayer(e) => Some((e.weights.arch(), e.prior_var)),
            _ => None,
        }
    }

    pub fn mean_rewards(&self) -> &[f64] {
        &self.means
    }

    /// `R̄_θ(a)`; panics on an out-of-range index.
    pub fn true_mean(&self, action_index: usize) -> f64 {
        self.means[action_index]
    }

    /// `(A*, R*)`, lowest index on ties.
    pub fn optimal(&self) -> (usize, f64) {
        let mut best = (0, self.means[0]);
        for (i, &m) in self.means.iter().enumerate().skip(1) {
            if m > best.1 {
                best = (i, m);
            }
        }
        best
    }

    /// `R_*`, the worst mean reward.
    pub fn worst(&self) -> f64 {
        self.means.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Δ(θ) = R* − R_*`.
    pub fn gap(&self) -> f64 {
        self.optimal().1 - self.worst()
    }

    /// Plays `action_index` at period `t`: returns `R̄_θ(a) + √σ²·z` and
    /// increments `counts[a]`.
    pub fn step(
        &self,
        action_index: usize,
        t: usize,
        counts: &mut ActionCounts,
        noise: &NoiseTable,
        rng: &mut SeededRng,
    ) -> Result<f64> {
        let k = self.num_actions();
        if action_index >= k {
            return Err(Error::ActionOutOfRange {
                index: action_index,
                count: k,
            });
        }
        check_dim(k, counts.as_slice().len())?;
        if counts.total() != t as u64 {
            return Err(Error::invalid(format!(
                "action counts sum to {} but {t} periods have elapsed",
                counts.total()
            )));
        }
        let z = noise.reward_noise(counts.get(action_index), action_index, rng);
        counts.increment(action_index);
        Ok(self.means[action_index] + self.noise_var().sqrt() * z)
    }
}

/// Environment family plus hyperparameters; ground truth drawn from the prior.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    /// `θ ∼ N(0, prior_var·I)` in `ℝᴺ`, `K` random actions.
    Linear {
        dim: usize,
        actions: usize,
        prior_var: f64,
        noise_var: f64,
    },
    IndependentGaussian {
        actions: usize,
        prior_var: f64,
        noise_var: f64,
    },
    Neuron {
        dim: usize,
        actions: usize,
        prior_var: f64,
        noise_var: f64,
    },
    TwoLayer {
        dim: usize,
        hidden: usize,
        actions: usize,
        prior_var: f64,
        noise_var: f64,
    },
}

impl EnvSpec {
    pub fn family(&self) -> EnvFamily {
        match self {
            EnvSpec::Linear { .. } => EnvFamily::Linear,
            EnvSpec::IndependentGaussian { .. } => EnvFamily::IndependentGaussian,
            EnvSpec::Neuron { .. } => EnvFamily::Neuron,
            EnvSpec::TwoLayer { .. } => EnvFamily::TwoLayer,
        }
    }

    pub fn num_actions(&self) -> usize {
        match *self {
            EnvSpec::Linear { actions, .. }
            | EnvSpec::IndependentGaussian { actions, .. }
            | EnvSpec::Neuron { actions, .. }
            | EnvSpec::TwoLayer { actions, .. } => actions,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (actions, dims, prior_var, noise_var) = match *self {
            EnvSpec::Linear { dim, actions, prior_var, noise_var }
            | EnvSpec::Neuron { dim, actions, prior_var, noise_var } => (actions, vec![dim], prior_var, noise_var),
            EnvSpec::IndependentGaussian { actions, prior_var, noise_var } => (actions, vec![], prior_var, noise_var),
            EnvSpec::TwoLayer { dim, hidden, actions, prior_var, noise_var } => {
                (actions, vec![dim, hidden], prior_var, noise_var)
            }
        };
        if actions == 0 || dims.contains(&0) {
            return Err(Error::invalid("action count and dimensions must be positive"));
        }
        check_positive("prior variance", prior_var)?;
        check_positive("noise variance", noise_var)
    }
}

/// Draws the ground truth (and action set) described by `spec`.
pub fn sample_env_from_prior(spec: &EnvSpec, rng: &mut SeededRng) -> Result<Environment> {
    spec.validate()?;
    Ok(match *spec {
        EnvSpec::Linear { dim, actions, prior_var, noise_var } => {
            let set = make_action_set(actions, dim, rng)?;
            let cov = SpdMatrix::scaled_identity(dim, prior_var)?;
            LinearBanditEnv::sample(set, noise_var, vec![0.0; dim], cov, rng)?.into()
        }
        EnvSpec::IndependentGaussian { actions, prior_var, noise_var } => {
            let sd = prior_var.sqrt();
            let theta = (0..actions).map(|_| sd * rng.standard_normal()).collect();
            IndependentGaussianEnv::with_prior(theta, noise_var, prior_var)?.into()
        }
        EnvSpec::Neuron { dim, actions, prior_var, noise_var } => {
            let set = make_action_set(actions, dim, rng)?;
            let theta = MlpParams::sample_prior(Architecture::Neuron { inputs: dim }, prior_var, rng)?;
            NeuronEnv {
                theta: theta.as_slice().to_vec(),
                actions: set,
                prior_var,
                noise_var,
            }
            .into()
        }
        EnvSpec::TwoLayer { dim, hidden, actions, prior_var, noise_var } => {
            let set = make_action_set(actions, dim, rng)?;
            let weights = MlpParams::sample_prior(Architecture::TwoLayer { inputs: dim, hidden }, prior_var, rng)?;
            TwoLayerNetEnv {
                weights,
                actions: set,
                prior_var,
                noise_var,
            }
            .into()
        }
    })
}

/// Prior-covariance helper for callers building linear envs by hand.
pub fn isotropic_prior(dim: usize, var: f64) -> Result<(Vec<f64>, SpdMatrix)> {
    Ok((vec![0.0; dim], SpdMatrix::scaled_identity(dim, var)?))
}
