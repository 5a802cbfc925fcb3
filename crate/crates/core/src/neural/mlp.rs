//! Single-neuron and two-layer networks with hand-written backpropagation.

use crate::error::{check_dim, Error, Result};
use crate::linalg::dot;
use crate::rng::SeededRng;

/// Negative-side slope of the agents' leaky rectifier, `max(0.01x, x)`.
pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// `g(a) = act(θᵀa)` with `θ ∈ ℝᴺ`.
    Neuron { inputs: usize },
    /// `g(a) = w2ᵀ act(W1·a)` with `W1 ∈ ℝ^{D×N}`, `w2 ∈ ℝᴰ`.
    TwoLayer { inputs: usize, hidden: usize },
}

impl Architecture {
    pub fn inputs(&self) -> usize {
        match *self {
            Architecture::Neuron { inputs } | Architecture::TwoLayer { inputs, .. } => inputs,
        }
    }

    pub fn hidden(&self) -> Option<usize> {
        match *self {
            Architecture::Neuron { .. } => None,
            Architecture::TwoLayer { hidden, .. } => Some(hidden),
        }
    }

    pub fn num_params(&self) -> usize {
        match *self {
            Architecture::Neuron { inputs } => inputs,
            Architecture::TwoLayer { inputs, hidden } => hidden * inputs + hidden,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// `max(0, x)`; used by the ground-truth environments.
    Relu,
    /// `max(0.01x, x)`; used inside agents.
    LeakyRelu,
    /// No nonlinearity; turns the neuron into a linear model.
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
            Activation::Identity => x,
        }
    }

    /// Derivative; at the kink `x = 0` the negative-side slope is used.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Network weights stored flat: for two-layer nets `W1` row-major, then `w2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    arch: Architecture,
    data: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(arch: Architecture) -> Self {
        MlpParams {
            arch,
            data: vec![0.0; arch.num_params()],
        }
    }

    pub fn from_vec(arch: Architecture, data: Vec<f64>) -> Result<Self> {
        check_dim(arch.num_params(), data.len())?;
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("network weights must be finite"));
        }
        Ok(MlpParams { arch, data })
    }

    pub fn neuron(theta: Vec<f64>) -> Result<Self> {
        Self::from_vec(Architecture::Neuron { inputs: theta.len() }, theta)
    }

    pub fn two_layer(w1: &[Vec<f64>], w2: Vec<f64>) -> Result<Self> {
        let hidden = w1.len();
        check_dim(hidden, w2.len())?;
        let inputs = w1.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(hidden * inputs + hidden);
        for row in w1 {
            check_dim(inputs, row.len())?;
            data.extend_from_slice(row);
        }
        data.extend_from_slice(&w2);
        Self::from_vec(Architecture::TwoLayer { inputs, hidden }, data)
    }

    /// Every weight i.i.d. `N(0, prior_var)`.
    pub fn sample_prior(arch: Architecture, prior_var: f64, rng: &mut SeededRng) -> Result<Self> {
        if !(prior_var > 0.0) || !prior_var.is_finite() {
            return Err(Error::invalid(format!("prior variance must be positive, got {prior_var}")));
        }
        let sd = prior_var.sqrt();
        let data = (0..arch.num_params()).map(|_| sd * rng.standard_normal()).collect();
        Ok(MlpParams { arch, data })
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// First-layer weights (the whole vector for a single neuron).
    pub fn w1(&self) -> &[f64] {
        match self.arch {
            Architecture::Neuron { .. } => &self.data,
            Architecture::TwoLayer { inputs, hidden } => &self.data[..inputs * hidden],
        }
    }

    pub fn w2(&self) -> Option<&[f64]> {
        match self.arch {
            Architecture::Neuron { .. } => None,
            Architecture::TwoLayer { inputs, hidden } => Some(&self.data[inputs * hidden..]),
        }
    }

    pub fn forward(&self, a: &[f64], activation: Activation) -> Result<f64> {
        check_dim(self.arch.inputs(), a.len())?;
        Ok(self.eval(a, activation, None))
    }

    /// Forward pass with hidden units scaled by `mask` (dropout).
    pub fn forward_masked(&self, a: &[f64], activation: Activation, mask: &[f64]) -> Result<f64> {
        check_dim(self.arch.inputs(), a.len())?;
        check_dim(self.arch.hidden().unwrap_or(1), mask.len())?;
        Ok(self.eval(a, activation, Some(mask)))
    }

    fn eval(&self, a: &[f64], act: Activation, mask: Option<&[f64]>) -> f64 {
        match self.arch {
            Architecture::Neuron { .. } => {
                let scale = mask.map_or(1.0, |m| m[0]);
                scale * act.apply(dot(&self.data, a))
            }
            Architecture::TwoLayer { inputs, hidden } => {
                let (w1, w2) = self.data.split_at(inputs * hidden);
                let mut out = 0.0;
                for j in 0..hidden {
                    let h = dot(&w1[j * inputs..(j + 1) * inputs], a);
                    let m = mask.map_or(1.0, |m| m[j]);
                    out += w2[j] * m * act.apply(h);
                }
                out
            }
        }
    }

    /// Adds `scale · ∂g(a)/∂θ` into `grad` and returns `g(a)`.
    pub(crate) fn accumulate_output_gradient(
        &self,
        a: &[f64],
        act: Activation,
        mask: Option<&[f64]>,
        scale_of: impl FnOnce(f64) -> f64,
        grad: &mut [f64],
    ) -> f64 {
        match self.arch {
            Architecture::Neuron { .. } => {
                let m = mask.map_or(1.0, |m| m[0]);
                let z = dot(&self.data, a);
                let out = m * act.apply(z);
                let s = scale_of(out) * m * act.derivative(z);
                for (g, x) in grad.iter_mut().zip(a) {
                    *g += s * x;
                }
                out
            }
            Architecture::TwoLayer { inputs, hidden } => {
                let (w1, w2) = self.data.split_at(inputs * hidden);
                let mut pre = vec![0.0; hidden];
                let mut out = 0.0;
                for j in 0..hidden {
                    pre[j] = dot(&w1[j * inputs..(j + 1) * inputs], a);
                    let m = mask.map_or(1.0, |m| m[j]);
                    out += w2[j] * m * act.apply(pre[j]);
                }
                let s = scale_of(out);
                if s == 0.0 {
                    return out;
                }
                let (g1, g2) = grad.split_at_mut(inputs * hidden);
                for j in 0..hidden {
                    let m = mask.map_or(1.0, |m| m[j]);
                    if m == 0.0 {
                        continue;
                    }
                    g2[j] += s * m * act.apply(pre[j]);
                    let back = s * w2[j] * m * act.derivative(pre[j]);
                    if back != 0.0 {
                        for (g, x) in g1[j * inputs..(j + 1) * inputs].iter_mut().zip(a) {
                            *g += back * x;
                        }
                    }
                }
                out
            }
        }
    }
}

pub fn forward(params: &MlpParams, a: &[f64], activation: Activation) -> Result<f64> {
    params.forward(a, activation)
}

/// One training example: input action and (possibly perturbed) target.
pub type Example<'a> = (&'a [f64], f64);

/// Anchored loss
/// `(1/σ²)·Σ (target − g(a))² + (1/λ)·‖θ − anchor‖²` over `batch`, and its gradient.
pub fn loss_and_gradient(
    params: &MlpParams,
    anchor: &MlpParams,
    batch: &[Example<'_>],
    prior_var: f64,
    noise_var: f64,
    activation: Activation,
) -> Result<(f64, MlpParams)> {
    loss_and_gradient_masked(params, anchor, batch, None, prior_var, noise_var, activation)
}

/// As [`loss_and_gradient`], with an optional per-example hidden-unit mask.
pub(crate) fn loss_and_gradient_masked(
    params: &MlpParams,
    anchor: &MlpParams,
    batch: &[Example<'_>],
    masks: Option<&[Vec<f64>]>,
    prior_var: f64,
    noise_var: f64,
    activation: Activation,
) -> Result<(f64, MlpParams)> {
    if params.arch != anchor.arch {
        return Err(Error::invalid("params and anchor have different shapes"));
    }
    if !(prior_var > 0.0) || !(noise_var > 0.0) {
        return Err(Error::invalid("prior and noise variances must be positive"));
    }
    let inputs = params.arch.inputs();
    let mut grad = MlpParams::zeros(params.arch);
    let mut data_loss = 0.0;
    for (i, &(a, target)) in batch.iter().enumerate() {
        check_dim(inputs, a.len())?;
        let mask = masks.map(|m| m[i].as_slice());
        let mut residual = 0.0;
        params.accumulate_output_gradient(
            a,
            activation,
            mask,
            |out| {
                residual = target - out;
                -2.0 * residual / noise_var
            },
            &mut grad.data,
        );
        data_loss += residual * residual;
    }
    let mut prior_loss = 0.0;
    for ((g, &p), &q) in grad.data.iter_mut().zip(&params.data).zip(&anchor.data) {
        let d = p - q;
        prior_loss += d * d;
        *g += 2.0 * d / prior_var;
    }
    Ok((data_loss / noise_var + prior_loss / prior_var, grad))
}
