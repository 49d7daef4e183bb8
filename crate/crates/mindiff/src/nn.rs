//! One-hidden-layer sigmoid classifier with manual backprop and Adam.
//!
//! The network is `x -> relu(x W1 + b1) -> sigmoid(h . w2 + b2)`. Backward
//! takes an arbitrary upstream gradient with respect to the predicted
//! probabilities, so the training loop can add fairness-penalty gradients to
//! the primary-loss gradient and backpropagate the sum in one pass.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::distr::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are clamped to `[EPS, 1 - EPS]` inside the cross-entropy so
/// the loss and its gradient stay finite for saturated predictions.
pub const BCE_CLAMP: f64 = 1e-7;

/// Sensitive-group label for one example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    /// Majority / non-protected slice.
    Group0,
    /// Protected slice the fairness penalties target.
    Group1,
    /// Group label withheld (never sampled by the penalties).
    Unknown,
}

impl Group {
    /// Numeric indicator used by the correlation penalty: 0, 1, or `None`
    /// when the label is withheld.
    pub fn indicator(self) -> Option<f64> {
        match self {
            Group::Group0 => Some(0.0),
            Group::Group1 => Some(1.0),
            Group::Unknown => None,
        }
    }
}

/// A minibatch of examples: features, binary labels, and group labels.
#[derive(Debug, Clone)]
pub struct Batch {
    x: Array2<f64>,
    y: Array1<f64>,
    groups: Vec<Group>,
}

impl Batch {
    /// Build a batch, validating that rows line up and labels are 0/1.
    pub fn new(x: Array2<f64>, y: Array1<f64>, groups: Vec<Group>) -> Result<Batch> {
        if x.nrows() == 0 {
            return Err(Error::Config("batch must contain at least one example".into()));
        }
        if x.nrows() != y.len() || x.nrows() != groups.len() {
            return Err(Error::DimensionMismatch(format!(
                "batch rows disagree: x has {}, y has {}, groups has {}",
                x.nrows(),
                y.len(),
                groups.len()
            )));
        }
        if let Some(bad) = y.iter().find(|v| **v != 0.0 && **v != 1.0) {
            return Err(Error::Config(format!("labels must be 0 or 1, got {bad}")));
        }
        Ok(Batch { x, y, groups })
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Weights and biases of the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Input-to-hidden weights, shape `[input_dim, hidden_units]`.
    pub w1: Array2<f64>,
    /// Hidden biases, length `hidden_units`.
    pub b1: Array1<f64>,
    /// Hidden-to-output weights, length `hidden_units`.
    pub w2: Array1<f64>,
    /// Output bias.
    pub b2: f64,
}

impl ModelParams {
    /// Glorot-uniform initialization: weights drawn from
    /// `U(-a, a), a = sqrt(6 / (fan_in + fan_out))`, biases zero. Draw order
    /// is fixed (`w1` row-major, then `w2`) so a seeded RNG reproduces the
    /// same model bit for bit.
    pub fn glorot<R: Rng>(input_dim: usize, hidden_units: usize, rng: &mut R) -> Result<ModelParams> {
        if input_dim == 0 || hidden_units == 0 {
            return Err(Error::Config(format!(
                "layer sizes must be positive, got input_dim={input_dim}, hidden_units={hidden_units}"
            )));
        }
        let mut draw = |fan_in: usize, fan_out: usize, n: usize| -> Vec<f64> {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-a, a).expect("finite bounds");
            (0..n).map(|_| dist.sample(rng)).collect()
        };
        let w1 = Array2::from_shape_vec(
            (input_dim, hidden_units),
            draw(input_dim, hidden_units, input_dim * hidden_units),
        )
        .expect("shape matches element count");
        let w2 = Array1::from_vec(draw(hidden_units, 1, hidden_units));
        Ok(ModelParams {
            w1,
            b1: Array1::zeros(hidden_units),
            w2,
            b2: 0.0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden_units(&self) -> usize {
        self.w1.ncols()
    }

    fn check_coherent(&self) -> Result<()> {
        if self.b1.len() != self.hidden_units() || self.w2.len() != self.hidden_units() {
            return Err(Error::DimensionMismatch(format!(
                "parameter shapes disagree: w1 is {}x{}, b1 has {}, w2 has {}",
                self.input_dim(),
                self.hidden_units(),
                self.b1.len(),
                self.w2.len()
            )));
        }
        Ok(())
    }
}

/// Gradients (or any other per-parameter accumulator) with the same shape as
/// [`ModelParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrads {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
}

impl ParamGrads {
    pub fn zeros_like(params: &ModelParams) -> ParamGrads {
        ParamGrads {
            w1: Array2::zeros(params.w1.raw_dim()),
            b1: Array1::zeros(params.b1.raw_dim()),
            w2: Array1::zeros(params.w2.raw_dim()),
            b2: 0.0,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.w1.iter().all(|v| v.is_finite())
            && self.b1.iter().all(|v| v.is_finite())
            && self.w2.iter().all(|v| v.is_finite())
            && self.b2.is_finite()
    }

    fn shape_matches(&self, params: &ModelParams) -> bool {
        self.w1.raw_dim() == params.w1.raw_dim()
            && self.b1.len() == params.b1.len()
            && self.w2.len() == params.w2.len()
    }
}

/// Intermediate activations cached by [`forward_trace`] so backward does not
/// recompute the forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Post-ReLU hidden activations, shape `[batch, hidden_units]`.
    pub hidden: Array2<f64>,
    /// Predicted probabilities, length `batch`.
    pub probs: Array1<f64>,
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Run the network on a feature matrix, returning per-row probabilities.
pub fn forward(params: &ModelParams, x: &Array2<f64>) -> Result<Array1<f64>> {
    Ok(forward_trace(params, x)?.probs)
}

/// Forward pass that also returns the hidden activations needed by
/// [`backward`].
pub fn forward_trace(params: &ModelParams, x: &Array2<f64>) -> Result<ForwardTrace> {
    params.check_coherent()?;
    if x.ncols() != params.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "input has {} features but model expects {}",
            x.ncols(),
            params.input_dim()
        )));
    }
    let mut hidden = x.dot(&params.w1);
    hidden += &params.b1;
    hidden.mapv_inplace(|v| v.max(0.0));
    let logits = hidden.dot(&params.w2) + params.b2;
    let probs = logits.mapv(sigmoid);
    Ok(ForwardTrace { hidden, probs })
}

/// Backpropagate an upstream gradient `dL/dp` (one entry per prediction)
/// through the network, returning parameter gradients.
///
/// Linearity in `upstream` is what lets callers sum the primary-loss and
/// penalty gradients on the predictions and call this once.
pub fn backward(
    params: &ModelParams,
    x: &Array2<f64>,
    trace: &ForwardTrace,
    upstream: &Array1<f64>,
) -> Result<ParamGrads> {
    params.check_coherent()?;
    let b = x.nrows();
    if trace.probs.len() != b || trace.hidden.nrows() != b || upstream.len() != b {
        return Err(Error::DimensionMismatch(format!(
            "backward rows disagree: x has {b}, trace has {}, upstream has {}",
            trace.probs.len(),
            upstream.len()
        )));
    }
    if x.ncols() != params.input_dim() || trace.hidden.ncols() != params.hidden_units() {
        return Err(Error::DimensionMismatch(
            "backward feature dimensions disagree with model".into(),
        ));
    }
    if upstream.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("upstream gradient contains a non-finite value".into()));
    }

    // dL/dz2 = dL/dp * sigmoid'(z2), with sigmoid'(z2) = p (1 - p).
    let delta2 = Zip::from(upstream)
        .and(&trace.probs)
        .map_collect(|&u, &p| u * p * (1.0 - p));

    let gw2 = trace.hidden.t().dot(&delta2);
    let gb2 = delta2.sum();

    // dL/dz1 = (delta2 outer w2) masked by the ReLU: zero where the unit was
    // inactive. ReLU subgradient at exactly zero is taken as zero.
    let mut dz1 = Array2::zeros((b, params.hidden_units()));
    Zip::indexed(&mut dz1).and(&trace.hidden).for_each(|(i, j), g, &h| {
        if h > 0.0 {
            *g = delta2[i] * params.w2[j];
        }
    });

    let gw1 = x.t().dot(&dz1);
    let gb1 = dz1.sum_axis(Axis(0));

    Ok(ParamGrads {
        w1: gw1,
        b1: gb1,
        w2: gw2,
        b2: gb2,
    })
}

/// Mean binary cross-entropy and its gradient with respect to the predicted
/// probabilities. Predictions are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]`.
pub fn bce_loss(probs: &Array1<f64>, y: &Array1<f64>) -> Result<(f64, Array1<f64>)> {
    if probs.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "probs has {} entries but labels has {}",
            probs.len(),
            y.len()
        )));
    }
    if probs.is_empty() {
        return Err(Error::Config("cross-entropy over an empty batch".into()));
    }
    let b = probs.len() as f64;
    let mut loss = 0.0;
    let grad = Zip::from(probs).and(y).map_collect(|&p, &yi| {
        let pc = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        loss -= yi * pc.ln() + (1.0 - yi) * (1.0 - pc).ln();
        (pc - yi) / (pc * (1.0 - pc)) / b
    });
    Ok((loss / b, grad))
}

/// Adam optimizer state: per-parameter moment estimates plus the step count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerState {
    m: ParamGrads,
    v: ParamGrads,
    step: u64,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl OptimizerState {
    /// Fresh state with zeroed moments and standard Adam constants
    /// (beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8).
    pub fn new(params: &ModelParams, learning_rate: f64) -> Result<OptimizerState> {
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive and finite, got {learning_rate}"
            )));
        }
        Ok(OptimizerState {
            m: ParamGrads::zeros_like(params),
            v: ParamGrads::zeros_like(params),
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }
}

/// Apply one Adam update in place. Rejects non-finite gradients without
/// touching the parameters.
pub fn optimizer_step(
    params: &mut ModelParams,
    grads: &ParamGrads,
    state: &mut OptimizerState,
) -> Result<()> {
    params.check_coherent()?;
    if !grads.shape_matches(params) {
        return Err(Error::DimensionMismatch(
            "gradient shapes disagree with parameters".into(),
        ));
    }
    if !grads.all_finite() {
        return Err(Error::NonFinite("gradient contains a non-finite value".into()));
    }

    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.learning_rate, state.epsilon);

    let scalar = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
    };

    for ((p, &g), (m, v)) in params
        .w1
        .iter_mut()
        .zip(grads.w1.iter())
        .zip(state.m.w1.iter_mut().zip(state.v.w1.iter_mut()))
    {
        scalar(p, g, m, v);
    }
    for ((p, &g), (m, v)) in params
        .b1
        .iter_mut()
        .zip(grads.b1.iter())
        .zip(state.m.b1.iter_mut().zip(state.v.b1.iter_mut()))
    {
        scalar(p, g, m, v);
    }
    for ((p, &g), (m, v)) in params
        .w2
        .iter_mut()
        .zip(grads.w2.iter())
        .zip(state.m.w2.iter_mut().zip(state.v.w2.iter_mut()))
    {
        scalar(p, g, m, v);
    }
    scalar(&mut params.b2, grads.b2, &mut state.m.b2, &mut state.v.b2);
    Ok(())
}
