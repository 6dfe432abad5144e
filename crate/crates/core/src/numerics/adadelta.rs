//! Adadelta parameter updates.
//!
//! ```text
//! E[g²]  ← ρ·E[g²]  + (1-ρ)·g²
//! Δθ     = -√(E[Δθ²] + ε) / √(E[g²] + ε) · g
//! E[Δθ²] ← ρ·E[Δθ²] + (1-ρ)·Δθ²
//! θ      ← θ + Δθ
//! ```

use serde::{Deserialize, Serialize};

use super::{NumericsError, ParamStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdadeltaConfig {
    pub rho: f64,
    pub eps: f64,
}

impl Default for AdadeltaConfig {
    fn default() -> Self {
        Self { rho: 0.9, eps: 1e-6 }
    }
}

/// Running averages for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdadeltaState {
    pub sq_grad: Tensor,
    pub sq_update: Tensor,
}

impl AdadeltaState {
    pub fn for_param(param: &Tensor) -> Self {
        Self {
            sq_grad: Tensor::zeros(param.rows(), param.cols()),
            sq_update: Tensor::zeros(param.rows(), param.cols()),
        }
    }
}

/// One elementwise Adadelta update of `theta` in place.
pub fn adadelta_step(
    name: &str,
    theta: &mut Tensor,
    grad: &Tensor,
    state: &mut AdadeltaState,
    config: AdadeltaConfig,
) -> Result<(), NumericsError> {
    if theta.shape() != grad.shape()
        || theta.shape() != state.sq_grad.shape()
        || theta.shape() != state.sq_update.shape()
    {
        return Err(NumericsError::Shape(format!(
            "adadelta on {name}: parameter {:?}, gradient {:?}, accumulators {:?}/{:?}",
            theta.shape(),
            grad.shape(),
            state.sq_grad.shape(),
            state.sq_update.shape()
        )));
    }
    if !grad.is_finite() {
        return Err(NumericsError::NonFiniteGradient(name.to_string()));
    }
    let AdadeltaConfig { rho, eps } = config;
    let sq_grad = state.sq_grad.data_mut();
    let sq_update = state.sq_update.data_mut();
    for (((t, &g), eg), ex) in theta
        .data_mut()
        .iter_mut()
        .zip(grad.data())
        .zip(sq_grad.iter_mut())
        .zip(sq_update.iter_mut())
    {
        *eg = rho * *eg + (1.0 - rho) * g * g;
        let delta = -((*ex + eps).sqrt() / (*eg + eps).sqrt()) * g;
        *ex = rho * *ex + (1.0 - rho) * delta * delta;
        *t += delta;
    }
    Ok(())
}

/// Optimizer state for a whole [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Adadelta {
    pub config: AdadeltaConfig,
    states: Vec<AdadeltaState>,
}

impl Adadelta {
    pub fn new(params: &ParamStore, config: AdadeltaConfig) -> Self {
        let states = (0..params.len()).map(|i| AdadeltaState::for_param(params.tensor(i))).collect();
        Self { config, states }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &[Tensor]) -> Result<(), NumericsError> {
        if grads.len() != params.len() {
            return Err(NumericsError::Contract(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        for (i, (g, state)) in grads.iter().zip(&mut self.states).enumerate() {
            let (name, theta) = params.entry_mut(i);
            adadelta_step(name, theta, g, state, self.config)?;
        }
        Ok(())
    }

    pub fn state(&self, param: usize) -> &AdadeltaState {
        &self.states[param]
    }
}
