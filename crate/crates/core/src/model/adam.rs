use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use crate::error::{Result, ShsError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, shaped like the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Result<Self> {
        Ok(AdamState {
            m: ModelParams::zeros(params.dims)?,
            v: ModelParams::zeros(params.dims)?,
            step: 0,
        })
    }
}

/// One bias-corrected Adam update at step `t` (1-based).
///
/// Weight decay is expected to be folded into `grads` already.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    t: u64,
    cfg: &AdamConfig,
) -> Result<()> {
    if t == 0 {
        return Err(ShsError::config("adam step index starts at 1"));
    }
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    let mats = params
        .matrices_mut()
        .zip(grads.matrices())
        .zip(state.m.matrices_mut().zip(state.v.matrices_mut()));
    for ((w, g), (m, v)) in mats {
        if w.shape() != g.shape() || w.shape() != m.shape() || w.shape() != v.shape() {
            return Err(ShsError::Shape(
                "adam buffers do not match the weights".into(),
            ));
        }
        for k in 0..w.data.len() {
            let gk = g.data[k];
            m.data[k] = cfg.beta1 * m.data[k] + (1.0 - cfg.beta1) * gk;
            v.data[k] = cfg.beta2 * v.data[k] + (1.0 - cfg.beta2) * gk * gk;
            let m_hat = m.data[k] / bc1;
            let v_hat = v.data[k] / bc2;
            w.data[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    state.step = t;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::ModelDims;
    use approx::assert_abs_diff_eq;

    fn tiny() -> ModelParams {
        ModelParams::zeros(ModelDims::with_hidden(1)).unwrap()
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = tiny();
        let mut g = tiny();
        g.head.data[0] = 1.0;
        let mut st = AdamState::new(&p).unwrap();
        adam_step(&mut p, &g, &mut st, 1, &AdamConfig::default()).unwrap();
        assert_abs_diff_eq!(p.head.data[0], -0.01, epsilon = 1e-9);
        // Untouched coordinates stay put.
        assert_eq!(p.head.data[1], 0.0);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = ModelParams::init(ModelDims::with_hidden(3), 4).unwrap();
        let before = p.clone();
        let g = ModelParams::zeros(p.dims).unwrap();
        let mut st = AdamState::new(&p).unwrap();
        adam_step(&mut p, &g, &mut st, 1, &AdamConfig::default()).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn step_zero_rejected() {
        let mut p = tiny();
        let g = tiny();
        let mut st = AdamState::new(&p).unwrap();
        assert!(adam_step(&mut p, &g, &mut st, 0, &AdamConfig::default()).is_err());
    }
}
