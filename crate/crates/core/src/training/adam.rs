use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        Self {
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// Forgets the moment estimates, as if no step had been taken.
    pub fn reset(&mut self) {
        self.first_moment.iter_mut().for_each(|v| *v = 0.0);
        self.second_moment.iter_mut().for_each(|v| *v = 0.0);
        self.step_count = 0;
    }
}

/// One bias-corrected Adam update. `params` is left untouched on error.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    let n = params.len();
    if grads.len() != n || state.first_moment.len() != n || state.second_moment.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{n} parameters, {} gradients, {} moments",
            grads.len(),
            state.first_moment.len()
        )));
    }
    let t = state.step_count + 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t as i32);
    let c2 = 1.0 - b2.powi(t as i32);

    let mut next = params.to_vec();
    let mut m = state.first_moment.clone();
    let mut v = state.second_moment.clone();
    for i in 0..n {
        let g = grads[i];
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        next[i] -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
        if !next[i].is_finite() {
            return Err(Error::NonFiniteUpdate(i));
        }
    }
    params.copy_from_slice(&next);
    state.first_moment = m;
    state.second_moment = v;
    state.step_count = t;
    Ok(())
}
