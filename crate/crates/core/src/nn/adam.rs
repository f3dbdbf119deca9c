//! Bias-corrected adaptive-moment parameter update.

use serde::{Deserialize, Serialize};

use super::{check_same_shape, MlpParams, OptState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

pub(crate) fn adam_update_block(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    cfg: &AdamConfig,
    step: u64,
) {
    let bc1 = 1.0 - cfg.beta1.powi(step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(step as i32);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

/// One optimizer step; increments the step counter.
pub fn adam_step(
    params: &mut MlpParams,
    grads: &MlpParams,
    state: &mut OptState,
    cfg: &AdamConfig,
) -> Result<()> {
    check_same_shape(params, grads, "adam_step")?;
    for (name, block) in grads.blocks() {
        if !block.iter().all(|g| g.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite gradient in parameter block '{name}'"
            )));
        }
    }
    state.step += 1;
    let step = state.step;
    for (((_, p), (_, g)), ((_, m), (_, v))) in params
        .blocks_mut()
        .into_iter()
        .zip(grads.blocks())
        .zip(state.m.blocks_mut().into_iter().zip(state.v.blocks_mut()))
    {
        adam_update_block(p, g, m, v, cfg, step);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_params(value: f64) -> MlpParams {
        let mut p = MlpParams::zeros(1, 1, 1);
        p.w1[(0, 0)] = value;
        p
    }

    #[test]
    fn first_step_moves_by_roughly_lr_against_the_gradient_sign() {
        let cfg = AdamConfig::default();
        let mut p = scalar_params(1.0);
        let mut state = OptState::new(&p);
        let mut g = p.zeros_like();
        g.w1[(0, 0)] = 3.7;
        adam_step(&mut p, &g, &mut state, &cfg).unwrap();
        // Bias-corrected first step: lr * g / (|g| + eps') ~ lr.
        let moved = 1.0 - p.w1[(0, 0)];
        assert!((moved - cfg.lr).abs() < 1e-6, "moved {moved}");
        assert_eq!(state.step, 1);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let cfg = AdamConfig::default();
        let mut p = scalar_params(0.5);
        let mut state = OptState::new(&p);
        let g = p.zeros_like();
        for _ in 0..25 {
            adam_step(&mut p, &g, &mut state, &cfg).unwrap();
        }
        assert_eq!(p.w1[(0, 0)], 0.5);
    }

    #[test]
    fn matches_scalar_recurrence_for_two_steps() {
        let cfg = AdamConfig::default();
        let g_val = -1.25;
        let mut p = scalar_params(0.0);
        let mut state = OptState::new(&p);
        let mut g = p.zeros_like();
        g.w1[(0, 0)] = g_val;
        adam_step(&mut p, &g, &mut state, &cfg).unwrap();
        adam_step(&mut p, &g, &mut state, &cfg).unwrap();

        // Hand-rolled recurrence.
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let mut m = 0.0;
        let mut v = 0.0;
        let mut x: f64 = 0.0;
        for t in 1..=2u32 {
            m = b1 * m + (1.0 - b1) * g_val;
            v = b2 * v + (1.0 - b2) * g_val * g_val;
            let m_hat = m / (1.0 - b1.powi(t as i32));
            let v_hat = v / (1.0 - b2.powi(t as i32));
            x -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
        assert!((p.w1[(0, 0)] - x).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_names_the_block() {
        let cfg = AdamConfig::default();
        let mut p = MlpParams::zeros(2, 2, 2);
        let mut state = OptState::new(&p);
        let mut g = p.zeros_like();
        g.w2[(1, 0)] = f64::NAN;
        let err = adam_step(&mut p, &g, &mut state, &cfg).unwrap_err();
        assert!(err.to_string().contains("w2"), "{err}");
    }
}
