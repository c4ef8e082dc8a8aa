//! Adam with the standard bias-corrected moment recurrence.

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step_count: 0,
        }
    }
}

/// In-place Adam update:
/// m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;
/// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.step_count += 1;
    let t = state.step_count as f64;
    let bc1 = 1.0 - ADAM_BETA1.powf(t);
    let bc2 = 1.0 - ADAM_BETA2.powf(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_closed_form() {
        // With g = 1: m_hat = v_hat = 1, update = -lr / (1 + eps).
        let mut params = vec![0.5];
        let mut state = AdamState::new(1);
        adam_step(&mut params, &[1.0], &mut state, 1e-3);
        let expected = 0.5 - 1e-3 / (1.0 + ADAM_EPS);
        assert!((params[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = vec![1.0, -2.0];
        let mut state = AdamState::new(2);
        adam_step(&mut params, &[0.0, 0.0], &mut state, 1e-2);
        assert_eq!(params, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_is_scale_invariant() {
        // Evaluated at both scales: the first update depends on g only
        // through m_hat / sqrt(v_hat) = sign(g).
        let run = |g: f64| {
            let mut p = vec![0.0];
            let mut s = AdamState::new(1);
            adam_step(&mut p, &[g], &mut s, 1e-3);
            p[0]
        };
        let small = run(1.0);
        let large = run(1000.0);
        assert!((small - large).abs() / small.abs() < 1e-3);
    }
}
