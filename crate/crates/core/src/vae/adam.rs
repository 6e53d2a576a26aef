use serde::{Deserialize, Serialize};

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate_times_sign() {
        let grad = [3.0, -0.02, 1e-3, -250.0];
        let mut params = [0.0; 4];
        let mut adam = Adam::new(4, 0.01);
        adam.update(&mut params, &grad);
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        for (p, g) in params.iter().zip(&grad) {
            let want = -0.01 * g / (g.abs() + 1e-8);
            assert!((p - want).abs() < 1e-15);
            assert!((p.abs() - 0.01).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut params = [1.0, 2.0];
        let mut adam = Adam::new(2, 0.0);
        for _ in 0..5 {
            adam.update(&mut params, &[0.5, -0.5]);
        }
        assert_eq!(params, [1.0, 2.0]);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = [5.0, -3.0];
        let mut adam = Adam::new(2, 0.05);
        for _ in 0..2000 {
            let g = [2.0 * (p[0] - 1.0), 2.0 * (p[1] + 2.0)];
            adam.update(&mut p, &g);
        }
        assert!((p[0] - 1.0).abs() < 1e-3 && (p[1] + 2.0).abs() < 1e-3);
    }
}
