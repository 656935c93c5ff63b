//! Adam optimizer (bias-corrected first/second moments).

use super::{GradientTable, ParamRange, ParamStore};

#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(n_params: usize, learning_rate: f64) -> AdamState {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update over contiguous parameter/gradient slices.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "parameter length mismatch");
        assert_eq!(grads.len(), self.m.len(), "gradient length mismatch");
        self.t += 1;
        let t = self.t as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }

    /// One update over a parameter group that may span several ranges of
    /// the store. Moment slots follow the concatenation of the ranges.
    pub fn step_ranges(
        &mut self,
        store: &mut ParamStore,
        ranges: &[ParamRange],
        grads: &GradientTable,
    ) {
        let total: usize = ranges.iter().map(|r| r.len as usize).sum();
        assert_eq!(total, self.m.len(), "parameter group length mismatch");
        self.t += 1;
        let t = self.t as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        let mut slot = 0;
        for range in ranges {
            for id in range.iter() {
                let g = grads.get(id);
                self.m[slot] = self.beta1 * self.m[slot] + (1.0 - self.beta1) * g;
                self.v[slot] = self.beta2 * self.v[slot] + (1.0 - self.beta2) * g * g;
                let m_hat = self.m[slot] / bc1;
                let v_hat = self.v[slot] / bc2;
                let p = store.value(id) - self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
                store.set(id, p);
                slot += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut adam = AdamState::new(3, 0.1);
        let mut params = [1.0, -2.0, 0.5];
        adam.step(&mut params, &[0.0, 0.0, 0.0]);
        assert_eq!(params, [1.0, -2.0, 0.5]);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn first_step_is_signed_learning_rate() {
        // bias-corrected m_hat = g, v_hat = g^2 at t=1, so the update is
        // -lr * g / (|g| + eps) ~ -lr * sign(g); the eps offset keeps the
        // lr*1e-6 window only for |g| >> eps/1e-6
        for g in [0.37, -1.25e3, 0.04] {
            let mut adam = AdamState::new(1, 0.01);
            let mut p = [2.0];
            adam.step(&mut p, &[g]);
            let expected = 2.0 - 0.01 * g.signum();
            assert!((p[0] - expected).abs() <= 0.01 * 1e-6);
        }
    }

    #[test]
    fn trajectory_matches_independent_reference() {
        // Reference: textbook Adam transcribed independently of AdamState,
        // run on f(x) = x^2 (gradient 2x) from x = 1 at lr 0.1.
        let (beta1, beta2, eps, lr) = (0.9, 0.999, 1e-8, 0.1);
        let mut x_ref = 1.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let mut expected = Vec::new();
        for t in 1..=3 {
            let g = 2.0 * x_ref;
            m = beta1 * m + (1.0 - beta1) * g;
            v = beta2 * v + (1.0 - beta2) * g * g;
            let m_hat = m / (1.0 - beta1.powi(t));
            let v_hat = v / (1.0 - beta2.powi(t));
            x_ref -= lr * m_hat / (v_hat.sqrt() + eps);
            expected.push(x_ref);
        }

        let mut adam = AdamState::new(1, lr);
        let mut p = [1.0f64];
        for step in 0..3 {
            let g = [2.0 * p[0]];
            adam.step(&mut p, &g);
            assert_relative_eq!(p[0], expected[step], epsilon = 1e-12);
        }
    }

    #[test]
    #[should_panic(expected = "length mismatch")]
    fn length_mismatch_is_a_usage_error() {
        let mut adam = AdamState::new(2, 0.1);
        let mut params = [1.0];
        adam.step(&mut params, &[0.0]);
    }
}
