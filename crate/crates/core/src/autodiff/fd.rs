//! Central finite differences, the gradient oracle used across the test
//! suites and for reference gradient maps.

/// (f(p + h e_i) - f(p - h e_i)) / (2h) per coordinate, fixed step.
pub fn finite_diff_gradient<F: FnMut(&[f64]) -> f64>(mut f: F, p: &[f64], h: f64) -> Vec<f64> {
    let mut grad = Vec::with_capacity(p.len());
    let mut work = p.to_vec();
    for i in 0..p.len() {
        work[i] = p[i] + h;
        let fp = f(&work);
        work[i] = p[i] - h;
        let fm = f(&work);
        work[i] = p[i];
        grad.push((fp - fm) / (2.0 * h));
    }
    grad
}

/// Central differences with a per-parameter step h_i = h * (|p_i| + floor),
/// keeping the perturbation meaningful for parameters of any magnitude.
pub fn finite_diff_gradient_scaled<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    p: &[f64],
    h: f64,
    floor: f64,
) -> Vec<f64> {
    let mut grad = Vec::with_capacity(p.len());
    let mut work = p.to_vec();
    for i in 0..p.len() {
        let hi = h * (p[i].abs() + floor);
        work[i] = p[i] + hi;
        let fp = f(&work);
        work[i] = p[i] - hi;
        let fm = f(&work);
        work[i] = p[i];
        grad.push((fp - fm) / (2.0 * hi));
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cubic() {
        let g = finite_diff_gradient(|p| p[0].powi(3), &[2.0], 1e-4);
        assert_relative_eq!(g[0], 12.0, epsilon = 1e-6);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let g = finite_diff_gradient(|_| 7.5, &[1.0, -2.0, 0.0], 1e-4);
        assert_eq!(g, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn scaled_step_handles_small_parameters() {
        let p = [1e-4, 10.0];
        let g = finite_diff_gradient_scaled(|p| p[0] * p[0] * 1e6 + p[1], &p, 1e-3, 1e-3);
        assert_relative_eq!(g[0], 2.0 * 1e-4 * 1e6, max_relative = 1e-6);
        assert_relative_eq!(g[1], 1.0, max_relative = 1e-9);
    }
}
