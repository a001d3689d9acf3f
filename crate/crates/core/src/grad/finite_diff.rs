/// Default central-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Central differences `(f(θ + h e_i) - f(θ - h e_i)) / 2h` for every coordinate.
pub fn finite_difference_gradient<F>(mut f: F, params: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut theta = params.to_vec();
    (0..params.len())
        .map(|i| {
            let orig = theta[i];
            theta[i] = orig + step;
            let up = f(&theta);
            theta[i] = orig - step;
            let down = f(&theta);
            theta[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}
