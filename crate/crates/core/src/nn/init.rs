use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Glorot-uniform weights of shape `(fan_out, fan_in)`.
pub fn glorot(rng: &mut ChaCha8Rng, fan_out: usize, fan_in: usize) -> Array2<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_fn((fan_out, fan_in), |_| rng.gen_range(-limit..limit))
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, limit: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-limit..limit))
}

pub fn uniform1(rng: &mut ChaCha8Rng, n: usize, limit: f64) -> Array1<f64> {
    Array1::from_shape_fn(n, |_| rng.gen_range(-limit..limit))
}
