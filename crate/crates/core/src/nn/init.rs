use rand::Rng;

use super::matrix::DenseMatrix;

/// Glorot/Xavier uniform initialisation for a `fan_in × fan_out` weight.
pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> DenseMatrix {
    let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
    DenseMatrix::from_fn(fan_in, fan_out, |_, _| rng.gen_range(-limit..=limit))
}
