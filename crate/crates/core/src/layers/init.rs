use rand::Rng;

use crate::Scalar;

/// Weight initialisation scheme.
///
/// `Xavier` draws weights from U(-a, a) with a = sqrt(6 / (fan_in + fan_out))
/// and sets biases to zero (LSTM forget-gate biases to one). `Zeros` sets
/// every parameter to zero, which gives a model whose posterior is uniform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Xavier,
    Zeros,
}

impl Init {
    pub(crate) fn weights<T: Scalar, R: Rng + ?Sized>(self, fan_in: usize, fan_out: usize, n: usize, rng: &mut R) -> Vec<T> {
        match self {
            Init::Zeros => vec![T::zero(); n],
            Init::Xavier => {
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                (0..n)
                    .map(|_| T::from_f64_lossy(rng.gen_range(-bound..=bound)))
                    .collect()
            }
        }
    }
}
