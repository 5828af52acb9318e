use rand::Rng;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted dropout. In training mode each element is zeroed with
/// probability `rate` and survivors are scaled by `1 / (1 - rate)`; in
/// evaluation mode (or at rate 0) the input is returned unchanged.
pub fn dropout<T: Scalar, R: Rng + ?Sized>(x: &Tensor<T>, rate: f64, mode: Mode, rng: &mut R) -> Result<Tensor<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok(x.clone());
    }
    let keep = T::from_f64_lossy(1.0 / (1.0 - rate));
    let mask = (0..x.numel())
        .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep })
        .collect();
    x.mask(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::from_vec(vec![1.5f64, -2.0, 0.25]).unwrap();
        for mode in [Mode::Train, Mode::Eval] {
            let y = dropout(&x, 0.0, mode, &mut rng).unwrap();
            assert!(y.same_node(&x));
        }
        let y = dropout(&x, 0.5, Mode::Eval, &mut rng).unwrap();
        assert_eq!(y.to_vec(), x.to_vec());
    }

    #[test]
    fn rejects_bad_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::from_vec(vec![1.0f64]).unwrap();
        for rate in [-0.1, 1.0, 1.5, f64::NAN] {
            assert!(matches!(dropout(&x, rate, Mode::Train, &mut rng), Err(Error::Config(_))));
        }
    }

    #[test]
    fn inverted_dropout_preserves_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let x = Tensor::from_vec(vec![1.0f64; 100_000]).unwrap();
        let y = dropout(&x, 0.5, Mode::Train, &mut rng).unwrap().to_vec();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!((0.99..=1.01).contains(&mean), "mean {mean}");
        assert!(y.iter().all(|&v| v == 0.0 || v == 2.0));
    }
}
