//! Additive white Gaussian noise channel.

use crate::rng::{self, fill_gaussian};
use crate::{Error, Result};

/// Channel output together with the noise realisation that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub seed: u64,
}

/// `y = x + w` with `w` i.i.d. `N(0, sigma2)` from stream 0 of `seed`.
pub fn transmit(x: &[f64], sigma2: f64, seed: u64) -> Result<ChannelDraw> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::invalid("sigma2", format!("{sigma2} is negative")));
    }
    let mut w = vec![0.0; x.len()];
    if sigma2 > 0.0 {
        fill_gaussian(&mut rng::stream(seed, 0), &mut w, sigma2.sqrt());
    }
    let y = x.iter().zip(&w).map(|(a, b)| a + b).collect();
    Ok(ChannelDraw { y, w, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_is_identity() {
        let x = vec![1.0, -2.0, 3.5];
        let d = transmit(&x, 0.0, 4).unwrap();
        assert_eq!(d.y, x);
        assert!(d.w.iter().all(|w| *w == 0.0));
    }

    #[test]
    fn output_is_input_plus_noise() {
        let x: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let d = transmit(&x, 2.0, 4).unwrap();
        for i in 0..100 {
            assert_eq!(d.y[i], x[i] + d.w[i]);
        }
    }

    #[test]
    fn noise_variance_concentrates() {
        let n = 10_000;
        let sigma2 = 1.7;
        let d = transmit(&vec![0.0; n], sigma2, 123).unwrap();
        let var = d.w.iter().map(|w| w * w).sum::<f64>() / n as f64;
        assert!((var - sigma2).abs() <= 4.0 * sigma2 * (2.0 / n as f64).sqrt(), "{var}");
    }

    #[test]
    fn seeds_give_different_noise() {
        let x = vec![0.0; 8];
        let a = transmit(&x, 1.0, 1).unwrap();
        let b = transmit(&x, 1.0, 2).unwrap();
        assert_ne!(a.w[0], b.w[0]);
        assert_eq!(a, transmit(&x, 1.0, 1).unwrap());
    }

    #[test]
    fn negative_variance_rejected() {
        assert!(transmit(&[0.0], -1.0, 0).is_err());
    }
}
