//! L1 clipping and the Laplace mechanism, applied record by record on a client.

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::dataset::ClientShard;
use crate::error::{Error, Result};
use crate::points::Points;
use crate::scalar::Scalar;

/// Privacy budget and the L1 bound enforced on every record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams<T> {
    pub epsilon: T,
    pub delta_sensitivity: T,
}

impl<T: Scalar> PrivacyParams<T> {
    pub fn new(epsilon: T, delta_sensitivity: T) -> Result<Self> {
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return Err(Error::InvalidInput(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !(delta_sensitivity > T::zero()) || !delta_sensitivity.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sensitivity must be positive, got {delta_sensitivity}"
            )));
        }
        Ok(Self {
            epsilon,
            delta_sensitivity,
        })
    }

    /// Laplace scale `b = delta / epsilon`.
    pub fn noise_scale(&self) -> T {
        self.delta_sensitivity / self.epsilon
    }
}

/// Projects `point` radially onto the L1 ball of radius `delta_sensitivity`.
pub fn clip_l1<T: Scalar>(point: &[T], delta_sensitivity: T) -> Result<Vec<T>> {
    if !(delta_sensitivity > T::zero()) {
        return Err(Error::InvalidInput("sensitivity must be positive".into()));
    }
    if point.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("point to clip"));
    }
    let norm: T = point.iter().map(|x| x.abs()).sum();
    if norm <= delta_sensitivity {
        return Ok(point.to_vec());
    }
    let scale = delta_sensitivity / norm;
    Ok(point.iter().map(|&x| x * scale).collect())
}

/// Zero-mean Laplace distribution sampled by inverting its CDF.
#[derive(Clone, Copy, Debug)]
pub struct Laplace {
    scale: f64,
}

impl Laplace {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale >= 0.0) || !scale.is_finite() {
            return Err(Error::InvalidInput(format!(
                "laplace scale must be non-negative, got {scale}"
            )));
        }
        Ok(Self { scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.5 * (x / self.scale).exp()
        } else {
            1.0 - 0.5 * (-x / self.scale).exp()
        }
    }
}

impl Distribution<f64> for Laplace {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // u in (-1/2, 1/2); u = -1/2 would give ln(0).
        let u = loop {
            let u = rng.random::<f64>() - 0.5;
            if u > -0.5 {
                break u;
            }
        };
        -self.scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
    }
}

/// Clips every point of the shard and adds i.i.d. Laplace noise of scale
/// `delta / epsilon` to each coordinate. Labels and indices pass through.
pub fn privatize<T: Scalar, R: Rng>(
    shard: &ClientShard<T>,
    params: &PrivacyParams<T>,
    rng: &mut R,
) -> Result<ClientShard<T>> {
    let noise = Laplace::new(params.noise_scale().as_f64())?;
    let mut points = Points::with_capacity(shard.points.dim(), shard.points.len())?;
    for row in shard.points.rows() {
        let mut clipped = clip_l1(row, params.delta_sensitivity)?;
        for x in clipped.iter_mut() {
            *x = *x + T::of(noise.sample(rng));
        }
        points.push(&clipped)?;
    }
    Ok(ClientShard {
        client_id: shard.client_id,
        points,
        labels: shard.labels.clone(),
        indices: shard.indices.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    #[test]
    fn clip_examples() {
        assert_eq!(clip_l1(&[0.3, -0.2], 1.0).unwrap(), vec![0.3, -0.2]);
        assert_eq!(clip_l1(&[3.0, 1.0], 2.0).unwrap(), vec![1.5, 0.5]);
        assert_eq!(clip_l1(&[0.0f32; 4], 1.0).unwrap(), vec![0.0; 4]);
        assert!(clip_l1(&[f64::NAN, 1.0], 1.0).is_err());
        assert!(clip_l1(&[1.0], 0.0).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(PrivacyParams::new(0.0, 1.0).is_err());
        assert!(PrivacyParams::new(1.0, -1.0).is_err());
        assert_eq!(PrivacyParams::new(0.5, 1.0).unwrap().noise_scale(), 2.0);
    }

    #[test]
    fn huge_epsilon_is_nearly_identity() {
        let shard = ClientShard {
            client_id: 0,
            points: Points::from_rows(&[[0.1, 0.2], [-0.3, 0.25]]).unwrap(),
            labels: Some(vec![1, 0]),
            indices: vec![4, 9],
        };
        let params = PrivacyParams::new(1e9, 1.0).unwrap();
        let out = privatize(&shard, &params, &mut seeded(1)).unwrap();
        for (&a, &b) in out.points.as_flat().iter().zip(shard.points.as_flat()) {
            assert!(f64::abs(a - b) < 1e-7);
        }
        assert_eq!(out.labels, shard.labels);
        assert_eq!(out.indices, shard.indices);
    }

    #[test]
    fn privatize_is_deterministic_under_seed() {
        let shard = ClientShard {
            client_id: 0,
            points: Points::from_rows(&[[0.1, 0.2], [-0.3, 0.25]]).unwrap(),
            labels: None,
            indices: vec![0, 1],
        };
        let params = PrivacyParams::new(0.5, 1.0).unwrap();
        let a = privatize(&shard, &params, &mut seeded(77)).unwrap();
        let b = privatize(&shard, &params, &mut seeded(77)).unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn variance_matches_two_b_squared() {
        // b = 1 / 0.5 = 2, Var = 2 b^2 = 8.
        let lap = Laplace::new(2.0).unwrap();
        let mut rng = seeded(2024);
        let n = 1_000_000;
        let samples: Vec<f64> = (0..n).map(|_| lap.sample(&mut rng)).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((var / 8.0 - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn mean_absolute_noise_matches_b() {
        // Delta = 1, epsilon = 0.01: b = 100 and E|X| = b.
        let params = PrivacyParams::new(0.01, 1.0).unwrap();
        let lap = Laplace::new(params.noise_scale()).unwrap();
        let mut rng = seeded(5);
        let n = 200_000;
        let mean_abs = (0..n).map(|_| lap.sample(&mut rng).abs()).sum::<f64>() / n as f64;
        assert!(
            (mean_abs / 100.0 - 1.0).abs() < 0.05,
            "mean |x| = {mean_abs}"
        );
    }

    #[test]
    fn zero_scale_gives_zero_noise() {
        let lap = Laplace::new(0.0).unwrap();
        let mut rng = seeded(3);
        assert!((0..100).all(|_| lap.sample(&mut rng) == 0.0));
    }

    proptest! {
        #[test]
        fn clip_bound_and_idempotence(
            v in proptest::collection::vec(-1e3f64..1e3, 1..8),
            delta in 1e-3f64..10.0,
        ) {
            let once = clip_l1(&v, delta).unwrap();
            let norm: f64 = once.iter().map(|x| x.abs()).sum();
            prop_assert!(norm <= delta * (1.0 + 1e-12));
            let twice = clip_l1(&once, delta).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() <= 1e-12 * delta.max(a.abs()));
            }
        }
    }
}
