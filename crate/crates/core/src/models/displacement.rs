use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::rng::StreamRng;

/// Law of a single displacement `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisplacementLaw {
    Normal { mean: f64, variance: f64 },
    Exponential { rate: f64 },
    PointMass { location: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl DisplacementLaw {
    pub fn standard_normal() -> Self {
        DisplacementLaw::Normal {
            mean: 0.0,
            variance: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = match *self {
            DisplacementLaw::Normal { mean, variance } => {
                mean.is_finite() && variance.is_finite() && variance >= 0.0
            }
            DisplacementLaw::Exponential { rate } => rate.is_finite() && rate > 0.0,
            DisplacementLaw::PointMass { location } => location.is_finite(),
            DisplacementLaw::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
        };
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidLaw(format!("{self:?}")))
        }
    }

    /// `E[exp(-theta X)]`, or `+inf` outside the finiteness domain.
    pub fn laplace(&self, theta: f64) -> f64 {
        match *self {
            DisplacementLaw::Normal { mean, variance } => {
                (-theta * mean + 0.5 * theta * theta * variance).exp()
            }
            DisplacementLaw::Exponential { rate } => {
                if theta > -rate {
                    rate / (rate + theta)
                } else {
                    f64::INFINITY
                }
            }
            DisplacementLaw::PointMass { location } => (-theta * location).exp(),
            DisplacementLaw::Uniform { lo, hi } => {
                let width = hi - lo;
                let z = theta * width;
                if z.abs() < 1e-8 {
                    // (1 - e^{-z}) / z = 1 - z/2 + z^2/6
                    (-theta * lo).exp() * (1.0 - z / 2.0 + z * z / 6.0)
                } else {
                    ((-theta * lo).exp() - (-theta * hi).exp()) / z
                }
            }
        }
    }

    /// Whether the law is a.s. strictly positive.
    pub fn is_positive(&self) -> bool {
        match *self {
            DisplacementLaw::Normal { .. } => false,
            DisplacementLaw::Exponential { .. } => true,
            DisplacementLaw::PointMass { location } => location > 0.0,
            DisplacementLaw::Uniform { lo, .. } => lo >= 0.0,
        }
    }

    /// The location when the law is a point mass.
    pub fn degenerate_location(&self) -> Option<f64> {
        match *self {
            DisplacementLaw::PointMass { location } => Some(location),
            DisplacementLaw::Normal { mean, variance } if variance == 0.0 => Some(mean),
            _ => None,
        }
    }

    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        match *self {
            DisplacementLaw::Normal { mean, variance } => {
                if variance == 0.0 {
                    mean
                } else {
                    Normal::new(mean, variance.sqrt())
                        .expect("validated normal law")
                        .sample(rng)
                }
            }
            DisplacementLaw::Exponential { rate } => {
                Exp::new(rate).expect("validated rate").sample(rng)
            }
            DisplacementLaw::PointMass { location } => location,
            DisplacementLaw::Uniform { lo, hi } => rng.random_range(lo..hi),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn gaussian_transform_closed_form() {
        let law = DisplacementLaw::standard_normal();
        assert!((law.laplace(1.0) - 0.5f64.exp()).abs() < 1e-15);
        assert_eq!(law.laplace(0.0), 1.0);
    }

    #[test]
    fn exponential_transform_domain() {
        let law = DisplacementLaw::Exponential { rate: 2.0 };
        assert!((law.laplace(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!(law.laplace(-2.0).is_infinite());
        assert!(law.laplace(-3.0).is_infinite());
    }

    #[test]
    fn uniform_transform_continuous_at_zero() {
        let law = DisplacementLaw::Uniform { lo: 0.5, hi: 2.0 };
        assert!((law.laplace(0.0) - 1.0).abs() < 1e-15);
        let small = law.laplace(1e-9);
        let direct = ((-1e-9f64 * 0.5).exp() - (-1e-9f64 * 2.0).exp()) / (1e-9 * 1.5);
        assert!((small - direct).abs() < 1e-7);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(DisplacementLaw::Normal { mean: 0.0, variance: -1.0 }.validate().is_err());
        assert!(DisplacementLaw::Exponential { rate: 0.0 }.validate().is_err());
        assert!(DisplacementLaw::Uniform { lo: 1.0, hi: 1.0 }.validate().is_err());
        assert!(DisplacementLaw::PointMass { location: f64::NAN }.validate().is_err());
    }

    #[test]
    fn monte_carlo_transform_agrees() {
        let mut rng = seeded(11);
        for law in [
            DisplacementLaw::standard_normal(),
            DisplacementLaw::Exponential { rate: 1.5 },
            DisplacementLaw::Uniform { lo: -1.0, hi: 2.0 },
        ] {
            let theta = 0.7;
            let n = 200_000;
            let draws: Vec<f64> = (0..n).map(|_| (-theta * law.sample(&mut rng)).exp()).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            assert!((mean - law.laplace(theta)).abs() < 5.0 * se, "{law:?}");
        }
    }
}
