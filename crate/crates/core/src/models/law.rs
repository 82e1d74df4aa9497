use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::count::{CountLaw, DiscretePareto};
use super::displacement::DisplacementLaw;
use super::ModelError;
use crate::rng::StreamRng;

type Sampler = dyn Fn(&mut StreamRng) -> Vec<f64> + Send + Sync;
type Transform = dyn Fn(f64) -> f64 + Send + Sync;

/// A user-supplied point process.
#[derive(Clone)]
pub struct CustomLaw {
    pub name: String,
    sampler: Arc<Sampler>,
    laplace: Option<Arc<Transform>>,
}

impl CustomLaw {
    pub fn new<F>(name: impl Into<String>, sampler: F) -> Self
    where
        F: Fn(&mut StreamRng) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            sampler: Arc::new(sampler),
            laplace: None,
        }
    }

    /// Attaches the analytic intensity transform `theta -> m(theta)`.
    pub fn with_laplace<G>(mut self, m: G) -> Self
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.laplace = Some(Arc::new(m));
        self
    }

    pub fn sample(&self, rng: &mut StreamRng) -> Vec<f64> {
        (self.sampler)(rng)
    }
}

impl fmt::Debug for CustomLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomLaw")
            .field("name", &self.name)
            .field("analytic_m", &self.laplace.is_some())
            .finish()
    }
}

impl PartialEq for CustomLaw {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && Arc::ptr_eq(&self.sampler, &other.sampler)
            && match (&self.laplace, &other.laplace) {
                (None, None) => true,
                (Some(a), Some(b)) => Arc::ptr_eq(a, b),
                _ => false,
            }
    }
}

/// Reproduction point process of the branching random walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OffspringLaw {
    /// Pareto-tailed number of children, displacements i.i.d. and independent of the count.
    ParetoCount {
        count: DiscretePareto,
        displacement: DisplacementLaw,
    },
    /// All displacements are zero.
    GaltonWatson { count: CountLaw },
    /// Points `X_k = Y_k` for `k <= K` and `X_k = spacing * k` for `k > K`.
    InfinitePoints {
        k_law: DiscretePareto,
        y_law: DisplacementLaw,
        spacing: f64,
    },
    #[serde(skip)]
    Custom(CustomLaw),
}

/// One realization of the offspring point process.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Offspring {
    pub points: Vec<f64>,
    /// Upper bound on `sum exp(-theta x)` over points that were not materialized.
    pub truncated_weight_bound: f64,
}

/// A labelled admissibility check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub label: String,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawReport {
    pub m_theta: f64,
    pub m_alpha_theta: f64,
    pub kappa: f64,
    pub tail_constant_c: Option<f64>,
    pub conditions: Vec<Condition>,
}

impl LawReport {
    pub fn all_ok(&self) -> bool {
        self.conditions.iter().all(|c| c.ok)
    }

    pub fn condition(&self, label: &str) -> Option<bool> {
        self.conditions.iter().find(|c| c.label == label).map(|c| c.ok)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.conditions
            .iter()
            .filter(|c| !c.ok)
            .map(|c| c.label.as_str())
            .collect()
    }
}

pub const SUPERCRITICAL: &str = "supercritical";
pub const M_THETA_FINITE: &str = "m_theta_finite";
pub const M_ALPHA_THETA_FINITE: &str = "m_alpha_theta_finite";
pub const ALPHA_IN_RANGE: &str = "alpha_in_range";
pub const CONTRACTION: &str = "contraction";
pub const DISPLACEMENT_CONDITION: &str = "displacement_condition";
pub const TAIL_INDEX_MATCHES: &str = "count_tail_index_matches_alpha";

impl OffspringLaw {
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            OffspringLaw::ParetoCount {
                count,
                displacement,
            } => {
                count.validate()?;
                displacement.validate()
            }
            OffspringLaw::GaltonWatson { count } => count.validate(),
            OffspringLaw::InfinitePoints {
                k_law,
                y_law,
                spacing,
            } => {
                k_law.validate()?;
                y_law.validate()?;
                if k_law.min_count < 1 {
                    return Err(ModelError::InvalidLaw(
                        "K must take positive integer values (min_count >= 1)".into(),
                    ));
                }
                if !y_law.is_positive() {
                    return Err(ModelError::InvalidLaw("Y must be a positive law".into()));
                }
                if !(spacing.is_finite() && *spacing > 0.0) {
                    return Err(ModelError::InvalidLaw(format!(
                        "lattice spacing {spacing} must be positive"
                    )));
                }
                Ok(())
            }
            OffspringLaw::Custom(_) => Ok(()),
        }
    }

    /// Expected number of points, `E[N] = m(0)` (infinite for `InfinitePoints`).
    pub fn mean_count(&self) -> Option<f64> {
        match self {
            OffspringLaw::ParetoCount { count, .. } => Some(count.mean()),
            OffspringLaw::GaltonWatson { count } => Some(count.mean()),
            OffspringLaw::InfinitePoints { .. } => Some(f64::INFINITY),
            OffspringLaw::Custom(c) => c.laplace.as_ref().map(|m| m(0.0)),
        }
    }

    /// Location shared by every point, when displacements are deterministic.
    pub fn common_displacement(&self) -> Option<f64> {
        match self {
            OffspringLaw::GaltonWatson { .. } => Some(0.0),
            OffspringLaw::ParetoCount { displacement, .. } => displacement.degenerate_location(),
            _ => None,
        }
    }

    /// The count law of an offspring process whose points all sit at one location.
    pub fn collapsed_count(&self) -> Option<CountLaw> {
        match self {
            OffspringLaw::GaltonWatson { count } => Some(count.clone()),
            OffspringLaw::ParetoCount {
                count,
                displacement,
            } if displacement.degenerate_location().is_some() => Some(CountLaw::Pareto(*count)),
            _ => None,
        }
    }
}

/// `m(theta) = E[sum_j exp(-theta X_j)]`; `+inf` outside the finiteness domain.
pub fn laplace_m(law: &OffspringLaw, theta: f64) -> Result<f64, ModelError> {
    match law {
        OffspringLaw::ParetoCount {
            count,
            displacement,
        } => Ok(count.mean() * displacement.laplace(theta)),
        OffspringLaw::GaltonWatson { count } => Ok(count.mean()),
        OffspringLaw::InfinitePoints {
            k_law,
            y_law,
            spacing,
        } => {
            let s = theta * spacing;
            if !(s > 0.0) {
                return Err(ModelError::Domain(format!(
                    "theta * spacing = {s} must be positive"
                )));
            }
            let y_part = k_law.mean() * y_law.laplace(theta);
            let lattice = k_law.shifted_laplace(s) / (-(-s).exp_m1());
            Ok(y_part + lattice)
        }
        OffspringLaw::Custom(c) => match &c.laplace {
            Some(m) => Ok(m(theta)),
            None => Err(ModelError::NoAnalyticForm(c.name.clone())),
        },
    }
}

/// `kappa = m(alpha theta) / m(theta)^alpha`.
pub fn kappa(law: &OffspringLaw, theta: f64, alpha: f64) -> Result<f64, ModelError> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(ModelError::AlphaOutOfRange(alpha));
    }
    let m = laplace_m(law, theta)?;
    if !m.is_finite() {
        return Err(ModelError::InfiniteTransform(theta));
    }
    let ma = laplace_m(law, alpha * theta)?;
    if !ma.is_finite() {
        return Err(ModelError::InfiniteTransform(alpha * theta));
    }
    Ok(ma / m.powf(alpha))
}

/// `p -> m(p theta) / m(theta)^p`.
pub fn normalized_moment(law: &OffspringLaw, theta: f64, p: f64) -> Result<f64, ModelError> {
    Ok(laplace_m(law, p * theta)? / laplace_m(law, theta)?.powf(p))
}

/// Evaluates every admissibility condition for `(law, theta, alpha)`.
pub fn check_conditions(law: &OffspringLaw, theta: f64, alpha: f64) -> LawReport {
    let mut conditions = Vec::new();
    let mut push = |label: &str, ok: bool| {
        conditions.push(Condition {
            label: label.to_string(),
            ok,
        })
    };
    let alpha_ok = alpha > 1.0 && alpha < 2.0;
    push(ALPHA_IN_RANGE, alpha_ok);

    let supercritical = match law {
        OffspringLaw::InfinitePoints { k_law, .. } => k_law.mean() > 1.0,
        _ => law.mean_count().is_some_and(|m| m > 1.0),
    };
    push(SUPERCRITICAL, supercritical && law.validate().is_ok());

    let m_theta = laplace_m(law, theta).unwrap_or(f64::NAN);
    let m_alpha_theta = laplace_m(law, alpha * theta).unwrap_or(f64::NAN);
    push(M_THETA_FINITE, m_theta.is_finite() && m_theta > 0.0);
    push(
        M_ALPHA_THETA_FINITE,
        m_alpha_theta.is_finite() && m_alpha_theta > 0.0,
    );
    let kappa_value = m_alpha_theta / m_theta.powf(alpha);
    push(CONTRACTION, alpha_ok && kappa_value < 1.0);

    if let OffspringLaw::ParetoCount {
        count,
        displacement,
    } = law
    {
        // E[e^{-a theta X}] < E[N]^{a-1} (E[e^{-theta X}])^a < inf
        let lhs = displacement.laplace(alpha * theta);
        let rhs = count.mean().powf(alpha - 1.0) * displacement.laplace(theta).powf(alpha);
        push(DISPLACEMENT_CONDITION, lhs < rhs && rhs.is_finite());
    }

    let tail_index = match law {
        OffspringLaw::ParetoCount { count, .. } => Some(count.tail_index),
        OffspringLaw::GaltonWatson { count } => count.power_tail().map(|(_, a)| a),
        OffspringLaw::InfinitePoints { k_law, .. } => Some(k_law.tail_index),
        OffspringLaw::Custom(_) => None,
    };
    if !matches!(law, OffspringLaw::Custom(_)) {
        push(
            TAIL_INDEX_MATCHES,
            tail_index.is_some_and(|a| (a - alpha).abs() < 1e-12),
        );
    }

    LawReport {
        m_theta,
        m_alpha_theta,
        kappa: kappa_value,
        tail_constant_c: tail_constant_w1(law, theta, alpha).ok(),
        conditions,
    }
}

/// Constant `c` in `P(W_1(theta) > x) ~ c x^(-alpha)`.
///
/// For a count with `P(N > x) ~ d x^(-alpha)` carrying light-tailed i.i.d.
/// weights `xi_j = exp(-theta X_j) / m(theta)` the random sum has tail
/// `d (E xi)^alpha x^(-alpha)`.
pub fn tail_constant_w1(law: &OffspringLaw, theta: f64, alpha: f64) -> Result<f64, ModelError> {
    let matching = |tail_index: f64| -> Result<(), ModelError> {
        if (tail_index - alpha).abs() < 1e-12 {
            Ok(())
        } else {
            Err(ModelError::UnsupportedLaw(format!(
                "count tail index {tail_index} differs from alpha {alpha}"
            )))
        }
    };
    match law {
        OffspringLaw::ParetoCount {
            count,
            displacement,
        } => {
            matching(count.tail_index)?;
            let m = laplace_m(law, theta)?;
            let per_point = displacement.laplace(theta) / m;
            if !per_point.is_finite() || !laplace_m(law, alpha * theta)?.is_finite() {
                return Err(ModelError::InfiniteTransform(theta));
            }
            Ok(count.scale * per_point.powf(alpha))
        }
        OffspringLaw::GaltonWatson { count } => match count.power_tail() {
            Some((d, tail_index)) => {
                matching(tail_index)?;
                Ok(d * count.mean().powf(-alpha))
            }
            // Bounded or light-tailed counts put no mass on a power tail.
            None => Ok(0.0),
        },
        OffspringLaw::InfinitePoints { k_law, y_law, .. } => {
            matching(k_law.tail_index)?;
            let m = laplace_m(law, theta)?;
            Ok(k_law.scale * (y_law.laplace(theta) / m).powf(alpha))
        }
        OffspringLaw::Custom(c) => Err(ModelError::UnsupportedLaw(format!(
            "custom law `{}` has no closed-form tail constant",
            c.name
        ))),
    }
}

/// Result of [`calibrate_infinite_example`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub theta: f64,
    pub spacing: f64,
    pub m_theta: f64,
    pub residual: f64,
}

pub const CALIBRATION_TOLERANCE: f64 = 1e-10;

/// Finds `theta > 0` with `m(theta) = target_m` for the infinite-point law with
/// lattice spacing `spacing`, by bracket doubling and bisection.
pub fn calibrate_infinite_example(
    k_law: &DiscretePareto,
    y_law: &DisplacementLaw,
    spacing: f64,
    target_m: f64,
) -> Result<Calibration, ModelError> {
    let law = OffspringLaw::InfinitePoints {
        k_law: *k_law,
        y_law: y_law.clone(),
        spacing,
    };
    law.validate()?;
    let mean_k = k_law.mean();
    if !(mean_k > 1.0) {
        return Err(ModelError::NoRoot(format!(
            "E[K] = {mean_k} must exceed 1"
        )));
    }
    if !(target_m > 0.0 && target_m.is_finite()) {
        return Err(ModelError::NoRoot(format!("target m = {target_m}")));
    }
    let m = |theta: f64| laplace_m(&law, theta);

    // m is strictly decreasing in theta: m -> inf as theta -> 0 and m -> 0 as theta -> inf.
    let mut hi = 1.0;
    let mut steps = 0;
    while m(hi)? > target_m {
        hi *= 2.0;
        steps += 1;
        if steps > 200 || !hi.is_finite() {
            return Err(ModelError::NoRoot(format!(
                "m(theta) stays above {target_m} on the search bracket"
            )));
        }
    }
    let mut lo = hi / 2.0;
    steps = 0;
    while m(lo)? < target_m {
        lo /= 2.0;
        steps += 1;
        if steps > 200 || lo < f64::MIN_POSITIVE {
            return Err(ModelError::NoRoot(format!(
                "m(theta) stays below {target_m} on the search bracket"
            )));
        }
    }
    let mut theta = 0.5 * (lo + hi);
    for _ in 0..400 {
        theta = 0.5 * (lo + hi);
        let value = m(theta)?;
        if (value - target_m).abs() <= CALIBRATION_TOLERANCE * 0.5 || hi - lo <= f64::EPSILON * hi {
            break;
        }
        if value > target_m {
            lo = theta;
        } else {
            hi = theta;
        }
    }
    let m_theta = m(theta)?;
    let residual = (m_theta - target_m).abs();
    if residual > CALIBRATION_TOLERANCE {
        return Err(ModelError::NoRoot(format!(
            "bisection stalled with residual {residual}"
        )));
    }
    Ok(Calibration {
        theta,
        spacing,
        m_theta,
        residual,
    })
}

/// Draws one realization of the point process.
///
/// For `InfinitePoints` the lattice tail `{spacing * k : k > K}` is cut at the
/// first index whose weight `exp(-theta spacing k)` falls below
/// `epsilon / (1 + epsilon) * exp(-theta spacing (K + 1))`, which keeps the
/// reported bound below `epsilon` times the kept lattice weight.
pub fn sample_offspring(
    law: &OffspringLaw,
    theta: f64,
    epsilon: f64,
    rng: &mut StreamRng,
) -> Result<Offspring, ModelError> {
    sample_offspring_with_floor(law, theta, epsilon, 0.0, rng)
}

/// As [`sample_offspring`], but lattice points whose weight `exp(-theta x)` is
/// below `weight_floor` are folded into the truncation bound as well.
pub(crate) fn sample_offspring_with_floor(
    law: &OffspringLaw,
    theta: f64,
    epsilon: f64,
    weight_floor: f64,
    rng: &mut StreamRng,
) -> Result<Offspring, ModelError> {
    if !(epsilon >= 0.0) {
        return Err(ModelError::InvalidLaw(format!(
            "truncation epsilon {epsilon} must be nonnegative"
        )));
    }
    match law {
        OffspringLaw::ParetoCount {
            count,
            displacement,
        } => {
            let n = count.sample(rng);
            let points = (0..n).map(|_| displacement.sample(rng)).collect();
            Ok(Offspring {
                points,
                truncated_weight_bound: 0.0,
            })
        }
        OffspringLaw::GaltonWatson { count } => Ok(Offspring {
            points: vec![0.0; count.sample(rng) as usize],
            truncated_weight_bound: 0.0,
        }),
        OffspringLaw::InfinitePoints {
            k_law,
            y_law,
            spacing,
        } => {
            if epsilon == 0.0 {
                return Err(ModelError::ZeroTruncation);
            }
            let step = theta * spacing;
            if !(step > 0.0) {
                return Err(ModelError::Domain(format!(
                    "theta * spacing = {step} must be positive"
                )));
            }
            let k = k_law.sample(rng);
            let mut points: Vec<f64> = (0..k).map(|_| y_law.sample(rng)).collect();
            let first = k + 1;
            let first_weight = (-step * first as f64).exp();
            let relative_cut = epsilon / (1.0 + epsilon) * first_weight;
            let cut = relative_cut.max(weight_floor);
            let mut index = first;
            let mut weight = first_weight;
            while weight >= cut && weight > 0.0 {
                points.push(spacing * index as f64);
                index += 1;
                weight = (-step * index as f64).exp();
            }
            // sum_{j >= index} e^{-step j}
            let truncated_weight_bound = weight / (-(-step).exp_m1());
            Ok(Offspring {
                points,
                truncated_weight_bound,
            })
        }
        OffspringLaw::Custom(c) => Ok(Offspring {
            points: c.sample(rng),
            truncated_weight_bound: 0.0,
        }),
    }
}
