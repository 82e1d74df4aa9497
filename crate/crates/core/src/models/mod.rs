//! Offspring point-process laws and their closed forms.

mod count;
mod displacement;
mod law;

pub use count::{CountLaw, DiscretePareto, AGGREGATE_TAIL_TERMS, EXACT_SUM_LIMIT};
pub use displacement::DisplacementLaw;
pub(crate) use law::sample_offspring_with_floor;
pub use law::{
    calibrate_infinite_example, check_conditions, kappa, laplace_m, normalized_moment,
    sample_offspring, tail_constant_w1, Calibration, Condition, CustomLaw, LawReport, Offspring,
    OffspringLaw, ALPHA_IN_RANGE, CALIBRATION_TOLERANCE, CONTRACTION, DISPLACEMENT_CONDITION,
    M_ALPHA_THETA_FINITE, M_THETA_FINITE, SUPERCRITICAL, TAIL_INDEX_MATCHES,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid law: {0}")]
    InvalidLaw(String),
    #[error("outside the transform domain: {0}")]
    Domain(String),
    #[error("custom law `{0}` has no analytic intensity transform")]
    NoAnalyticForm(String),
    #[error("alpha = {0} is outside (1, 2)")]
    AlphaOutOfRange(f64),
    #[error("m is infinite at theta = {0}")]
    InfiniteTransform(f64),
    #[error("unsupported law: {0}")]
    UnsupportedLaw(String),
    #[error("no root: {0}")]
    NoRoot(String),
    #[error("an infinite point set needs a positive truncation epsilon")]
    ZeroTruncation,
}
