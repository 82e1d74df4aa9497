//! Limit objects: the spectrally positive stable law of the innovations, the
//! stationary autoregressive tail process and the mixture characteristic
//! functions of the fluctuations.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::rng::StreamRng;
use crate::special::gamma;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StableError {
    #[error("invalid stable parameter: {0}")]
    InvalidParameter(String),
    #[error("mixing weights are empty")]
    EmptyWeights,
    #[error("mixing weight {0} is negative")]
    NegativeWeight(f64),
    #[error("betas are empty")]
    EmptyBetas,
}

/// Spectrally positive `alpha`-stable law with characteristic exponent
/// `Gamma(2-alpha)/(alpha-1) c |t|^alpha (cos(pi alpha/2) - i sin(pi alpha/2) sign t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableSpec {
    pub alpha: f64,
    pub c: f64,
}

impl StableSpec {
    pub fn new(alpha: f64, c: f64) -> Result<Self, StableError> {
        let spec = Self { alpha, c };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), StableError> {
        if !(self.alpha > 1.0 && self.alpha < 2.0) {
            return Err(StableError::InvalidParameter(format!(
                "alpha = {} is outside (1, 2)",
                self.alpha
            )));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(StableError::InvalidParameter(format!(
                "c = {} must be positive",
                self.c
            )));
        }
        Ok(())
    }

    /// `Gamma(2-alpha)/(alpha-1) c`.
    pub fn exponent_scale(&self) -> f64 {
        exponent_factor(self.alpha) * self.c
    }

    /// `sigma^alpha` of the classical parameterization.
    pub fn sigma_alpha(&self) -> f64 {
        self.exponent_scale() * (FRAC_PI_2 * self.alpha).cos().abs()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_alpha().powf(1.0 / self.alpha)
    }

    /// Skewness of the classical parameterization.
    pub fn beta(&self) -> f64 {
        1.0
    }

    /// Location of the classical parameterization.
    pub fn mu(&self) -> f64 {
        0.0
    }
}

/// `Gamma(2-alpha)/(alpha-1)`.
pub fn exponent_factor(alpha: f64) -> f64 {
    gamma(2.0 - alpha) / (alpha - 1.0)
}

/// `|t|^alpha (cos(pi alpha/2) - i sin(pi alpha/2) sign t)`.
fn unit_exponent(alpha: f64, t: f64) -> Complex64 {
    let (sin, cos) = (FRAC_PI_2 * alpha).sin_cos();
    let r = t.abs().powf(alpha);
    Complex64::new(r * cos, -r * sin * sign(t))
}

fn sign(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `exp(z)` computed so that `cexp(conj z) == conj(cexp z)` bit for bit.
fn cexp(z: Complex64) -> Complex64 {
    let modulus = z.re.exp();
    let (s, c) = z.im.abs().sin_cos();
    Complex64::new(modulus * c, modulus * s * z.im.signum())
}

/// Log of the characteristic function of `Q`.
pub fn log_cf_q(spec: &StableSpec, t: f64) -> Complex64 {
    unit_exponent(spec.alpha, t) * spec.exponent_scale()
}

/// Characteristic function of `Q`.
pub fn cf_q(spec: &StableSpec, t: f64) -> Complex64 {
    cexp(log_cf_q(spec, t))
}

/// `exp(-sigma^alpha |t|^alpha (1 - i beta tan(pi alpha/2) sign t) + i mu t)`.
pub fn cf_classical(alpha: f64, sigma: f64, beta: f64, mu: f64, t: f64) -> Complex64 {
    let s = sigma.powf(alpha) * t.abs().powf(alpha);
    let tan = (FRAC_PI_2 * alpha).tan();
    cexp(Complex64::new(-s, s * beta * tan * sign(t) + mu * t))
}

/// Stationary AR(1) process `U_k = phi U_{k-1} + Q_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArSpec {
    pub phi: f64,
    pub base: StableSpec,
}

impl ArSpec {
    pub fn new(phi: f64, base: StableSpec) -> Result<Self, StableError> {
        let ar = Self { phi, base };
        ar.validate()?;
        Ok(ar)
    }

    /// `phi = kappa^(1/alpha)`.
    pub fn from_kappa(kappa: f64, base: StableSpec) -> Result<Self, StableError> {
        Self::new(kappa.powf(1.0 / base.alpha), base)
    }

    pub fn validate(&self) -> Result<(), StableError> {
        self.base.validate()?;
        if !(self.phi > 0.0 && self.phi < 1.0) {
            return Err(StableError::InvalidParameter(format!(
                "phi = {} is outside (0, 1)",
                self.phi
            )));
        }
        Ok(())
    }

    /// `phi^alpha`.
    pub fn kappa(&self) -> f64 {
        self.phi.powf(self.base.alpha)
    }

    /// Number of series terms `J + 1` with `phi^(alpha (J+1)) < tolerance`.
    pub fn series_terms(&self, tolerance: f64) -> usize {
        let k = self.kappa();
        ((tolerance.ln() / k.ln()).floor() as usize + 1).max(1)
    }
}

/// Log of the characteristic function of the stationary `U_0`.
pub fn log_cf_u0(ar: &ArSpec, t: f64) -> Complex64 {
    log_cf_q(&ar.base, t) / (1.0 - ar.kappa())
}

/// Characteristic function of the stationary `U_0`.
pub fn cf_u0(ar: &ArSpec, t: f64) -> Complex64 {
    cexp(log_cf_u0(ar, t))
}

/// `prod_{j=0}^{J} cf_Q(phi^j t)`.
pub fn cf_u0_product(ar: &ArSpec, t: f64, j_max: usize) -> Complex64 {
    let mut scale = 1.0;
    let mut log = Complex64::new(0.0, 0.0);
    for _ in 0..=j_max {
        log += log_cf_q(&ar.base, scale * t);
        scale *= ar.phi;
    }
    cexp(log)
}

/// Bound on `|cf_U0(t) - prod_{j<=J} cf_Q(phi^j t)|`.
///
/// The two characteristic exponents differ by `log cf_Q(t) phi^(alpha (J+1)) / (1 - phi^alpha)`,
/// whose modulus is `Gamma(2-alpha)/(alpha-1) c |t|^alpha phi^(alpha (J+1)) / (1 - phi^alpha)`;
/// both exponents have nonpositive real part, so this bounds the difference of the exponentials.
/// Its real part alone, which uses `sigma^alpha` in place of the full scale,
/// is [`cf_u0_product_modulus_bound`].
pub fn cf_u0_product_bound(ar: &ArSpec, t: f64, j_max: usize) -> f64 {
    t.abs().powf(ar.base.alpha) * ar.base.exponent_scale() * ar.kappa().powi(j_max as i32 + 1)
        / (1.0 - ar.kappa())
}

/// Bound on `|log|cf_U0(t)| - log|prod_{j<=J} cf_Q(phi^j t)||`.
pub fn cf_u0_product_modulus_bound(ar: &ArSpec, t: f64, j_max: usize) -> f64 {
    t.abs().powf(ar.base.alpha) * ar.base.sigma_alpha() * ar.kappa().powi(j_max as i32 + 1)
        / (1.0 - ar.kappa())
}

/// One draw of `Q` by the Chambers-Mallows-Stuck method.
pub fn sample_q(spec: &StableSpec, rng: &mut StreamRng) -> f64 {
    spec.sigma() * standard_stable(spec.alpha, 1.0, rng)
}

/// `S_alpha(1, beta, 0)` in the classical parameterization, `alpha != 1`.
fn standard_stable(alpha: f64, beta: f64, rng: &mut StreamRng) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    let w: f64 = Exp1.sample(rng);
    let zeta = beta * (FRAC_PI_2 * alpha).tan();
    let b = zeta.atan() / alpha;
    let s = (1.0 + zeta * zeta).powf(0.5 / alpha);
    let arg = alpha * (v + b);
    s * arg.sin() / v.cos().powf(1.0 / alpha)
        * ((v - arg).cos() / w).powf((1.0 - alpha) / alpha)
}

/// CF-exponent truncation tolerance of the stationary series.
pub const SERIES_TOLERANCE: f64 = 1e-8;

/// Stationary `U_0 = sum_j phi^j Q_j`, truncated once the neglected part of
/// the characteristic exponent falls below [`SERIES_TOLERANCE`] of the total.
pub fn sample_u0(ar: &ArSpec, rng: &mut StreamRng) -> f64 {
    let terms = ar.series_terms(SERIES_TOLERANCE);
    let mut scale = 1.0;
    let mut total = 0.0;
    for _ in 0..terms {
        total += scale * sample_q(&ar.base, rng);
        scale *= ar.phi;
    }
    total
}

/// Stationary `U_0` as one stable draw with scale `sigma (1 - phi^alpha)^(-1/alpha)`.
pub fn sample_u0_direct(ar: &ArSpec, rng: &mut StreamRng) -> f64 {
    (1.0 - ar.kappa()).powf(-1.0 / ar.base.alpha) * sample_q(&ar.base, rng)
}

/// `(U_0, ..., U_{len-1})` started from stationarity.
pub fn sample_u_path(ar: &ArSpec, len: usize, rng: &mut StreamRng) -> Vec<f64> {
    let mut path = Vec::with_capacity(len);
    if len == 0 {
        return path;
    }
    let mut u = sample_u0(ar, rng);
    path.push(u);
    for _ in 1..len {
        u = ar.phi * u + sample_q(&ar.base, rng);
        path.push(u);
    }
    path
}

fn check_weights(weights: &[f64]) -> Result<(), StableError> {
    if weights.is_empty() {
        return Err(StableError::EmptyWeights);
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(StableError::NegativeWeight(*w));
    }
    Ok(())
}

/// `mean_w exp(w * log)`.
pub fn mix(log: Complex64, weights: &[f64]) -> Complex64 {
    let sum: Complex64 = weights.iter().map(|&w| cexp(log * w)).sum();
    sum / weights.len() as f64
}

/// Scale mixture of the stationary law, `E[exp(i t W^(1/alpha) U_0)]` averaged over
/// the supplied samples of `W(alpha theta)`.
pub fn mixture_cf(
    spec: &StableSpec,
    kappa: f64,
    weights: &[f64],
    t: f64,
) -> Result<Complex64, StableError> {
    check_weights(weights)?;
    Ok(mix(log_cf_q(spec, t) / (1.0 - kappa), weights))
}

/// `gamma_i = sum_{j=i}^{r} beta_j kappa^((j-i)/alpha)` for `i = 0..=r`.
pub fn gammas(betas: &[f64], kappa: f64, alpha: f64) -> Vec<f64> {
    let phi = kappa.powf(1.0 / alpha);
    let mut out = vec![0.0; betas.len()];
    let mut acc = 0.0;
    for i in (0..betas.len()).rev() {
        acc = betas[i] + phi * acc;
        out[i] = acc;
    }
    out
}

/// Log of the characteristic function of `sum_j beta_j U_j` for unit mixing weight.
pub fn log_fdd_cf(spec: &StableSpec, kappa: f64, betas: &[f64], t: f64) -> Complex64 {
    let g = gammas(betas, kappa, spec.alpha);
    let mut log = log_cf_q(spec, g[0] * t) / (1.0 - kappa);
    for gi in &g[1..] {
        log += log_cf_q(spec, gi * t);
    }
    log
}

/// Characteristic function of the projected finite-dimensional limit,
/// `E[Phi(gamma_0 w^(1/alpha) t) prod_i Psi(gamma_i w^(1/alpha) t)]`.
pub fn fdd_limit_cf(
    spec: &StableSpec,
    kappa: f64,
    betas: &[f64],
    weights: &[f64],
    t: f64,
) -> Result<Complex64, StableError> {
    if betas.is_empty() {
        return Err(StableError::EmptyBetas);
    }
    check_weights(weights)?;
    Ok(mix(log_fdd_cf(spec, kappa, betas, t), weights))
}

/// Tail constants `(c1, c2)` of the projected limit: `c sum_{i<=r} (gamma_i^+)^alpha`
/// and `c sum_{i<=r} (gamma_i^-)^alpha` with `gamma_{-i} = kappa^(i/alpha) gamma_0`.
pub fn lemma_constants(c: f64, kappa: f64, alpha: f64, betas: &[f64]) -> (f64, f64) {
    let g = gammas(betas, kappa, alpha);
    let geometric = 1.0 / (1.0 - kappa);
    let mut c1 = g[0].max(0.0).powf(alpha) * geometric;
    let mut c2 = (-g[0]).max(0.0).powf(alpha) * geometric;
    for gi in &g[1..] {
        c1 += gi.max(0.0).powf(alpha);
        c2 += (-gi).max(0.0).powf(alpha);
    }
    (c * c1, c * c2)
}

/// Coefficients `a_i = kappa^(-i/alpha) gamma_{r-i}` for `i = 0..=r` of the
/// increment series equal to the projection; the sequence stays at `a_r` afterwards.
pub fn series_coefficients(betas: &[f64], kappa: f64, alpha: f64) -> Vec<f64> {
    let g = gammas(betas, kappa, alpha);
    let r = g.len() - 1;
    (0..=r)
        .map(|i| kappa.powf(-(i as f64) / alpha) * g[r - i])
        .collect()
}

/// `mean_w exp(Gamma(2-alpha)/(alpha-1) w |t|^alpha ((c1+c2) cos - i (c1-c2) sin sign t))`.
pub fn two_sided_limit_cf(
    alpha: f64,
    c1: f64,
    c2: f64,
    weights: &[f64],
    t: f64,
) -> Result<Complex64, StableError> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(StableError::InvalidParameter(format!(
            "alpha = {alpha} is outside (1, 2)"
        )));
    }
    if !(c1 >= 0.0 && c2 >= 0.0) {
        return Err(StableError::InvalidParameter(format!(
            "tail constants ({c1}, {c2}) must be nonnegative"
        )));
    }
    check_weights(weights)?;
    let (sin, cos) = (FRAC_PI_2 * alpha).sin_cos();
    let r = t.abs().powf(alpha) * exponent_factor(alpha);
    let log = Complex64::new(r * (c1 + c2) * cos, -r * (c1 - c2) * sin * sign(t));
    Ok(mix(log, weights))
}

/// Number of points of [`symmetric_grid`].
pub const GRID_POINTS: usize = 81;
pub const GRID_HALF_WIDTH: f64 = 5.0;

/// 81 equispaced points on `[-5, 5]`, including `0`, with `grid[80 - i] == -grid[i]`.
pub fn symmetric_grid() -> Vec<f64> {
    grid(GRID_HALF_WIDTH, GRID_POINTS)
}

/// `points` equispaced points on `[-half_width, half_width]`, exactly symmetric.
pub fn grid(half_width: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && points % 2 == 1, "grid needs an odd number of points");
    let half = (points / 2) as f64;
    (0..points)
        .map(|i| {
            let k = i as f64 - half;
            half_width * k / half
        })
        .collect()
}

/// One row of a characteristic function table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfRow {
    pub t: f64,
    pub re: f64,
    pub im: f64,
}

/// Evaluates `f` on the grid.
pub fn cf_table<F>(grid: &[f64], f: F) -> Vec<CfRow>
where
    F: Fn(f64) -> Complex64,
{
    grid.iter()
        .map(|&t| {
            let z = f(t);
            CfRow { t, re: z.re, im: z.im }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn spec() -> StableSpec {
        StableSpec::new(1.5, 1.0).unwrap()
    }

    fn ecf(samples: &[f64], t: f64) -> Complex64 {
        let sum: Complex64 = samples
            .iter()
            .map(|x| Complex64::new((t * x).cos(), (t * x).sin()))
            .sum();
        sum / samples.len() as f64
    }

    #[test]
    fn cf_q_at_one() {
        let z = cf_q(&spec(), 1.0);
        let k = 2.0 * PI.sqrt();
        let want = Complex64::new(k * (0.75 * PI).cos(), -k * (0.75 * PI).sin()).exp();
        assert!((z - want).norm() < 1e-14);
        assert!((z.norm().ln() + k * 0.5f64.sqrt()).abs() < 1e-12);
        assert!((spec().exponent_scale() - 3.544_907_701_811_032).abs() < 1e-12);
        assert_eq!(cf_q(&spec(), 0.0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn modulus_is_sigma_alpha() {
        let s = StableSpec::new(1.3, 0.7).unwrap();
        for t in symmetric_grid() {
            let want = (-s.sigma_alpha() * t.abs().powf(s.alpha)).exp();
            assert!((cf_q(&s, t).norm() - want).abs() < 1e-14);
        }
    }

    #[test]
    fn classical_parameterization_agrees() {
        for &(alpha, c) in &[(1.5, 1.0), (1.1, 0.3), (1.9, 2.5)] {
            let s = StableSpec::new(alpha, c).unwrap();
            for t in symmetric_grid() {
                let a = cf_q(&s, t);
                let b = cf_classical(alpha, s.sigma(), s.beta(), s.mu(), t);
                assert!((a - b).norm() < 1e-12, "alpha {alpha} t {t}");
            }
        }
    }

    #[test]
    fn u0_product_identity() {
        let ar = ArSpec::new(0.8, spec()).unwrap();
        let t = 1.0;
        let diff = (cf_u0(&ar, t) - cf_u0_product(&ar, t, 200)).norm();
        assert!(diff < 1e-10);
        for &j in &[0usize, 3, 10, 40] {
            for t in symmetric_grid() {
                let (exact, product) = (cf_u0(&ar, t), cf_u0_product(&ar, t, j));
                let diff = (exact - product).norm();
                assert!(diff <= cf_u0_product_bound(&ar, t, j) + 1e-15, "J={j} t={t}");
                let log_gap = (exact.norm().ln() - product.norm().ln()).abs();
                assert!(log_gap <= cf_u0_product_modulus_bound(&ar, t, j) * (1.0 + 1e-9) + 1e-15);
            }
        }
    }

    #[test]
    fn u0_with_vanishing_phi_is_q() {
        let ar = ArSpec::new(1e-9, spec()).unwrap();
        for t in symmetric_grid() {
            assert!((cf_u0(&ar, t) - cf_q(&spec(), t)).norm() < 1e-12);
        }
        assert_eq!(cf_u0(&ar, 0.0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn sampler_matches_cf() {
        let s = spec();
        let mut rng = seeded(10);
        let draws: Vec<f64> = (0..200_000).map(|_| sample_q(&s, &mut rng)).collect();
        let sup = (1..=50)
            .map(|k| {
                let t = 0.1 * k as f64;
                (ecf(&draws, t) - cf_q(&s, t)).norm()
            })
            .fold(0.0, f64::max);
        assert!(sup < 0.01, "sup {sup}");
    }

    #[test]
    fn sampler_is_spectrally_positive() {
        let s = spec();
        let mut rng = seeded(12);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_q(&s, &mut rng)).collect();
        let below = |x: f64| draws.iter().filter(|&&d| d < -x).count();
        let above = |x: f64| draws.iter().filter(|&&d| d > x).count() as f64 / n as f64;
        // P(Q < -10) is about 7e-7 and P(Q < -30) is below 1e-30.
        assert!(below(10.0) <= 6, "{}", below(10.0));
        assert_eq!(below(30.0), 0);
        // P(Q > x) ~ c x^-alpha with the tail constant c of the Levy measure.
        for x in [10.0, 30.0] {
            let ratio = above(x) * x.powf(1.5);
            assert!((ratio - 1.0).abs() < 0.15, "x={x}: {ratio}");
        }
        // Median-of-means keeps the heavy upper tail from dominating.
        let mut means: Vec<f64> = draws.chunks(10_000).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        means.sort_by(f64::total_cmp);
        assert!(means[means.len() / 2].abs() < 0.1);
    }

    #[test]
    fn stationary_samplers_match_cf() {
        let ar = ArSpec::from_kappa(2f64.powf(-0.5), spec()).unwrap();
        let mut rng = seeded(13);
        let n = 200_000;
        let series: Vec<f64> = (0..n).map(|_| sample_u0(&ar, &mut rng)).collect();
        let direct: Vec<f64> = (0..n).map(|_| sample_u0_direct(&ar, &mut rng)).collect();
        let u5: Vec<f64> = (0..n).map(|_| sample_u_path(&ar, 6, &mut rng)[5]).collect();
        for t in symmetric_grid() {
            let want = cf_u0(&ar, t);
            assert!((ecf(&series, t) - want).norm() < 0.01);
            assert!((ecf(&direct, t) - want).norm() < 0.01);
            assert!((ecf(&u5, t) - want).norm() < 0.01);
        }
    }

    #[test]
    fn recursion_innovations_match_q() {
        let ar = ArSpec::new(0.8, spec()).unwrap();
        let mut rng = seeded(14);
        let innovations: Vec<f64> = (0..200_000)
            .map(|_| {
                let p = sample_u_path(&ar, 3, &mut rng);
                p[2] - ar.phi * p[1]
            })
            .collect();
        for t in symmetric_grid() {
            assert!((ecf(&innovations, t) - cf_q(&spec(), t)).norm() < 0.01);
        }
        assert_eq!(sample_u_path(&ar, 1, &mut rng).len(), 1);
    }

    #[test]
    fn mixture_reductions() {
        let s = spec();
        let kappa = 0.6;
        let ar = ArSpec::from_kappa(kappa, s).unwrap();
        for t in symmetric_grid() {
            assert_eq!(mixture_cf(&s, kappa, &[0.0, 0.0], t).unwrap(), Complex64::new(1.0, 0.0));
            let z = mixture_cf(&s, kappa, &[1.0, 1.0], t).unwrap();
            assert!((z - cf_u0(&ar, t)).norm() < 1e-12);
        }
        assert_eq!(mixture_cf(&s, kappa, &[0.3, 2.0], 0.0).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(mixture_cf(&s, kappa, &[], 1.0), Err(StableError::EmptyWeights));
        assert!(matches!(mixture_cf(&s, kappa, &[-1.0], 1.0), Err(StableError::NegativeWeight(_))));
    }

    #[test]
    fn gamma_recursion_matches_direct_sum() {
        let betas = [0.5, -1.0, 2.0, 0.25];
        let (kappa, alpha) = (0.55, 1.4);
        let g = gammas(&betas, kappa, alpha);
        for i in 0..betas.len() {
            let direct: f64 = (i..betas.len())
                .map(|j| betas[j] * kappa.powf((j - i) as f64 / alpha))
                .sum();
            assert!((g[i] - direct).abs() < 1e-14);
        }
        let g = gammas(&[1.0, -kappa.powf(1.0 / alpha)], kappa, alpha);
        assert!((g[0] - (1.0 - kappa.powf(2.0 / alpha))).abs() < 1e-15);
    }

    #[test]
    fn fdd_reductions() {
        let s = spec();
        let kappa = 0.5;
        let w = [0.2, 1.0, 3.5];
        for t in symmetric_grid() {
            let single = fdd_limit_cf(&s, kappa, &[1.0], &w, t).unwrap();
            assert!((single - mixture_cf(&s, kappa, &w, t).unwrap()).norm() < 1e-14);
            let zero = fdd_limit_cf(&s, kappa, &[0.0, 0.0, 0.0], &w, t).unwrap();
            assert_eq!(zero, Complex64::new(1.0, 0.0));
        }
        assert_eq!(fdd_limit_cf(&s, kappa, &[], &w, 1.0), Err(StableError::EmptyBetas));
        assert_eq!(fdd_limit_cf(&s, kappa, &[1.0], &[], 1.0), Err(StableError::EmptyWeights));
    }

    #[test]
    fn fdd_matches_simulated_ar_sum() {
        let s = spec();
        let kappa = 0.5;
        let ar = ArSpec::from_kappa(kappa, s).unwrap();
        let mut rng = seeded(15);
        let sums: Vec<f64> = (0..200_000)
            .map(|_| {
                let p = sample_u_path(&ar, 2, &mut rng);
                p[0] + p[1]
            })
            .collect();
        for t in symmetric_grid() {
            let want = fdd_limit_cf(&s, kappa, &[1.0, 1.0], &[1.0], t).unwrap();
            assert!((ecf(&sums, t) - want).norm() < 0.01, "t={t}");
        }
    }

    #[test]
    fn two_sided_reductions() {
        let s = spec();
        let w = [0.5, 1.5];
        for t in symmetric_grid() {
            let one_sided = two_sided_limit_cf(1.5, s.c, 0.0, &w, t).unwrap();
            let direct = mix(log_cf_q(&s, t), &w);
            assert!((one_sided - direct).norm() < 1e-14);
            let symmetric = two_sided_limit_cf(1.5, 0.7, 0.7, &w, t).unwrap();
            assert_eq!(symmetric.im, 0.0);
        }
        assert_eq!(two_sided_limit_cf(1.5, 0.0, 0.0, &w, 2.0).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn two_sided_with_lemma_constants_reproduces_fdd() {
        let s = StableSpec::new(1.6, 0.8).unwrap();
        let kappa = 0.45;
        let w = [0.1, 0.9, 2.0];
        for betas in [vec![1.0, 1.0, 1.0], vec![1.0, -1.0, 0.0], vec![-0.5, 2.0, -3.0, 1.0]] {
            let (c1, c2) = lemma_constants(s.c, kappa, s.alpha, &betas);
            for t in symmetric_grid() {
                let a = fdd_limit_cf(&s, kappa, &betas, &w, t).unwrap();
                let b = two_sided_limit_cf(s.alpha, c1, c2, &w, t).unwrap();
                assert!((a - b).norm() < 1e-12, "{betas:?} t={t}");
            }
        }
    }

    #[test]
    fn series_coefficients_reproduce_lemma_constants() {
        let (c, kappa, alpha) = (0.9, 0.5, 1.5);
        let betas = [1.0, -1.0, 0.5];
        let a = series_coefficients(&betas, kappa, alpha);
        let r = a.len() - 1;
        let terms = 2000;
        let coef = |j: usize| if j <= r { a[j] } else { a[r] };
        let c1: f64 = c * (0..terms).map(|j| kappa.powi(j as i32) * coef(j).max(0.0).powf(alpha)).sum::<f64>();
        let c2: f64 = c * (0..terms).map(|j| kappa.powi(j as i32) * (-coef(j)).max(0.0).powf(alpha)).sum::<f64>();
        let (l1, l2) = lemma_constants(c, kappa, alpha, &betas);
        assert!((c1 - l1).abs() < 1e-12);
        assert!((c2 - l2).abs() < 1e-12);
    }

    #[test]
    fn grid_is_symmetric() {
        let g = symmetric_grid();
        assert_eq!(g.len(), 81);
        assert_eq!(g[40], 0.0);
        assert_eq!(g[0], -5.0);
        assert_eq!(g[80], 5.0);
        for i in 0..81 {
            assert_eq!(g[80 - i], -g[i]);
        }
    }

    #[test]
    fn tables_have_unit_origin() {
        let s = spec();
        let rows = cf_table(&symmetric_grid(), |t| cf_q(&s, t));
        assert_eq!(rows[40], CfRow { t: 0.0, re: 1.0, im: 0.0 });
    }

    proptest! {
        #[test]
        fn cfs_are_hermitian_and_bounded(
            alpha in 1.01f64..1.99,
            c in 0.01f64..10.0,
            phi in 0.01f64..0.99,
            t in -50.0f64..50.0,
            w in proptest::collection::vec(0.0f64..20.0, 1..8),
            betas in proptest::collection::vec(-3.0f64..3.0, 1..5),
            c2 in 0.0f64..5.0,
        ) {
            let s = StableSpec::new(alpha, c).unwrap();
            let ar = ArSpec::new(phi, s).unwrap();
            let kappa = ar.kappa();
            let pairs = [
                (cf_q(&s, t), cf_q(&s, -t)),
                (cf_u0(&ar, t), cf_u0(&ar, -t)),
                (mixture_cf(&s, kappa, &w, t).unwrap(), mixture_cf(&s, kappa, &w, -t).unwrap()),
                (
                    fdd_limit_cf(&s, kappa, &betas, &w, t).unwrap(),
                    fdd_limit_cf(&s, kappa, &betas, &w, -t).unwrap(),
                ),
                (
                    two_sided_limit_cf(alpha, c, c2, &w, t).unwrap(),
                    two_sided_limit_cf(alpha, c, c2, &w, -t).unwrap(),
                ),
            ];
            for (at, neg) in pairs {
                prop_assert_eq!(neg, at.conj());
                prop_assert!(at.norm() <= 1.0 + 1e-15);
            }
        }

        #[test]
        fn sigma_alpha_is_positive(alpha in 1.001f64..1.999, c in 1e-6f64..1e6) {
            prop_assert!(StableSpec::new(alpha, c).unwrap().sigma_alpha() > 0.0);
        }
    }
}
