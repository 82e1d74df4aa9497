//! Estimators and verdicts that confront simulated samples with the limit claims.
//!
//! Every estimator sorts its input before reducing it, so the result does not
//! depend on the order in which replicates were produced.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::stablelim::{self, StableError, StableSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error("too few samples: need {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("degenerate sample: {0}")]
    Degenerate(String),
    #[error("tail window is empty: {0}")]
    WindowEmpty(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Stable(#[from] StableError),
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Hill estimate of a tail index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillEstimate {
    pub index: f64,
    pub stderr: f64,
    /// Number of order statistics used.
    pub k: usize,
}

pub const HILL_MIN_K: usize = 30;

/// Hill estimator over the `ceil(top_fraction * n)` largest positive samples,
/// measured against the next order statistic.
pub fn hill_estimator(samples: &[f64], top_fraction: f64) -> Result<HillEstimate, VerifyError> {
    if !(top_fraction > 0.0 && top_fraction <= 0.2) {
        return Err(VerifyError::InvalidArgument(format!(
            "top fraction {top_fraction} is outside (0, 0.2]"
        )));
    }
    let k = (top_fraction * samples.len() as f64).ceil() as usize;
    if k < HILL_MIN_K {
        return Err(VerifyError::TooFewSamples {
            needed: (HILL_MIN_K as f64 / top_fraction).ceil() as usize,
            got: samples.len(),
        });
    }
    let desc: Vec<f64> = {
        let mut v = sorted(samples);
        v.reverse();
        v
    };
    let positive = desc.iter().take_while(|x| **x > 0.0).count();
    if positive < k + 1 {
        return Err(VerifyError::TooFewSamples {
            needed: k + 1,
            got: positive,
        });
    }
    let reference = desc[k];
    let mean_log: f64 = desc[..k].iter().map(|x| (x / reference).ln()).sum::<f64>() / k as f64;
    if !(mean_log > 0.0) {
        return Err(VerifyError::Degenerate(
            "the top order statistics are all equal".into(),
        ));
    }
    let index = 1.0 / mean_log;
    Ok(HillEstimate {
        index,
        stderr: index / (k as f64).sqrt(),
        k,
    })
}

/// Outcome of a tail comparison.
///
/// Checks that only estimate an index leave the constant fields empty and
/// vice versa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailVerdict {
    pub estimated_index: Option<f64>,
    pub estimated_constant: Option<f64>,
    pub predicted_index: Option<f64>,
    pub predicted_constant: Option<f64>,
    pub window_lo: f64,
    pub window_hi: f64,
    pub pass: bool,
    /// Set when the prediction is beyond what the sample can resolve.
    pub unstable: bool,
    pub details: String,
}

/// Minimum size of each sample set in [`tail_ratio_check`].
pub const TAIL_RATIO_MIN_SAMPLES: usize = 100_000;
/// Predicted ratios of this size or more are flagged unstable: the window
/// then sits where `W` has far more exceedances than `W_1` and both survival
/// functions must be resolved over several decades.
pub const UNSTABLE_RATIO: f64 = 100.0;
pub const TAIL_RATIO_TOLERANCE: f64 = 0.15;
const WINDOW_POINTS: usize = 64;

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let i = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[i]
}

/// Number of entries strictly above `x` in ascending `sorted`.
fn count_above(sorted: &[f64], x: f64) -> usize {
    sorted.len() - sorted.partition_point(|v| *v <= x)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median over a log-spaced window of `P(W > x) / P(W_1 > x)`, compared with `1/(1 - kappa)`.
pub fn tail_ratio_check(
    samples_w: &[f64],
    samples_w1: &[f64],
    kappa: f64,
    quantiles: (f64, f64),
    tolerance: f64,
) -> Result<TailVerdict, VerifyError> {
    for got in [samples_w.len(), samples_w1.len()] {
        if got < TAIL_RATIO_MIN_SAMPLES {
            return Err(VerifyError::TooFewSamples {
                needed: TAIL_RATIO_MIN_SAMPLES,
                got,
            });
        }
    }
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(VerifyError::InvalidArgument(format!("kappa {kappa} is outside (0, 1)")));
    }
    let (q_lo, q_hi) = quantiles;
    if !(0.0 < q_lo && q_lo < q_hi && q_hi < 1.0) {
        return Err(VerifyError::InvalidArgument(format!(
            "quantile window ({q_lo}, {q_hi})"
        )));
    }
    let w = sorted(samples_w);
    let w1 = sorted(samples_w1);
    let lo = quantile(&w1, q_lo);
    let hi = quantile(&w1, q_hi);
    if !(lo > 0.0 && hi > lo) {
        return Err(VerifyError::WindowEmpty(format!("[{lo}, {hi}]")));
    }
    let mut ratios = Vec::with_capacity(WINDOW_POINTS);
    let mut thinnest = usize::MAX;
    for i in 0..WINDOW_POINTS {
        let x = lo * (hi / lo).powf(i as f64 / (WINDOW_POINTS - 1) as f64);
        let above_w1 = count_above(&w1, x);
        if above_w1 == 0 {
            continue;
        }
        thinnest = thinnest.min(above_w1);
        let s_w = count_above(&w, x) as f64 / w.len() as f64;
        let s_w1 = above_w1 as f64 / w1.len() as f64;
        ratios.push(s_w / s_w1);
    }
    if ratios.is_empty() {
        return Err(VerifyError::WindowEmpty(format!("no W_1 sample above {lo}")));
    }
    let estimated = median(&mut ratios);
    let predicted = 1.0 / (1.0 - kappa);
    let rel = (estimated - predicted).abs() / predicted;
    let unstable = predicted >= UNSTABLE_RATIO || thinnest < 30;
    Ok(TailVerdict {
        estimated_index: None,
        estimated_constant: Some(estimated),
        predicted_index: None,
        predicted_constant: Some(predicted),
        window_lo: lo,
        window_hi: hi,
        pass: rel <= tolerance,
        unstable,
        details: format!(
            "median survival ratio {estimated:.4} vs 1/(1-kappa) = {predicted:.4} (relative error {rel:.4}, tolerance {tolerance}); {} window points, fewest W_1 exceedances {thinnest}",
            WINDOW_POINTS
        ),
    })
}

/// Hill index compared with a predicted tail index.
pub fn tail_index_check(
    samples: &[f64],
    top_fraction: f64,
    predicted_index: f64,
    tolerance: f64,
) -> Result<TailVerdict, VerifyError> {
    let hill = hill_estimator(samples, top_fraction)?;
    let s = sorted(samples);
    let lo = quantile(&s, 1.0 - top_fraction);
    let err = (hill.index - predicted_index).abs();
    Ok(TailVerdict {
        estimated_index: Some(hill.index),
        estimated_constant: None,
        predicted_index: Some(predicted_index),
        predicted_constant: None,
        window_lo: lo,
        window_hi: s[s.len() - 1],
        pass: err <= tolerance,
        unstable: false,
        details: format!(
            "Hill index {:.4} (se {:.4}, k = {}) vs {predicted_index} (tolerance {tolerance})",
            hill.index, hill.stderr, hill.k
        ),
    })
}

/// How a coefficient sequence continues past its listed entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientTail {
    /// Zero after the last entry.
    Zero,
    /// Equal to the last entry forever.
    Constant,
    /// The listed entries repeat with period equal to their number.
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Upper,
    Lower,
}

/// `c sum_j kappa^j (a_j^+)^alpha` (upper) or with `a_j^-` (lower), summing the
/// continuation in closed form.
pub fn predicted_series_tail_constant(
    a: &[f64],
    tail: CoefficientTail,
    kappa: f64,
    alpha: f64,
    c: f64,
    side: Side,
) -> f64 {
    let part = |x: f64| match side {
        Side::Upper => x.max(0.0).powf(alpha),
        Side::Lower => (-x).max(0.0).powf(alpha),
    };
    let head: f64 = a
        .iter()
        .enumerate()
        .map(|(j, &aj)| kappa.powi(j as i32) * part(aj))
        .sum();
    let len = a.len() as i32;
    let total = match (tail, a.last()) {
        (_, None) | (CoefficientTail::Zero, _) => head,
        (CoefficientTail::Constant, Some(&last)) => {
            head + part(last) * kappa.powi(len) / (1.0 - kappa)
        }
        (CoefficientTail::Periodic, Some(_)) => head / (1.0 - kappa.powi(len)),
    };
    c * total
}

/// Rank-plot estimate of `c` in `P(X > x) ~ c x^(-alpha)` from the top
/// `ceil(top_fraction * n)` order statistics: the intercept of
/// `log(i/n)` against `log X_(i)` with the slope fixed at `-alpha`.
pub fn rank_plot_constant(samples: &[f64], top_fraction: f64, alpha: f64) -> Result<f64, VerifyError> {
    let n = samples.len();
    let k = (top_fraction * n as f64).ceil() as usize;
    if k < HILL_MIN_K {
        return Err(VerifyError::TooFewSamples {
            needed: (HILL_MIN_K as f64 / top_fraction).ceil() as usize,
            got: n,
        });
    }
    let mut desc = sorted(samples);
    desc.reverse();
    if desc[k - 1] <= 0.0 {
        return Err(VerifyError::Degenerate(format!(
            "fewer than {k} positive samples"
        )));
    }
    let mean_log: f64 = desc[..k]
        .iter()
        .enumerate()
        .map(|(i, x)| ((i + 1) as f64 / n as f64).ln() + alpha * x.ln())
        .sum::<f64>()
        / k as f64;
    Ok(mean_log.exp())
}

/// Rank-plot constants of both tails compared with predictions.
pub fn series_tail_check(
    samples: &[f64],
    top_fraction: f64,
    alpha: f64,
    predicted_upper: f64,
    predicted_lower: f64,
    tolerance: f64,
) -> Result<(TailVerdict, TailVerdict), VerifyError> {
    let negated: Vec<f64> = samples.iter().map(|x| -x).collect();
    let mut out = Vec::with_capacity(2);
    for (label, data, predicted) in [
        ("upper", samples, predicted_upper),
        ("lower", negated.as_slice(), predicted_lower),
    ] {
        let estimated = rank_plot_constant(data, top_fraction, alpha)?;
        let s = sorted(data);
        let rel = (estimated - predicted).abs() / predicted;
        out.push(TailVerdict {
            estimated_index: None,
            estimated_constant: Some(estimated),
            predicted_index: Some(alpha),
            predicted_constant: Some(predicted),
            window_lo: quantile(&s, 1.0 - top_fraction),
            window_hi: s[s.len() - 1],
            pass: rel <= tolerance,
            unstable: false,
            details: format!(
                "{label} rank-plot constant {estimated:.5} vs {predicted:.5} (relative error {rel:.4}, tolerance {tolerance})"
            ),
        });
    }
    let lower = out.pop().expect("two verdicts");
    let upper = out.pop().expect("two verdicts");
    Ok((upper, lower))
}

/// Empirical characteristic function `(1/n) sum exp(i t x)` on each grid point.
pub fn ecf(samples: &[f64], grid: &[f64]) -> Result<Vec<Complex64>, VerifyError> {
    if samples.is_empty() {
        return Err(VerifyError::TooFewSamples { needed: 1, got: 0 });
    }
    let s = sorted(samples);
    let n = s.len() as f64;
    Ok(grid
        .par_iter()
        .map(|&t| {
            let (mut re, mut im) = (0.0, 0.0);
            for x in &s {
                let (sin, cos) = (t * x).sin_cos();
                re += cos;
                im += sin;
            }
            Complex64::new(re / n, im / n)
        })
        .collect())
}

pub const CF_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfVerdict {
    pub sup_distance: f64,
    /// Root mean square distance over the grid.
    pub l2_distance: f64,
    pub grid: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn cf_distance(
    grid: &[f64],
    empirical: &[Complex64],
    theoretical: &[Complex64],
    tolerance: f64,
) -> Result<CfVerdict, VerifyError> {
    if empirical.len() != theoretical.len() {
        return Err(VerifyError::LengthMismatch(empirical.len(), theoretical.len()));
    }
    if grid.len() != empirical.len() {
        return Err(VerifyError::LengthMismatch(grid.len(), empirical.len()));
    }
    let diffs: Vec<f64> = empirical
        .iter()
        .zip(theoretical)
        .map(|(a, b)| (a - b).norm())
        .collect();
    let sup_distance = diffs.iter().copied().fold(0.0, f64::max);
    let l2_distance = if diffs.is_empty() {
        0.0
    } else {
        (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt()
    };
    Ok(CfVerdict {
        sup_distance,
        l2_distance,
        grid: grid.to_vec(),
        tolerance,
        pass: sup_distance <= tolerance,
    })
}

/// Mixture characteristic function averaged over `weights` on each grid point.
pub fn mixture_cf_on_grid(
    spec: &StableSpec,
    kappa: f64,
    weights: &[f64],
    grid: &[f64],
) -> Result<Vec<Complex64>, VerifyError> {
    fdd_limit_cf_on_grid(spec, kappa, &[1.0], weights, grid)
}

/// Projected finite-dimensional limit characteristic function on each grid point.
pub fn fdd_limit_cf_on_grid(
    spec: &StableSpec,
    kappa: f64,
    betas: &[f64],
    weights: &[f64],
    grid: &[f64],
) -> Result<Vec<Complex64>, VerifyError> {
    // Validate once; the per-point evaluation cannot fail afterwards.
    stablelim::fdd_limit_cf(spec, kappa, betas, weights, 0.0)?;
    let w = sorted(weights);
    Ok(grid
        .par_iter()
        .map(|&t| stablelim::mix(stablelim::log_fdd_cf(spec, kappa, betas, t), &w))
        .collect())
}

/// Cramér-Wold check: the ECF of `sum_r beta_r X_r` against the projected limit
/// built from the paired mixing weights.
pub fn fdd_check(
    samples: &[(Vec<f64>, f64)],
    betas: &[f64],
    spec: &StableSpec,
    kappa: f64,
    grid: &[f64],
    tolerance: f64,
) -> Result<CfVerdict, VerifyError> {
    if samples.is_empty() {
        return Err(VerifyError::TooFewSamples { needed: 1, got: 0 });
    }
    if let Some((v, _)) = samples.iter().find(|(v, _)| v.len() != betas.len()) {
        return Err(VerifyError::LengthMismatch(v.len(), betas.len()));
    }
    let projected: Vec<f64> = samples
        .iter()
        .map(|(v, _)| v.iter().zip(betas).map(|(x, b)| x * b).sum())
        .collect();
    let weights: Vec<f64> = samples.iter().map(|(_, w)| *w).collect();
    let empirical = ecf(&projected, grid)?;
    let theoretical = fdd_limit_cf_on_grid(spec, kappa, betas, &weights, grid)?;
    cf_distance(grid, &empirical, &theoretical, tolerance)
}

/// Sample mean compared with a target in units of its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCheck {
    pub mean: f64,
    pub stderr: f64,
    pub target: f64,
    pub z: f64,
    pub pass: bool,
}

pub const MEAN_Z_LIMIT: f64 = 5.0;

pub fn mean_check(values: &[f64], target: f64) -> Result<MeanCheck, VerifyError> {
    if values.len() < 2 {
        return Err(VerifyError::TooFewSamples {
            needed: 2,
            got: values.len(),
        });
    }
    let s = sorted(values);
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let stderr = (var / n).sqrt();
    let z = if stderr > 0.0 {
        (mean - target) / stderr
    } else if mean == target {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(MeanCheck {
        mean,
        stderr,
        target,
        z,
        pass: z.abs() <= MEAN_Z_LIMIT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::stablelim::{cf_q, sample_q, symmetric_grid, ArSpec};
    use proptest::prelude::*;
    use rand::Rng;

    fn pareto(alpha: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = seeded(seed);
        (0..n)
            .map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / alpha))
            .collect()
    }

    #[test]
    fn hill_recovers_pareto_index() {
        let x = pareto(1.5, 1_000_000, 1);
        let h = hill_estimator(&x, 0.01).unwrap();
        assert!((h.index - 1.5).abs() < 0.05, "{h:?}");
        assert_eq!(h.k, 10_000);
        assert!((h.stderr - h.index / 100.0).abs() < 1e-15);
    }

    #[test]
    fn hill_rejects_degenerate_and_small_samples() {
        assert!(matches!(hill_estimator(&[2.0; 10_000], 0.01), Err(VerifyError::Degenerate(_))));
        assert!(matches!(hill_estimator(&[1.0; 100], 0.01), Err(VerifyError::TooFewSamples { .. })));
        assert!(hill_estimator(&[1.0; 100], 0.5).is_err());
    }

    #[test]
    fn hill_is_scale_invariant() {
        let x = pareto(1.5, 100_000, 2);
        let base = hill_estimator(&x, 0.01).unwrap().index;
        for lambda in [0.125, 2.0, 1024.0] {
            let y: Vec<f64> = x.iter().map(|v| v * lambda).collect();
            assert_eq!(hill_estimator(&y, 0.01).unwrap().index, base);
        }
        for lambda in [10.0, 0.37, 7.5e5] {
            let y: Vec<f64> = x.iter().map(|v| v * lambda).collect();
            let idx = hill_estimator(&y, 0.01).unwrap().index;
            assert!((idx - base).abs() <= 1e-12 * base);
        }
    }

    #[test]
    fn identical_tail_samples_give_unit_ratio() {
        let x = pareto(1.5, 100_000, 3);
        let v = tail_ratio_check(&x, &x, 0.5, (0.99, 0.999), 0.15).unwrap();
        assert_eq!(v.estimated_constant, Some(1.0));
        assert!(!v.pass);
        let v = tail_ratio_check(&x, &x, 1e-9, (0.99, 0.999), 0.15).unwrap();
        assert!(v.pass);
        let v = tail_ratio_check(&x, &x, 0.999, (0.99, 0.999), 0.15).unwrap();
        assert!(v.unstable && !v.pass);
        assert!((v.predicted_constant.unwrap() - 1000.0).abs() < 1e-6);
        assert!(!tail_ratio_check(&x, &x, 0.5, (0.99, 0.999), 0.15).unwrap().unstable);
    }

    #[test]
    fn tail_ratio_detects_scaled_tails() {
        // P(2^{2/3} X > x) = 2 P(X > x) in the Pareto tail.
        let x = pareto(1.5, 400_000, 4);
        let y: Vec<f64> = pareto(1.5, 400_000, 5).iter().map(|v| v * 2f64.powf(2.0 / 3.0)).collect();
        let v = tail_ratio_check(&y, &x, 0.5, (0.99, 0.999), 0.15).unwrap();
        assert!(v.pass, "{}", v.details);
        assert!(tail_ratio_check(&y[..10], &x, 0.5, (0.99, 0.999), 0.15).is_err());
    }

    #[test]
    fn tail_ratio_needs_a_window() {
        let flat = vec![0.0; 100_000];
        assert!(matches!(
            tail_ratio_check(&flat, &flat, 0.5, (0.99, 0.999), 0.15),
            Err(VerifyError::WindowEmpty(_))
        ));
    }

    #[test]
    fn series_constants_closed_forms() {
        let (kappa, alpha, c) = (0.5, 1.5, 1.0);
        let up = predicted_series_tail_constant(&[1.0], CoefficientTail::Constant, kappa, alpha, c, Side::Upper);
        assert!((up - 2.0).abs() < 1e-15);
        let down = predicted_series_tail_constant(&[1.0], CoefficientTail::Constant, kappa, alpha, c, Side::Lower);
        assert_eq!(down, 0.0);
        let alt = [1.0, -1.0];
        let up = predicted_series_tail_constant(&alt, CoefficientTail::Periodic, kappa, alpha, c, Side::Upper);
        let down = predicted_series_tail_constant(&alt, CoefficientTail::Periodic, kappa, alpha, c, Side::Lower);
        assert!((up - 4.0 / 3.0).abs() < 1e-15);
        assert!((down - 2.0 / 3.0).abs() < 1e-15);
        // 10^4-term direct sums
        let direct = |sign: f64| -> f64 {
            (0..10_000)
                .map(|j| {
                    let a = if j % 2 == 0 { 1.0 } else { -1.0 } * sign;
                    kappa.powi(j) * a.max(0.0).powf(alpha)
                })
                .sum()
        };
        assert!((up - direct(1.0)).abs() < 1e-14);
        assert!((down - direct(-1.0)).abs() < 1e-14);
        let finite = predicted_series_tail_constant(&[2.0, -1.0], CoefficientTail::Zero, kappa, alpha, c, Side::Upper);
        assert!((finite - 2f64.powf(1.5)).abs() < 1e-15);
    }

    #[test]
    fn constant_coefficients_match_tail_of_w() {
        for &kappa in &[0.1, 0.5, 2f64.powf(-0.5), 0.9] {
            let c = 0.37;
            let k = predicted_series_tail_constant(&[1.0], CoefficientTail::Constant, kappa, 1.5, c, Side::Upper);
            assert!((k * (1.0 - kappa) - c).abs() <= 4.0 * f64::EPSILON * c);
        }
    }

    #[test]
    fn rank_plot_recovers_constant() {
        // P(3 X > x) = 3^1.5 x^-1.5 for standard Pareto X.
        let x: Vec<f64> = pareto(1.5, 1_000_000, 6).iter().map(|v| 3.0 * v).collect();
        let c = rank_plot_constant(&x, 0.005, 1.5).unwrap();
        assert!((c / 3f64.powf(1.5) - 1.0).abs() < 0.05, "{c}");
    }

    #[test]
    fn series_tail_check_reads_both_tails() {
        let up = pareto(1.5, 500_000, 7);
        let down = pareto(1.5, 500_000, 8);
        let mixed: Vec<f64> = up.iter().zip(&down).map(|(u, d)| u - 0.5f64.powf(1.0 / 1.5) * d).collect();
        let (u, l) = series_tail_check(&mixed, 0.005, 1.5, 1.0, 0.5, 0.2).unwrap();
        assert!(u.pass, "{}", u.details);
        assert!(l.pass, "{}", l.details);
    }

    #[test]
    fn ecf_simple_cases() {
        let grid = symmetric_grid();
        for z in ecf(&[0.0], &grid).unwrap() {
            assert_eq!(z, Complex64::new(1.0, 0.0));
        }
        for (z, t) in ecf(&[-1.0, 1.0], &grid).unwrap().iter().zip(&grid) {
            assert!((z.re - t.cos()).abs() < 1e-15);
            assert!(z.im.abs() < 1e-15);
        }
        assert!(ecf(&[], &grid).is_err());
    }

    #[test]
    fn ecf_of_stable_draws() {
        let spec = StableSpec::new(1.5, 1.0).unwrap();
        let mut rng = seeded(9);
        let draws: Vec<f64> = (0..1_000_000).map(|_| sample_q(&spec, &mut rng)).collect();
        let grid = symmetric_grid();
        let theo: Vec<Complex64> = grid.iter().map(|&t| cf_q(&spec, t)).collect();
        let v = cf_distance(&grid, &ecf(&draws, &grid).unwrap(), &theo, 0.01).unwrap();
        assert!(v.pass, "{}", v.sup_distance);
    }

    #[test]
    fn cf_distance_cases() {
        let grid = [0.0, 1.0, 2.0];
        let a = vec![Complex64::new(1.0, 0.0); 3];
        let v = cf_distance(&grid, &a, &a, CF_TOLERANCE).unwrap();
        assert_eq!((v.sup_distance, v.l2_distance, v.pass), (0.0, 0.0, true));
        let mut b = a.clone();
        b[1] += 0.1;
        let v = cf_distance(&grid, &a, &b, CF_TOLERANCE).unwrap();
        assert!((v.sup_distance - 0.1).abs() < 1e-15);
        assert!(!v.pass);
        assert!(matches!(cf_distance(&grid, &a, &b[..2], 0.05), Err(VerifyError::LengthMismatch(3, 2))));
    }

    #[test]
    fn fdd_check_with_unit_vector_is_the_marginal_check() {
        let spec = StableSpec::new(1.5, 1.0).unwrap();
        let kappa = 0.5;
        let ar = ArSpec::from_kappa(kappa, spec).unwrap();
        let mut rng = seeded(10);
        let grid = symmetric_grid();
        let samples: Vec<(Vec<f64>, f64)> = (0..100_000)
            .map(|_| {
                let w = 0.5 + rng.random::<f64>();
                let s = w.powf(1.0 / 1.5);
                let p = crate::stablelim::sample_u_path(&ar, 3, &mut rng);
                (p.iter().map(|u| s * u).collect(), w)
            })
            .collect();
        let weights: Vec<f64> = samples.iter().map(|s| s.1).collect();
        for r in 0..3 {
            let mut betas = vec![0.0; 3];
            betas[r] = 1.0;
            let v = fdd_check(&samples, &betas, &spec, kappa, &grid, 0.05).unwrap();
            // The lag-r marginal is again W^(1/alpha) U_0 in law.
            let marginal: Vec<f64> = samples.iter().map(|s| s.0[r]).collect();
            let theo = mixture_cf_on_grid(&spec, kappa, &weights, &grid).unwrap();
            let direct = cf_distance(&grid, &ecf(&marginal, &grid).unwrap(), &theo, 0.05).unwrap();
            assert!((v.sup_distance - direct.sup_distance).abs() < 1e-12);
            assert!(v.pass);
        }
        let v = fdd_check(&samples, &[1.0, 1.0, 1.0], &spec, kappa, &grid, 0.05).unwrap();
        assert!(v.pass, "{}", v.sup_distance);
        assert!(matches!(
            fdd_check(&samples, &[1.0, 1.0], &spec, kappa, &grid, 0.05),
            Err(VerifyError::LengthMismatch(3, 2))
        ));
    }

    #[test]
    fn mean_checks() {
        let x = pareto(1.5, 100_000, 11);
        assert!(mean_check(&x, 3.0).unwrap().pass);
        assert!(!mean_check(&x, 2.0).unwrap().pass);
        assert!(mean_check(&[1.0], 1.0).is_err());
        assert!(mean_check(&[1.0, 1.0], 1.0).unwrap().pass);
    }

    #[test]
    fn verdicts_serialize() {
        let v = cf_distance(&[0.0], &[Complex64::new(1.0, 0.0)], &[Complex64::new(1.0, 0.0)], 0.05).unwrap();
        let s = serde_json::to_string(&v).unwrap();
        assert!(s.contains("sup_distance"));
        let back: CfVerdict = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn estimators_ignore_sample_order(seed in 0u64..1000, swaps in proptest::collection::vec((0usize..3000, 0usize..3000), 1..50)) {
            let x = pareto(1.5, 3000, seed);
            let mut y = x.clone();
            for (i, j) in swaps {
                y.swap(i, j);
            }
            let grid = symmetric_grid();
            prop_assert_eq!(hill_estimator(&x, 0.02).unwrap(), hill_estimator(&y, 0.02).unwrap());
            prop_assert_eq!(ecf(&x, &grid).unwrap(), ecf(&y, &grid).unwrap());
            prop_assert_eq!(mean_check(&x, 3.0).unwrap(), mean_check(&y, 3.0).unwrap());
            prop_assert_eq!(
                rank_plot_constant(&x, 0.02, 1.5).unwrap(),
                rank_plot_constant(&y, 0.02, 1.5).unwrap()
            );
        }

        #[test]
        fn ecf_is_bounded_and_hermitian(xs in proptest::collection::vec(-100.0f64..100.0, 1..40)) {
            let grid = symmetric_grid();
            let z = ecf(&xs, &grid).unwrap();
            for i in 0..grid.len() {
                prop_assert!(z[i].norm() <= 1.0 + 1e-12);
                prop_assert_eq!(z[grid.len() - 1 - i], z[i].conj());
            }
        }
    }
}
