use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::rng::StreamRng;
use crate::special::power_sum;

/// Sums of at most this many Pareto counts are drawn term by term.
pub const EXACT_SUM_LIMIT: u64 = 2048;

/// Expected number of individually drawn large terms in an aggregated sum.
pub const AGGREGATE_TAIL_TERMS: f64 = 64.0;

const MAX_COUNT: f64 = (1u64 << 62) as f64;

/// Discretized Pareto count: `P(N >= n) = 1` for `n <= min_count` and
/// `P(N >= n) = scale * n^(-tail_index)` for `n > min_count`.
///
/// The body below the tail is clipped onto `min_count`, so
/// `P(N > x) ~ scale * x^(-tail_index)` holds with the configured constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretePareto {
    pub tail_index: f64,
    pub scale: f64,
    pub min_count: u64,
}

impl DiscretePareto {
    pub fn new(tail_index: f64, scale: f64, min_count: u64) -> Result<Self, ModelError> {
        let law = Self {
            tail_index,
            scale,
            min_count,
        };
        law.validate()?;
        Ok(law)
    }

    /// The law with the given `min_count` and tail index whose mean is `mean`.
    pub fn with_mean(tail_index: f64, min_count: u64, mean: f64) -> Result<Self, ModelError> {
        if !(tail_index > 1.0) {
            return Err(ModelError::InvalidLaw(format!(
                "pareto tail index {tail_index} must exceed 1"
            )));
        }
        let zeta = power_sum(tail_index, min_count + 1, None);
        let scale = (mean - min_count as f64) / zeta;
        Self::new(tail_index, scale, min_count)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.tail_index > 1.0 && self.tail_index.is_finite()) {
            return Err(ModelError::InvalidLaw(format!(
                "pareto tail index {} must be finite and exceed 1",
                self.tail_index
            )));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(ModelError::InvalidLaw(format!(
                "pareto scale {} must be positive",
                self.scale
            )));
        }
        let first = self.scale * ((self.min_count + 1) as f64).powf(-self.tail_index);
        if first > 1.0 {
            return Err(ModelError::InvalidLaw(format!(
                "P(N >= {}) = {first} exceeds one; lower the scale or raise min_count",
                self.min_count + 1
            )));
        }
        Ok(())
    }

    /// `P(N >= n)`.
    pub fn survival_at_least(&self, n: u64) -> f64 {
        if n <= self.min_count {
            1.0
        } else {
            self.scale * (n as f64).powf(-self.tail_index)
        }
    }

    pub fn mean(&self) -> f64 {
        self.min_count as f64 + self.scale * power_sum(self.tail_index, self.min_count + 1, None)
    }

    pub fn pmf(&self, n: u64) -> f64 {
        if n < self.min_count {
            0.0
        } else {
            self.survival_at_least(n) - self.survival_at_least(n + 1)
        }
    }

    #[inline]
    pub fn sample(&self, rng: &mut StreamRng) -> u64 {
        // U in (0, 1]; N >= n  <=>  U <= scale * n^-a
        let u = 1.0 - rng.random::<f64>();
        let v = (self.scale / u).powf(1.0 / self.tail_index);
        (v.min(MAX_COUNT) as u64).max(self.min_count)
    }

    /// One draw of `N` conditioned on `N > threshold` (`threshold >= min_count`).
    #[inline]
    pub fn sample_above(&self, threshold: u64, rng: &mut StreamRng) -> u64 {
        debug_assert!(threshold >= self.min_count);
        let u = 1.0 - rng.random::<f64>();
        let v = (threshold + 1) as f64 * u.powf(-1.0 / self.tail_index);
        (v.min(MAX_COUNT) as u64).max(threshold + 1)
    }

    /// `(P(N <= t), E[N; N <= t], E[N^2; N <= t])`.
    pub fn truncated_moments(&self, t: u64) -> (f64, f64, f64) {
        let a = self.tail_index;
        let d = self.scale;
        let mc = self.min_count;
        let s_next = self.survival_at_least(t + 1);
        let flat = t.min(mc) as f64;
        let (tail_first, tail_second) = if t > mc {
            let s_a = power_sum(a, mc + 1, Some(t));
            let s_a1 = power_sum(a - 1.0, mc + 1, Some(t));
            (d * s_a, d * (2.0 * s_a1 - s_a))
        } else {
            (0.0, 0.0)
        };
        let tf = t as f64;
        let first = flat + tail_first - tf * s_next;
        let second = flat * flat + tail_second - tf * tf * s_next;
        (1.0 - s_next, first, second)
    }

    /// `E[exp(-s (N + 1))]` for `s > 0`.
    pub fn shifted_laplace(&self, s: f64) -> f64 {
        assert!(s > 0.0);
        let mut total = 0.0;
        let mut n = self.min_count;
        let stop = self.min_count as f64 + 40.0 / s + 1.0;
        while (n as f64) <= stop {
            total += self.pmf(n) * (-s * (n + 1) as f64).exp();
            n += 1;
        }
        total
    }

    /// Sum of `k` independent copies.
    ///
    /// Up to [`EXACT_SUM_LIMIT`] terms are drawn one by one. Larger sums split
    /// at a level `T` that about [`AGGREGATE_TAIL_TERMS`] copies exceed: the
    /// number of exceedances is binomial and each exceedance is drawn exactly
    /// from the conditional tail, while the bounded body sum is drawn from the
    /// normal law with its exact mean and variance.
    pub fn sum_of(&self, k: u64, rng: &mut StreamRng) -> u64 {
        if k <= EXACT_SUM_LIMIT {
            let mut total: u64 = 0;
            for _ in 0..k {
                total = total.saturating_add(self.sample(rng));
            }
            return total;
        }
        let kf = k as f64;
        let level = (kf * self.scale / AGGREGATE_TAIL_TERMS).powf(1.0 / self.tail_index).ceil();
        let threshold = (level as u64).saturating_sub(1).max(self.min_count);
        let p_exceed = self.survival_at_least(threshold + 1);
        let exceed = if p_exceed >= 1.0 {
            k
        } else {
            Binomial::new(k, p_exceed)
                .expect("probability in [0, 1]")
                .sample(rng)
        };
        let mut total: u64 = 0;
        for _ in 0..exceed {
            total = total.saturating_add(self.sample_above(threshold, rng));
        }
        let body_terms = k - exceed;
        if body_terms > 0 {
            let (p_body, m1, m2) = self.truncated_moments(threshold);
            let mean = m1 / p_body;
            let var = (m2 / p_body - mean * mean).max(0.0);
            let nb = body_terms as f64;
            let draw = if var > 0.0 {
                Normal::new(nb * mean, (nb * var).sqrt())
                    .expect("finite moments")
                    .sample(rng)
            } else {
                nb * mean
            };
            let lo = nb * self.min_count as f64;
            let hi = nb * threshold as f64;
            let body = draw.clamp(lo, hi);
            total = total.saturating_add(stochastic_round(body, rng));
        }
        total
    }
}

#[inline]
fn stochastic_round(x: f64, rng: &mut StreamRng) -> u64 {
    let floor = x.floor();
    let frac = x - floor;
    let up = rng.random::<f64>() < frac;
    floor.min(MAX_COUNT) as u64 + u64::from(up)
}

/// Law of the number of children in a Galton-Watson tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CountLaw {
    /// Always exactly `count` children.
    Fixed { count: u64 },
    /// `probabilities[j] = P(N = j)`.
    Categorical { probabilities: Vec<f64> },
    Pareto(DiscretePareto),
}

impl CountLaw {
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            CountLaw::Fixed { .. } => Ok(()),
            CountLaw::Categorical { probabilities } => {
                if probabilities.is_empty()
                    || probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0))
                {
                    return Err(ModelError::InvalidLaw(
                        "categorical probabilities must be nonnegative".into(),
                    ));
                }
                let total: f64 = probabilities.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(ModelError::InvalidLaw(format!(
                        "categorical probabilities sum to {total}"
                    )));
                }
                Ok(())
            }
            CountLaw::Pareto(p) => p.validate(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            CountLaw::Fixed { count } => *count as f64,
            CountLaw::Categorical { probabilities } => probabilities
                .iter()
                .enumerate()
                .map(|(j, p)| j as f64 * p)
                .sum(),
            CountLaw::Pareto(p) => p.mean(),
        }
    }

    /// `(scale, tail_index)` when the law has a power tail.
    pub fn power_tail(&self) -> Option<(f64, f64)> {
        match self {
            CountLaw::Pareto(p) => Some((p.scale, p.tail_index)),
            _ => None,
        }
    }

    pub fn sample(&self, rng: &mut StreamRng) -> u64 {
        match self {
            CountLaw::Fixed { count } => *count,
            CountLaw::Categorical { probabilities } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (j, p) in probabilities.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return j as u64;
                    }
                }
                (probabilities.len() - 1) as u64
            }
            CountLaw::Pareto(p) => p.sample(rng),
        }
    }

    /// Sum of `k` independent copies.
    pub fn sum_of(&self, k: u64, rng: &mut StreamRng) -> u64 {
        match self {
            CountLaw::Fixed { count } => count.saturating_mul(k),
            CountLaw::Categorical { probabilities } => {
                // Sequential conditional binomials give the exact multinomial.
                let mut remaining = k;
                let mut mass_left = 1.0;
                let mut total: u64 = 0;
                for (j, p) in probabilities.iter().enumerate() {
                    if remaining == 0 {
                        break;
                    }
                    let q = if mass_left > 0.0 { (p / mass_left).min(1.0) } else { 1.0 };
                    let n_j = if q >= 1.0 {
                        remaining
                    } else {
                        Binomial::new(remaining, q).expect("valid q").sample(rng)
                    };
                    total = total.saturating_add((j as u64).saturating_mul(n_j));
                    remaining -= n_j;
                    mass_left -= p;
                }
                total
            }
            CountLaw::Pareto(p) => p.sum_of(k, rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn heyde_count() -> DiscretePareto {
        DiscretePareto::with_mean(1.5, 1, 2.0).unwrap()
    }

    #[test]
    fn mean_matches_requested() {
        let law = heyde_count();
        assert!((law.mean() - 2.0).abs() < 1e-12);
        // scale = 1 / (zeta(1.5) - 1)
        assert!((law.scale - 1.0 / 1.612_375_348_685_488).abs() < 1e-12);
        let direct: f64 = (1..=2_000_000u64)
            .map(|n| law.survival_at_least(n))
            .rev()
            .sum();
        // Missing tail of the direct sum is ~ 2 d / sqrt(2e6)
        assert!((direct + 2.0 * law.scale / 2e6f64.sqrt() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn survival_is_exact_in_the_tail() {
        let law = heyde_count();
        let mut rng = seeded(5);
        let n = 400_000;
        let draws: Vec<u64> = (0..n).map(|_| law.sample(&mut rng)).collect();
        for &level in &[2u64, 5, 20] {
            let emp = draws.iter().filter(|&&x| x >= level).count() as f64 / n as f64;
            let p = law.survival_at_least(level);
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((emp - p).abs() < 5.0 * se, "level {level}: {emp} vs {p}");
        }
        assert!(draws.iter().all(|&x| x >= 1));
    }

    #[test]
    fn truncated_moments_match_enumeration() {
        let law = DiscretePareto::new(1.5, 0.7, 2).unwrap();
        for &t in &[1u64, 2, 3, 10, 500, 70_000] {
            let mut p = 0.0;
            let mut m1 = 0.0;
            let mut m2 = 0.0;
            for n in (0..=t).rev() {
                let q = law.pmf(n);
                p += q;
                m1 += q * n as f64;
                m2 += q * (n as f64).powi(2);
            }
            let (gp, g1, g2) = law.truncated_moments(t);
            assert!((gp - p).abs() < 1e-12, "t={t}");
            assert!((g1 - m1).abs() < 1e-10 * m1.max(1.0), "t={t}: {g1} vs {m1}");
            assert!((g2 - m2).abs() < 1e-9 * m2.max(1.0), "t={t}: {g2} vs {m2}");
        }
    }

    #[test]
    fn conditional_tail_sampler() {
        let law = heyde_count();
        let mut rng = seeded(9);
        let t = 10;
        let n = 200_000;
        let hits = (0..n)
            .map(|_| law.sample_above(t, &mut rng))
            .filter(|&x| x >= 20)
            .count() as f64
            / n as f64;
        let want = law.survival_at_least(20) / law.survival_at_least(t + 1);
        assert!((hits - want).abs() < 5.0 * (want * (1.0 - want) / n as f64).sqrt());
    }

    #[test]
    fn aggregated_sum_has_the_right_mean_and_tail() {
        let law = heyde_count();
        let mut rng = seeded(21);
        let k = 100_000u64;
        let reps = 20_000;
        let sums: Vec<f64> = (0..reps)
            .map(|_| (law.sum_of(k, &mut rng) as f64 - 2.0 * k as f64) / (k as f64).powf(1.0 / 1.5))
            .collect();
        // Centred and scaled: the limit is stable with scale parameter
        // sigma^1.5 = d Gamma(0.5)/0.5 |cos(0.75 pi)|, so the median is O(1)
        // and the mean is zero.
        let mean = sums.iter().sum::<f64>() / reps as f64;
        let mut sorted = sums.clone();
        sorted.sort_by(f64::total_cmp);
        let iqr = sorted[3 * reps / 4] - sorted[reps / 4];
        assert!(mean.abs() < 0.2, "mean {mean}");
        assert!(iqr > 0.5 && iqr < 5.0, "iqr {iqr}");
    }

    #[test]
    fn aggregated_and_exact_sums_agree_in_law() {
        // Compare the hybrid sampler just above the exact limit with term-by-term sums.
        let law = heyde_count();
        let k = EXACT_SUM_LIMIT + 1;
        let reps = 40_000;
        let mut rng = seeded(3);
        let mut hybrid: Vec<f64> = (0..reps).map(|_| law.sum_of(k, &mut rng) as f64).collect();
        let mut exact: Vec<f64> = (0..reps)
            .map(|_| (0..k).map(|_| law.sample(&mut rng)).sum::<u64>() as f64)
            .collect();
        hybrid.sort_by(f64::total_cmp);
        exact.sort_by(f64::total_cmp);
        // Two-sample Kolmogorov-Smirnov statistic against its 0.1% critical value.
        let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
        while i < reps && j < reps {
            let x = hybrid[i].min(exact[j]);
            while i < reps && hybrid[i] <= x {
                i += 1;
            }
            while j < reps && exact[j] <= x {
                j += 1;
            }
            d = d.max((i as f64 - j as f64).abs() / reps as f64);
        }
        let critical = 1.95 * (2.0 / reps as f64).sqrt();
        assert!(d < critical, "KS distance {d} (critical {critical})");
        let median_rel = (hybrid[reps / 2] - exact[reps / 2]).abs() / exact[reps / 2];
        assert!(median_rel < 0.01);
    }

    #[test]
    fn categorical_sums_are_exact_multinomials() {
        let law = CountLaw::Categorical {
            probabilities: vec![0.2, 0.3, 0.5],
        };
        let mut rng = seeded(4);
        let reps = 50_000;
        let k = 10;
        let sums: Vec<f64> = (0..reps).map(|_| law.sum_of(k, &mut rng) as f64).collect();
        let mean = sums.iter().sum::<f64>() / reps as f64;
        let var = sums.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / reps as f64;
        // mean 1.3 per term, variance 0.61 per term
        assert!((mean - 13.0).abs() < 5.0 * (6.1f64 / reps as f64).sqrt());
        assert!((var - 6.1).abs() < 0.2);
    }

    #[test]
    fn invalid_pareto_rejected() {
        assert!(DiscretePareto::new(1.5, 3.0, 0).is_err());
        assert!(DiscretePareto::new(0.9, 0.5, 1).is_err());
        assert!(DiscretePareto::new(1.5, -1.0, 1).is_err());
    }
}
