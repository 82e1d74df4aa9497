use std::collections::BTreeSet;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::HarnessError;
use crate::engine::{fluctuation_samples, simulate_path, weighted_increment_series, BranchingModel};
use crate::models::{check_conditions, kappa, tail_constant_w1, CONTRACTION, SUPERCRITICAL};
use crate::rng::ReplicateStream;
use crate::stablelim::StableSpec;
use crate::verify::{
    cf_distance, ecf, fdd_limit_cf_on_grid, mean_check, predicted_series_tail_constant,
    series_tail_check, tail_index_check, tail_ratio_check, CfVerdict, MeanCheck, Side,
    TailVerdict, VerifyError,
};

/// CF comparisons on fewer usable samples are reported as insufficient.
pub const MIN_CF_SAMPLES: usize = 1000;

/// Per-replicate values kept for verification.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub replicate: u64,
    /// `W_k(theta)` for each `k` in [`SampleSet::generations`].
    pub w_theta: Vec<f64>,
    /// `W_k(alpha theta)` for each `k` in [`SampleSet::generations`].
    pub w_alpha: Vec<f64>,
    /// `kappa^{-(n-r)/alpha} (W_M - W_{n-r})` for each configured lag `r`.
    pub fluctuations: Vec<f64>,
    pub series: Option<f64>,
    pub extinct_at: Option<usize>,
    pub capped: bool,
    pub pruned_mass_bound: f64,
}

/// All replicates of one run, in replicate order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub generations: Vec<usize>,
    pub lags: Vec<usize>,
    pub has_series: bool,
    pub records: Vec<ReplicateRecord>,
}

impl SampleSet {
    /// Generations whose martingale values a config needs.
    pub fn layout(config: &ExperimentConfig) -> Vec<usize> {
        let p = &config.policy;
        let mut set: BTreeSet<usize> = BTreeSet::new();
        set.insert(0);
        set.insert(1);
        set.insert(p.horizon);
        set.insert(p.max_generation);
        set.extend(p.lags.iter().map(|r| p.horizon - r));
        if let Some(k) = config.checks.martingale_generations {
            set.extend(0..=k + 1);
        }
        set.into_iter().collect()
    }

    fn position(&self, generation: usize) -> Option<usize> {
        self.generations.binary_search(&generation).ok()
    }

    fn usable(&self) -> impl Iterator<Item = &ReplicateRecord> {
        self.records.iter().filter(|r| !r.capped)
    }

    /// `W_k(theta)` over uncapped replicates.
    pub fn w_theta(&self, generation: usize) -> Option<Vec<f64>> {
        let i = self.position(generation)?;
        Some(self.usable().map(|r| r.w_theta[i]).collect())
    }

    /// `W_k(alpha theta)` over uncapped replicates.
    pub fn w_alpha(&self, generation: usize) -> Option<Vec<f64>> {
        let i = self.position(generation)?;
        Some(self.usable().map(|r| r.w_alpha[i]).collect())
    }

    pub fn fluctuations(&self, lag_index: usize) -> Vec<f64> {
        self.usable().map(|r| r.fluctuations[lag_index]).collect()
    }

    pub fn series(&self) -> Vec<f64> {
        self.usable().filter_map(|r| r.series).collect()
    }

    pub fn counts(&self) -> RunCounts {
        let capped = self.records.iter().filter(|r| r.capped).count() as u64;
        RunCounts {
            replicates: self.records.len() as u64,
            extinct: self.records.iter().filter(|r| r.extinct_at.is_some()).count() as u64,
            capped,
            used: self.records.len() as u64 - capped,
        }
    }
}

fn with_pool<T: Send>(
    threads: Option<usize>,
    job: impl FnOnce() -> T + Send,
) -> Result<T, HarnessError> {
    match threads {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
            Ok(pool.install(job))
        }
    }
}

/// Simulates every replicate. The result does not depend on the thread count:
/// each replicate draws from its own stream and records keep replicate order.
pub fn simulate(config: &ExperimentConfig, threads: Option<usize>) -> Result<SampleSet, HarnessError> {
    config.validate()?;
    let model = BranchingModel::new(config.law.clone(), config.theta, config.alpha)?;
    let k = kappa(&config.law, config.theta, config.alpha)?;
    let policy = config.policy.simulation_policy();
    let generations = SampleSet::layout(config);
    let lags = config.policy.lags.clone();
    let coefficients = config
        .checks
        .series
        .as_ref()
        .map(|s| s.expand(config.policy.max_generation));
    let one = |replicate: u64| -> Result<ReplicateRecord, HarnessError> {
        let stream = ReplicateStream::new(config.seed, replicate);
        let path = simulate_path(&model, &policy, &stream)?;
        let (fluctuations, _) = fluctuation_samples(
            std::slice::from_ref(&path),
            config.policy.horizon,
            &lags,
            k,
            config.alpha,
        )?
        .pop()
        .expect("one path gives one sample");
        let series = match &coefficients {
            Some(a) => Some(weighted_increment_series(&path, a)?),
            None => None,
        };
        Ok(ReplicateRecord {
            replicate,
            w_theta: generations.iter().map(|&g| path.w_theta[g]).collect(),
            w_alpha: generations.iter().map(|&g| path.w_alpha[g]).collect(),
            fluctuations,
            series,
            extinct_at: path.extinct_at,
            capped: path.capped,
            pruned_mass_bound: path.pruned_mass_bound,
        })
    };
    let records = with_pool(threads, || {
        (0..config.replicates)
            .into_par_iter()
            .map(one)
            .collect::<Result<Vec<_>, _>>()
    })??;
    Ok(SampleSet {
        generations,
        lags,
        has_series: coefficients.is_some(),
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    InsufficientSample,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledMean {
    pub label: String,
    #[serde(flatten)]
    pub check: MeanCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Verdict {
    Tail(TailVerdict),
    TailPair { upper: TailVerdict, lower: TailVerdict },
    Cf(CfVerdict),
    Means { checks: Vec<LabelledMean> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub status: CheckStatus,
    pub verdict: Option<Verdict>,
    pub message: String,
}

impl CheckOutcome {
    fn from_result(name: String, result: Result<(bool, Verdict, String), VerifyError>) -> Self {
        match result {
            Ok((pass, verdict, message)) => Self {
                name,
                status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
                verdict: Some(verdict),
                message,
            },
            Err(VerifyError::TooFewSamples { needed, got }) => Self {
                name,
                status: CheckStatus::InsufficientSample,
                verdict: None,
                message: format!("needs {needed} samples, got {got}"),
            },
            Err(e) => Self::error(name, e.to_string()),
        }
    }

    fn error(name: String, message: String) -> Self {
        Self {
            name,
            status: CheckStatus::Error,
            verdict: None,
            message,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    pub fn cf(&self) -> Option<&CfVerdict> {
        match &self.verdict {
            Some(Verdict::Cf(v)) => Some(v),
            _ => None,
        }
    }
}

/// Empirical and theoretical CF values behind one CF check.
#[derive(Debug, Clone, PartialEq)]
pub struct CfTable {
    pub check: String,
    pub grid: Vec<f64>,
    pub empirical: Vec<Complex64>,
    pub theoretical: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub checks: Vec<CheckOutcome>,
    pub cf_tables: Vec<CfTable>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounts {
    pub replicates: u64,
    pub extinct: u64,
    pub capped: u64,
    /// Replicates entering the statistics (capped ones are left out).
    pub used: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_digest: String,
    pub scenario: String,
    pub software_version: String,
    pub kappa: Option<f64>,
    pub tail_constant: Option<f64>,
    pub failed_conditions: Vec<String>,
    pub counts: RunCounts,
    pub checks: Vec<CheckOutcome>,
    pub wall_clock_seconds: f64,
    pub pass: bool,
}

impl RunReport {
    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn means(
    labelled: Vec<(String, Vec<f64>, f64)>,
    z_limit: f64,
) -> Result<(bool, Verdict, String), VerifyError> {
    let mut checks = Vec::with_capacity(labelled.len());
    for (label, values, target) in labelled {
        let mut check = mean_check(&values, target)?;
        check.pass = check.z.abs() <= z_limit;
        checks.push(LabelledMean { label, check });
    }
    let worst = checks
        .iter()
        .max_by(|a, b| a.check.z.abs().total_cmp(&b.check.z.abs()))
        .expect("at least one mean");
    let message = format!(
        "largest |z| = {:.3} at {} (limit {z_limit})",
        worst.check.z.abs(),
        worst.label
    );
    let pass = checks.iter().all(|m| m.check.pass);
    Ok((pass, Verdict::Means { checks }, message))
}

fn cf_check(
    name: &str,
    samples: &[f64],
    weights: &[f64],
    spec: &StableSpec,
    kappa: f64,
    betas: &[f64],
    grid: &[f64],
    tolerance: f64,
    tables: &mut Vec<CfTable>,
) -> Result<(bool, Verdict, String), VerifyError> {
    if samples.len() < MIN_CF_SAMPLES {
        return Err(VerifyError::TooFewSamples {
            needed: MIN_CF_SAMPLES,
            got: samples.len(),
        });
    }
    let empirical = ecf(samples, grid)?;
    let theoretical = fdd_limit_cf_on_grid(spec, kappa, betas, weights, grid)?;
    let verdict = cf_distance(grid, &empirical, &theoretical, tolerance)?;
    tables.push(CfTable {
        check: name.to_string(),
        grid: grid.to_vec(),
        empirical,
        theoretical,
    });
    let message = format!(
        "sup distance {:.5}, rms distance {:.5} (tolerance {tolerance})",
        verdict.sup_distance, verdict.l2_distance
    );
    Ok((verdict.pass, Verdict::Cf(verdict), message))
}

fn tail(verdict: TailVerdict) -> (bool, Verdict, String) {
    let message = verdict.details.clone();
    (verdict.pass, Verdict::Tail(verdict), message)
}

fn fdd_name(betas: &[f64]) -> String {
    let parts: Vec<String> = betas.iter().map(|b| format!("{b}")).collect();
    format!("fdd[{}]", parts.join(","))
}

/// Runs every enabled check on a sample set. Check names are stable:
/// `martingale_increments`, `mean_one_theta`, `mean_one_alpha`, `tail_ratio`,
/// `tail_index_w1`, `tail_index_w`, `mixture_cf`, `fdd[b0,b1,..]`, `series_tail`.
pub fn analyze(config: &ExperimentConfig, samples: &SampleSet) -> Analysis {
    let tol = &config.tolerances;
    let p = &config.policy;
    let n = p.horizon;
    let m = p.max_generation;
    let alpha = config.alpha;
    let grid = config.grid.points();
    let mut checks = Vec::new();
    let mut cf_tables = Vec::new();
    let k = kappa(&config.law, config.theta, alpha).map_err(|e| e.to_string());
    let spec = tail_constant_w1(&config.law, config.theta, alpha)
        .map_err(|e| e.to_string())
        .and_then(|c| StableSpec::new(alpha, c).map_err(|e| e.to_string()));
    let column = |f: Option<Vec<f64>>| f.expect("generation is part of the sample layout");

    if let Some(last) = config.checks.martingale_generations {
        let w = |g| column(samples.w_theta(g));
        let increments = (0..=last)
            .map(|g| {
                let diff = w(g + 1).iter().zip(w(g)).map(|(a, b)| a - b).collect();
                (format!("W_{} - W_{g}", g + 1), diff, 0.0)
            })
            .collect();
        checks.push(CheckOutcome::from_result(
            "martingale_increments".into(),
            means(increments, tol.mean_z),
        ));
        checks.push(CheckOutcome::from_result(
            "mean_one_theta".into(),
            means(vec![(format!("W_{m}(theta)"), w(m), 1.0)], tol.mean_z),
        ));
        let alpha_means = (1..=last.max(1))
            .map(|g| (format!("W_{g}(alpha theta)"), column(samples.w_alpha(g)), 1.0))
            .collect();
        checks.push(CheckOutcome::from_result(
            "mean_one_alpha".into(),
            means(alpha_means, tol.mean_z),
        ));
    }

    let w_limit = column(samples.w_theta(m));
    let w_one = column(samples.w_theta(1));
    if config.checks.tail_ratio {
        let name = "tail_ratio".to_string();
        checks.push(match &k {
            Ok(k) => CheckOutcome::from_result(
                name,
                tail_ratio_check(&w_limit, &w_one, *k, tol.tail_window, tol.tail_ratio).map(tail),
            ),
            Err(e) => CheckOutcome::error(name, e.clone()),
        });
    }
    if config.checks.tail_index {
        for (name, data) in [("tail_index_w1", &w_one), ("tail_index_w", &w_limit)] {
            checks.push(CheckOutcome::from_result(
                name.into(),
                tail_index_check(data, tol.hill_top_fraction, alpha, tol.hill).map(tail),
            ));
        }
    }

    let weights = column(samples.w_alpha(n));
    let mut cf_jobs: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    if config.checks.mixture {
        let lag0 = p.lags.iter().position(|&r| r == 0);
        match lag0 {
            Some(i) => cf_jobs.push(("mixture_cf".into(), samples.fluctuations(i), vec![1.0])),
            None => checks.push(CheckOutcome::error(
                "mixture_cf".into(),
                "the mixture check needs lag 0 among the configured lags".into(),
            )),
        }
    }
    for betas in &config.checks.fdd_betas {
        let columns: Vec<Vec<f64>> = (0..p.lags.len()).map(|i| samples.fluctuations(i)).collect();
        let projected = (0..weights.len())
            .map(|row| columns.iter().zip(betas).map(|(c, b)| c[row] * b).sum())
            .collect();
        // Lags are ordered as configured; the limit expects beta_j at index n - j.
        let mut by_index = vec![0.0; p.lags.iter().max().map_or(0, |r| r + 1)];
        for (&r, &b) in p.lags.iter().zip(betas) {
            by_index[r] += b;
        }
        cf_jobs.push((fdd_name(betas), projected, by_index));
    }
    for (name, data, betas) in cf_jobs {
        checks.push(match (&k, &spec) {
            (Ok(k), Ok(spec)) => CheckOutcome::from_result(
                name.clone(),
                cf_check(&name, &data, &weights, spec, *k, &betas, &grid, tol.cf_sup, &mut cf_tables),
            ),
            (Err(e), _) | (_, Err(e)) => CheckOutcome::error(name, e.clone()),
        });
    }

    if let Some(series) = &config.checks.series {
        let name = "series_tail".to_string();
        checks.push(match (&k, &spec) {
            (Ok(k), Ok(spec)) => {
                let predicted = |side| {
                    predicted_series_tail_constant(&series.coefficients, series.tail, *k, alpha, spec.c, side)
                };
                let result = series_tail_check(
                    &samples.series(),
                    tol.series_top_fraction,
                    alpha,
                    predicted(Side::Upper),
                    predicted(Side::Lower),
                    tol.series_constant,
                )
                .map(|(upper, lower)| {
                    let message = format!("{}; {}", upper.details, lower.details);
                    (upper.pass && lower.pass, Verdict::TailPair { upper, lower }, message)
                });
                CheckOutcome::from_result(name, result)
            }
            (Err(e), _) | (_, Err(e)) => CheckOutcome::error(name, e.clone()),
        });
    }
    Analysis { checks, cf_tables }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub threads: Option<usize>,
    pub override_conditions: bool,
    /// Write samples, report and CF tables into the config's output directory.
    pub write_artifacts: bool,
}

/// Law conditions that must hold before a run (unless overridden).
fn required_failures(config: &ExperimentConfig) -> Vec<String> {
    let report = check_conditions(&config.law, config.theta, config.alpha);
    [CONTRACTION, SUPERCRITICAL]
        .into_iter()
        .filter(|label| report.condition(label) != Some(true))
        .map(String::from)
        .collect()
}

fn build_report(
    config: &ExperimentConfig,
    samples: &SampleSet,
    analysis: &Analysis,
    failed_conditions: Vec<String>,
    started: Instant,
) -> RunReport {
    RunReport {
        config_digest: config.digest(),
        scenario: config.scenario.clone(),
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        kappa: kappa(&config.law, config.theta, config.alpha).ok(),
        tail_constant: tail_constant_w1(&config.law, config.theta, config.alpha).ok(),
        failed_conditions,
        counts: samples.counts(),
        pass: analysis.checks.iter().all(CheckOutcome::passed),
        checks: analysis.checks.clone(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    }
}

/// Report for samples analyzed outside [`run_scenario`], e.g. read back from disk.
pub fn report_for(
    config: &ExperimentConfig,
    samples: &SampleSet,
    analysis: &Analysis,
    started: Instant,
) -> RunReport {
    build_report(config, samples, analysis, required_failures(config), started)
}

/// Validates, checks the law's conditions, simulates, verifies and (optionally)
/// writes `samples.csv`, `report.json` and one `cf_<check>.csv` per CF check.
pub fn run_scenario(config: &ExperimentConfig, options: &RunOptions) -> Result<RunReport, HarnessError> {
    let started = Instant::now();
    config.validate()?;
    let failed = required_failures(config);
    if !failed.is_empty() && !options.override_conditions {
        return Err(HarnessError::Conditions(failed));
    }
    let samples = simulate(config, options.threads)?;
    let analysis = analyze(config, &samples);
    let report = build_report(config, &samples, &analysis, failed, started);
    if options.write_artifacts {
        super::io::write_artifacts(config, &samples, &analysis, &report)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenarios::{gw_heyde, infinite_points, pareto_normal, series_alternating};

    fn small(mut config: ExperimentConfig, replicates: u64) -> ExperimentConfig {
        config.replicates = replicates;
        config
    }

    #[test]
    fn layout_covers_everything_used() {
        let config = gw_heyde();
        let g = SampleSet::layout(&config);
        assert_eq!(g, [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 30]);
    }

    #[test]
    fn single_replicate_flags_every_check_insufficient() {
        for config in [gw_heyde(), series_alternating()] {
            let report = run_scenario(&small(config.clone(), 1), &RunOptions::default()).unwrap();
            assert_eq!(report.counts.replicates, 1);
            assert!(!report.pass);
            assert!(!report.checks.is_empty());
            for check in &report.checks {
                assert_eq!(check.status, CheckStatus::InsufficientSample, "{check:?}");
            }
        }
    }

    #[test]
    fn every_enabled_check_appears_once() {
        let config = small(gw_heyde(), 50);
        let report = run_scenario(&config, &RunOptions::default()).unwrap();
        let names: Vec<&str> = report.checks.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "martingale_increments",
                "mean_one_theta",
                "mean_one_alpha",
                "tail_ratio",
                "tail_index_w1",
                "tail_index_w",
                "mixture_cf",
                "fdd[1,1,1]",
                "fdd[1,-1,0]",
            ]
        );
        let config = small(series_alternating(), 50);
        let report = run_scenario(&config, &RunOptions::default()).unwrap();
        let names: Vec<&str> = report.checks.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["martingale_increments", "mean_one_theta", "mean_one_alpha", "series_tail"]);
    }

    #[test]
    fn records_match_their_definitions() {
        let config = small(gw_heyde(), 200);
        let samples = simulate(&config, Some(1)).unwrap();
        let k = kappa(&config.law, config.theta, config.alpha).unwrap();
        let gi = |g| samples.generations.iter().position(|&x| x == g).unwrap();
        for r in &samples.records {
            assert_eq!(r.w_theta[gi(0)], 1.0);
            for (lag_index, &lag) in config.policy.lags.iter().enumerate() {
                let scale = k.powf(-((12 - lag) as f64) / config.alpha);
                let expected = scale * (r.w_theta[gi(30)] - r.w_theta[gi(12 - lag)]);
                assert_eq!(r.fluctuations[lag_index], expected);
            }
            // theta = 0: both martingales are the normalized generation size.
            assert_eq!(r.w_theta, r.w_alpha);
        }
    }

    #[test]
    fn thread_count_does_not_change_samples() {
        let config = small(pareto_normal(), 300);
        let a = simulate(&config, Some(1)).unwrap();
        let b = simulate(&config, Some(3)).unwrap();
        assert_eq!(a, b);
        let analysis_a = analyze(&config, &a);
        let analysis_b = analyze(&config, &b);
        assert_eq!(analysis_a, analysis_b);
    }

    #[test]
    fn series_uses_alternating_coefficients() {
        let config = small(series_alternating(), 20);
        let samples = simulate(&config, None).unwrap();
        assert!(samples.has_series);
        assert!(samples.records.iter().all(|r| r.series.unwrap().is_finite()));
    }

    #[test]
    fn condition_failure_needs_override() {
        let mut config = small(pareto_normal(), 10);
        config.theta = 3.0; // kappa > 1 for these displacements
        let report = check_conditions(&config.law, config.theta, config.alpha);
        assert_eq!(report.condition(CONTRACTION), Some(false));
        assert!(matches!(
            run_scenario(&config, &RunOptions::default()),
            Err(HarnessError::Conditions(_))
        ));
        let options = RunOptions {
            override_conditions: true,
            ..RunOptions::default()
        };
        let report = run_scenario(&config, &options).unwrap();
        assert_eq!(report.failed_conditions, [CONTRACTION]);
    }

    #[test]
    fn infinite_points_runs() {
        let config = small(infinite_points(), 30);
        let report = run_scenario(&config, &RunOptions::default()).unwrap();
        assert_eq!(report.counts.replicates, 30);
        assert_eq!(report.counts.extinct, 0);
    }

    #[test]
    fn capped_replicates_are_left_out() {
        let mut config = small(pareto_normal(), 200);
        config.policy.population_cap = 3;
        let samples = simulate(&config, None).unwrap();
        let counts = samples.counts();
        assert!(counts.capped > 0);
        assert_eq!(counts.used + counts.capped, 200);
        assert_eq!(samples.w_theta(1).unwrap().len() as u64, counts.used);
    }
}
