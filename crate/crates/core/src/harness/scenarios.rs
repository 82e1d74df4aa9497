use std::path::PathBuf;

use serde::Serialize;

use super::config::{ChecksConfig, ExperimentConfig, GridSpec, PolicyConfig, SeriesConfig, Tolerances, SCHEMA_VERSION};
use crate::models::{
    calibrate_infinite_example, CountLaw, DiscretePareto, DisplacementLaw, OffspringLaw,
};
use crate::verify::CoefficientTail;

pub const GW_HEYDE: &str = "gw-heyde";
pub const PARETO_NORMAL: &str = "pareto-normal";
pub const INFINITE_POINTS: &str = "infinite-points";
pub const SERIES_ALTERNATING: &str = "series-alternating";

/// Lattice spacing of the infinite-points scenario. Wide spacing keeps the
/// lattice part light, so trees stay small at a tight truncation.
pub const INFINITE_POINTS_SPACING: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub name: String,
    pub description: String,
}

fn pareto(mean: f64) -> DiscretePareto {
    DiscretePareto::with_mean(1.5, 1, mean).expect("builtin Pareto law")
}

fn base(name: &str, description: &str, law: OffspringLaw, theta: f64, policy: PolicyConfig) -> ExperimentConfig {
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        scenario: name.into(),
        description: description.into(),
        theta,
        alpha: 1.5,
        replicates: 100_000,
        seed: 20_240_601,
        output_dir: PathBuf::from("out").join(name),
        law,
        policy,
        tolerances: Tolerances::default(),
        grid: GridSpec::default(),
        checks: ChecksConfig::default(),
    }
}

fn heyde_law() -> OffspringLaw {
    OffspringLaw::GaltonWatson {
        count: CountLaw::Pareto(pareto(2.0)),
    }
}

pub fn gw_heyde() -> ExperimentConfig {
    let mut config = base(
        GW_HEYDE,
        "Galton-Watson tree at theta = 0 with Pareto(1.5) offspring of mean 2 (the Heyde case)",
        heyde_law(),
        0.0,
        PolicyConfig::new(30, 12, vec![0, 1, 2]),
    );
    config.replicates = 1_000_000;
    config.checks = ChecksConfig {
        martingale_generations: Some(10),
        tail_ratio: true,
        tail_index: true,
        mixture: true,
        fdd_betas: vec![vec![1.0, 1.0, 1.0], vec![1.0, -1.0, 0.0]],
        series: None,
    };
    config
}

pub fn pareto_normal() -> ExperimentConfig {
    let law = OffspringLaw::ParetoCount {
        count: pareto(1.5),
        displacement: DisplacementLaw::standard_normal(),
    };
    base(
        PARETO_NORMAL,
        "Pareto(1.5) number of children of mean 1.5 with standard normal displacements at theta = 0.3",
        law,
        0.3,
        PolicyConfig::new(12, 8, vec![0]),
    )
}

pub fn infinite_points() -> ExperimentConfig {
    let k_law = pareto(2.0);
    let y_law = DisplacementLaw::Exponential { rate: 1.0 };
    let calibration = calibrate_infinite_example(&k_law, &y_law, INFINITE_POINTS_SPACING, 1.0)
        .expect("builtin infinite-points calibration");
    let law = OffspringLaw::InfinitePoints {
        k_law,
        y_law,
        spacing: calibration.spacing,
    };
    let mut policy = PolicyConfig::new(11, 8, vec![0]);
    policy.prune_epsilon = 1e-8;
    policy.offspring_truncation_epsilon = 1e-8;
    // Capped trees are left out of the statistics, and they are the largest
    // ones, so the cap must sit above anything a 10^5 run produces.
    policy.population_cap = 1 << 24;
    base(
        INFINITE_POINTS,
        "Infinitely many points: K ~ Pareto(1.5) of mean 2 points with Exp(1) positions, then a lattice with spacing 5; theta calibrated to m(theta) = 1",
        law,
        calibration.theta,
        policy,
    )
}

pub fn series_alternating() -> ExperimentConfig {
    let mut config = base(
        SERIES_ALTERNATING,
        "Heyde-case tree with the alternating series sum_j (-1)^j (W_{j+1} - W_j)",
        heyde_law(),
        0.0,
        PolicyConfig::new(30, 12, vec![0]),
    );
    config.replicates = 1_000_000;
    config.seed = 20_240_602;
    config.checks = ChecksConfig {
        martingale_generations: Some(10),
        series: Some(SeriesConfig {
            coefficients: vec![1.0, -1.0],
            tail: CoefficientTail::Periodic,
        }),
        ..ChecksConfig::default()
    };
    config
}

pub fn builtin_scenarios() -> Vec<ExperimentConfig> {
    vec![gw_heyde(), pareto_normal(), infinite_points(), series_alternating()]
}

pub fn scenario(name: &str) -> Option<ExperimentConfig> {
    builtin_scenarios().into_iter().find(|c| c.scenario == name)
}

pub fn list_scenarios() -> Vec<CatalogEntry> {
    builtin_scenarios()
        .into_iter()
        .map(|c| CatalogEntry {
            name: c.scenario,
            description: c.description,
        })
        .collect()
}
