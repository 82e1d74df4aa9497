//! Generation-by-generation simulation of the normalized weight populations.
//!
//! A population is a list of cohorts. A cohort is a set of particles sharing
//! one position, so it carries a single pair of weights and a multiplicity.
//! Laws whose displacements are deterministic keep every generation in one
//! cohort and draw the total brood of `k` parents with [`CountLaw::sum_of`];
//! other laws keep one particle per cohort.

use serde::{Deserialize, Serialize};

use crate::models::{
    laplace_m, sample_offspring_with_floor, CountLaw, ModelError, OffspringLaw,
};
use crate::rng::{ParticleId, ReplicateStream};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid simulation policy: {0}")]
    InvalidPolicy(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("length mismatch: {0}")]
    Length(String),
}

/// Truncation and resource limits of a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationPolicy {
    pub max_generation: usize,
    pub horizon: usize,
    #[serde(default = "default_prune_epsilon")]
    pub prune_epsilon: f64,
    #[serde(default = "default_population_cap")]
    pub population_cap: usize,
    #[serde(default = "default_offspring_truncation_epsilon")]
    pub offspring_truncation_epsilon: f64,
}

pub const DEFAULT_PRUNE_EPSILON: f64 = 1e-12;
pub const DEFAULT_POPULATION_CAP: usize = 1 << 20;
pub const DEFAULT_OFFSPRING_TRUNCATION_EPSILON: f64 = 1e-12;

fn default_prune_epsilon() -> f64 {
    DEFAULT_PRUNE_EPSILON
}

fn default_population_cap() -> usize {
    DEFAULT_POPULATION_CAP
}

fn default_offspring_truncation_epsilon() -> f64 {
    DEFAULT_OFFSPRING_TRUNCATION_EPSILON
}

impl SimulationPolicy {
    pub fn new(max_generation: usize, horizon: usize) -> Self {
        Self {
            max_generation,
            horizon,
            prune_epsilon: DEFAULT_PRUNE_EPSILON,
            population_cap: DEFAULT_POPULATION_CAP,
            offspring_truncation_epsilon: DEFAULT_OFFSPRING_TRUNCATION_EPSILON,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.horizon >= self.max_generation {
            return Err(EngineError::InvalidPolicy(format!(
                "horizon {} must be below the last generation {}",
                self.horizon, self.max_generation
            )));
        }
        if self.population_cap == 0 {
            return Err(EngineError::InvalidPolicy("population cap must be at least 1".into()));
        }
        if !(self.prune_epsilon >= 0.0 && self.prune_epsilon.is_finite()) {
            return Err(EngineError::InvalidPolicy(format!(
                "prune epsilon {} must be a nonnegative number",
                self.prune_epsilon
            )));
        }
        if !(self.offspring_truncation_epsilon >= 0.0 && self.offspring_truncation_epsilon.is_finite())
        {
            return Err(EngineError::InvalidPolicy(format!(
                "offspring truncation epsilon {} must be a nonnegative number",
                self.offspring_truncation_epsilon
            )));
        }
        Ok(())
    }
}

/// Particles at one position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cohort {
    pub id: ParticleId,
    /// `exp(-theta S(u)) / m(theta)^n` of each member.
    pub weight_theta: f64,
    /// `exp(-alpha theta S(u)) / m(alpha theta)^n` of each member.
    pub weight_alpha: f64,
    pub size: u64,
}

impl Cohort {
    pub fn mass_theta(&self) -> f64 {
        self.weight_theta * self.size as f64
    }

    pub fn mass_alpha(&self) -> f64 {
        self.weight_alpha * self.size as f64
    }
}

/// One generation of the normalized branching random walk.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    cohorts: Vec<Cohort>,
    generation: usize,
    pruned_mass_bound: f64,
    capped: bool,
}

impl Population {
    /// The single ancestor at the origin.
    pub fn ancestor() -> Self {
        Self {
            cohorts: vec![Cohort {
                id: ParticleId::ROOT,
                weight_theta: 1.0,
                weight_alpha: 1.0,
                size: 1,
            }],
            generation: 0,
            pruned_mass_bound: 0.0,
            capped: false,
        }
    }

    pub fn from_cohorts(generation: usize, cohorts: Vec<Cohort>) -> Self {
        Self {
            cohorts,
            generation,
            pruned_mass_bound: 0.0,
            capped: false,
        }
    }

    pub fn cohorts(&self) -> &[Cohort] {
        &self.cohorts
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    /// Cumulative `theta`-mass removed by pruning, capping and offspring truncation.
    pub fn pruned_mass_bound(&self) -> f64 {
        self.pruned_mass_bound
    }

    pub fn capped(&self) -> bool {
        self.capped
    }

    pub fn is_empty(&self) -> bool {
        self.cohorts.is_empty()
    }

    /// Number of particles.
    pub fn particle_count(&self) -> u64 {
        self.cohorts.iter().map(|c| c.size).fold(0, u64::saturating_add)
    }

    /// `W_n(theta)`.
    pub fn total_theta(&self) -> f64 {
        self.cohorts.iter().map(Cohort::mass_theta).sum()
    }

    /// `W_n(alpha theta)`.
    pub fn total_alpha(&self) -> f64 {
        self.cohorts.iter().map(Cohort::mass_alpha).sum()
    }
}

/// A law together with the transforms that normalize its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingModel {
    law: OffspringLaw,
    theta: f64,
    alpha: f64,
    m_theta: f64,
    m_alpha_theta: f64,
    collapsed: Option<Collapsed>,
}

#[derive(Debug, Clone, PartialEq)]
struct Collapsed {
    count: CountLaw,
    factor_theta: f64,
    factor_alpha: f64,
}

impl BranchingModel {
    pub fn new(law: OffspringLaw, theta: f64, alpha: f64) -> Result<Self, EngineError> {
        law.validate()?;
        let m_theta = laplace_m(&law, theta)?;
        let m_alpha_theta = laplace_m(&law, alpha * theta)?;
        for (at, m) in [(theta, m_theta), (alpha * theta, m_alpha_theta)] {
            if !(m.is_finite() && m > 0.0) {
                return Err(ModelError::InfiniteTransform(at).into());
            }
        }
        let collapsed = match (law.collapsed_count(), law.common_displacement()) {
            (Some(count), Some(x)) => Some(Collapsed {
                count,
                factor_theta: (-theta * x).exp() / m_theta,
                factor_alpha: (-alpha * theta * x).exp() / m_alpha_theta,
            }),
            _ => None,
        };
        Ok(Self {
            law,
            theta,
            alpha,
            m_theta,
            m_alpha_theta,
            collapsed,
        })
    }

    pub fn law(&self) -> &OffspringLaw {
        &self.law
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn m_theta(&self) -> f64 {
        self.m_theta
    }

    pub fn m_alpha_theta(&self) -> f64 {
        self.m_alpha_theta
    }

    /// Whether every generation stays a single cohort.
    pub fn is_collapsed(&self) -> bool {
        self.collapsed.is_some()
    }
}

/// Draws the next generation.
///
/// Cohorts whose `theta`-mass falls below `prune_epsilon` times the parent
/// generation's total are dropped and their mass is added to the pruned-mass
/// bound. When more than `population_cap` cohorts survive, the lightest are
/// dropped the same way and the population is flagged as capped.
pub fn step_generation(
    pop: &Population,
    model: &BranchingModel,
    policy: &SimulationPolicy,
    stream: &ReplicateStream,
) -> Population {
    let mut next = Population::from_cohorts(0, Vec::new());
    step_generation_into(pop, model, policy, stream, &mut next);
    next
}

/// As [`step_generation`], writing into `next` to reuse its allocation.
pub(crate) fn step_generation_into(
    pop: &Population,
    model: &BranchingModel,
    policy: &SimulationPolicy,
    stream: &ReplicateStream,
    next: &mut Population,
) {
    next.cohorts.clear();
    next.generation = pop.generation + 1;
    next.capped = pop.capped;
    let mut pruned = 0.0;
    let total = pop.total_theta();
    let cut = policy.prune_epsilon * total;

    for parent in &pop.cohorts {
        let mut rng = stream.particle_rng(parent.id);
        if let Some(collapsed) = &model.collapsed {
            let size = collapsed.count.sum_of(parent.size, &mut rng);
            if size == 0 {
                continue;
            }
            let child = Cohort {
                id: parent.id.child(0),
                weight_theta: parent.weight_theta * collapsed.factor_theta,
                weight_alpha: parent.weight_alpha * collapsed.factor_alpha,
                size,
            };
            if child.mass_theta() < cut {
                pruned += child.mass_theta();
            } else {
                next.cohorts.push(child);
            }
            continue;
        }
        let y = parent.weight_theta;
        let ya = parent.weight_alpha;
        // Lattice points lighter than the pruning cut are never materialized.
        let floor = if y > 0.0 { cut * model.m_theta / y } else { f64::INFINITY };
        let mut index = 0u64;
        for _ in 0..parent.size {
            let offspring = match sample_offspring_with_floor(
                &model.law,
                model.theta,
                policy.offspring_truncation_epsilon,
                floor,
                &mut rng,
            ) {
                Ok(o) => o,
                // Validated at model construction; an infinite law with zero
                // truncation cannot be materialized, so its mass is unaccounted.
                Err(_) => {
                    pruned += y;
                    continue;
                }
            };
            pruned += y * offspring.truncated_weight_bound / model.m_theta;
            for x in offspring.points {
                let w = y * (-model.theta * x).exp() / model.m_theta;
                let id = parent.id.child(index);
                index += 1;
                if w < cut || w == 0.0 {
                    pruned += w;
                    continue;
                }
                next.cohorts.push(Cohort {
                    id,
                    weight_theta: w,
                    weight_alpha: ya * (-model.alpha * model.theta * x).exp() / model.m_alpha_theta,
                    size: 1,
                });
            }
        }
    }

    if next.cohorts.len() > policy.population_cap {
        let cap = policy.population_cap;
        next.cohorts.select_nth_unstable_by(cap - 1, |a, b| {
            b.mass_theta().total_cmp(&a.mass_theta()).then(a.id.cmp(&b.id))
        });
        pruned += next.cohorts[cap..].iter().map(Cohort::mass_theta).sum::<f64>();
        next.cohorts.truncate(cap);
        // Restore a scheduling-independent order.
        next.cohorts.sort_unstable_by_key(|c| c.id);
        next.capped = true;
    }
    next.pruned_mass_bound = pop.pruned_mass_bound + pruned;
}

/// Trajectories `W_0..W_M` at `theta` and `alpha theta` for one tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingalePath {
    pub w_theta: Vec<f64>,
    pub w_alpha: Vec<f64>,
    pub extinct_at: Option<usize>,
    pub pruned_mass_bound: f64,
    pub capped: bool,
}

impl MartingalePath {
    pub fn max_generation(&self) -> usize {
        self.w_theta.len() - 1
    }
}

/// Simulates one tree from a single ancestor at the origin up to generation `M`.
pub fn simulate_path(
    model: &BranchingModel,
    policy: &SimulationPolicy,
    stream: &ReplicateStream,
) -> Result<MartingalePath, EngineError> {
    policy.validate()?;
    if matches!(model.law, OffspringLaw::InfinitePoints { .. })
        && policy.offspring_truncation_epsilon == 0.0
    {
        return Err(ModelError::ZeroTruncation.into());
    }
    let m = policy.max_generation;
    let mut w_theta = Vec::with_capacity(m + 1);
    let mut w_alpha = Vec::with_capacity(m + 1);
    w_theta.push(1.0);
    w_alpha.push(1.0);
    let mut current = Population::ancestor();
    let mut next = Population::from_cohorts(0, Vec::new());
    let mut extinct_at = None;
    for generation in 1..=m {
        if extinct_at.is_some() {
            w_theta.push(0.0);
            w_alpha.push(0.0);
            continue;
        }
        step_generation_into(&current, model, policy, stream, &mut next);
        std::mem::swap(&mut current, &mut next);
        if current.is_empty() {
            extinct_at = Some(generation);
            w_theta.push(0.0);
            w_alpha.push(0.0);
        } else {
            w_theta.push(current.total_theta());
            w_alpha.push(current.total_alpha());
        }
    }
    Ok(MartingalePath {
        w_theta,
        w_alpha,
        extinct_at,
        pruned_mass_bound: current.pruned_mass_bound,
        capped: current.capped,
    })
}

/// One fluctuation sample: the scaled differences per lag and the paired
/// mixing weight `W_n(alpha theta)`.
pub type FluctuationSample = (Vec<f64>, f64);

/// `(kappa^{-(n-r)/alpha} (W_M - W_{n-r}))_{r in lags}` paired with `W_n(alpha theta)`.
pub fn fluctuation_samples(
    paths: &[MartingalePath],
    n: usize,
    lags: &[usize],
    kappa: f64,
    alpha: f64,
) -> Result<Vec<FluctuationSample>, EngineError> {
    if let Some(r) = lags.iter().find(|&&r| r > n) {
        return Err(EngineError::Index(format!("lag {r} exceeds horizon {n}")));
    }
    let scales: Vec<f64> = lags
        .iter()
        .map(|&r| kappa.powf(-((n - r) as f64) / alpha))
        .collect();
    paths
        .iter()
        .map(|path| {
            let m = path.max_generation();
            if n >= m {
                return Err(EngineError::Index(format!(
                    "horizon {n} must be below the last generation {m}"
                )));
            }
            let limit = path.w_theta[m];
            let values = lags
                .iter()
                .zip(&scales)
                .map(|(&r, s)| s * (limit - path.w_theta[n - r]))
                .collect();
            Ok((values, path.w_alpha[n]))
        })
        .collect()
}

/// `sum_j a_j (W_{j+1} - W_j)` over the given coefficients.
pub fn weighted_increment_series(path: &MartingalePath, a: &[f64]) -> Result<f64, EngineError> {
    if a.len() > path.max_generation() {
        return Err(EngineError::Length(format!(
            "{} coefficients but only {} increments",
            a.len(),
            path.max_generation()
        )));
    }
    Ok(a
        .iter()
        .enumerate()
        .map(|(j, aj)| aj * (path.w_theta[j + 1] - path.w_theta[j]))
        .sum())
}
