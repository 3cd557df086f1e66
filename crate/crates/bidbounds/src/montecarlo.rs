//! Equilibrium generation, bid sampling, and end-to-end estimation
//! experiments.
//!
//! The generator picks one equilibrium outcome for a known value
//! distribution by optimizing a selector objective over the unconditional
//! equilibrium masses `ψ(v, b)`; its bid marginal `φ` is then a population
//! distribution whose identified set provably contains the generating
//! parameter. Sampling draws observations from `φ`, and an experiment runs
//! every estimation routine on growing samples so their sets can be
//! compared against the population one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::{
    bernstein_set, nonparam_moment_interval, parametric_hoeffding_set,
    subsampling_confidence_set, BidSample, CandidateStrategy, InferenceError, SubsampleConfig,
};
use crate::lp::{self, LpError, LpStatus, Sense};
use crate::model::{realized_revenue, ModelError, SupportGrid, UtilityKernel};
use crate::parametric::{
    parametric_identified_set, Family, ParametricError, Theta, ThetaGrid,
};
use crate::sharp::{
    build_bce_joint, moment_bounds_cv, BidDistribution, DistributionOrigin, Interval,
    SharpError, ValueDistribution,
};

/// Errors from generation, sampling, and experiment configuration.
#[derive(Debug, Error)]
pub enum McError {
    #[error(
        "no equilibrium outcome matches this value distribution; the smallest \
         feasible row tolerance is {min_tolerance}"
    )]
    Infeasible { min_tolerance: f64 },
    #[error("selector needs at least one draw")]
    NoDraws,
    #[error("need at least one observation")]
    EmptySample,
    #[error("need at least one sample size")]
    EmptyNList,
    #[error("theta stride must be at least one")]
    BadStride,
    #[error("generated mass is degenerate")]
    DegenerateMass,
    #[error("unknown density family {0:?}")]
    UnknownFamily(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sharp(#[from] SharpError),
    #[error(transparent)]
    Parametric(#[from] ParametricError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

/// Which equilibrium outcome the generator selects from the feasible set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BceSelector {
    /// The revenue-maximizing outcome.
    MaxRevenue,
    /// The revenue-minimizing outcome.
    MinRevenue,
    /// A vertex maximizing a seeded uniform random objective.
    RandomObjective { seed: u64 },
    /// The average of several random vertices: an interior point standing
    /// in for the maximum-entropy outcome.
    MaxEntropySurrogate {
        seed: u64,
        #[serde(default = "default_surrogate_draws")]
        draws: usize,
    },
}

fn default_surrogate_draws() -> usize {
    8
}

impl Default for BceSelector {
    fn default() -> Self {
        Self::MaxRevenue
    }
}

/// A generated equilibrium outcome.
#[derive(Debug, Clone, Serialize)]
pub struct GeneratedBce {
    /// Bid marginal `φ(b) = Σ_v ψ(v, b)`, renormalized to a unit total so
    /// solver slack cannot leave it slightly off one.
    pub phi: BidDistribution,
    /// Raw masses `ψ(v, b)`, value index outermost.
    pub psi: Vec<f64>,
    /// Expected revenue under `phi`.
    pub revenue: f64,
    /// Value of the selector objective (equals `revenue` for the
    /// revenue selectors and the averaged surrogate).
    pub objective: f64,
}

/// Seller revenue per flat bid profile, in profile-lexicographic order.
fn profile_revenues(grid: &SupportGrid, u: &UtilityKernel) -> Vec<f64> {
    let nb = grid.bids().len();
    let per = nb.pow(grid.n() as u32);
    (0..per)
        .map(|flat| realized_revenue(u, &grid.profile_bids(&decode_profile(flat, nb, grid.n()))))
        .collect()
}

/// Mixed-radix decode of a flat bid-profile index, player 0 outermost.
fn decode_profile(mut flat: usize, nb: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0usize; n];
    for slot in out.iter_mut().rev() {
        *slot = flat % nb;
        flat /= nb;
    }
    out
}

fn random_objective(num_vars: usize, seed: u64, stream: u64) -> Vec<(usize, f64)> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..num_vars).map(|v| (v, rng.gen::<f64>() * 2.0 - 1.0)).collect()
}

fn solve_selector(
    sys: &crate::sharp::ConstraintSystem,
    objective: &[(usize, f64)],
    sense: Sense,
) -> Result<(Vec<f64>, f64), McError> {
    let lp = sys.objective_lp(objective, sense, 0.0);
    let sol = lp::solve(&lp).map_err(SharpError::from)?;
    match sol.status {
        LpStatus::Optimal => Ok((sol.point, sol.objective)),
        LpStatus::Infeasible => {
            let min_tolerance = lp::minimax_value(sys).map_err(SharpError::from)?;
            Err(McError::Infeasible { min_tolerance })
        }
        LpStatus::Unbounded => Err(McError::Sharp(SharpError::Lp(LpError::Numerical(
            "bounded selector program reported unbounded".into(),
        )))),
    }
}

/// Selects one equilibrium outcome for the common-value distribution `pi`:
/// masses `ψ(v, b) ≥ 0` summing to one, obedient for every player, with
/// value marginal pinned to `pi`. Returns its bid marginal and revenue.
pub fn generate_bce(
    pi: &ValueDistribution,
    grid: &SupportGrid,
    u: &UtilityKernel,
    selector: &BceSelector,
) -> Result<GeneratedBce, McError> {
    let mass = pi.as_common()?;
    let bce = build_bce_joint(grid, u);
    let sys = bce.with_value_consistency(mass)?;
    let nv = grid.values().len();
    let nb = grid.bids().len();
    let per = nb.pow(grid.n() as u32);
    let revenues = profile_revenues(grid, u);

    let revenue_objective: Vec<(usize, f64)> = (0..nv)
        .flat_map(|v| {
            let revenues = &revenues;
            (0..per).filter_map(move |b| {
                (revenues[b] != 0.0).then_some((v * per + b, revenues[b]))
            })
        })
        .collect();

    let (psi, objective_is_revenue, objective) = match selector {
        BceSelector::MaxRevenue => {
            let (x, obj) = solve_selector(&sys, &revenue_objective, Sense::Maximize)?;
            (x, true, obj)
        }
        BceSelector::MinRevenue => {
            let (x, obj) = solve_selector(&sys, &revenue_objective, Sense::Minimize)?;
            (x, true, obj)
        }
        BceSelector::RandomObjective { seed } => {
            let obj = random_objective(nv * per, *seed, 0);
            let (x, val) = solve_selector(&sys, &obj, Sense::Maximize)?;
            (x, false, val)
        }
        BceSelector::MaxEntropySurrogate { seed, draws } => {
            if *draws == 0 {
                return Err(McError::NoDraws);
            }
            let mut acc = vec![0.0; nv * per];
            for d in 0..*draws {
                let obj = random_objective(nv * per, *seed, d as u64);
                let (x, _) = solve_selector(&sys, &obj, Sense::Maximize)?;
                for (a, b) in acc.iter_mut().zip(&x) {
                    *a += b;
                }
            }
            for a in &mut acc {
                *a /= *draws as f64;
            }
            (acc, true, f64::NAN)
        }
    };

    // Bid marginal, renormalized: the simplex row only holds up to solver
    // tolerance, while the distribution type checks mass to 1e-9.
    let mut flat_mass = vec![0.0; per];
    for v in 0..nv {
        for b in 0..per {
            flat_mass[b] += psi[v * per + b];
        }
    }
    let total: f64 = flat_mass.iter().sum();
    if !(total > 0.0) {
        return Err(McError::DegenerateMass);
    }
    let pairs: Vec<(Vec<usize>, f64)> = flat_mass
        .iter()
        .enumerate()
        .filter(|&(_, &m)| m > 0.0)
        .map(|(b, &m)| (decode_profile(b, nb, grid.n()), m / total))
        .collect();
    let phi = BidDistribution::for_actions(
        &vec![nb; grid.n()],
        pairs,
        DistributionOrigin::Exact,
    )?;
    let revenue: f64 = phi
        .profiles()
        .iter()
        .zip(phi.probs())
        .map(|(p, &w)| w * realized_revenue(u, &grid.profile_bids(p)))
        .sum();
    let objective = if objective_is_revenue && objective.is_nan() { revenue } else { objective };
    Ok(GeneratedBce { phi, psi, revenue, objective })
}

/// Draws `n_obs` bid profiles from `phi` by inverting its cdf over the
/// ordered support, with a single sequential RNG stream per seed.
pub fn sample_bids(
    grid: &SupportGrid,
    phi: &BidDistribution,
    n_obs: usize,
    seed: u64,
) -> Result<BidSample, McError> {
    if n_obs == 0 {
        return Err(McError::EmptySample);
    }
    if phi.n() != grid.n() {
        return Err(McError::Sharp(SharpError::ProfileLength {
            got: phi.n(),
            expected: grid.n(),
        }));
    }
    let probs = phi.probs();
    let mut cum = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs {
        acc += p;
        cum.push(acc);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut flat = Vec::with_capacity(n_obs * grid.n());
    for _ in 0..n_obs {
        let r: f64 = rng.gen();
        let k = cum.partition_point(|&c| c <= r).min(probs.len() - 1);
        flat.extend_from_slice(&phi.profiles()[k]);
    }
    Ok(BidSample::from_flat(grid, flat, Some(seed))?)
}

/// Auction rule by name, for configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleName {
    #[default]
    FirstPrice,
    SecondPrice,
}

impl RuleName {
    pub fn kernel(self) -> UtilityKernel {
        match self {
            Self::FirstPrice => UtilityKernel::first_price(),
            Self::SecondPrice => UtilityKernel::second_price(),
        }
    }
}

/// Integer support grid: values and bids both `0..=h`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridConfig {
    pub h: usize,
    #[serde(default = "default_players")]
    pub n: usize,
    #[serde(default)]
    pub rule: RuleName,
}

fn default_players() -> usize {
    2
}

fn default_delta() -> f64 {
    0.1
}

fn default_alpha() -> f64 {
    0.05
}

fn default_k() -> usize {
    50
}

fn default_s_fraction() -> f64 {
    0.25
}

fn default_stride() -> usize {
    1
}

/// One end-to-end experiment: generate an equilibrium at `theta0`, sample
/// each size in `N_list`, and estimate the parameter set every way the
/// crate knows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Family name: `truncated_normal`, `truncated_poisson`, `binomial`,
    /// or `truncated_geometric`.
    pub family: String,
    pub theta0: Vec<f64>,
    pub grid: GridConfig,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub selector: BceSelector,
    pub seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_s_fraction")]
    pub s_fraction: f64,
    /// Keep every `theta_stride`-th default grid point (the generating
    /// point is re-inserted if thinning drops it).
    #[serde(default = "default_stride")]
    pub theta_stride: usize,
    #[serde(default)]
    pub skip_subsampling: bool,
    #[serde(default)]
    pub skip_bernstein: bool,
}

impl Default for ExperimentConfig {
    /// The reference Gaussian design: two bidders on `0..=20`, first
    /// price, `θ0 = (4, 1)`, samples from a thousand to a million.
    fn default() -> Self {
        Self {
            family: "truncated_normal".into(),
            theta0: vec![4.0, 1.0],
            grid: GridConfig { h: 20, n: 2, rule: RuleName::FirstPrice },
            n_list: vec![1_000, 10_000, 100_000, 1_000_000],
            selector: BceSelector::MaxRevenue,
            seed: 61,
            delta: 0.1,
            alpha: 0.05,
            k: 50,
            s_fraction: 0.25,
            theta_stride: 1,
            skip_subsampling: false,
            skip_bernstein: false,
        }
    }
}

/// Family constructor by configuration name.
pub fn family_by_name(name: &str, h: f64) -> Result<Family, McError> {
    match name {
        "truncated_normal" => Ok(Family::truncated_normal(h)),
        "truncated_poisson" => Ok(Family::truncated_poisson(h)),
        "binomial" => Ok(Family::binomial(h)),
        "truncated_geometric" => Ok(Family::truncated_geometric(h)),
        other => Err(McError::UnknownFamily(other.into())),
    }
}

/// Population-side summary: the zero-tolerance parameter set at the
/// generated bid marginal and its implied moment ranges.
#[derive(Debug, Clone, Serialize)]
pub struct PopulationSummary {
    pub theta0_index: usize,
    pub theta0_included: bool,
    pub set_count: usize,
    pub mean_interval: (f64, f64),
    pub sd_interval: (f64, f64),
    pub revenue: f64,
    pub support_size: usize,
    pub theta0_mean: f64,
    pub theta0_sd: f64,
}

/// Estimation summary for one sample size.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateSummary {
    pub n_obs: usize,
    /// Hoeffding row tolerance for the parametric sweep.
    pub sigma: f64,
    /// Hoeffding objective widening for moment intervals.
    pub epsilon: f64,
    pub hoeffding_count: usize,
    /// Grid points the estimate includes but the population set does not.
    pub hoeffding_excess: usize,
    /// `hoeffding_excess` as a fraction of the grid.
    pub excess_mass: f64,
    pub mean_interval: Option<(f64, f64)>,
    pub sd_interval: Option<(f64, f64)>,
    pub subsampling: Option<SubsampleSummary>,
    pub bernstein_count: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsampleSummary {
    pub tau_plus: f64,
    pub count: usize,
    pub excess: usize,
}

/// Full experiment output; serializes to a stable, reproducible document.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub grid_points: usize,
    pub population: PopulationSummary,
    pub estimates: Vec<EstimateSummary>,
}

/// Conservative variance range from a mean interval and a second-moment
/// interval: `[max(E2_lo - E_hi^2, 0), E2_hi - E_lo^2]` (floored so the
/// range stays ordered).
pub fn variance_superset(mean: &Interval, second_moment: &Interval) -> (f64, f64) {
    let lo = (second_moment.lower - mean.upper * mean.upper).max(0.0);
    let hi = (second_moment.upper - mean.lower * mean.lower).max(lo);
    (lo, hi)
}

fn sd_interval_from(mean: &Interval, second_moment: &Interval) -> (f64, f64) {
    let (lo, hi) = variance_superset(mean, second_moment);
    (lo.sqrt(), hi.sqrt())
}

/// Deterministic per-task seed, stable under reordering of the task list.
fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    base ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Thinned default grid with the generating point guaranteed present;
/// returns the grid and the index of `theta0`.
fn experiment_grid(
    family: &Family,
    theta0: &Theta,
    stride: usize,
) -> Result<(ThetaGrid, usize), McError> {
    if stride == 0 {
        return Err(McError::BadStride);
    }
    let full = ThetaGrid::default_for(family);
    let mut points: Vec<Theta> =
        full.points().iter().step_by(stride).cloned().collect();
    let matches = |t: &Theta| {
        t.coords().len() == theta0.coords().len()
            && t.coords()
                .iter()
                .zip(theta0.coords())
                .all(|(a, b)| (a - b).abs() <= 1e-12)
    };
    let theta0_index = match points.iter().position(matches) {
        Some(i) => i,
        None => {
            points.push(theta0.clone());
            points.len() - 1
        }
    };
    Ok((ThetaGrid::new(family, points)?, theta0_index))
}

fn excess_over(
    estimate: &crate::sharp::IdentifiedSet,
    population: &crate::sharp::IdentifiedSet,
) -> usize {
    let est = estimate.mask().expect("parametric sets are grid masks");
    let pop = population.mask().expect("parametric sets are grid masks");
    est.included
        .iter()
        .zip(&pop.included)
        .filter(|&(&e, &p)| e && !p)
        .count()
}

/// Runs the full pipeline: generate, sample at every size, estimate with
/// each procedure, and compare against the population set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, McError> {
    if config.n_list.is_empty() {
        return Err(McError::EmptyNList);
    }
    let grid = SupportGrid::integer(config.grid.n, config.grid.h)?;
    let u = config.grid.rule.kernel();
    let h = grid.h();
    let family = family_by_name(&config.family, h)?;
    let theta0 = Theta(config.theta0.clone());
    let (thetas, theta0_index) = experiment_grid(&family, &theta0, config.theta_stride)?;

    let pi0 = family.density(&theta0, grid.values())?;
    let generated = generate_bce(&pi0, &grid, &u, &config.selector)?;
    let (theta0_mean, theta0_sd) = family.moment_summary(&theta0, grid.values())?;

    // Population side, all at zero tolerance.
    let pop_set = parametric_identified_set(&generated.phi, &grid, &u, &family, &thetas, 0.0)?;
    let pop_mask = pop_set.mask().expect("parametric sets are grid masks");
    let pop_mean = moment_bounds_cv(&generated.phi, &grid, &u, |v| v, 0.0)?
        .interval()
        .ok_or(McError::DegenerateMass)?;
    let pop_second = moment_bounds_cv(&generated.phi, &grid, &u, |v| v * v / h, 0.0)?
        .interval()
        .map(|i| Interval::new(i.lower * h, i.upper * h))
        .transpose()?
        .ok_or(McError::DegenerateMass)?;
    let population = PopulationSummary {
        theta0_index,
        theta0_included: pop_mask.included[theta0_index],
        set_count: pop_mask.count_included(),
        mean_interval: (pop_mean.lower, pop_mean.upper),
        sd_interval: sd_interval_from(&pop_mean, &pop_second),
        revenue: generated.revenue,
        support_size: generated.phi.support_size(),
        theta0_mean,
        theta0_sd,
    };

    let mut estimates = Vec::with_capacity(config.n_list.len());
    for &n_obs in &config.n_list {
        let sample_seed = derive_seed(config.seed, n_obs as u64, 0);
        let sample = sample_bids(&grid, &generated.phi, n_obs, sample_seed)?;

        let (hoef_set, schedule) =
            parametric_hoeffding_set(&sample, &grid, &u, &family, &thetas, config.delta)?;
        let hoef_mask = hoef_set.mask().expect("parametric sets are grid masks");
        let hoeffding_excess = excess_over(&hoef_set, &pop_set);

        let mean_out = nonparam_moment_interval(&sample, &grid, &u, |v| v, config.delta)?;
        let second_out =
            nonparam_moment_interval(&sample, &grid, &u, |v| v * v / h, config.delta)?;
        let epsilon = mean_out.schedule.epsilon;
        let mean_interval = mean_out.interval.map(|i| (i.lower, i.upper));
        let sd_interval = match (mean_out.interval, second_out.interval) {
            (Some(m), Some(s2)) => {
                let rescaled = Interval::new(s2.lower * h, s2.upper * h)
                    .map_err(SharpError::from)?;
                Some(sd_interval_from(&m, &rescaled))
            }
            _ => None,
        };

        let subsampling = if config.skip_subsampling {
            None
        } else {
            let sub_config = SubsampleConfig {
                k: config.k,
                s_fraction: config.s_fraction,
                seed: derive_seed(config.seed, n_obs as u64, 1),
                ..SubsampleConfig::default()
            };
            let (sub_set, stat) = subsampling_confidence_set(
                &sample, &grid, &u, &family, &thetas, config.alpha, &sub_config,
            )?;
            Some(SubsampleSummary {
                tau_plus: stat.tau_plus,
                count: sub_set.mask().expect("grid mask").count_included(),
                excess: excess_over(&sub_set, &pop_set),
            })
        };

        let bernstein_count = if config.skip_bernstein {
            None
        } else {
            let report = bernstein_set(
                &sample,
                &grid,
                &u,
                &family,
                &thetas,
                config.delta,
                CandidateStrategy::default(),
            )?;
            Some(report.set.mask().expect("grid mask").count_included())
        };

        estimates.push(EstimateSummary {
            n_obs,
            sigma: schedule.sigma,
            epsilon,
            hoeffding_count: hoef_mask.count_included(),
            hoeffding_excess,
            excess_mass: hoeffding_excess as f64 / thetas.len() as f64,
            mean_interval,
            sd_interval,
            subsampling,
            bernstein_count,
        });
    }

    Ok(ExperimentReport {
        config: config.clone(),
        grid_points: thetas.len(),
        population,
        estimates,
    })
}
