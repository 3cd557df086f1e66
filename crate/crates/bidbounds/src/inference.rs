//! Finite-sample and resampling inference for estimated identified sets.
//!
//! Identification queries elsewhere in the crate treat the bid distribution
//! as known. Here it is estimated from `N` observed bid profiles, and every
//! set is enlarged so that it still covers the population object with high
//! probability:
//!
//! - Hoeffding schedules: closed-form row tolerances `σ_N` and objective
//!   widenings `ε_N` from union bounds over the constraint family.
//! - Empirical-Bernstein sets: per-row variance penalties with a witness
//!   search; inclusion is certified by the witness, exclusion is heuristic.
//! - Subsampling: a data-driven cutoff `τ⁺` for the minimax statistic from
//!   `k` subsamples of size `s`, optionally refined.
//! - Bayesian bootstrap: posterior copies of any set via exponential
//!   reweighting of the observations.
//!
//! Every randomized routine seeds one RNG stream per task (per draw, per
//! subsample), so results do not depend on evaluation order.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::Exp1;
use serde::Serialize;
use thiserror::Error;

use crate::lp::{self, LinearProgram, LpSolution, LpStatus, Rel, Sense, FEASIBILITY_TOL};
use crate::model::{ModelError, SupportGrid, UtilityKernel};
use crate::parametric::{
    parametric_identified_set, parametric_minimax_profile, Family, ParametricError, Theta,
    ThetaGrid,
};
use crate::sharp::{
    build_bce_cv, moment_bounds_cv, BidDistribution, ConstraintSystem, DistributionOrigin,
    GridMask, IdentifiedSet, Interval, MomentBounds, SetVariant, SharpError,
};

/// Errors from sample validation and inference configuration.
#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("confidence parameter delta must lie strictly inside (0, 1), got {0}")]
    BadConfidence(f64),
    #[error("quantile level alpha must lie strictly inside (0, 1), got {0}")]
    BadLevel(f64),
    #[error("payoff bound must be finite and nonnegative, got {0}")]
    BadPayoffBound(f64),
    #[error("count {0} must be at least one")]
    BadCount(&'static str),
    #[error("sample has {got} observations, need at least {need}")]
    SampleTooSmall { got: usize, need: usize },
    #[error("subsample size {s} must satisfy 1 <= s < {n_obs}")]
    BadSubsampleSize { s: usize, n_obs: usize },
    #[error("preliminary parameter set must be a nonempty grid mask")]
    EmptyThetaSet,
    #[error("parameter mask covers {got} grid points, expected {expected}")]
    MaskMismatch { got: usize, expected: usize },
    #[error("need at least one resampling draw")]
    NoDraws,
    #[error("moment function value {value} at v={v} exceeds the payoff bound {h}")]
    MomentOutOfRange { v: f64, value: f64, h: f64 },
    #[error("bootstrap weights must be {0}")]
    BadWeights(&'static str),
    #[error("witness point has {got} coordinates, expected {expected}")]
    WitnessLength { got: usize, expected: usize },
    #[error("rows have no per-observation form; build the system from one empirical distribution")]
    NoSampleForm,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sharp(#[from] SharpError),
    #[error(transparent)]
    Parametric(#[from] ParametricError),
}

/// `N` observed bid profiles on a fixed grid, stored flat (`n` indices per
/// observation), with the generating seed when the sample was synthesized.
#[derive(Debug, Clone, Serialize)]
pub struct BidSample {
    n: usize,
    num_bid_levels: usize,
    flat: Vec<usize>,
    seed: Option<u64>,
}

impl BidSample {
    /// Validates one profile of grid indices per observation.
    pub fn new(
        grid: &SupportGrid,
        profiles: Vec<Vec<usize>>,
        seed: Option<u64>,
    ) -> Result<Self, InferenceError> {
        let mut flat = Vec::with_capacity(profiles.len() * grid.n());
        for p in &profiles {
            flat.extend_from_slice(p);
        }
        Self::from_flat(grid, flat, seed)
    }

    /// As [`BidSample::new`], with the observations pre-flattened.
    pub fn from_flat(
        grid: &SupportGrid,
        flat: Vec<usize>,
        seed: Option<u64>,
    ) -> Result<Self, InferenceError> {
        let n = grid.n();
        let levels = grid.bids().len();
        if flat.is_empty() || flat.len() % n != 0 {
            return Err(InferenceError::SampleTooSmall { got: flat.len() / n, need: 1 });
        }
        for &b in &flat {
            if b >= levels {
                return Err(InferenceError::Sharp(SharpError::ProfileIndex {
                    index: b,
                    size: levels,
                }));
            }
        }
        Ok(Self { n, num_bid_levels: levels, flat, seed })
    }

    /// Maps raw bid levels onto the grid, one row per observation.
    pub fn from_bids(
        grid: &SupportGrid,
        rows: &[Vec<f64>],
        seed: Option<u64>,
    ) -> Result<Self, InferenceError> {
        let mut profiles = Vec::with_capacity(rows.len());
        for row in rows {
            profiles.push(grid.profile_indices(row)?);
        }
        Self::new(grid, profiles, seed)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of observations.
    pub fn len(&self) -> usize {
        self.flat.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn profile(&self, t: usize) -> &[usize] {
        &self.flat[t * self.n..(t + 1) * self.n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.flat.chunks_exact(self.n)
    }
}

/// Finite-sample tolerances: the uniform row relaxation `sigma`, the
/// objective widening `epsilon`, and the variance-penalty multiplier
/// `lambda` (zero in schedules that do not penalize variance).
#[derive(Debug, Clone, Serialize)]
pub struct ToleranceSchedule {
    pub sigma: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub delta: f64,
    pub h: f64,
    pub n_obs: usize,
    pub counts: MomentCounts,
}

/// Cardinalities entering the union bounds.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MomentCounts {
    pub players: usize,
    pub bid_levels: usize,
    pub value_levels: usize,
    pub theta_points: usize,
    /// Number of moment inequalities counted by the schedule.
    pub moments: usize,
}

/// Which estimation problem a Hoeffding schedule covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ToleranceMode {
    /// Nonparametric moment bounds: rows relax by `sigma`, the two
    /// objective values widen by `epsilon`.
    NonparamMoment,
    /// Parametric grid sweeps: rows relax by `sigma`, no objective term.
    Parametric,
}

fn check_delta(delta: f64) -> Result<(), InferenceError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(InferenceError::BadConfidence(delta));
    }
    Ok(())
}

fn check_counts(players: usize, bid_levels: usize) -> Result<(), InferenceError> {
    if players == 0 {
        return Err(InferenceError::BadCount("players"));
    }
    if bid_levels == 0 {
        return Err(InferenceError::BadCount("bid levels"));
    }
    Ok(())
}

fn check_h(h: f64) -> Result<(), InferenceError> {
    if !h.is_finite() || h < 0.0 {
        return Err(InferenceError::BadPayoffBound(h));
    }
    Ok(())
}

/// Closed-form high-probability tolerances.
///
/// With payoffs in `[-h, h]` and `N` observations, a union bound over the
/// row family gives, at confidence `1 - delta`:
///
/// - `NonparamMoment`: `sigma = 2h sqrt(log(4 n |B|^2 / delta) / N)` over
///   the `n |B|^2` best-response rows, and
///   `epsilon = 2h sqrt(log(4 / delta) / N)` for the two moment objectives.
/// - `Parametric`: `sigma = 2h sqrt(log(|Theta| (n |B|^2 + |V|) / delta) / N)`
///   over all rows of every pinned program; `epsilon` is unused and zero.
pub fn hoeffding_tolerances(
    h: f64,
    players: usize,
    bid_levels: usize,
    value_levels: usize,
    theta_points: usize,
    delta: f64,
    n_obs: usize,
    mode: ToleranceMode,
) -> Result<ToleranceSchedule, InferenceError> {
    check_delta(delta)?;
    check_h(h)?;
    check_counts(players, bid_levels)?;
    if n_obs == 0 {
        return Err(InferenceError::SampleTooSmall { got: 0, need: 1 });
    }
    let br_rows = players * bid_levels * bid_levels;
    let n = n_obs as f64;
    let (moments, sigma, epsilon) = match mode {
        ToleranceMode::NonparamMoment => {
            let m = br_rows;
            let sigma = 2.0 * h * ((4.0 * m as f64 / delta).ln() / n).sqrt();
            let epsilon = 2.0 * h * ((4.0 / delta).ln() / n).sqrt();
            (m, sigma, epsilon)
        }
        ToleranceMode::Parametric => {
            if value_levels == 0 {
                return Err(InferenceError::BadCount("value levels"));
            }
            if theta_points == 0 {
                return Err(InferenceError::BadCount("theta points"));
            }
            let m = br_rows + value_levels;
            let sigma =
                2.0 * h * ((theta_points as f64 * m as f64 / delta).ln() / n).sqrt();
            (m, sigma, 0.0)
        }
    };
    Ok(ToleranceSchedule {
        sigma,
        epsilon,
        lambda: 0.0,
        delta,
        h,
        n_obs,
        counts: MomentCounts { players, bid_levels, value_levels, theta_points, moments },
    })
}

/// Variance-penalized schedule: `lambda = sqrt(2 log(2 |Theta| |M| / delta))`
/// and `sigma = 14 h log(2 |Theta| |M| / delta) / (3 (N - 1))`, with
/// `|M| = n |B|^2 + |V|`. Requires `N >= 2`.
pub fn bernstein_tolerances(
    h: f64,
    players: usize,
    bid_levels: usize,
    value_levels: usize,
    theta_points: usize,
    delta: f64,
    n_obs: usize,
) -> Result<ToleranceSchedule, InferenceError> {
    check_delta(delta)?;
    check_h(h)?;
    check_counts(players, bid_levels)?;
    if value_levels == 0 {
        return Err(InferenceError::BadCount("value levels"));
    }
    if theta_points == 0 {
        return Err(InferenceError::BadCount("theta points"));
    }
    if n_obs < 2 {
        return Err(InferenceError::SampleTooSmall { got: n_obs, need: 2 });
    }
    let moments = players * bid_levels * bid_levels + value_levels;
    let log_term = (2.0 * theta_points as f64 * moments as f64 / delta).ln();
    Ok(ToleranceSchedule {
        sigma: 14.0 * h * log_term / (3.0 * (n_obs as f64 - 1.0)),
        epsilon: 0.0,
        lambda: (2.0 * log_term).sqrt(),
        delta,
        h,
        n_obs,
        counts: MomentCounts {
            players,
            bid_levels,
            value_levels,
            theta_points,
            moments,
        },
    })
}

/// The empirical distribution `φ_N(b) = (1/N) Σ_t 1{ω_t = b}`.
pub fn empirical_distribution(sample: &BidSample) -> Result<BidDistribution, SharpError> {
    let n_obs = sample.len();
    let mut counts: BTreeMap<&[usize], usize> = BTreeMap::new();
    for row in sample.iter() {
        *counts.entry(row).or_insert(0) += 1;
    }
    let pairs = counts
        .into_iter()
        .map(|(p, c)| (p.to_vec(), c as f64 / n_obs as f64))
        .collect();
    BidDistribution::for_actions(
        &vec![sample.num_bid_levels; sample.n],
        pairs,
        DistributionOrigin::Empirical { n_obs },
    )
}

/// Empirical distribution of the observations selected by `rows`.
fn empirical_from_rows(
    sample: &BidSample,
    rows: &[usize],
) -> Result<BidDistribution, SharpError> {
    let mut counts: BTreeMap<&[usize], usize> = BTreeMap::new();
    for &t in rows {
        *counts.entry(sample.profile(t)).or_insert(0) += 1;
    }
    let pairs = counts
        .into_iter()
        .map(|(p, c)| (p.to_vec(), c as f64 / rows.len() as f64))
        .collect();
    BidDistribution::for_actions(
        &vec![sample.num_bid_levels; sample.n],
        pairs,
        DistributionOrigin::Empirical { n_obs: rows.len() },
    )
}

/// A moment interval from an estimated bid distribution, widened so it
/// covers the population interval with the schedule's confidence.
#[derive(Debug, Clone, Serialize)]
pub struct MomentConfidence {
    /// `[L_N(sigma) - epsilon, U_N(sigma) + epsilon]`; `None` when even the
    /// relaxed program is infeasible.
    pub interval: Option<Interval>,
    /// Minimax value of the row system at the empirical distribution; when
    /// the result is empty this is the smallest tolerance restoring
    /// feasibility.
    pub minimax: f64,
    pub schedule: ToleranceSchedule,
}

fn check_moment_range(
    grid: &SupportGrid,
    f: &impl Fn(f64) -> f64,
) -> Result<(), InferenceError> {
    let h = grid.h();
    for &v in grid.values() {
        let value = f(v);
        if !value.is_finite() || value.abs() > h + 1e-9 {
            return Err(InferenceError::MomentOutOfRange { v, value, h });
        }
    }
    Ok(())
}

/// Confidence interval for `E_π[f(v)]` at the Hoeffding schedule for
/// `delta`: rows relax by `sigma`, the solved endpoints widen by `epsilon`.
pub fn nonparam_moment_interval(
    sample: &BidSample,
    grid: &SupportGrid,
    u: &UtilityKernel,
    f: impl Fn(f64) -> f64,
    delta: f64,
) -> Result<MomentConfidence, InferenceError> {
    let schedule = hoeffding_tolerances(
        grid.h(),
        grid.n(),
        grid.bids().len(),
        grid.values().len(),
        1,
        delta,
        sample.len(),
        ToleranceMode::NonparamMoment,
    )?;
    nonparam_moment_interval_at(sample, grid, u, f, schedule)
}

/// As [`nonparam_moment_interval`], with an explicit schedule; pass a
/// zeroed schedule to reproduce the plug-in estimate.
pub fn nonparam_moment_interval_at(
    sample: &BidSample,
    grid: &SupportGrid,
    u: &UtilityKernel,
    f: impl Fn(f64) -> f64,
    schedule: ToleranceSchedule,
) -> Result<MomentConfidence, InferenceError> {
    check_moment_range(grid, &f)?;
    let phi = empirical_distribution(sample)?;
    match moment_bounds_cv(&phi, grid, u, f, schedule.sigma)? {
        MomentBounds::Interval { interval, minimax } => {
            let widened = Interval::new(
                interval.lower - schedule.epsilon,
                interval.upper + schedule.epsilon,
            )?;
            Ok(MomentConfidence { interval: Some(widened), minimax, schedule })
        }
        MomentBounds::Empty { min_tolerance } => {
            Ok(MomentConfidence { interval: None, minimax: min_tolerance, schedule })
        }
    }
}

/// Parametric grid sweep against the empirical distribution at the
/// Hoeffding row tolerance for `delta`.
pub fn parametric_hoeffding_set(
    sample: &BidSample,
    grid: &SupportGrid,
    u: &UtilityKernel,
    family: &Family,
    thetas: &ThetaGrid,
    delta: f64,
) -> Result<(IdentifiedSet, ToleranceSchedule), InferenceError> {
    let schedule = hoeffding_tolerances(
        grid.h(),
        grid.n(),
        grid.bids().len(),
        grid.values().len(),
        thetas.len(),
        delta,
        sample.len(),
        ToleranceMode::Parametric,
    )?;
    let phi = empirical_distribution(sample)?;
    let set = parametric_identified_set(&phi, grid, u, family, thetas, schedule.sigma)?;
    Ok((set, schedule))
}

/// Unbiased sample variance, single pass. Matches the pairwise form
/// `(1/(N(N-1))) Σ_{t<t'} (X_t - X_{t'})^2`; zero for fewer than two
/// observations.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (t, &x) in values.iter().enumerate() {
        let d = x - mean;
        mean += d / (t + 1) as f64;
        m2 += d * (x - mean);
    }
    (m2 / (n - 1) as f64).max(0.0)
}

/// Variance of one row's per-observation values, given the multiplicity of
/// each support profile in the sample.
fn variance_from_counts(per_profile: &[f64], counts: &[f64], n_obs: usize) -> f64 {
    if n_obs < 2 {
        return 0.0;
    }
    let n = n_obs as f64;
    let mean: f64 = per_profile.iter().zip(counts).map(|(&v, &c)| c * v).sum::<f64>() / n;
    let ss: f64 =
        per_profile.iter().zip(counts).map(|(&v, &c)| c * (v - mean) * (v - mean)).sum();
    (ss / (n - 1.0)).max(0.0)
}

/// Multiplicity of each empirical support profile in the sample.
fn support_counts(sample: &BidSample, phi: &BidDistribution) -> Vec<f64> {
    let mut counts = vec![0.0; phi.support_size()];
    for row in sample.iter() {
        let k = phi
            .profiles()
            .binary_search_by(|p| p.as_slice().cmp(row))
            .expect("sample profile is in its own empirical support");
        counts[k] += 1.0;
    }
    counts
}

/// `max_j (F_j(x) - lambda sqrt(Var_N(f_j)/N))` and the per-row penalties.
fn penalized_max(
    sys: &ConstraintSystem,
    x: &[f64],
    lambda: f64,
    counts: &[f64],
    n_obs: usize,
) -> Result<(f64, Vec<f64>), InferenceError> {
    let n = n_obs as f64;
    let mut worst = f64::NEG_INFINITY;
    let mut penalties = Vec::with_capacity(sys.rows().len());
    for (j, row) in sys.rows().iter().enumerate() {
        let per = sys.row_values_per_profile(j, x).ok_or(InferenceError::NoSampleForm)?;
        let var = variance_from_counts(&per, counts, n_obs);
        let pen = lambda * (var / n).sqrt();
        penalties.push(pen);
        worst = worst.max(row.value_at(x) - pen);
    }
    Ok((worst, penalties))
}

/// Epigraph solve with per-row offsets: `min t` s.t. `F_j(x) - o_j <= t`
/// over the structural domain.
fn offset_minimax_solution(
    sys: &ConstraintSystem,
    offsets: &[f64],
) -> Result<LpSolution, SharpError> {
    let n = sys.num_vars();
    let t = n;
    let mut lp = LinearProgram::new(n + 1, Sense::Minimize);
    lp.set_objective(t, 1.0).map_err(SharpError::from)?;
    lp.set_bounds(t, f64::NEG_INFINITY, f64::INFINITY).map_err(SharpError::from)?;
    for (v, hi) in sys.upper_bounds() {
        lp.set_bounds(v, 0.0, hi).map_err(SharpError::from)?;
    }
    for (row, &o) in sys.rows().iter().zip(offsets) {
        let mut coeffs = row.coeffs().to_vec();
        coeffs.push((t, -1.0));
        lp.add_constraint(coeffs, Rel::Le, o - row.constant()).map_err(SharpError::from)?;
    }
    for block in sys.blocks() {
        let coeffs: Vec<(usize, f64)> = block.iter().map(|&v| (v, 1.0)).collect();
        lp.add_constraint(coeffs, Rel::Eq, 1.0).map_err(SharpError::from)?;
    }
    let solution = lp::solve(&lp).map_err(SharpError::from)?;
    match solution.status {
        LpStatus::Optimal => Ok(solution),
        _ => Err(SharpError::Lp(crate::lp::LpError::Numerical(
            "offset epigraph program did not solve".into(),
        ))),
    }
}

/// How hard [`bernstein_set`] searches for an inclusion witness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CandidateStrategy {
    /// Only the minimizer of the unpenalized row system.
    Plain,
    /// Plus one solve with every row relaxed by its own penalty estimated
    /// at the plain minimizer.
    Reweighted,
    /// Plus further alternating penalty-update/solve steps up to `rounds`
    /// total solves beyond the plain one.
    Alternating { rounds: usize },
}

impl Default for CandidateStrategy {
    fn default() -> Self {
        Self::Alternating { rounds: 2 }
    }
}

impl CandidateStrategy {
    fn budget(self) -> usize {
        match self {
            Self::Plain => 0,
            Self::Reweighted => 1,
            Self::Alternating { rounds } => rounds.max(1),
        }
    }
}

/// A certified inclusion: at `x`, every penalized row value is within the
/// schedule tolerance, which any third party can re-verify.
#[derive(Debug, Clone, Serialize)]
pub struct BernsteinWitness {
    pub theta_index: usize,
    pub x: Vec<f64>,
    pub penalized_value: f64,
}

/// A variance-penalized identified set with its witnesses.
#[derive(Debug, Clone, Serialize)]
pub struct BernsteinReport {
    pub set: IdentifiedSet,
    pub schedule: ToleranceSchedule,
    /// One witness per included grid point.
    pub witnesses: Vec<BernsteinWitness>,
}

/// Variance-penalized parameter set: `θ` is included when some candidate
/// kernel `x` satisfies
/// `max_j (F_j(x; θ) - lambda sqrt(Var_N(f_j(x; θ, ω))/N)) <= sigma`.
///
/// Inclusion is exact given the witness; exclusion only means the candidate
/// search failed, since the penalized minimum is not a linear program. The
/// result's mask statistic is the best penalized value found per point.
pub fn bernstein_set(
    sample: &BidSample,
    grid: &SupportGrid,
    u: &UtilityKernel,
    family: &Family,
    thetas: &ThetaGrid,
    delta: f64,
    strategy: CandidateStrategy,
) -> Result<BernsteinReport, InferenceError> {
    let schedule = bernstein_tolerances(
        grid.h(),
        grid.n(),
        grid.bids().len(),
        grid.values().len(),
        thetas.len(),
        delta,
        sample.len(),
    )?;
    let phi = empirical_distribution(sample)?;
    let counts = support_counts(sample, &phi);
    let bce = build_bce_cv(&phi, grid, u)?;
    let nx = bce.system().num_vars();
    let threshold = schedule.sigma + FEASIBILITY_TOL;

    let mut included = Vec::with_capacity(thetas.len());
    let mut best_values = Vec::with_capacity(thetas.len());
    let mut witnesses = Vec::new();
    for (theta_index, theta) in thetas.points().iter().enumerate() {
        let pi = family.density(theta, grid.values())?;
        let sys = bce.with_value_consistency(pi.as_common()?)?;

        let sol = lp::minimax_solution(&sys).map_err(SharpError::from)?;
        let x0 = sol.point[..nx].to_vec();
        let (val0, pens0) = penalized_max(&sys, &x0, schedule.lambda, &counts, sample.len())?;
        let mut best_val = val0;
        let mut best_x = x0;
        let mut offsets = pens0;
        for _ in 0..strategy.budget() {
            if best_val <= threshold {
                break;
            }
            let sol = offset_minimax_solution(&sys, &offsets)?;
            let x = sol.point[..nx].to_vec();
            let (val, pens) =
                penalized_max(&sys, &x, schedule.lambda, &counts, sample.len())?;
            if val < best_val {
                best_val = val;
                best_x = x;
            }
            offsets = pens;
        }

        let is_in = best_val <= threshold;
        if is_in {
            witnesses.push(BernsteinWitness {
                theta_index,
                x: best_x,
                penalized_value: best_val,
            });
        }
        included.push(is_in);
        best_values.push(best_val);
    }

    Ok(BernsteinReport {
        set: IdentifiedSet {
            variant: SetVariant::Mask(GridMask { included, minimax: best_values }),
            row_tolerance: schedule.sigma,
            objective_slack: 0.0,
            feasibility_tol: FEASIBILITY_TOL,
            notes: vec![
                "exclusion is heuristic: the candidate search can miss the penalized minimum; \
                 inclusion carries a re-checkable witness"
                    .into(),
            ],
        },
        schedule,
        witnesses,
    })
}

/// Re-evaluates the penalized criterion at a supplied witness point,
/// independently of how the witness was found. `theta_points` must be the
/// grid size used when the witness was produced, since it enters the
/// schedule.
pub fn bernstein_penalized_value(
    sample: &BidSample,
    grid: &SupportGrid,
    u: &UtilityKernel,
    family: &Family,
    theta: &Theta,
    delta: f64,
    theta_points: usize,
    x: &[f64],
) -> Result<f64, InferenceError> {
    let schedule = bernstein_tolerances(
        grid.h(),
        grid.n(),
        grid.bids().len(),
        grid.values().len(),
        theta_points,
        delta,
        sample.len(),
    )?;
    let phi = empirical_distribution(sample)?;
    let counts = support_counts(sample, &phi);
    let bce = build_bce_cv(&phi, grid, u)?;
    if x.len() != bce.system().num_vars() {
        return Err(InferenceError::WitnessLength {
            got: x.len(),
            expected: bce.system().num_vars(),
        });
    }
    let pi = family.density(theta, grid.values())?;
    let sys = bce.with_value_consistency(pi.as_common()?)?;
    let (value, _) = penalized_max(&sys, x, schedule.lambda, &counts, sample.len())?;
    Ok(value)
}

/// Subsampling configuration. Defaults: `k = 50` subsamples of size
/// `N/4`, two refinement rounds, a zero-tolerance preliminary set.
#[derive(Debug, Clone, Serialize)]
pub struct SubsampleConfig {
    pub k: usize,
    /// Subsample size as a fraction of `N`, unless overridden.
    pub s_fraction: f64,
    pub s_override: Option<usize>,
    pub refine_rounds: usize,
    /// Row tolerance defining the preliminary parameter set.
    pub initial_sigma: f64,
    pub seed: u64,
}

impl Default for SubsampleConfig {
    fn default() -> Self {
        Self {
            k: 50,
            s_fraction: 0.25,
            s_override: None,
            refine_rounds: 2,
            initial_sigma: 0.0,
            seed: 0,
        }
    }
}

/// The subsampling statistic and its cutoff.
#[derive(Debug, Clone, Serialize)]
pub struct SubsampleStat {
    pub k: usize,
    pub s: usize,
    pub alpha: f64,
    /// `sqrt(s)`-scaled sup statistics from the final round, ascending.
    pub c_values: Vec<f64>,
    /// Cutoff on the full-sample minimax scale:
    /// `max(quantile_{1-alpha}(C), 0) / sqrt(N)`.
    pub tau_plus: f64,
    /// Evaluation rounds performed (1 plus executed refinements).
    pub rounds: usize,
    pub seed: u64,
    pub warnings: Vec<String>,
}

fn check_alpha(alpha: f64) -> Result<(), InferenceError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(InferenceError::BadLevel(alpha));
    }
    Ok(())
}

/// First `s` entries of a seeded partial shuffle of `0..n`: a uniform
/// subsample without replacement.
fn sample_without_replacement(n: usize, s: usize, rng: &mut ChaCha12Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..s {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(s);
    idx
}

/// Empirical `(1-alpha)` quantile: the `ceil((1-alpha) k)`-th smallest.
fn upper_quantile(sorted: &[f64], alpha: f64) -> f64 {
    let k = sorted.len();
    let rank = ((1.0 - alpha) * k as f64).ceil() as usize;
    sorted[rank.clamp(1, k) - 1]
}

struct CutoffInputs<'a> {
    sample: &'a BidSample,
    grid: &'a SupportGrid,
    u: &'a UtilityKernel,
    family: &'a Family,
    thetas: &'a ThetaGrid,
}

fn cutoff_impl(
    inputs: &CutoffInputs,
    mut hat: Vec<usize>,
    mut qn: Option<Vec<f64>>,
    alpha: f64,
    config: &SubsampleConfig,
    mut warnings: Vec<String>,
) -> Result<SubsampleStat, InferenceError> {
    let CutoffInputs { sample, grid, u, family, thetas } = *inputs;
    check_alpha(alpha)?;
    if config.k == 0 {
        return Err(InferenceError::BadCount("subsample draws"));
    }
    let n_obs = sample.len();
    let s = config
        .s_override
        .unwrap_or(((n_obs as f64 * config.s_fraction).floor() as usize).max(1));
    if s == 0 || s >= n_obs {
        return Err(InferenceError::BadSubsampleSize { s, n_obs });
    }
    if hat.is_empty() {
        return Err(InferenceError::EmptyThetaSet);
    }
    if config.k < 10 {
        warnings.push(format!(
            "only {} subsamples: the empirical quantile of the statistic is unstable",
            config.k
        ));
    }

    // One system per subsample, drawn on its own RNG stream.
    let mut systems = Vec::with_capacity(config.k);
    for m in 0..config.k {
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        rng.set_stream(m as u64);
        let rows = sample_without_replacement(n_obs, s, &mut rng);
        let phi = empirical_from_rows(sample, &rows)?;
        systems.push(build_bce_cv(&phi, grid, u)?);
    }

    // Densities and per-(subsample, theta) minimax values are cached across
    // refinement rounds.
    let mut masses: Vec<Option<Vec<f64>>> = vec![None; thetas.len()];
    let mut q_sub: HashMap<(usize, usize), f64> = HashMap::new();
    let scale = (s as f64).sqrt();
    let root_n = (n_obs as f64).sqrt();

    let mut c_values = Vec::new();
    let mut tau_plus = 0.0;
    let mut rounds = 0;
    for round in 0..=config.refine_rounds {
        c_values.clear();
        for m in 0..config.k {
            let mut sup = f64::NEG_INFINITY;
            for &ti in &hat {
                let q = match q_sub.get(&(m, ti)) {
                    Some(&q) => q,
                    None => {
                        if masses[ti].is_none() {
                            let pi = family.density(&thetas.points()[ti], grid.values())?;
                            masses[ti] = Some(pi.as_common()?.to_vec());
                        }
                        let sys = systems[m]
                            .with_value_consistency(masses[ti].as_ref().unwrap())?;
                        let q = lp::minimax_value(&sys).map_err(SharpError::from)?;
                        q_sub.insert((m, ti), q);
                        q
                    }
                };
                sup = sup.max(q);
            }
            c_values.push(scale * sup);
        }
        c_values.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
        tau_plus = upper_quantile(&c_values, alpha).max(0.0) / root_n;
        rounds = round + 1;
        if round == config.refine_rounds {
            break;
        }

        // Refinement: re-center the parameter set on the new cutoff.
        if qn.is_none() {
            let phi = empirical_distribution(sample)?;
            let bce = build_bce_cv(&phi, grid, u)?;
            qn = Some(parametric_minimax_profile(&bce, family, thetas, grid.values())?);
        }
        let qn_ref = qn.as_ref().unwrap();
        let mut next: Vec<usize> = (0..thetas.len())
            .filter(|&ti| qn_ref[ti] <= tau_plus + FEASIBILITY_TOL)
            .collect();
        if next.is_empty() {
            let argmin = (0..thetas.len())
                .min_by(|&a, &b| qn_ref[a].partial_cmp(&qn_ref[b]).expect("finite"))
                .expect("nonempty grid");
            warnings.push(
                "refined parameter set was empty; kept the best-fitting grid point".into(),
            );
            next = vec![argmin];
        }
        if next == hat {
            break;
        }
        hat = next;
    }

    Ok(SubsampleStat {
        k: config.k,
        s,
        alpha,
        c_values,
        tau_plus,
        rounds,
        seed: config.seed,
        warnings,
    })
}

/// Subsampling cutoff for the minimax statistic, starting from a supplied
/// preliminary parameter set: each subsample contributes
/// `C^m = sqrt(s) sup_{θ in hat} Q^m(θ)`, and the cutoff is the
/// `(1-alpha)` empirical quantile floored at zero and rescaled by
/// `1/sqrt(N)`. Refinement rounds re-threshold the full-sample statistic at
/// the current cutoff and repeat.
pub fn subsample_cutoff(
    sample: &BidSample,
    grid: &SupportGrid,
    u: &UtilityKernel,
    family: &Family,
    thetas: &ThetaGrid,
    theta_hat: &IdentifiedSet,
    alpha: f64,
    config: &SubsampleConfig,
) -> Result<SubsampleStat, InferenceError> {
    let mask = theta_hat.mask().ok_or(InferenceError::EmptyThetaSet)?;
    if mask.included.len() != thetas.len() {
        return Err(InferenceError::MaskMismatch {
            got: mask.included.len(),
            expected: thetas.len(),
        });
    }
    let hat: Vec<usize> =
        (0..thetas.len()).filter(|&ti| mask.included[ti]).collect();
    let inputs = CutoffInputs { sample, grid, u, family, thetas };
    cutoff_impl(&inputs, hat, None, alpha, config, Vec::new())
}

/// Subsampling confidence set: the grid points whose full-sample minimax
/// value is at most the cutoff, `{θ : Q^N(θ) <= τ⁺}`. The preliminary set
/// thresholds `Q^N` at `config.initial_sigma`.
pub fn subsampling_confidence_set(
    sample: &BidSample,
    grid: &SupportGrid,
    u: &UtilityKernel,
    family: &Family,
    thetas: &ThetaGrid,
    alpha: f64,
    config: &SubsampleConfig,
) -> Result<(IdentifiedSet, SubsampleStat), InferenceError> {
    check_alpha(alpha)?;
    if thetas.is_empty() {
        return Err(InferenceError::EmptyThetaSet);
    }
    let phi = empirical_distribution(sample)?;
    let bce = build_bce_cv(&phi, grid, u)?;
    let qn = parametric_minimax_profile(&bce, family, thetas, grid.values())?;

    let mut warnings = Vec::new();
    let mut hat: Vec<usize> = (0..thetas.len())
        .filter(|&ti| qn[ti] <= config.initial_sigma + FEASIBILITY_TOL)
        .collect();
    if hat.is_empty() {
        let argmin = (0..thetas.len())
            .min_by(|&a, &b| qn[a].partial_cmp(&qn[b]).expect("finite"))
            .expect("nonempty grid");
        warnings.push(
            "preliminary parameter set was empty; started from the best-fitting grid point"
                .into(),
        );
        hat = vec![argmin];
    }

    let inputs = CutoffInputs { sample, grid, u, family, thetas };
    let stat = cutoff_impl(&inputs, hat, Some(qn.clone()), alpha, config, warnings)?;
    let included: Vec<bool> =
        qn.iter().map(|&q| q <= stat.tau_plus + FEASIBILITY_TOL).collect();
    let set = IdentifiedSet {
        variant: SetVariant::Mask(GridMask { included, minimax: qn }),
        row_tolerance: stat.tau_plus,
        objective_slack: 0.0,
        feasibility_tol: FEASIBILITY_TOL,
        notes: vec![
            "subsample statistics are rescaled by sqrt(s), the cutoff by 1/sqrt(N) \
             (the standard subsampling rate)"
                .into(),
        ],
    };
    Ok((set, stat))
}

/// Reweights the sample into a bid distribution:
/// `φ(b) = Σ_t w_t 1{ω_t = b} / Σ_t w_t`. Equal weights reproduce the
/// empirical distribution exactly.
pub fn bootstrap_distribution(
    sample: &BidSample,
    weights: &[f64],
) -> Result<BidDistribution, InferenceError> {
    if weights.len() != sample.len() {
        return Err(InferenceError::BadWeights("one per observation"));
    }
    let mut total = 0.0;
    for &w in weights {
        if !w.is_finite() || w < 0.0 {
            return Err(InferenceError::BadWeights("finite and nonnegative"));
        }
        total += w;
    }
    if total <= 0.0 {
        return Err(InferenceError::BadWeights("not all zero"));
    }
    let mut mass: BTreeMap<&[usize], f64> = BTreeMap::new();
    for (row, &w) in sample.iter().zip(weights) {
        *mass.entry(row).or_insert(0.0) += w;
    }
    let pairs = mass.into_iter().map(|(p, w)| (p.to_vec(), w / total)).collect();
    Ok(BidDistribution::for_actions(
        &vec![sample.num_bid_levels; sample.n],
        pairs,
        DistributionOrigin::Empirical { n_obs: sample.len() },
    )?)
}

fn exponential_weights(n: usize, rng: &mut ChaCha12Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect()
}

/// Bayesian-bootstrap copies of the parametric set: per draw, observations
/// are reweighted with standard exponential weights and the grid sweep is
/// recomputed at row tolerance `sigma`. Draw `d` uses RNG stream `d` of
/// `seed`.
pub fn bayesian_bootstrap_masks(
    sample: &BidSample,
    grid: &SupportGrid,
    u: &UtilityKernel,
    family: &Family,
    thetas: &ThetaGrid,
    sigma: f64,
    draws: usize,
    seed: u64,
) -> Result<Vec<IdentifiedSet>, InferenceError> {
    if draws == 0 {
        return Err(InferenceError::NoDraws);
    }
    let mut out = Vec::with_capacity(draws);
    for d in 0..draws {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(d as u64);
        let weights = exponential_weights(sample.len(), &mut rng);
        let phi = bootstrap_distribution(sample, &weights)?;
        out.push(parametric_identified_set(&phi, grid, u, family, thetas, sigma)?);
    }
    Ok(out)
}

/// Bayesian-bootstrap copies of a moment interval at row tolerance
/// `sigma`; same reweighting and seeding scheme as
/// [`bayesian_bootstrap_masks`].
pub fn bayesian_bootstrap_intervals(
    sample: &BidSample,
    grid: &SupportGrid,
    u: &UtilityKernel,
    f: impl Fn(f64) -> f64,
    sigma: f64,
    draws: usize,
    seed: u64,
) -> Result<Vec<MomentBounds>, InferenceError> {
    if draws == 0 {
        return Err(InferenceError::NoDraws);
    }
    let mut out = Vec::with_capacity(draws);
    for d in 0..draws {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(d as u64);
        let weights = exponential_weights(sample.len(), &mut rng);
        let phi = bootstrap_distribution(sample, &weights)?;
        out.push(moment_bounds_cv(&phi, grid, u, &f, sigma)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two-player grid with values {0,1,2} and bids {0,1}.
    fn tiny_grid() -> SupportGrid {
        SupportGrid::new(2, vec![0.0, 1.0, 2.0], vec![0.0, 1.0]).unwrap()
    }

    /// Mixed sample: half the observations at (0,0), half at (1,1).
    fn tiny_sample(n_obs: usize) -> BidSample {
        let grid = tiny_grid();
        let profiles = (0..n_obs)
            .map(|t| if t % 2 == 0 { vec![0, 0] } else { vec![1, 1] })
            .collect();
        BidSample::new(&grid, profiles, None).unwrap()
    }

    /// Inverse-CDF sampler over an explicit support, for test data.
    fn draw_sample(
        grid: &SupportGrid,
        support: &[(Vec<usize>, f64)],
        n_obs: usize,
        seed: u64,
    ) -> BidSample {
        let mut cum = Vec::with_capacity(support.len());
        let mut acc = 0.0;
        for (_, p) in support {
            acc += p;
            cum.push(acc);
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut profiles = Vec::with_capacity(n_obs);
        for _ in 0..n_obs {
            let u: f64 = rng.gen();
            let k = cum.partition_point(|&c| c <= u).min(support.len() - 1);
            profiles.push(support[k].0.clone());
        }
        BidSample::new(grid, profiles, Some(seed)).unwrap()
    }

    #[test]
    fn hoeffding_formulas_match_closed_forms() {
        let s = hoeffding_tolerances(
            20.0,
            2,
            21,
            21,
            1,
            0.1,
            10_000,
            ToleranceMode::NonparamMoment,
        )
        .unwrap();
        let sigma = 2.0 * 20.0 * ((4.0 * 2.0 * 441.0 / 0.1_f64).ln() / 1e4).sqrt();
        let epsilon = 2.0 * 20.0 * ((4.0 / 0.1_f64).ln() / 1e4).sqrt();
        assert!((s.sigma - sigma).abs() < 1e-15);
        assert!((s.epsilon - epsilon).abs() < 1e-15);
        assert!((s.sigma - 1.2944).abs() < 1e-3);
        assert!((s.epsilon - 0.7683).abs() < 1e-3);
        assert_eq!(s.counts.moments, 2 * 21 * 21);

        let p = hoeffding_tolerances(20.0, 2, 21, 21, 500, 0.1, 10_000, ToleranceMode::Parametric)
            .unwrap();
        let expect = 2.0 * 20.0 * ((500.0 * (882.0 + 21.0) / 0.1_f64).ln() / 1e4).sqrt();
        assert!((p.sigma - expect).abs() < 1e-15);
        assert_eq!(p.epsilon, 0.0);
        assert_eq!(p.counts.moments, 882 + 21);
    }

    #[test]
    fn hoeffding_scaling_and_edges() {
        let base =
            hoeffding_tolerances(20.0, 2, 21, 21, 1, 0.1, 1000, ToleranceMode::NonparamMoment)
                .unwrap();
        let quad =
            hoeffding_tolerances(20.0, 2, 21, 21, 1, 0.1, 4000, ToleranceMode::NonparamMoment)
                .unwrap();
        assert!((base.sigma / quad.sigma - 2.0).abs() < 1e-12);
        assert!((base.epsilon / quad.epsilon - 2.0).abs() < 1e-12);

        let zero =
            hoeffding_tolerances(0.0, 2, 21, 21, 1, 0.1, 1000, ToleranceMode::NonparamMoment)
                .unwrap();
        assert_eq!(zero.sigma, 0.0);
        assert_eq!(zero.epsilon, 0.0);

        for bad in [0.0, 1.0, -0.2, f64::NAN] {
            assert!(hoeffding_tolerances(
                20.0,
                2,
                21,
                21,
                1,
                bad,
                1000,
                ToleranceMode::NonparamMoment
            )
            .is_err());
        }
        assert!(
            hoeffding_tolerances(20.0, 2, 21, 21, 1, 0.1, 0, ToleranceMode::NonparamMoment)
                .is_err()
        );

        // More grid points enlarge the parametric tolerance, slowly.
        let small =
            hoeffding_tolerances(20.0, 2, 21, 21, 10, 0.1, 1000, ToleranceMode::Parametric)
                .unwrap();
        let big =
            hoeffding_tolerances(20.0, 2, 21, 21, 1000, 0.1, 1000, ToleranceMode::Parametric)
                .unwrap();
        assert!(big.sigma > small.sigma);
        assert!(big.sigma < 2.0 * small.sigma);
    }

    #[test]
    fn bernstein_formulas_and_preconditions() {
        let s = bernstein_tolerances(20.0, 2, 21, 21, 500, 0.1, 10_000).unwrap();
        let log_term = (2.0 * 500.0 * 903.0 / 0.1_f64).ln();
        assert!((s.lambda - (2.0 * log_term).sqrt()).abs() < 1e-15);
        assert!((s.sigma - 14.0 * 20.0 * log_term / (3.0 * 9999.0)).abs() < 1e-15);
        assert!(bernstein_tolerances(20.0, 2, 21, 21, 500, 0.1, 1).is_err());
    }

    #[test]
    fn empirical_distribution_counts_profiles() {
        let grid = tiny_grid();
        let sample = BidSample::new(
            &grid,
            vec![vec![1, 1], vec![0, 0], vec![1, 1], vec![1, 1]],
            None,
        )
        .unwrap();
        let phi = empirical_distribution(&sample).unwrap();
        assert_eq!(phi.profiles(), &[vec![0, 0], vec![1, 1]]);
        assert_eq!(phi.probs(), &[0.25, 0.75]);
        assert_eq!(phi.origin(), DistributionOrigin::Empirical { n_obs: 4 });

        // Reordering the observations changes nothing.
        let permuted = BidSample::new(
            &grid,
            vec![vec![1, 1], vec![1, 1], vec![0, 0], vec![1, 1]],
            None,
        )
        .unwrap();
        let phi2 = empirical_distribution(&permuted).unwrap();
        assert_eq!(phi.profiles(), phi2.profiles());
        assert_eq!(phi.probs(), phi2.probs());

        let constant =
            BidSample::new(&grid, vec![vec![1, 0], vec![1, 0]], None).unwrap();
        let point = empirical_distribution(&constant).unwrap();
        assert_eq!(point.support_size(), 1);
        assert_eq!(point.prob(&[1, 0]), 1.0);
    }

    #[test]
    fn sample_validation() {
        let grid = tiny_grid();
        assert!(BidSample::new(&grid, vec![], None).is_err());
        assert!(BidSample::new(&grid, vec![vec![0]], None).is_err());
        assert!(BidSample::new(&grid, vec![vec![0, 5]], None).is_err());
        let s = BidSample::from_bids(&grid, &[vec![1.0, 0.0]], Some(7)).unwrap();
        assert_eq!(s.profile(0), &[1, 0]);
        assert_eq!(s.seed(), Some(7));
    }

    #[test]
    fn sample_variance_matches_pairwise_form() {
        assert_eq!(sample_variance(&[3.0, 3.0, 3.0]), 0.0);
        assert_eq!(sample_variance(&[5.0]), 0.0);
        assert!((sample_variance(&[0.0, 2.0]) - 2.0).abs() < 1e-15);

        let xs: Vec<f64> = (0..40).map(|t| ((t * 2654435761_usize) % 97) as f64 / 9.7).collect();
        let n = xs.len() as f64;
        let mut pairwise = 0.0;
        for t in 0..xs.len() {
            for t2 in (t + 1)..xs.len() {
                pairwise += (xs[t] - xs[t2]) * (xs[t] - xs[t2]);
            }
        }
        pairwise /= n * (n - 1.0);
        assert!((sample_variance(&xs) - pairwise).abs() < 1e-10);

        let mut reordered = xs.clone();
        reordered.reverse();
        assert!((sample_variance(&xs) - sample_variance(&reordered)).abs() < 1e-12);

        // The grouped form used for penalty rows agrees with the flat form.
        let per = [1.5, -0.5, 4.0];
        let counts = [3.0, 5.0, 2.0];
        let mut flat = Vec::new();
        for (v, c) in per.iter().zip(&counts) {
            for _ in 0..*c as usize {
                flat.push(*v);
            }
        }
        assert!(
            (variance_from_counts(&per, &counts, flat.len()) - sample_variance(&flat)).abs()
                < 1e-12
        );
    }

    #[test]
    fn constant_moment_interval_is_epsilon_wide() {
        let grid = tiny_grid();
        let u = UtilityKernel::first_price();
        let sample = tiny_sample(10);
        let out = nonparam_moment_interval(&sample, &grid, &u, |_| 1.75, 0.1).unwrap();
        let interval = out.interval.unwrap();
        assert!((interval.lower - (1.75 - out.schedule.epsilon)).abs() < 1e-9);
        assert!((interval.upper - (1.75 + out.schedule.epsilon)).abs() < 1e-9);
    }

    #[test]
    fn degenerate_sample_interval_contains_population() {
        let grid = tiny_grid();
        let u = UtilityKernel::first_price();
        // The sample realizes its generating distribution exactly, so the
        // population interval must sit inside the widened one, even at a
        // near-one confidence parameter.
        let sample = tiny_sample(100);
        let phi = empirical_distribution(&sample).unwrap();
        let pop = moment_bounds_cv(&phi, &grid, &u, |v| v, 0.0).unwrap().interval().unwrap();
        let est = nonparam_moment_interval(&sample, &grid, &u, |v| v, 0.999).unwrap();
        assert!(est.interval.unwrap().contains_interval(&pop));
    }

    #[test]
    fn moment_range_is_enforced() {
        let grid = tiny_grid();
        let u = UtilityKernel::first_price();
        let sample = tiny_sample(10);
        let err = nonparam_moment_interval(&sample, &grid, &u, |v| v * 10.0, 0.1);
        assert!(matches!(err, Err(InferenceError::MomentOutOfRange { .. })));
    }

    #[test]
    fn coverage_of_population_interval() {
        // 100 replications at N=1000: the widened interval must cover the
        // population one in at least 90 (the schedule targets 90 directly).
        let grid = tiny_grid();
        let u = UtilityKernel::first_price();
        let support = vec![(vec![0, 0], 0.5), (vec![1, 1], 0.5)];
        let phi = BidDistribution::new(
            &grid,
            support.clone(),
            DistributionOrigin::Exact,
        )
        .unwrap();
        let pop = moment_bounds_cv(&phi, &grid, &u, |v| v, 0.0).unwrap().interval().unwrap();

        let mut covered = 0;
        for rep in 0..100 {
            let sample = draw_sample(&grid, &support, 1000, 9000 + rep);
            let est = nonparam_moment_interval(&sample, &grid, &u, |v| v, 0.1).unwrap();
            if est.interval.map(|i| i.contains_interval(&pop)).unwrap_or(false) {
                covered += 1;
            }
        }
        assert!(covered >= 90, "covered only {covered}/100");
    }

    #[test]
    fn interval_close_to_population_at_large_n() {
        let grid = tiny_grid();
        let u = UtilityKernel::first_price();
        let support = vec![(vec![0, 0], 0.5), (vec![1, 1], 0.5)];
        let phi =
            BidDistribution::new(&grid, support.clone(), DistributionOrigin::Exact).unwrap();
        let pop = moment_bounds_cv(&phi, &grid, &u, |v| v, 0.0).unwrap().interval().unwrap();
        let sample = draw_sample(&grid, &support, 100_000, 42);
        let est = nonparam_moment_interval(&sample, &grid, &u, |v| v, 0.1).unwrap();
        let interval = est.interval.unwrap();
        assert!(interval.contains_interval(&pop));
        assert!((interval.lower - pop.lower).abs() < 0.15);
        assert!((interval.upper - pop.upper).abs() < 0.15);
    }

    #[test]
    fn hoeffding_set_composition_and_delta_monotonicity() {
        let grid = tiny_grid();
        let u = UtilityKernel::first_price();
        let sample = tiny_sample(200);
        let family = Family::binomial(2.0);
        let thetas = ThetaGrid::default_for(&family);

        let (set, schedule) =
            parametric_hoeffding_set(&sample, &grid, &u, &family, &thetas, 0.1).unwrap();
        assert_eq!(set.row_tolerance, schedule.sigma);
        let phi = empirical_distribution(&sample).unwrap();
        let direct =
            parametric_identified_set(&phi, &grid, &u, &family, &thetas, schedule.sigma)
                .unwrap();
        assert_eq!(set.mask().unwrap().included, direct.mask().unwrap().included);

        // Smaller delta means a larger tolerance and never a smaller set.
        let (wide, _) =
            parametric_hoeffding_set(&sample, &grid, &u, &family, &thetas, 0.01).unwrap();
        assert!(set.mask().unwrap().subset_of(wide.mask().unwrap()));
    }

    #[test]
    fn bernstein_reduces_to_plain_on_degenerate_sample() {
        // All observations identical: every per-observation row value is
        // constant, all penalties vanish, and the criterion is the plain
        // minimax check.
        let grid = tiny_grid();
        let u = UtilityKernel::first_price();
        let sample = BidSample::new(&grid, vec![vec![0, 0]; 50], None).unwrap();
        let family = Family::binomial(2.0);
        let thetas = ThetaGrid::default_for(&family);

        let report =
            bernstein_set(&sample, &grid, &u, &family, &thetas, 0.1, CandidateStrategy::Plain)
                .unwrap();
        let phi = empirical_distribution(&sample).unwrap();
        let bce = build_bce_cv(&phi, &grid, &u).unwrap();
        let profile = parametric_minimax_profile(&bce, &family, &thetas, grid.values()).unwrap();
        let mask = report.set.mask().unwrap();
        for (ti, &q) in profile.iter().enumerate() {
            assert!((mask.minimax[ti] - q).abs() < 1e-9);
            assert_eq!(mask.included[ti], q <= report.schedule.sigma + FEASIBILITY_TOL);
        }
        assert!(!report.set.notes.is_empty());
    }

    #[test]
    fn bernstein_witnesses_recheck() {
        let grid = tiny_grid();
        let u = UtilityKernel::first_price();
        let sample = tiny_sample(120);
        let family = Family::binomial(2.0);
        let thetas = ThetaGrid::default_for(&family);
        let report = bernstein_set(
            &sample,
            &grid,
            &u,
            &family,
            &thetas,
            0.1,
            CandidateStrategy::default(),
        )
        .unwrap();
        assert!(!report.witnesses.is_empty());
        for w in &report.witnesses {
            let val = bernstein_penalized_value(
                &sample,
                &grid,
                &u,
                &family,
                &thetas.points()[w.theta_index],
                0.1,
                thetas.len(),
                &w.x,
            )
            .unwrap();
            assert!((val - w.penalized_value).abs() < 1e-9);
            assert!(val <= report.schedule.sigma + FEASIBILITY_TOL);
        }
        // Witness indices are exactly the included points.
        let mask = report.set.mask().unwrap();
        let witnessed: Vec<usize> = report.witnesses.iter().map(|w| w.theta_index).collect();
        let included: Vec<usize> =
            (0..thetas.len()).filter(|&ti| mask.included[ti]).collect();
        assert_eq!(witnessed, included);
    }

    #[test]
    fn bernstein_within_hoeffding_at_large_n() {
        // Exact 70/30 counts at N=10000 on a one-level bid grid: with
        // variances far below the worst case, the penalized tolerance is
        // tighter than the union-bound one on the same data.
        let grid = SupportGrid::new(2, vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let u = UtilityKernel::first_price();
        let mut profiles = vec![vec![0usize, 0usize]; 7000];
        profiles.extend(vec![vec![1usize, 1usize]; 3000]);
        let sample = BidSample::new(&grid, profiles, None).unwrap();
        let family = Family::binomial(1.0);
        let thetas = ThetaGrid::default_for(&family);

        let bern = bernstein_set(
            &sample,
            &grid,
            &u,
            &family,
            &thetas,
            0.1,
            CandidateStrategy::default(),
        )
        .unwrap();
        let (hoef, _) =
            parametric_hoeffding_set(&sample, &grid, &u, &family, &thetas, 0.1).unwrap();
        assert!(!bern.set.is_empty());
        assert!(bern.set.mask().unwrap().subset_of(hoef.mask().unwrap()));

        // Delta monotonicity for the penalized set on the same sample.
        let wider = bernstein_set(
            &sample,
            &grid,
            &u,
            &family,
            &thetas,
            0.01,
            CandidateStrategy::default(),
        )
        .unwrap();
        assert!(bern.set.mask().unwrap().subset_of(wider.set.mask().unwrap()));
    }

    #[test]
    fn subsampling_cutoff_zero_when_everything_fits() {
        // A point-mass sample at the all-zero profile is consistent with
        // every parameter at zero tolerance, on every subsample.
        let grid = SupportGrid::new(2, vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let u = UtilityKernel::first_price();
        let sample = BidSample::new(&grid, vec![vec![0, 0]; 40], None).unwrap();
        let family = Family::binomial(1.0);
        let thetas = ThetaGrid::default_for(&family);
        let config = SubsampleConfig { k: 12, seed: 3, ..SubsampleConfig::default() };
        let (set, stat) =
            subsampling_confidence_set(&sample, &grid, &u, &family, &thetas, 0.05, &config)
                .unwrap();
        // The minimax of a feasible system is zero up to solver noise.
        assert!(stat.tau_plus >= 0.0 && stat.tau_plus <= 1e-12, "tau = {}", stat.tau_plus);
        assert!(stat.c_values.iter().all(|&c| c.abs() <= 1e-8));
        assert_eq!(set.mask().unwrap().count_included(), thetas.len());
        assert!(stat.warnings.is_empty());
    }

    #[test]
    fn cutoff_quantile_floors_at_zero() {
        // Exactly zero statistics give an exactly zero cutoff, and negative
        // quantiles are floored.
        let zeros = vec![0.0; 12];
        assert_eq!(upper_quantile(&zeros, 0.05).max(0.0), 0.0);
        let negs = vec![-3.0, -1.0, -0.5];
        assert_eq!(upper_quantile(&negs, 0.05).max(0.0), 0.0);
        // The rank is the smallest order statistic covering 1 - alpha.
        let c = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(upper_quantile(&c, 0.25), 3.0);
        assert_eq!(upper_quantile(&c, 0.24), 4.0);
        assert_eq!(upper_quantile(&c, 0.95), 1.0);
    }

    #[test]
    fn subsampling_validation_and_warnings() {
        let grid = tiny_grid();
        let u = UtilityKernel::first_price();
        let sample = tiny_sample(40);
        let family = Family::binomial(2.0);
        let thetas = ThetaGrid::default_for(&family);

        let bad_alpha = subsampling_confidence_set(
            &sample,
            &grid,
            &u,
            &family,
            &thetas,
            1.0,
            &SubsampleConfig::default(),
        );
        assert!(matches!(bad_alpha, Err(InferenceError::BadLevel(_))));

        let too_big = SubsampleConfig { s_override: Some(40), ..SubsampleConfig::default() };
        let err = subsampling_confidence_set(&sample, &grid, &u, &family, &thetas, 0.05, &too_big);
        assert!(matches!(err, Err(InferenceError::BadSubsampleSize { .. })));

        let few = SubsampleConfig { k: 5, seed: 1, ..SubsampleConfig::default() };
        let (_, stat) =
            subsampling_confidence_set(&sample, &grid, &u, &family, &thetas, 0.05, &few).unwrap();
        assert!(stat.warnings.iter().any(|w| w.contains("5 subsamples")));

        // An explicit preliminary set must be a nonempty mask.
        let empty = IdentifiedSet {
            variant: SetVariant::Mask(GridMask {
                included: vec![false; thetas.len()],
                minimax: vec![1.0; thetas.len()],
            }),
            row_tolerance: 0.0,
            objective_slack: 0.0,
            feasibility_tol: FEASIBILITY_TOL,
            notes: vec![],
        };
        let err = subsample_cutoff(
            &sample,
            &grid,
            &u,
            &family,
            &thetas,
            &empty,
            0.05,
            &SubsampleConfig::default(),
        );
        assert!(matches!(err, Err(InferenceError::EmptyThetaSet)));
    }

    #[test]
    fn subsampling_reproducible_and_order_invariant() {
        let grid = tiny_grid();
        let u = UtilityKernel::first_price();
        let support = vec![(vec![0, 0], 0.5), (vec![1, 1], 0.5)];
        let sample = draw_sample(&grid, &support, 120, 11);
        let family = Family::binomial(2.0);
        let thetas = ThetaGrid::default_for(&family);
        let config = SubsampleConfig { k: 15, seed: 5, ..SubsampleConfig::default() };

        let (_, a) =
            subsampling_confidence_set(&sample, &grid, &u, &family, &thetas, 0.05, &config)
                .unwrap();
        let (_, b) =
            subsampling_confidence_set(&sample, &grid, &u, &family, &thetas, 0.05, &config)
                .unwrap();
        assert_eq!(a.c_values, b.c_values);
        assert_eq!(a.tau_plus, b.tau_plus);

        let other = SubsampleConfig { seed: 6, ..config };
        let (_, c) =
            subsampling_confidence_set(&sample, &grid, &u, &family, &thetas, 0.05, &other)
                .unwrap();
        assert_ne!(a.c_values, c.c_values);
    }

    #[test]
    fn subsampling_contains_zero_tolerance_set_and_shrinks_with_n() {
        let grid = tiny_grid();
        let u = UtilityKernel::first_price();
        let support = vec![(vec![0, 0], 0.5), (vec![1, 1], 0.5)];
        let family = Family::binomial(2.0);
        let thetas = ThetaGrid::default_for(&family);
        let config = SubsampleConfig { k: 20, seed: 17, ..SubsampleConfig::default() };

        let mut taus = Vec::new();
        for n_obs in [200, 800] {
            let sample = draw_sample(&grid, &support, n_obs, 23);
            let (set, stat) =
                subsampling_confidence_set(&sample, &grid, &u, &family, &thetas, 0.05, &config)
                    .unwrap();

            let phi = empirical_distribution(&sample).unwrap();
            let zero_tol =
                parametric_identified_set(&phi, &grid, &u, &family, &thetas, 0.0).unwrap();
            assert!(zero_tol.mask().unwrap().subset_of(set.mask().unwrap()));
            taus.push(stat.tau_plus);
        }
        assert!(taus[0] > 0.0, "cutoff should be positive under sampling noise");
        assert!(taus[1] > 0.0);
        assert!(taus[1] < taus[0], "cutoff should shrink as N grows: {taus:?}");
    }

    #[test]
    fn bootstrap_weights_and_degenerate_draws() {
        let grid = tiny_grid();
        let sample = tiny_sample(8);
        let phi = empirical_distribution(&sample).unwrap();
        let equal = bootstrap_distribution(&sample, &[2.5; 8]).unwrap();
        assert_eq!(phi.profiles(), equal.profiles());
        for (a, b) in phi.probs().iter().zip(equal.probs()) {
            assert!((a - b).abs() < 1e-15);
        }

        assert!(bootstrap_distribution(&sample, &[1.0; 7]).is_err());
        assert!(bootstrap_distribution(&sample, &[0.0; 8]).is_err());
        let mut bad = vec![1.0; 8];
        bad[3] = -0.5;
        assert!(bootstrap_distribution(&sample, &bad).is_err());

        // A single-profile sample is invariant under reweighting.
        let u = UtilityKernel::first_price();
        let constant = BidSample::new(&grid, vec![vec![1, 1]; 6], None).unwrap();
        let family = Family::binomial(2.0);
        let thetas = ThetaGrid::default_for(&family);
        let masks =
            bayesian_bootstrap_masks(&constant, &grid, &u, &family, &thetas, 0.0, 3, 99)
                .unwrap();
        for m in &masks[1..] {
            assert_eq!(m.mask().unwrap().included, masks[0].mask().unwrap().included);
        }
        assert!(matches!(
            bayesian_bootstrap_masks(&constant, &grid, &u, &family, &thetas, 0.0, 0, 99),
            Err(InferenceError::NoDraws)
        ));
    }

    #[test]
    fn bootstrap_intervals_cover_population_and_reproduce() {
        let grid = tiny_grid();
        let u = UtilityKernel::first_price();
        let support = vec![(vec![0, 0], 0.5), (vec![1, 1], 0.5)];
        let phi =
            BidDistribution::new(&grid, support.clone(), DistributionOrigin::Exact).unwrap();
        let pop = moment_bounds_cv(&phi, &grid, &u, |v| v, 0.0).unwrap().interval().unwrap();
        let sample = draw_sample(&grid, &support, 1000, 77);
        let sigma = hoeffding_tolerances(
            grid.h(),
            grid.n(),
            grid.bids().len(),
            grid.values().len(),
            1,
            0.1,
            sample.len(),
            ToleranceMode::NonparamMoment,
        )
        .unwrap()
        .sigma;

        let draws =
            bayesian_bootstrap_intervals(&sample, &grid, &u, |v| v, sigma, 40, 2024).unwrap();
        let covered = draws
            .iter()
            .filter(|b| b.interval().map(|i| i.contains_interval(&pop)).unwrap_or(false))
            .count();
        assert!(covered >= 36, "covered only {covered}/40");

        let again =
            bayesian_bootstrap_intervals(&sample, &grid, &u, |v| v, sigma, 40, 2024).unwrap();
        for (a, b) in draws.iter().zip(&again) {
            assert_eq!(a.interval().map(|i| (i.lower, i.upper)), b.interval().map(|i| (i.lower, i.upper)));
        }
    }
}
