//! Identification queries: membership, moment bounds, support functions,
//! symmetry tests, covariate systems, and counterfactual bounds.
//!
//! Every query runs the same two-stage recipe. Stage one computes the
//! minimax value of the constraint system, the smallest uniform row
//! relaxation that admits a feasible kernel; the set is declared empty when
//! that value exceeds the requested tolerance (plus the solver feasibility
//! margin). Stage two, for interval queries, optimizes the requested
//! functional over the tolerance-relaxed system. The working relaxation is
//! `max(σ, minimax)` so stage two is never vacuously infeasible once stage
//! one passes.

use serde::Serialize;

use crate::lp::{self, LpError, LpStatus, Sense, FEASIBILITY_TOL};
use crate::model::{MetricFn, SupportGrid, UtilityKernel};

use super::build::{build_bce_cv, build_bce_ipv, build_bce_joint, BceSystem};
use super::system::{ConstraintSystem, RowLabel};
use super::types::{
    BidDistribution, ConditionalKernel, Interval, SharpError, ValueDistribution,
};

/// Outcome of a membership query: whether the candidate distribution is in
/// the identified set at the requested tolerance, the minimax value (the
/// smallest tolerance at which it would be included), and a feasible kernel
/// certificate when included.
#[derive(Debug, Clone, Serialize)]
pub struct Membership {
    pub included: bool,
    pub minimax: f64,
    pub tolerance: f64,
    pub certificate: Option<ConditionalKernel>,
}

/// Outcome of a moment-bound query. `Empty` is a refutation: no kernel is
/// feasible at the requested tolerance, and `min_tolerance` reports the
/// smallest uniform relaxation that would restore feasibility.
#[derive(Debug, Clone, Serialize)]
pub enum MomentBounds {
    Interval { interval: Interval, minimax: f64 },
    Empty { min_tolerance: f64 },
}

impl MomentBounds {
    pub fn interval(&self) -> Option<Interval> {
        match self {
            Self::Interval { interval, .. } => Some(*interval),
            Self::Empty { .. } => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Self::Empty { .. })
    }
}

/// Counterfactual welfare bounds. `interval` is `None` when the coupled
/// system is infeasible at the requested tolerance; `minimax` is its
/// smallest feasible relaxation either way.
#[derive(Debug, Clone, Serialize)]
pub struct CounterfactualBounds {
    pub interval: Option<Interval>,
    pub minimax: f64,
}

impl CounterfactualBounds {
    pub fn is_empty(&self) -> bool {
        self.interval.is_none()
    }
}

/// Verdict of the symmetric-model consistency test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SymmetryVerdict {
    Consistent { minimax: f64 },
    Refuted { minimax: f64 },
}

impl SymmetryVerdict {
    pub fn is_refuted(&self) -> bool {
        matches!(self, Self::Refuted { .. })
    }

    pub fn minimax(&self) -> f64 {
        match *self {
            Self::Consistent { minimax } | Self::Refuted { minimax } => minimax,
        }
    }
}

fn check_tolerance(tol: f64) -> Result<(), SharpError> {
    if !tol.is_finite() || tol < 0.0 {
        return Err(SharpError::Dimension(format!("tolerance must be finite and nonnegative, got {tol}")));
    }
    Ok(())
}

fn make_interval(lower: f64, upper: f64) -> Result<Interval, SharpError> {
    if lower > upper && lower - upper < 1e-7 {
        // Two independent solves can cross by solver noise; collapse.
        let mid = 0.5 * (lower + upper);
        return Ok(Interval::new(mid, mid)?);
    }
    Ok(Interval::new(lower, upper)?)
}

fn solved_objective(
    sys: &ConstraintSystem,
    objective: &[(usize, f64)],
    sense: Sense,
    sigma: f64,
) -> Result<f64, SharpError> {
    let sol = lp::solve(&sys.objective_lp(objective, sense, sigma))?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective),
        other => Err(SharpError::Lp(LpError::Numerical(format!(
            "objective stage reported {other:?} after a feasible minimax stage"
        )))),
    }
}

/// Two-stage bound computation shared by every interval query.
fn bounded_moments(
    sys: &ConstraintSystem,
    objective: &[(usize, f64)],
    sigma: f64,
) -> Result<MomentBounds, SharpError> {
    let minimax = lp::minimax_value(sys)?;
    if minimax > sigma + FEASIBILITY_TOL {
        return Ok(MomentBounds::Empty { min_tolerance: minimax });
    }
    let relax = sigma.max(minimax);
    let lower = solved_objective(sys, objective, Sense::Minimize, relax)?;
    let upper = solved_objective(sys, objective, Sense::Maximize, relax)?;
    Ok(MomentBounds::Interval { interval: make_interval(lower, upper)?, minimax })
}

/// Membership of a mass vector in the identified set of `bce`: feasibility
/// of the system with value-consistency rows pinning the implied marginal
/// to `pi`, all rows relaxed by `tol`.
pub fn membership(bce: &BceSystem, pi: &[f64], tol: f64) -> Result<Membership, SharpError> {
    check_tolerance(tol)?;
    let sys = bce.with_value_consistency(pi)?;
    let sol = lp::minimax_solution(&sys)?;
    let included = sol.objective <= tol + FEASIBILITY_TOL;
    Ok(Membership {
        included,
        minimax: sol.objective,
        tolerance: tol,
        certificate: included.then(|| bce.kernel_from_point(&sol.point)),
    })
}

/// Membership of a common-value distribution given observed bid play.
pub fn membership_cv(
    phi: &BidDistribution,
    grid: &SupportGrid,
    u: &UtilityKernel,
    pi: &ValueDistribution,
    tol: f64,
) -> Result<Membership, SharpError> {
    let mass = pi.as_common()?;
    let bce = build_bce_cv(phi, grid, u)?;
    membership(&bce, mass, tol)
}

/// Sharp bounds on `Σ_v f(v)·π(v)` over the identified set of `bce`, with
/// `f` given as coefficients on the value grid.
pub fn moment_bounds(bce: &BceSystem, f: &[f64], sigma: f64) -> Result<MomentBounds, SharpError> {
    check_tolerance(sigma)?;
    let objective = bce.moment_objective(f)?;
    bounded_moments(bce.system(), &objective, sigma)
}

/// Sharp bounds on the moment `E_π[f(v)]` under common values.
pub fn moment_bounds_cv(
    phi: &BidDistribution,
    grid: &SupportGrid,
    u: &UtilityKernel,
    f: impl Fn(f64) -> f64,
    sigma: f64,
) -> Result<MomentBounds, SharpError> {
    let bce = build_bce_cv(phi, grid, u)?;
    let fv: Vec<f64> = grid.values().iter().map(|&v| f(v)).collect();
    moment_bounds(&bce, &fv, sigma)
}

/// Support function `h(z) = sup { Σ_v z(v)·π(v) : π in the identified
/// set }`. Returns negative infinity when the set is empty.
pub fn support_function(
    phi: &BidDistribution,
    grid: &SupportGrid,
    u: &UtilityKernel,
    z: impl Fn(f64) -> f64,
    sigma: f64,
) -> Result<f64, SharpError> {
    match moment_bounds_cv(phi, grid, u, z, sigma)? {
        MomentBounds::Interval { interval, .. } => Ok(interval.upper),
        MomentBounds::Empty { .. } => Ok(f64::NEG_INFINITY),
    }
}

/// The independent-private-value system plus coupling rows forcing every
/// player's implied value marginal to equal player 0's.
fn symmetric_ipv_system(
    phi: &BidDistribution,
    grid: &SupportGrid,
    u: &UtilityKernel,
) -> Result<(BceSystem, ConstraintSystem), SharpError> {
    let bce = build_bce_ipv(phi, grid, u)?;
    let mut sys = bce.system().clone();
    let s = phi.support_size();
    let nv = grid.values().len();
    for i in 1..grid.n() {
        for v in 0..nv {
            let mut coeffs = Vec::with_capacity(2 * s);
            for (p, &w) in phi.probs().iter().enumerate() {
                coeffs.push((p * nv + v, -w));
            }
            for (p, &w) in phi.probs().iter().enumerate() {
                coeffs.push(((i * s + p) * nv + v, w));
            }
            sys.push_equality(
                |positive| RowLabel::SymmetryCoupling { player: i, v, positive },
                coeffs.clone(),
                0.0,
            );
        }
    }
    Ok((bce, sys))
}

/// Sharp bounds on `E_ρ[f(v)]` under symmetric independent private values,
/// where `ρ` is the common per-player value marginal. An `Empty` result
/// refutes the symmetric model at tolerance `sigma`.
pub fn ipv_symmetric_moment_bounds(
    phi: &BidDistribution,
    grid: &SupportGrid,
    u: &UtilityKernel,
    f: impl Fn(f64) -> f64,
    sigma: f64,
) -> Result<MomentBounds, SharpError> {
    check_tolerance(sigma)?;
    let (bce, sys) = symmetric_ipv_system(phi, grid, u)?;
    let fv: Vec<f64> = grid.values().iter().map(|&v| f(v)).collect();
    let objective = bce.moment_objective(&fv)?;
    bounded_moments(&sys, &objective, sigma)
}

/// Consistency test for symmetric independent private values: refuted
/// exactly when the coupled system is infeasible at tolerance `tol`.
pub fn ipv_symmetry_test(
    phi: &BidDistribution,
    grid: &SupportGrid,
    u: &UtilityKernel,
    tol: f64,
) -> Result<SymmetryVerdict, SharpError> {
    check_tolerance(tol)?;
    let (_, sys) = symmetric_ipv_system(phi, grid, u)?;
    let minimax = lp::minimax_value(&sys)?;
    Ok(if minimax <= tol + FEASIBILITY_TOL {
        SymmetryVerdict::Consistent { minimax }
    } else {
        SymmetryVerdict::Refuted { minimax }
    })
}

/// Membership of a linear-model coefficient vector given bid play observed
/// per covariate cell: one coupled program holding a common-value system
/// for every cell plus rows forcing the implied mean value in cell `x₀` to
/// equal `x₀'β`. The certificate is omitted (kernels live cell by cell).
pub fn covariate_beta_membership(
    beta: &[f64],
    cells: &[(Vec<f64>, BidDistribution)],
    grid: &SupportGrid,
    u: &UtilityKernel,
    tol: f64,
) -> Result<Membership, SharpError> {
    check_tolerance(tol)?;
    if cells.is_empty() {
        return Err(SharpError::EmptySupport);
    }
    let nv = grid.values().len();
    let systems: Vec<BceSystem> = cells
        .iter()
        .map(|(x0, phi)| {
            if x0.len() != beta.len() {
                return Err(SharpError::Dimension(format!(
                    "covariate vector has {} entries, coefficient vector has {}",
                    x0.len(),
                    beta.len()
                )));
            }
            build_bce_cv(phi, grid, u)
        })
        .collect::<Result<_, _>>()?;
    let total: usize = systems.iter().map(|b| b.system().num_vars()).sum();
    let mut sys = ConstraintSystem::new(total);
    let mut offset = 0usize;
    for (cell, ((x0, phi), bce)) in cells.iter().zip(&systems).enumerate() {
        sys.absorb(bce.system(), offset);
        let target: f64 = x0.iter().zip(beta).map(|(a, b)| a * b).sum();
        // x₀'β − Σ_v v · Σ_p φ(p) x(v|p) = 0 on this cell's variables.
        let mut coeffs = Vec::new();
        for (p, &w) in phi.probs().iter().enumerate() {
            for (v, &level) in grid.values().iter().enumerate() {
                let c = -level * w;
                if c != 0.0 {
                    coeffs.push((offset + p * nv + v, c));
                }
            }
        }
        sys.push_equality(|positive| RowLabel::CovariateLink { cell, positive }, coeffs.clone(), target);
        offset += bce.system().num_vars();
    }
    let sol = lp::minimax_solution(&sys)?;
    let included = sol.objective <= tol + FEASIBILITY_TOL;
    Ok(Membership { included, minimax: sol.objective, tolerance: tol, certificate: None })
}

/// Sharp bounds on expected welfare `E[W(v, b̃)]` in a counterfactual
/// auction: one coupled program over the current-auction kernel `x(v|b)`
/// (obedient under `u`, conditioned on `phi`) and the counterfactual joint
/// mass `ψ̃(v, b̃)` (obedient under `u_alt`), linked so both induce the same
/// value marginal. A constant metric short-circuits to a point interval
/// once the coupling is known feasible.
pub fn counterfactual_bounds(
    phi: &BidDistribution,
    grid: &SupportGrid,
    u: &UtilityKernel,
    u_alt: &UtilityKernel,
    w: &MetricFn,
    sigma: f64,
) -> Result<CounterfactualBounds, SharpError> {
    check_tolerance(sigma)?;
    let current = build_bce_cv(phi, grid, u)?;
    let alt = build_bce_joint(grid, u_alt);
    let nx = current.system().num_vars();
    let nv = grid.values().len();
    let per = grid.num_profiles();
    let mut sys = ConstraintSystem::new(nx + alt.system().num_vars());
    sys.absorb(current.system(), 0);
    sys.absorb(alt.system(), nx);
    let mass = current
        .layout
        .value_mass_coeffs()
        .expect("common-value layout has a value marginal");
    for (v, cs) in mass.iter().enumerate() {
        // Σ_b ψ̃(v,b) − Σ_p φ(p) x(v|p) = 0.
        let mut coeffs: Vec<(usize, f64)> = cs.iter().map(|&(var, w)| (var, -w)).collect();
        for b in 0..per {
            coeffs.push((nx + v * per + b, 1.0));
        }
        sys.push_equality(|positive| RowLabel::CounterfactualLink { v, positive }, coeffs.clone(), 0.0);
    }
    let minimax = lp::minimax_value(&sys)?;
    if minimax > sigma + FEASIBILITY_TOL {
        return Ok(CounterfactualBounds { interval: None, minimax });
    }
    // Metric table over (value level, counterfactual bid profile).
    let mut table = vec![0.0f64; nv * per];
    let mut profile = vec![0usize; grid.n()];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (v, &level) in grid.values().iter().enumerate() {
        for flat in 0..per {
            super::build::unflatten(flat, grid.bids().len(), &mut profile);
            let bids = grid.profile_bids(&profile);
            let val = w.eval(level, &bids);
            table[v * per + flat] = val;
            lo = lo.min(val);
            hi = hi.max(val);
        }
    }
    if lo == hi {
        // Σ ψ̃ = 1 structurally, so the objective is exactly the constant.
        return Ok(CounterfactualBounds { interval: Some(Interval::new(lo, hi)?), minimax });
    }
    let objective: Vec<(usize, f64)> = table
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c != 0.0)
        .map(|(k, &c)| (nx + k, c))
        .collect();
    let relax = sigma.max(minimax);
    let lower = solved_objective(&sys, &objective, Sense::Minimize, relax)?;
    let upper = solved_objective(&sys, &objective, Sense::Maximize, relax)?;
    Ok(CounterfactualBounds { interval: Some(make_interval(lower, upper)?), minimax })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sharp::build::winning_bid_constraints;

    fn tiny() -> (SupportGrid, BidDistribution, UtilityKernel) {
        let grid = SupportGrid::new(2, vec![0.0, 1.0, 2.0], vec![0.0, 1.0]).unwrap();
        let phi = BidDistribution::point_mass(&grid, vec![1, 1]).unwrap();
        (grid, phi, UtilityKernel::first_price())
    }

    #[test]
    fn membership_tiny_point_masses() {
        let (grid, phi, u) = tiny();
        let yes = membership_cv(&phi, &grid, &u, &ValueDistribution::point(3, 2).unwrap(), 0.0).unwrap();
        assert!(yes.included);
        assert!(yes.certificate.is_some());
        let no = membership_cv(&phi, &grid, &u, &ValueDistribution::point(3, 0).unwrap(), 0.0).unwrap();
        assert!(!no.included);
        assert!(no.minimax > 0.1);
        assert!(no.certificate.is_none());
        let boundary = membership_cv(&phi, &grid, &u, &ValueDistribution::point(3, 1).unwrap(), 0.0).unwrap();
        assert!(boundary.included);
    }

    #[test]
    fn membership_excluded_point_enters_at_its_minimax() {
        let (grid, phi, u) = tiny();
        let pi = ValueDistribution::point(3, 0).unwrap();
        let no = membership_cv(&phi, &grid, &u, &pi, 0.0).unwrap();
        let at = membership_cv(&phi, &grid, &u, &pi, no.minimax).unwrap();
        assert!(at.included);
    }

    #[test]
    fn moment_bounds_tiny_mean() {
        let (grid, phi, u) = tiny();
        let b = moment_bounds_cv(&phi, &grid, &u, |v| v, 0.0).unwrap();
        let interval = b.interval().unwrap();
        assert!((interval.lower - 1.0).abs() < 1e-6);
        assert!((interval.upper - 2.0).abs() < 1e-6);
    }

    #[test]
    fn moment_bounds_constant_metric() {
        let (grid, phi, u) = tiny();
        let b = moment_bounds_cv(&phi, &grid, &u, |_| 3.25, 0.0).unwrap();
        let interval = b.interval().unwrap();
        assert!((interval.lower - 3.25).abs() < 1e-9);
        assert!((interval.upper - 3.25).abs() < 1e-9);
    }

    #[test]
    fn moment_bounds_overbid_dominance_is_empty() {
        // Bidder 0 bids 2 against an opponent at 0: deviating down to 1
        // keeps the win and saves 1 regardless of the value, so no value
        // distribution rationalizes the play.
        let grid = SupportGrid::integer(2, 2).unwrap();
        let phi = BidDistribution::point_mass(&grid, vec![2, 0]).unwrap();
        let b = moment_bounds_cv(&phi, &grid, &UtilityKernel::first_price(), |v| v, 0.0).unwrap();
        match b {
            MomentBounds::Empty { min_tolerance } => assert!((min_tolerance - 1.0).abs() < 1e-6),
            MomentBounds::Interval { .. } => panic!("expected refutation"),
        }
        // At a tolerance above the minimax the interval reappears.
        let relaxed =
            moment_bounds_cv(&phi, &grid, &UtilityKernel::first_price(), |v| v, 1.01).unwrap();
        assert!(!relaxed.is_empty());
    }

    #[test]
    fn support_function_matches_bounds() {
        let (grid, phi, u) = tiny();
        let up = support_function(&phi, &grid, &u, |v| v, 0.0).unwrap();
        assert!((up - 2.0).abs() < 1e-6);
        let neg = support_function(&phi, &grid, &u, |v| -v, 0.0).unwrap();
        assert!((neg + 1.0).abs() < 1e-6);
        let zero = support_function(&phi, &grid, &u, |_| 0.0, 0.0).unwrap();
        assert!(zero.abs() < 1e-9);
    }

    #[test]
    fn symmetric_ipv_consistent_on_symmetric_play() {
        let grid = SupportGrid::new(2, vec![0.0, 2.0], vec![0.0, 1.0]).unwrap();
        let phi = BidDistribution::point_mass(&grid, vec![0, 0]).unwrap();
        let u = UtilityKernel::first_price();
        let verdict = ipv_symmetry_test(&phi, &grid, &u, 0.0).unwrap();
        assert!(!verdict.is_refuted());
        let b = ipv_symmetric_moment_bounds(&phi, &grid, &u, |v| v, 0.0).unwrap();
        let interval = b.interval().unwrap();
        assert!((interval.lower - 0.0).abs() < 1e-6);
        assert!((interval.upper - 2.0).abs() < 1e-6);
    }

    #[test]
    fn symmetric_ipv_refuted_on_dominant_asymmetric_play() {
        // Bidder 0 always bids 1, bidder 1 always bids 0, values in {0, 2}.
        // Obedience forces bidder 0's marginal onto v = 2 and caps bidder
        // 1's mass at 2, so a common marginal is impossible.
        let grid = SupportGrid::new(2, vec![0.0, 2.0], vec![0.0, 1.0]).unwrap();
        let phi = BidDistribution::point_mass(&grid, vec![1, 0]).unwrap();
        let u = UtilityKernel::first_price();
        let verdict = ipv_symmetry_test(&phi, &grid, &u, 0.0).unwrap();
        assert!(verdict.is_refuted());
        assert!((verdict.minimax() - 0.25).abs() < 1e-6);
        let b = ipv_symmetric_moment_bounds(&phi, &grid, &u, |v| v, 0.0).unwrap();
        assert!(b.is_empty());
        // The plain (asymmetric) system stays feasible.
        let bce = build_bce_ipv(&phi, &grid, &u).unwrap();
        assert!(lp::minimax_value(bce.system()).unwrap() <= FEASIBILITY_TOL);
    }

    #[test]
    fn covariate_single_cell_reduces_to_mean_interval() {
        let grid = SupportGrid::integer(2, 2).unwrap();
        let phi = BidDistribution::point_mass(&grid, vec![1, 1]).unwrap();
        let u = UtilityKernel::first_price();
        let cells = vec![(vec![1.0], phi.clone())];
        let expected = moment_bounds_cv(&phi, &grid, &u, |v| v, 0.0).unwrap().interval().unwrap();
        for (beta0, inside) in [(1.0, true), (1.5, true), (2.0, true), (0.5, false), (2.5, false)] {
            let m = covariate_beta_membership(&[beta0], &cells, &grid, &u, 0.0).unwrap();
            assert_eq!(m.included, inside, "beta0 = {beta0}");
            assert_eq!(expected.contains(beta0), inside);
        }
    }

    #[test]
    fn covariate_two_cells_couple_through_linearity() {
        let grid = SupportGrid::integer(2, 2).unwrap();
        let u = UtilityKernel::first_price();
        // Cell a (x₀ = [1, 0]): mean constrained to [1, 2].
        // Cell b (x₀ = [1, 1]): overbid ties force the mean to exactly 2.
        let cells = vec![
            (vec![1.0, 0.0], BidDistribution::point_mass(&grid, vec![1, 1]).unwrap()),
            (vec![1.0, 1.0], BidDistribution::point_mass(&grid, vec![2, 2]).unwrap()),
        ];
        for (beta, inside) in [
            (vec![1.0, 1.0], true),
            (vec![2.0, 0.0], true),
            (vec![1.5, 0.5], true),
            (vec![0.5, 1.5], false),
            (vec![1.0, 0.5], false),
        ] {
            let m = covariate_beta_membership(&beta, &cells, &grid, &u, 0.0).unwrap();
            assert_eq!(m.included, inside, "beta = {beta:?}");
        }
        let bad = covariate_beta_membership(&[1.0], &cells, &grid, &u, 0.0);
        assert!(bad.is_err());
    }

    #[test]
    fn counterfactual_constant_metric_is_point() {
        let (grid, phi, u) = tiny();
        let w = MetricFn::constant(4.5).unwrap();
        let b = counterfactual_bounds(&phi, &grid, &u, &UtilityKernel::second_price(), &w, 0.0).unwrap();
        let interval = b.interval.unwrap();
        assert_eq!(interval.lower, 4.5);
        assert_eq!(interval.upper, 4.5);
    }

    #[test]
    fn counterfactual_identity_revenue_contains_observed() {
        let (grid, phi, u) = tiny();
        let w = MetricFn::revenue(&u, &grid).unwrap();
        let b = counterfactual_bounds(&phi, &grid, &u, &u, &w, 0.0).unwrap();
        let interval = b.interval.unwrap();
        // The observed play (both bid 1) realizes revenue 1.
        assert!(interval.lower <= 1.0 + 1e-8);
        assert!(interval.upper >= 1.0 - 1e-8);
    }

    #[test]
    fn counterfactual_second_price_bounds_are_ordered() {
        let (grid, phi, u) = tiny();
        let alt = UtilityKernel::second_price();
        let w = MetricFn::revenue(&alt, &grid).unwrap();
        let b = counterfactual_bounds(&phi, &grid, &u, &alt, &w, 0.0).unwrap();
        let interval = b.interval.unwrap();
        assert!(interval.lower <= interval.upper);
        assert!(interval.lower >= 0.0 - 1e-8);
        assert!(interval.upper <= grid.h() + 1e-8);
    }

    #[test]
    fn winning_bid_interval_contains_full_bid_interval() {
        let (grid, phi, u) = tiny();
        let full = moment_bounds_cv(&phi, &grid, &u, |v| v, 0.0).unwrap().interval().unwrap();
        // Winning-bid cdf implied by the point mass at (1,1): max bid 1 a.s.
        let win = winning_bid_constraints(&[0.0, 1.0], &grid, &u).unwrap();
        let fv: Vec<f64> = grid.values().to_vec();
        let wide = moment_bounds(&win, &fv, 0.0).unwrap().interval().unwrap();
        assert!(wide.contains_interval(&full));
    }

    #[test]
    fn winning_bid_degenerate_cdf_feasible() {
        let grid = SupportGrid::new(2, vec![0.0, 2.0], vec![0.0, 1.0]).unwrap();
        let win = winning_bid_constraints(&[1.0, 1.0], &grid, &UtilityKernel::first_price()).unwrap();
        assert!(lp::minimax_value(win.system()).unwrap() <= FEASIBILITY_TOL);
    }

    #[test]
    fn tolerance_monotonicity_widens_moment_bounds() {
        let (grid, phi, u) = tiny();
        let tight = moment_bounds_cv(&phi, &grid, &u, |v| v, 0.0).unwrap().interval().unwrap();
        let loose = moment_bounds_cv(&phi, &grid, &u, |v| v, 0.3).unwrap().interval().unwrap();
        assert!(loose.contains_interval(&tight));
    }

    #[test]
    fn rejects_bad_tolerance() {
        let (grid, phi, u) = tiny();
        assert!(moment_bounds_cv(&phi, &grid, &u, |v| v, -0.1).is_err());
        assert!(moment_bounds_cv(&phi, &grid, &u, |v| v, f64::NAN).is_err());
    }
}
