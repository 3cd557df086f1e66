//! Quantile-based revenue bounds and the first-price bid inversion map.
//!
//! These are the closed-form counterparts to the linear-program queries:
//! bounds on the mean value that need only the distribution of the winning
//! bid, via an integral constraint linking the value quantile function to
//! the bid bound. Everything here is exact piecewise arithmetic on step
//! functions, so the comparisons against LP-based sharp bounds are free of
//! quadrature error.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::model::{ModelError, SupportGrid, UtilityKernel};
use crate::sharp::{moment_bounds_cv, BidDistribution, SharpError};

/// Errors from bound preconditions and step-function validation.
#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("quantile breakpoints must be strictly increasing in (0, 1] and end at 1")]
    BadBreakpoints,
    #[error("quantile values must be nondecreasing")]
    NonMonotone,
    #[error("quantile value {value} outside [0, {h}]")]
    ValueOutOfRange { value: f64, h: f64 },
    #[error("payoff bound must be finite and nonnegative, got {0}")]
    BadPayoffBound(f64),
    #[error("need at least two bidders, got {0}")]
    TooFewBidders(usize),
    #[error("expected revenue {r} must lie in [0, {h}]")]
    BadRevenue { r: f64, h: f64 },
    #[error("lipschitz constant must be positive, got {0}")]
    BadLipschitz(f64),
    #[error("bid density must be finite and positive, got {0}")]
    SingularDensity(f64),
    #[error("bid distribution is not an equilibrium outcome at zero tolerance")]
    NotRationalizable,
    #[error(transparent)]
    Sharp(#[from] SharpError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A nondecreasing step function on `(0, 1]` with values in `[0, h]`:
/// `f(y) = values[k]` for `y` in `(breaks[k-1], breaks[k]]` (with
/// `breaks[-1] = 0`). The last breakpoint is always one.
#[derive(Debug, Clone, Serialize)]
pub struct QuantileFn {
    h: f64,
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl QuantileFn {
    pub fn step(h: f64, breaks: Vec<f64>, values: Vec<f64>) -> Result<Self, BoundsError> {
        if !h.is_finite() || h < 0.0 {
            return Err(BoundsError::BadPayoffBound(h));
        }
        if breaks.is_empty()
            || breaks.len() != values.len()
            || breaks.iter().any(|b| !b.is_finite() || *b <= 0.0 || *b > 1.0)
            || breaks.windows(2).any(|w| w[0] >= w[1])
            || *breaks.last().unwrap() != 1.0
        {
            return Err(BoundsError::BadBreakpoints);
        }
        for &v in &values {
            if !v.is_finite() || v < 0.0 || v > h + 1e-12 {
                return Err(BoundsError::ValueOutOfRange { value: v, h });
            }
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(BoundsError::NonMonotone);
        }
        Ok(Self { h, breaks, values })
    }

    pub fn constant(h: f64, value: f64) -> Result<Self, BoundsError> {
        Self::step(h, vec![1.0], vec![value])
    }

    /// Quantile function of the winning (highest) bid under `phi`.
    pub fn from_max_bids(
        phi: &BidDistribution,
        grid: &SupportGrid,
    ) -> Result<Self, BoundsError> {
        let mut mass: BTreeMap<usize, f64> = BTreeMap::new();
        for (p, &w) in phi.profiles().iter().zip(phi.probs()) {
            let top = p.iter().copied().max().expect("nonempty profile");
            *mass.entry(top).or_insert(0.0) += w;
        }
        let mut breaks = Vec::with_capacity(mass.len());
        let mut values = Vec::with_capacity(mass.len());
        let mut acc = 0.0;
        for (level, w) in mass {
            acc += w;
            breaks.push(acc);
            values.push(grid.bids()[level]);
        }
        // Cumulative rounding must not leave the last breakpoint off one.
        *breaks.last_mut().expect("nonempty support") = 1.0;
        Self::step(grid.h(), breaks, values)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `y` in `(0, 1]`.
    pub fn eval(&self, y: f64) -> f64 {
        let k = self.breaks.partition_point(|&b| b < y).min(self.values.len() - 1);
        self.values[k]
    }

    /// Mean `∫_0^1 f(y) dy`, exact for a step function.
    pub fn mean(&self) -> f64 {
        let mut acc = 0.0;
        let mut prev = 0.0;
        for (b, v) in self.breaks.iter().zip(&self.values) {
            acc += v * (b - prev);
            prev = *b;
        }
        acc
    }
}

/// Outcome of the integral constraint check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConstraintCheck {
    pub holds: bool,
    /// `min_q B(q) - LHS(q)`; negative when the constraint is violated.
    pub worst_slack: f64,
    /// Where the minimum slack occurs (a piece endpoint).
    pub worst_q: f64,
}

/// Checks `(1/q^α) ∫_0^q α y^(α-1) v(y) dy ≤ B(q)` for every `q` in
/// `(0, 1]`, with `α = (n-1)/n`. On each refined piece the left side is
/// `C q^(-α) + v_k`, monotone in `q`, so endpoint evaluation is exact;
/// `tol` absorbs floating-point error in the power functions.
pub fn bbm_constraint_check(
    value_quantile: &QuantileFn,
    bid_bound: &QuantileFn,
    n: usize,
    tol: f64,
) -> Result<ConstraintCheck, BoundsError> {
    if n < 2 {
        return Err(BoundsError::TooFewBidders(n));
    }
    let alpha = (n as f64 - 1.0) / n as f64;

    // Refined breakpoints: every piece of either function.
    let mut cuts: Vec<f64> = value_quantile
        .breaks
        .iter()
        .chain(bid_bound.breaks.iter())
        .copied()
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    cuts.dedup();

    // Prefix integrals of α y^(α-1) v(y) at the value function's pieces.
    let vq = &value_quantile.breaks;
    let vv = &value_quantile.values;
    let mut prefix = Vec::with_capacity(vv.len() + 1);
    prefix.push(0.0);
    let mut prev_pow = 0.0;
    for (b, v) in vq.iter().zip(vv) {
        let pow = b.powf(alpha);
        prefix.push(prefix.last().unwrap() + v * (pow - prev_pow));
        prev_pow = pow;
    }

    let mut worst_slack = f64::INFINITY;
    let mut worst_q = 1.0;
    let mut lower = 0.0;
    for &upper in &cuts {
        // Constant data on (lower, upper]: the value piece and the bound.
        let k = vq.partition_point(|&b| b < upper).min(vv.len() - 1);
        let vk = vv[k];
        let qk_prev = if k == 0 { 0.0 } else { vq[k - 1] };
        let c = prefix[k] - vk * qk_prev.powf(alpha);
        let bound = bid_bound.eval(upper);

        let lhs_at = |q: f64| c * q.powf(-alpha) + vk;
        // At the open left endpoint the limit is the piece value when the
        // integral is still empty there (c vanishes on the first piece).
        let mut candidates = vec![(upper, lhs_at(upper))];
        if lower > 0.0 {
            candidates.push((lower, lhs_at(lower)));
        } else if c == 0.0 {
            candidates.push((lower, vk));
        }
        for (q, lhs) in candidates {
            let slack = bound - lhs;
            if slack < worst_slack {
                worst_slack = slack;
                worst_q = q;
            }
        }
        lower = upper;
    }

    Ok(ConstraintCheck { holds: worst_slack >= -tol, worst_slack, worst_q })
}

/// Which closed-form mean bound to apply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MeanBoundVariant {
    /// `μ ≤ sqrt(2n/(n-1) · H · R)` for any number of bidders.
    General,
    /// `μ ≤ R (2 sqrt(H/R) - 1)`, two bidders only.
    TwoBidder,
    /// `μ ≤ R sqrt(2/(n-1)) + sqrt(2n/(n-1) · L · R)` under an
    /// `L`-Lipschitz value quantile function.
    Lipschitz { l: f64 },
}

/// Upper bound on the mean value from the expected winning bid `r`.
pub fn bbm_mean_upper(
    variant: MeanBoundVariant,
    n: usize,
    h: f64,
    r: f64,
) -> Result<f64, BoundsError> {
    if n < 2 {
        return Err(BoundsError::TooFewBidders(n));
    }
    if !h.is_finite() || h < 0.0 {
        return Err(BoundsError::BadPayoffBound(h));
    }
    if !r.is_finite() || r < 0.0 || r > h + 1e-12 {
        return Err(BoundsError::BadRevenue { r, h });
    }
    let nf = n as f64;
    match variant {
        MeanBoundVariant::General => Ok((2.0 * nf / (nf - 1.0) * h * r).sqrt()),
        MeanBoundVariant::TwoBidder => {
            if n != 2 {
                return Err(BoundsError::TooFewBidders(n));
            }
            if r == 0.0 {
                return Ok(0.0);
            }
            Ok(r * (2.0 * (h / r).sqrt() - 1.0))
        }
        MeanBoundVariant::Lipschitz { l } => {
            if !(l > 0.0) || !l.is_finite() {
                return Err(BoundsError::BadLipschitz(l));
            }
            Ok(r * (2.0 / (nf - 1.0)).sqrt() + (2.0 * nf / (nf - 1.0) * l * r).sqrt())
        }
    }
}

/// Largest mean of a two-point value distribution (mass at `0` and `h`)
/// whose quantile function passes the integral check against `bound`:
/// the threshold solves the binding piece exactly, so
/// `θ* = max_j p_j (1 - B_j/h)^(1/α)` and the mean is `h (1 - θ*)`.
pub fn bbm_two_point_mean(bound: &QuantileFn, n: usize) -> Result<f64, BoundsError> {
    if n < 2 {
        return Err(BoundsError::TooFewBidders(n));
    }
    let h = bound.h;
    if h == 0.0 {
        return Ok(0.0);
    }
    let alpha = (n as f64 - 1.0) / n as f64;
    let mut theta: f64 = 0.0;
    for (p, b) in bound.breaks.iter().zip(&bound.values) {
        let short = (1.0 - b / h).max(0.0);
        theta = theta.max(p * short.powf(1.0 / alpha));
    }
    Ok(h * (1.0 - theta))
}

/// Side-by-side comparison of the LP-based sharp mean upper bound with the
/// closed-form ones at `R = E[max bid]`.
#[derive(Debug, Clone, Serialize)]
pub struct BbmComparison {
    pub sharp_upper: f64,
    pub expected_max_bid: f64,
    pub bbm_general: f64,
    /// Two-bidder refinement; present only when `n = 2`.
    pub bbm_two_bidder: Option<f64>,
    /// Extremal two-point mean consistent with the winning-bid quantile.
    pub bbm_two_point: f64,
    pub ratio_two_point_to_sharp: Option<f64>,
    /// Largest value-grid spacing; discretization can push the sharp bound
    /// above the continuum closed forms by about twice this step.
    pub grid_step: f64,
}

/// Computes the sharp mean upper bound at zero tolerance and every
/// closed-form bound the winning-bid data supports.
pub fn bbm_vs_sharp_report(
    phi: &BidDistribution,
    grid: &SupportGrid,
    u: &UtilityKernel,
) -> Result<BbmComparison, BoundsError> {
    let sharp = moment_bounds_cv(phi, grid, u, |v| v, 0.0)?
        .interval()
        .ok_or(BoundsError::NotRationalizable)?;
    let n = grid.n();
    let h = grid.h();
    let r = phi.expected_max_bid(grid);
    let bound = QuantileFn::from_max_bids(phi, grid)?;
    let bbm_general = bbm_mean_upper(MeanBoundVariant::General, n, h, r)?;
    let bbm_two_bidder = if n == 2 {
        Some(bbm_mean_upper(MeanBoundVariant::TwoBidder, n, h, r)?)
    } else {
        None
    };
    let bbm_two_point = bbm_two_point_mean(&bound, n)?;
    let grid_step = grid
        .values()
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    Ok(BbmComparison {
        sharp_upper: sharp.upper,
        expected_max_bid: r,
        bbm_general,
        bbm_two_bidder,
        bbm_two_point,
        ratio_two_point_to_sharp: (sharp.upper > 0.0)
            .then(|| bbm_two_point / sharp.upper),
        grid_step,
    })
}

/// First-price equilibrium inversion: a bid `b` faced with winning-bid
/// cdf value `big_g = G(b|b)` and density `small_g = g(b|b)` reveals the
/// value `v = b + G/g`.
pub fn ipv_invert(b: f64, big_g: f64, small_g: f64) -> Result<f64, BoundsError> {
    if !small_g.is_finite() || small_g <= 0.0 {
        return Err(BoundsError::SingularDensity(small_g));
    }
    if !big_g.is_finite() || big_g < 0.0 || !b.is_finite() {
        return Err(BoundsError::SingularDensity(big_g));
    }
    Ok(b + big_g / small_g)
}

/// Applies [`ipv_invert`] along a bid curve given callables for the cdf
/// and density of the opponents' highest bid at the diagonal.
pub fn ipv_invert_curve(
    bids: &[f64],
    big_g: impl Fn(f64) -> f64,
    small_g: impl Fn(f64) -> f64,
) -> Result<Vec<f64>, BoundsError> {
    bids.iter().map(|&b| ipv_invert(b, big_g(b), small_g(b))).collect()
}
