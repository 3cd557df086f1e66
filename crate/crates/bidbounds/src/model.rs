//! Discrete auction games: supports, utility rules, welfare metrics.
//!
//! Everything downstream (constraint builders, tolerance formulas) assumes
//! bids and values live on finite grids inside `[0, H]` with `H` the top
//! value point, so that payoffs are bounded by `H` in absolute value. The
//! tie rule is a uniform split among the highest bidders, which makes every
//! payoff a deterministic expectation.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Errors from grid construction and utility evaluation.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("player count must be at least 1, got {0}")]
    PlayerCount(usize),
    #[error("{name} grid must be nonempty, finite, and strictly increasing")]
    BadGrid { name: &'static str },
    #[error("value points must lie in [0, H] with H = max(values) > 0")]
    ValueRange,
    #[error("bid {bid} lies outside [0, {h}]")]
    BidRange { bid: f64, h: f64 },
    #[error("bid profile has {got} entries, expected {expected}")]
    ProfileLength { got: usize, expected: usize },
    #[error("{what} {x} is not a grid point")]
    OffGrid { what: &'static str, x: f64 },
    #[error("signal space sizes must have one positive entry per player")]
    BadSignals,
    #[error("utility table has {got} entries, expected {expected}")]
    TableSize { got: usize, expected: usize },
    #[error("utility table entry {value} exceeds the payoff bound {bound}")]
    TableBound { value: f64, bound: f64 },
    #[error("metric bound must be finite and nonnegative, got {0}")]
    MetricBound(f64),
}

/// Finite supports for one auction game: `n` players, a value grid `V`, a
/// bid grid `B`, and an optional per-player signal space (singletons by
/// default).
///
/// Invariants enforced at construction: both grids strictly increasing and
/// finite, values inside `[0, H]` with `H = max(values) > 0`, bids inside
/// `[0, H]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportGrid {
    n: usize,
    values: Vec<f64>,
    bids: Vec<f64>,
    signal_sizes: Vec<usize>,
}

fn strictly_increasing(xs: &[f64]) -> bool {
    !xs.is_empty()
        && xs.iter().all(|x| x.is_finite())
        && xs.windows(2).all(|w| w[0] < w[1])
}

impl SupportGrid {
    /// Builds a grid with singleton signal spaces.
    pub fn new(n: usize, values: Vec<f64>, bids: Vec<f64>) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::PlayerCount(n));
        }
        if !strictly_increasing(&values) {
            return Err(ModelError::BadGrid { name: "value" });
        }
        if !strictly_increasing(&bids) {
            return Err(ModelError::BadGrid { name: "bid" });
        }
        let h = *values.last().expect("nonempty");
        if h <= 0.0 || values[0] < 0.0 {
            return Err(ModelError::ValueRange);
        }
        if bids[0] < 0.0 || *bids.last().expect("nonempty") > h {
            return Err(ModelError::BidRange {
                bid: if bids[0] < 0.0 { bids[0] } else { *bids.last().unwrap() },
                h,
            });
        }
        Ok(Self { n, values, bids, signal_sizes: vec![1; n] })
    }

    /// Integer grid `V = B = {0, 1, ..., h}`.
    pub fn integer(n: usize, h: usize) -> Result<Self, ModelError> {
        let pts: Vec<f64> = (0..=h).map(|k| k as f64).collect();
        Self::new(n, pts.clone(), pts)
    }

    /// Replaces the signal spaces; `sizes[i]` is the number of signals for
    /// player `i`.
    pub fn with_signals(mut self, sizes: Vec<usize>) -> Result<Self, ModelError> {
        if sizes.len() != self.n || sizes.iter().any(|&s| s == 0) {
            return Err(ModelError::BadSignals);
        }
        self.signal_sizes = sizes;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bids(&self) -> &[f64] {
        &self.bids
    }

    pub fn signal_sizes(&self) -> &[usize] {
        &self.signal_sizes
    }

    /// Top value point; the uniform payoff bound.
    pub fn h(&self) -> f64 {
        *self.values.last().expect("nonempty")
    }

    /// `|B|^n`, the number of bid profiles.
    pub fn num_profiles(&self) -> usize {
        self.bids.len().pow(self.n as u32)
    }

    /// Index of a value point, by exact match.
    pub fn value_index(&self, v: f64) -> Result<usize, ModelError> {
        self.values
            .iter()
            .position(|&x| x == v)
            .ok_or(ModelError::OffGrid { what: "value", x: v })
    }

    /// Index of a bid point, by exact match.
    pub fn bid_index(&self, b: f64) -> Result<usize, ModelError> {
        self.bids
            .iter()
            .position(|&x| x == b)
            .ok_or(ModelError::OffGrid { what: "bid", x: b })
    }

    /// Translates a profile of bid levels into grid indices.
    pub fn profile_indices(&self, bids: &[f64]) -> Result<Vec<usize>, ModelError> {
        if bids.len() != self.n {
            return Err(ModelError::ProfileLength { got: bids.len(), expected: self.n });
        }
        bids.iter().map(|&b| self.bid_index(b)).collect()
    }

    /// Bid levels of an index profile.
    pub fn profile_bids(&self, profile: &[usize]) -> Vec<f64> {
        profile.iter().map(|&j| self.bids[j]).collect()
    }
}

/// Probability that player `i` wins at bid profile `b` (uniform split among
/// the highest bidders). Sums to one over players for every profile.
pub fn win_probability(bids: &[f64], i: usize) -> f64 {
    let top = bids.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if bids[i] < top {
        return 0.0;
    }
    let ties = bids.iter().filter(|&&b| b == top).count();
    1.0 / ties as f64
}

/// Price paid by the realized winner: the winning bid under a first-price
/// rule, the highest opposing bid under a second-price rule. With a single
/// bidder the second-price payment is 0 (no reserve).
pub fn realized_revenue(rule: &UtilityKernel, bids: &[f64]) -> f64 {
    let top = bids.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    match rule.rule() {
        AuctionRule::FirstPrice => top,
        AuctionRule::SecondPrice => {
            let ties = bids.iter().filter(|&&b| b == top).count();
            if ties >= 2 {
                top
            } else {
                bids.iter().cloned().filter(|&b| b < top).fold(0.0, f64::max)
            }
        }
        // A custom rule carries no payment structure; revenue is defined
        // only for the two standard rules.
        AuctionRule::Custom(_) => f64::NAN,
    }
}

/// Dense payoff table for arbitrary auction rules: one entry per
/// `(player, bid profile, value point)`.
#[derive(Clone)]
pub struct UtilityTable {
    entries: Vec<f64>,
    num_profiles: usize,
    num_values: usize,
}

impl UtilityTable {
    /// `entries[(i * num_profiles + p) * num_values + v]` is the payoff of
    /// player `i` at flattened bid profile `p` and value index `v`. Profile
    /// flattening is row-major: `p = Σ_k b_k · |B|^(n-1-k)`.
    pub fn new(grid: &SupportGrid, entries: Vec<f64>) -> Result<Self, ModelError> {
        let expected = grid.n() * grid.num_profiles() * grid.values().len();
        if entries.len() != expected {
            return Err(ModelError::TableSize { got: entries.len(), expected });
        }
        let bound = grid.h();
        for &e in &entries {
            if !e.is_finite() || e.abs() > bound {
                return Err(ModelError::TableBound { value: e, bound });
            }
        }
        Ok(Self {
            entries,
            num_profiles: grid.num_profiles(),
            num_values: grid.values().len(),
        })
    }
}

/// The auction rule behind a utility kernel.
#[derive(Clone)]
pub enum AuctionRule {
    FirstPrice,
    SecondPrice,
    Custom(UtilityTable),
}

impl fmt::Debug for AuctionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AuctionRule::FirstPrice => write!(f, "FirstPrice"),
            AuctionRule::SecondPrice => write!(f, "SecondPrice"),
            AuctionRule::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Payoff accessor `u_i(b; v)`. The value argument is the common value in a
/// common-value game and the player's own value in a private-value game;
/// the kernel itself is agnostic.
///
/// Payoffs are bounded by `H` in absolute value whenever bids and values
/// lie in `[0, H]`; losers receive exactly 0 under both built-in rules.
#[derive(Debug, Clone)]
pub struct UtilityKernel {
    rule: AuctionRule,
}

impl UtilityKernel {
    pub fn first_price() -> Self {
        Self { rule: AuctionRule::FirstPrice }
    }

    pub fn second_price() -> Self {
        Self { rule: AuctionRule::SecondPrice }
    }

    pub fn custom(table: UtilityTable) -> Self {
        Self { rule: AuctionRule::Custom(table) }
    }

    pub fn rule(&self) -> &AuctionRule {
        &self.rule
    }

    /// Payoff at an index profile with an explicit value level. This is the
    /// hot path used by every constraint builder.
    pub fn payoff_idx(&self, grid: &SupportGrid, i: usize, profile: &[usize], v_idx: usize, v: f64) -> f64 {
        match &self.rule {
            AuctionRule::FirstPrice | AuctionRule::SecondPrice => {
                let bi = grid.bids[profile[i]];
                let mut top = f64::NEG_INFINITY;
                for &j in profile {
                    top = top.max(grid.bids[j]);
                }
                if bi < top {
                    return 0.0;
                }
                let mut ties = 0usize;
                for &j in profile {
                    if grid.bids[j] == top {
                        ties += 1;
                    }
                }
                let share = 1.0 / ties as f64;
                match self.rule {
                    AuctionRule::FirstPrice => (v - bi) * share,
                    AuctionRule::SecondPrice => {
                        // A tied winner's highest opposing bid is the top bid
                        // itself; a strict winner pays the best losing bid
                        // (0 when alone).
                        let price = if ties >= 2 {
                            top
                        } else {
                            let mut opp = 0.0f64;
                            for (k, &j) in profile.iter().enumerate() {
                                if k != i {
                                    opp = opp.max(grid.bids[j]);
                                }
                            }
                            opp
                        };
                        (v - price) * share
                    }
                    AuctionRule::Custom(_) => unreachable!(),
                }
            }
            AuctionRule::Custom(table) => {
                let mut p = 0usize;
                for &j in profile {
                    p = p * grid.bids.len() + j;
                }
                table.entries[(i * table.num_profiles + p) * table.num_values + v_idx]
            }
        }
    }

    /// Payoff with bid levels and a value level, both validated against the
    /// grid.
    pub fn payoff(&self, grid: &SupportGrid, i: usize, bids: &[f64], v: f64) -> Result<f64, ModelError> {
        let profile = grid.profile_indices(bids)?;
        let v_idx = grid.value_index(v)?;
        Ok(self.payoff_idx(grid, i, &profile, v_idx, v))
    }
}

/// First-price payoff `(v − b_i) · p_win`: the winner (uniform tie split)
/// pays their own bid; losers receive exactly 0.
pub fn first_price_utility(grid: &SupportGrid, i: usize, bids: &[f64], v: f64) -> Result<f64, ModelError> {
    UtilityKernel::first_price().payoff(grid, i, bids, v)
}

/// Second-price payoff: the winner pays the highest opposing bid, same tie
/// rule; losers receive exactly 0.
pub fn second_price_utility(grid: &SupportGrid, i: usize, bids: &[f64], v: f64) -> Result<f64, ModelError> {
    UtilityKernel::second_price().payoff(grid, i, bids, v)
}

type MetricEval = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;

/// A welfare metric `W(v, b)`: any bounded function of the value level and
/// the bid profile, evaluated inside counterfactual objectives.
#[derive(Clone)]
pub struct MetricFn {
    label: String,
    bound: f64,
    eval: Arc<MetricEval>,
}

impl fmt::Debug for MetricFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MetricFn({}, |W| <= {})", self.label, self.bound)
    }
}

impl MetricFn {
    /// An arbitrary metric with a declared uniform bound.
    pub fn custom(label: impl Into<String>, bound: f64, eval: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Result<Self, ModelError> {
        if !bound.is_finite() || bound < 0.0 {
            return Err(ModelError::MetricBound(bound));
        }
        Ok(Self { label: label.into(), bound, eval: Arc::new(eval) })
    }

    /// The constant metric `W ≡ c`.
    pub fn constant(c: f64) -> Result<Self, ModelError> {
        Self::custom(format!("constant {c}"), c.abs(), move |_, _| c)
    }

    /// Seller revenue: the price paid by the realized winner under `rule`.
    pub fn revenue(rule: &UtilityKernel, grid: &SupportGrid) -> Result<Self, ModelError> {
        let rule = rule.clone();
        Self::custom("revenue", grid.h(), move |_, bids| realized_revenue(&rule, bids))
    }

    /// Total surplus: the item is always allocated, so welfare equals the
    /// value level regardless of bids.
    pub fn welfare(grid: &SupportGrid) -> Result<Self, ModelError> {
        Self::custom("welfare", grid.h(), |v, _| v)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn eval(&self, v: f64, bids: &[f64]) -> f64 {
        (self.eval)(v, bids)
    }
}
