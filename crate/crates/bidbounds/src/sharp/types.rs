//! Carrier types shared by the constraint builders and queries.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::lp::LpError;
use crate::model::{ModelError, SupportGrid};

/// Errors from distribution validation and system construction.
#[derive(Debug, Error)]
pub enum SharpError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("probabilities must be nonnegative, finite, and sum to 1 (deviation {0:.3e})")]
    BadDistribution(f64),
    #[error("distribution support is empty")]
    EmptySupport,
    #[error("profile has {got} entries, expected {expected}")]
    ProfileLength { got: usize, expected: usize },
    #[error("profile entry {index} out of range for a support of size {size}")]
    ProfileIndex { index: usize, size: usize },
    #[error("mass vector has {got} entries, expected {expected}")]
    MassLength { got: usize, expected: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("cdf must be nondecreasing within [0, 1] and end at 1")]
    BadCdf,
}

/// Where a bid distribution came from; empirical origins carry the sample
/// size that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DistributionOrigin {
    Exact,
    Empirical { n_obs: usize },
}

/// A probability mass function over bid (or action) profiles, sparse on its
/// support. Profiles hold grid indices, one per player, and are kept sorted
/// lexicographically so identical inputs produce identical systems.
///
/// The constructor merges duplicate profiles, drops entries with mass below
/// `1e-12`, requires the total within `1e-9` of one, and renormalizes so
/// the stored masses sum to one at machine precision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BidDistribution {
    n: usize,
    profiles: Vec<Vec<usize>>,
    probs: Vec<f64>,
    origin: DistributionOrigin,
}

impl BidDistribution {
    /// Builds a distribution over bid profiles on `grid`.
    pub fn new(
        grid: &SupportGrid,
        pairs: Vec<(Vec<usize>, f64)>,
        origin: DistributionOrigin,
    ) -> Result<Self, SharpError> {
        Self::over_space(grid.n(), grid.bids().len(), pairs, origin)
    }

    /// Builds a distribution over action profiles with `sizes[i]` actions
    /// for player `i` (general-game form; bid grids are the special case
    /// where all sizes agree).
    pub fn for_actions(
        sizes: &[usize],
        pairs: Vec<(Vec<usize>, f64)>,
        origin: DistributionOrigin,
    ) -> Result<Self, SharpError> {
        let n = sizes.len();
        let mut merged: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (profile, p) in pairs {
            if profile.len() != n {
                return Err(SharpError::ProfileLength { got: profile.len(), expected: n });
            }
            for (i, &a) in profile.iter().enumerate() {
                if a >= sizes[i] {
                    return Err(SharpError::ProfileIndex { index: a, size: sizes[i] });
                }
            }
            if !p.is_finite() || p < 0.0 {
                return Err(SharpError::BadDistribution(f64::NAN));
            }
            *merged.entry(profile).or_insert(0.0) += p;
        }
        let mut profiles = Vec::new();
        let mut probs = Vec::new();
        let mut total = 0.0;
        for (profile, p) in merged {
            total += p;
            if p > 1e-12 {
                profiles.push(profile);
                probs.push(p);
            }
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(SharpError::BadDistribution((total - 1.0).abs()));
        }
        if profiles.is_empty() {
            return Err(SharpError::EmptySupport);
        }
        let kept: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= kept;
        }
        Ok(Self { n, profiles, probs, origin })
    }

    fn over_space(
        n: usize,
        size: usize,
        pairs: Vec<(Vec<usize>, f64)>,
        origin: DistributionOrigin,
    ) -> Result<Self, SharpError> {
        Self::for_actions(&vec![size; n], pairs, origin)
    }

    /// Point mass on one profile of bid indices.
    pub fn point_mass(grid: &SupportGrid, profile: Vec<usize>) -> Result<Self, SharpError> {
        Self::new(grid, vec![(profile, 1.0)], DistributionOrigin::Exact)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Support profiles in lexicographic order.
    pub fn profiles(&self) -> &[Vec<usize>] {
        &self.profiles
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn origin(&self) -> DistributionOrigin {
        self.origin
    }

    pub fn support_size(&self) -> usize {
        self.profiles.len()
    }

    /// Probability of a profile (0 off support).
    pub fn prob(&self, profile: &[usize]) -> f64 {
        match self.profiles.binary_search_by(|p| p.as_slice().cmp(profile)) {
            Ok(k) => self.probs[k],
            Err(_) => 0.0,
        }
    }

    /// Bid indices recommended to `player` with positive probability,
    /// ascending.
    pub fn marginal_bid_support(&self, player: usize) -> Vec<usize> {
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.profiles {
            seen.insert(p[player]);
        }
        seen.into_iter().collect()
    }

    /// `E[max_i b_i]`, the expected winning bid level.
    pub fn expected_max_bid(&self, grid: &SupportGrid) -> f64 {
        self.profiles
            .iter()
            .zip(&self.probs)
            .map(|(p, &w)| {
                let top = p.iter().map(|&j| grid.bids()[j]).fold(f64::NEG_INFINITY, f64::max);
                w * top
            })
            .sum()
    }
}

/// A distribution over values: a common-value mass over `V`, a joint mass
/// over `V^n` (flattened row-major), or per-player marginals over `V`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ValueDistribution {
    Common(Vec<f64>),
    Joint { n: usize, mass: Vec<f64> },
    Marginals(Vec<Vec<f64>>),
}

fn validate_mass(mass: &[f64]) -> Result<Vec<f64>, SharpError> {
    if mass.is_empty() {
        return Err(SharpError::EmptySupport);
    }
    let mut total = 0.0;
    for &p in mass {
        if !p.is_finite() || p < -1e-15 {
            return Err(SharpError::BadDistribution(f64::NAN));
        }
        total += p;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(SharpError::BadDistribution((total - 1.0).abs()));
    }
    Ok(mass.iter().map(|&p| p.max(0.0) / total).collect())
}

impl ValueDistribution {
    pub fn common(mass: Vec<f64>) -> Result<Self, SharpError> {
        Ok(Self::Common(validate_mass(&mass)?))
    }

    pub fn joint(n: usize, mass: Vec<f64>) -> Result<Self, SharpError> {
        Ok(Self::Joint { n, mass: validate_mass(&mass)? })
    }

    pub fn marginals(per_player: Vec<Vec<f64>>) -> Result<Self, SharpError> {
        let validated = per_player
            .into_iter()
            .map(|m| validate_mass(&m))
            .collect::<Result<Vec<_>, _>>()?;
        if validated.is_empty() {
            return Err(SharpError::EmptySupport);
        }
        Ok(Self::Marginals(validated))
    }

    /// Point mass on one value index.
    pub fn point(num_values: usize, v: usize) -> Result<Self, SharpError> {
        if v >= num_values {
            return Err(SharpError::ProfileIndex { index: v, size: num_values });
        }
        let mut mass = vec![0.0; num_values];
        mass[v] = 1.0;
        Self::common(mass)
    }

    /// Common-value mass, or an error for other layouts.
    pub fn as_common(&self) -> Result<&[f64], SharpError> {
        match self {
            Self::Common(m) => Ok(m),
            _ => Err(SharpError::Dimension("expected a common-value distribution".into())),
        }
    }

    /// `Σ_v f(v) π(v)` for a common-value mass.
    pub fn moment(&self, values: &[f64], f: impl Fn(f64) -> f64) -> Result<f64, SharpError> {
        let mass = self.as_common()?;
        if mass.len() != values.len() {
            return Err(SharpError::MassLength { got: mass.len(), expected: values.len() });
        }
        Ok(mass.iter().zip(values).map(|(&p, &v)| p * f(v)).sum())
    }
}

/// A solved conditional kernel, the feasibility certificate of an
/// identification program.
#[derive(Debug, Clone, Serialize)]
pub enum ConditionalKernel {
    /// `x[p][v]`: common value distribution per support profile.
    Cv { profiles: Vec<Vec<usize>>, x: Vec<Vec<f64>> },
    /// `x[p][flat(v⃗)]`: joint value distribution per support profile.
    Pv { profiles: Vec<Vec<usize>>, num_values: usize, x: Vec<Vec<f64>> },
    /// `x[i][p][v]`: per-player marginal value distributions.
    Ipv { profiles: Vec<Vec<usize>>, x: Vec<Vec<Vec<f64>>> },
    /// `x[a][flat(θ,t)]`: state-signal distribution per action profile.
    General { profiles: Vec<Vec<usize>>, theta_count: usize, x: Vec<Vec<f64>> },
    /// `ψ[v][flat(b)]`: joint mass over values and bid profiles.
    Joint { num_values: usize, num_profiles: usize, mass: Vec<f64> },
}

/// A closed interval `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self, SharpError> {
        if !(lower <= upper) {
            return Err(SharpError::Dimension(format!("interval bounds out of order: [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lower <= other.lower && other.upper <= self.upper
    }
}

/// Inclusion mask over an externally supplied parameter grid, along with
/// the raw minimax value per grid point (the heatmap statistic).
#[derive(Debug, Clone, Serialize)]
pub struct GridMask {
    pub included: Vec<bool>,
    pub minimax: Vec<f64>,
}

impl GridMask {
    pub fn count_included(&self) -> usize {
        self.included.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count_included() == 0
    }

    /// True when every point included here is also included in `other`.
    pub fn subset_of(&self, other: &GridMask) -> bool {
        self.included.len() == other.included.len()
            && self.included.iter().zip(&other.included).all(|(&a, &b)| !a || b)
    }
}

/// The shape of an identified-set result.
#[derive(Debug, Clone, Serialize)]
pub enum SetVariant {
    /// Moment interval; `None` means empty (a refutation).
    Interval(Option<Interval>),
    /// Membership mask over a parameter grid.
    Mask(GridMask),
    /// Single feasibility verdict with its minimax value.
    Certificate { included: bool, minimax: f64 },
}

/// An identified set together with every tolerance that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct IdentifiedSet {
    pub variant: SetVariant,
    /// Uniform relaxation applied to constraint rows.
    pub row_tolerance: f64,
    /// Additive slack applied to objective values (0 when unused).
    pub objective_slack: f64,
    /// Solver feasibility tolerance in force.
    pub feasibility_tol: f64,
    /// Qualifications, e.g. heuristic-exclusion labels.
    pub notes: Vec<String>,
}

impl IdentifiedSet {
    pub fn mask(&self) -> Option<&GridMask> {
        match &self.variant {
            SetVariant::Mask(m) => Some(m),
            _ => None,
        }
    }

    pub fn interval(&self) -> Option<&Interval> {
        match &self.variant {
            SetVariant::Interval(i) => i.as_ref(),
            _ => None,
        }
    }

    /// True when the set contains nothing (refutation outcome).
    pub fn is_empty(&self) -> bool {
        match &self.variant {
            SetVariant::Interval(i) => i.is_none(),
            SetVariant::Mask(m) => m.is_empty(),
            SetVariant::Certificate { included, .. } => !included,
        }
    }
}
