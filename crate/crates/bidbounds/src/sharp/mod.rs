//! Identified sets for value distributions from observed bid distributions.
//!
//! The observed object is a distribution `φ` over bid profiles. A value
//! distribution is *consistent* with `φ` when there exists a conditional
//! kernel `x(value | bid profile)` such that recommended bids are best
//! responses in conditional expectation: for every player, recommended bid,
//! and deviation, the expected gain from deviating is nonpositive. Each
//! consistency notion (common value, private values, independent private
//! values) contributes a family of linear best-response rows in the kernel
//! variables; identified sets, moment bounds, counterfactual bounds, and
//! specification tests are linear programs over those rows.
//!
//! Rows are stored in the normalized form `F_j(x) ≤ 0`, so that the
//! minimax value `min_x max_j F_j(x)` is the smallest uniform tolerance
//! making the system feasible.

mod build;
mod query;
mod system;
mod types;

pub use build::{
    build_bce_cv, build_bce_general, build_bce_ipv, build_bce_joint, build_bce_pv,
    winning_bid_constraints, BceSystem, GeneralGame, KernelLayout,
};
pub use query::{
    counterfactual_bounds, covariate_beta_membership, ipv_symmetric_moment_bounds,
    ipv_symmetry_test, membership, membership_cv, moment_bounds, moment_bounds_cv,
    support_function, CounterfactualBounds, Membership, MomentBounds, SymmetryVerdict,
};
pub use system::{ConstraintSystem, Row, RowClass, RowLabel};
pub use types::{
    BidDistribution, ConditionalKernel, DistributionOrigin, GridMask, IdentifiedSet, Interval,
    SetVariant, SharpError, ValueDistribution,
};
