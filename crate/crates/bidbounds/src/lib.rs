//! Identified sets for discrete auction models via correlated-equilibrium
//! linear programs.
//!
//! Observed bids from an auction do not pin down the distribution of the
//! item's value unless one commits to a specific information structure.
//! This crate computes what *can* be said without that commitment: the set
//! of value distributions (or parametric families thereof) for which the
//! observed bid distribution is an equilibrium outcome under *some*
//! information structure. Each such check is a linear-program feasibility
//! problem in a conditional kernel linking bids to values; moment bounds,
//! counterfactual revenue/welfare bounds, and specification tests are all
//! optimizations over the same polytope.
//!
//! Module map:
//! - [`model`]: discrete auction games (supports, utilities, tie rule).
//! - [`lp`]: sparse linear programs, the solver contract, minimax values.
//! - [`sharp`]: constraint-system builders and identified-set queries.
//! - [`parametric`]: density families over a value grid and grid sweeps.
//! - [`inference`]: finite-sample tolerances, variance-penalized sets,
//!   Bayesian-bootstrap copies, subsampling confidence sets.
//! - [`montecarlo`]: equilibrium generation, bid sampling, experiments.
//! - [`bounds`]: quantile-based revenue bounds and the bid inversion map.

pub mod bounds;
pub mod inference;
pub mod lp;
pub mod model;
pub mod montecarlo;
pub mod parametric;
pub mod sharp;
