//! Parametric value-distribution families and identified sets over finite
//! parameter grids.
//!
//! Four families of discrete densities on the value grid, each normalized
//! exactly by construction (log-space weights, max-shifted before
//! exponentiation):
//!
//! - truncated normal, weight `exp(-(v-μ)²/σ²)`, parameters `(μ, σ)`;
//! - truncated Poisson, weight `λ^v e^{-λ}/Γ(v+1)`, parameter `λ`;
//! - binomial with `H` trials, weight `C(H,v) p^v (1-p)^{H-v}`, parameter
//!   `p` (support is already the full integer grid, so truncation is a
//!   no-op there);
//! - truncated geometric, weight `p (1-p)^v`, parameter `p`.
//!
//! The parametric identified set over a finite grid `Θ` keeps every `θ`
//! whose implied value distribution passes the feasibility check: minimax
//! value of the constraint system with consistency rows at `density(θ)` at
//! most the tolerance. The raw minimax profile is retained for heatmaps.

use serde::Serialize;
use thiserror::Error;

use crate::lp::{self, FEASIBILITY_TOL};
use crate::model::{SupportGrid, UtilityKernel};
use crate::sharp::{
    build_bce_cv, BceSystem, BidDistribution, GridMask, IdentifiedSet, SetVariant, SharpError,
    ValueDistribution,
};

#[derive(Debug, Error)]
pub enum ParametricError {
    #[error("parameter point {0:?} outside the family box")]
    OutOfBox(Vec<f64>),
    #[error("parameter point has {got} coordinates, family needs {expected}")]
    ParamCount { got: usize, expected: usize },
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Sharp(#[from] SharpError),
}

/// Which density family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FamilyKind {
    TruncatedNormal,
    TruncatedPoisson,
    Binomial,
    TruncatedGeometric,
}

/// A density family over a value grid with top point `H`. The parameter
/// box is fixed by the family: `μ ∈ [0, H]`, `σ ∈ (0, H/2]`, `λ ∈ (0, H]`,
/// `p ∈ (0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Family {
    kind: FamilyKind,
    h: f64,
}

/// One parameter point: `(μ, σ)` for the normal family, a single
/// coordinate otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theta(pub Vec<f64>);

impl Theta {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

/// A finite parameter grid; its size enters tolerance formulas.
#[derive(Debug, Clone, Serialize)]
pub struct ThetaGrid {
    points: Vec<Theta>,
}

impl ThetaGrid {
    /// Validates every point against the family box.
    pub fn new(family: &Family, points: Vec<Theta>) -> Result<Self, ParametricError> {
        if points.is_empty() {
            return Err(ParametricError::EmptyGrid);
        }
        for theta in &points {
            family.check(theta)?;
        }
        Ok(Self { points })
    }

    /// The default grid for a family: `μ` in steps of 0.5 over `[0, H]`
    /// crossed with `σ` in steps of 0.5 over `(0, H/2]`; `λ` in steps of
    /// 0.5 over `(0, H]`; `p` in steps of 0.01 over `(0, 1)`.
    pub fn default_for(family: &Family) -> Self {
        let h = family.h;
        let half_steps = |lo_steps: usize, hi: f64| -> Vec<f64> {
            (lo_steps..)
                .map(|k| k as f64 * 0.5)
                .take_while(|&x| x <= hi + 1e-12)
                .collect()
        };
        let points = match family.kind {
            FamilyKind::TruncatedNormal => {
                let mus = half_steps(0, h);
                let sigmas = half_steps(1, h / 2.0);
                let mut pts = Vec::with_capacity(mus.len() * sigmas.len());
                for &mu in &mus {
                    for &sigma in &sigmas {
                        pts.push(Theta(vec![mu, sigma]));
                    }
                }
                pts
            }
            FamilyKind::TruncatedPoisson => {
                half_steps(1, h).into_iter().map(|l| Theta(vec![l])).collect()
            }
            FamilyKind::Binomial | FamilyKind::TruncatedGeometric => {
                (1..100).map(|k| Theta(vec![k as f64 * 0.01])).collect()
            }
        };
        Self { points }
    }

    pub fn points(&self) -> &[Theta] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Family {
    pub fn truncated_normal(h: f64) -> Self {
        Self { kind: FamilyKind::TruncatedNormal, h }
    }

    pub fn truncated_poisson(h: f64) -> Self {
        Self { kind: FamilyKind::TruncatedPoisson, h }
    }

    pub fn binomial(h: f64) -> Self {
        Self { kind: FamilyKind::Binomial, h }
    }

    pub fn truncated_geometric(h: f64) -> Self {
        Self { kind: FamilyKind::TruncatedGeometric, h }
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn param_count(&self) -> usize {
        match self.kind {
            FamilyKind::TruncatedNormal => 2,
            _ => 1,
        }
    }

    /// Human-readable parameter names, aligned with `Theta` coordinates.
    pub fn param_names(&self) -> &'static [&'static str] {
        match self.kind {
            FamilyKind::TruncatedNormal => &["mu", "sigma"],
            FamilyKind::TruncatedPoisson => &["lambda"],
            FamilyKind::Binomial | FamilyKind::TruncatedGeometric => &["p"],
        }
    }

    fn check(&self, theta: &Theta) -> Result<(), ParametricError> {
        let c = theta.coords();
        if c.len() != self.param_count() {
            return Err(ParametricError::ParamCount { got: c.len(), expected: self.param_count() });
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(ParametricError::OutOfBox(c.to_vec()));
        }
        let ok = match self.kind {
            FamilyKind::TruncatedNormal => {
                (0.0..=self.h).contains(&c[0]) && c[1] > 0.0 && c[1] <= self.h / 2.0
            }
            FamilyKind::TruncatedPoisson => c[0] > 0.0 && c[0] <= self.h,
            FamilyKind::Binomial | FamilyKind::TruncatedGeometric => c[0] > 0.0 && c[0] < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(ParametricError::OutOfBox(c.to_vec()))
        }
    }

    /// The family density at `theta`, normalized on `values`.
    pub fn density(&self, theta: &Theta, values: &[f64]) -> Result<ValueDistribution, ParametricError> {
        self.check(theta)?;
        let c = theta.coords();
        let log_w: Vec<f64> = match self.kind {
            FamilyKind::TruncatedNormal => {
                let (mu, sigma) = (c[0], c[1]);
                values.iter().map(|&v| -((v - mu) * (v - mu)) / (sigma * sigma)).collect()
            }
            FamilyKind::TruncatedPoisson => {
                let lambda = c[0];
                values
                    .iter()
                    .map(|&v| v * lambda.ln() - lambda - libm::lgamma(v + 1.0))
                    .collect()
            }
            FamilyKind::Binomial => {
                let p = c[0];
                let trials = self.h;
                values
                    .iter()
                    .map(|&v| {
                        libm::lgamma(trials + 1.0)
                            - libm::lgamma(v + 1.0)
                            - libm::lgamma(trials - v + 1.0)
                            + v * p.ln()
                            + (trials - v) * (1.0 - p).ln()
                    })
                    .collect()
            }
            FamilyKind::TruncatedGeometric => {
                let p = c[0];
                values.iter().map(|&v| p.ln() + v * (1.0 - p).ln()).collect()
            }
        };
        let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = log_w.iter().map(|&w| (w - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        Ok(ValueDistribution::common(weights.iter().map(|&w| w / total).collect())
            .expect("normalized by construction"))
    }

    /// Exact mean and standard deviation of the discrete density.
    pub fn moment_summary(&self, theta: &Theta, values: &[f64]) -> Result<(f64, f64), ParametricError> {
        let pi = self.density(theta, values)?;
        let mass = pi.as_common().expect("density is a common-value mass");
        let mean: f64 = mass.iter().zip(values).map(|(&p, &v)| p * v).sum();
        let second: f64 = mass.iter().zip(values).map(|(&p, &v)| p * v * v).sum();
        Ok((mean, (second - mean * mean).max(0.0).sqrt()))
    }
}

/// Minimax value per parameter point: the feasibility statistic of the
/// system with consistency rows pinned to `density(θ)`. The base system is
/// built once; each point only re-pins the consistency rows.
pub fn parametric_minimax_profile(
    bce: &BceSystem,
    family: &Family,
    thetas: &ThetaGrid,
    values: &[f64],
) -> Result<Vec<f64>, ParametricError> {
    let mut out = Vec::with_capacity(thetas.len());
    for theta in thetas.points() {
        let pi = family.density(theta, values)?;
        let mass = pi.as_common().expect("density is a common-value mass");
        let sys = bce.with_value_consistency(mass)?;
        out.push(lp::minimax_value(&sys).map_err(SharpError::from)?);
    }
    Ok(out)
}

/// The parametric identified set over a finite grid: every `θ` whose
/// minimax value is at most `sigma` (plus the solver feasibility margin).
pub fn parametric_identified_set(
    phi: &BidDistribution,
    grid: &SupportGrid,
    u: &UtilityKernel,
    family: &Family,
    thetas: &ThetaGrid,
    sigma: f64,
) -> Result<IdentifiedSet, ParametricError> {
    // Positive infinity is a valid tolerance (the full grid).
    if sigma.is_nan() || sigma < 0.0 {
        return Err(ParametricError::Sharp(SharpError::Dimension(format!(
            "tolerance must be nonnegative, got {sigma}"
        ))));
    }
    let bce = build_bce_cv(phi, grid, u)?;
    let minimax = parametric_minimax_profile(&bce, family, thetas, grid.values())?;
    let included = minimax.iter().map(|&q| q <= sigma + FEASIBILITY_TOL).collect();
    Ok(IdentifiedSet {
        variant: SetVariant::Mask(GridMask { included, minimax }),
        row_tolerance: sigma,
        objective_slack: 0.0,
        feasibility_tol: FEASIBILITY_TOL,
        notes: Vec::new(),
    })
}
