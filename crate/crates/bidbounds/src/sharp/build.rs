//! Constraint-system builders for each consistency notion.
//!
//! All builders emit best-response rows in the normalized `F_j ≤ 0` form:
//! `F` is the φ-weighted expected gain from deviating, so obedience is
//! `F ≤ 0`. Rows are indexed by (player, signal, recommended, deviation)
//! and are emitted for every deviation in the full bid set, including the
//! trivial one equal to the recommendation; recommendations range over the
//! observed marginal support (rows for unobserved recommendations are
//! identically zero and are omitted). Coefficients within a row are sorted
//! by variable and exact zeros are dropped, so two builders that agree on
//! the mathematical system produce identical rows.

use crate::model::{AuctionRule, SupportGrid, UtilityKernel};

use super::system::{ConstraintSystem, RowClass, RowLabel};
use super::types::{BidDistribution, ConditionalKernel, SharpError};

/// Kernel variable layout of a built system.
#[derive(Debug, Clone)]
pub enum KernelLayout {
    /// `x(v | b)` per support profile: `var(p, v) = p·|V| + v`.
    Cv { profiles: Vec<Vec<usize>>, probs: Vec<f64>, num_values: usize },
    /// `x(v⃗ | b)` per support profile, values flattened row-major:
    /// `var(p, flat) = p·|V|^n + flat`.
    Pv { profiles: Vec<Vec<usize>>, probs: Vec<f64>, num_values: usize, n: usize },
    /// `x_i(v | b)` per player and support profile:
    /// `var(i, p, v) = (i·|S| + p)·|V| + v`.
    Ipv { profiles: Vec<Vec<usize>>, probs: Vec<f64>, num_values: usize, n: usize },
    /// `x(θ, t | a)` per support action profile, `(θ, t)` flattened with
    /// `θ` outermost: `var(a, k) = a·|Θ|·|T| + k`.
    General { profiles: Vec<Vec<usize>>, probs: Vec<f64>, theta_count: usize, signal_sizes: Vec<usize> },
    /// Unconditional mass `ψ(v, b)` over all bid profiles:
    /// `var(v, flat(b)) = v·|B|^n + flat(b)`.
    Joint { num_values: usize, num_bids: usize, n: usize },
}

impl KernelLayout {
    /// Linear coefficients expressing the implied common-value mass:
    /// `π(v) = Σ coeffs·x` per value index. `None` for layouts without a
    /// canonical common-value marginal. The independent-private-value
    /// layout reports player 0's marginal.
    pub fn value_mass_coeffs(&self) -> Option<Vec<Vec<(usize, f64)>>> {
        match self {
            KernelLayout::Cv { probs, num_values, .. } => Some(
                (0..*num_values)
                    .map(|v| {
                        probs.iter().enumerate().map(|(p, &w)| (p * num_values + v, w)).collect()
                    })
                    .collect(),
            ),
            KernelLayout::Ipv { probs, num_values, .. } => Some(
                (0..*num_values)
                    .map(|v| {
                        probs.iter().enumerate().map(|(p, &w)| (p * num_values + v, w)).collect()
                    })
                    .collect(),
            ),
            KernelLayout::Joint { num_values, num_bids, n } => {
                let per = num_bids.pow(*n as u32);
                Some(
                    (0..*num_values)
                        .map(|v| (0..per).map(|b| (v * per + b, 1.0)).collect())
                        .collect(),
                )
            }
            KernelLayout::General { profiles, probs, theta_count, signal_sizes } => {
                let t_total: usize = signal_sizes.iter().product();
                Some(
                    (0..*theta_count)
                        .map(|theta| {
                            let mut coeffs = Vec::with_capacity(profiles.len() * t_total);
                            for (a, &w) in probs.iter().enumerate() {
                                for t in 0..t_total {
                                    coeffs.push((a * theta_count * t_total + theta * t_total + t, w));
                                }
                            }
                            coeffs
                        })
                        .collect(),
                )
            }
            KernelLayout::Pv { .. } => None,
        }
    }

    pub fn num_vars(&self) -> usize {
        match self {
            KernelLayout::Cv { profiles, num_values, .. } => profiles.len() * num_values,
            KernelLayout::Pv { profiles, num_values, n, .. } => {
                profiles.len() * num_values.pow(*n as u32)
            }
            KernelLayout::Ipv { profiles, num_values, n, .. } => {
                *n * profiles.len() * num_values
            }
            KernelLayout::General { profiles, theta_count, signal_sizes, .. } => {
                profiles.len() * theta_count * signal_sizes.iter().product::<usize>()
            }
            KernelLayout::Joint { num_values, num_bids, n } => {
                num_values * num_bids.pow(*n as u32)
            }
        }
    }
}

/// A constraint system together with its kernel layout.
#[derive(Debug, Clone)]
pub struct BceSystem {
    system: ConstraintSystem,
    pub layout: KernelLayout,
}

impl BceSystem {
    pub fn system(&self) -> &ConstraintSystem {
        &self.system
    }

    /// Copy of the rows with value-consistency equalities pinning the
    /// implied common-value mass to `pi`.
    pub fn with_value_consistency(&self, pi: &[f64]) -> Result<ConstraintSystem, SharpError> {
        let coeffs = self
            .layout
            .value_mass_coeffs()
            .ok_or_else(|| SharpError::Dimension("layout has no common-value marginal".into()))?;
        if pi.len() != coeffs.len() {
            return Err(SharpError::MassLength { got: pi.len(), expected: coeffs.len() });
        }
        let mut sys = self.system.clone();
        for (v, cs) in coeffs.iter().enumerate() {
            // π(v) − Σ coeffs·x = 0.
            let negated: Vec<(usize, f64)> = cs.iter().map(|&(var, w)| (var, -w)).collect();
            sys.push_equality(|positive| RowLabel::ValueConsistency { v, positive }, negated, pi[v]);
        }
        Ok(sys)
    }

    /// Objective coefficients for `Σ_v f(v)·π(v)` in kernel variables.
    pub fn moment_objective(&self, f: &[f64]) -> Result<Vec<(usize, f64)>, SharpError> {
        let coeffs = self
            .layout
            .value_mass_coeffs()
            .ok_or_else(|| SharpError::Dimension("layout has no common-value marginal".into()))?;
        if f.len() != coeffs.len() {
            return Err(SharpError::MassLength { got: f.len(), expected: coeffs.len() });
        }
        let mut obj = Vec::new();
        for (v, cs) in coeffs.iter().enumerate() {
            if f[v] != 0.0 {
                for &(var, w) in cs {
                    obj.push((var, f[v] * w));
                }
            }
        }
        obj.sort_unstable_by_key(|&(var, _)| var);
        Ok(obj)
    }

    /// Implied common-value mass at a kernel point.
    pub fn value_mass_at(&self, x: &[f64]) -> Result<Vec<f64>, SharpError> {
        let coeffs = self
            .layout
            .value_mass_coeffs()
            .ok_or_else(|| SharpError::Dimension("layout has no common-value marginal".into()))?;
        Ok(coeffs
            .iter()
            .map(|cs| cs.iter().map(|&(var, w)| w * x[var]).sum())
            .collect())
    }

    /// Packages a kernel point as a certificate in the layout's shape.
    pub fn kernel_from_point(&self, x: &[f64]) -> ConditionalKernel {
        match &self.layout {
            KernelLayout::Cv { profiles, num_values, .. } => ConditionalKernel::Cv {
                profiles: profiles.clone(),
                x: profiles
                    .iter()
                    .enumerate()
                    .map(|(p, _)| x[p * num_values..(p + 1) * num_values].to_vec())
                    .collect(),
            },
            KernelLayout::Pv { profiles, num_values, n, .. } => {
                let per = num_values.pow(*n as u32);
                ConditionalKernel::Pv {
                    profiles: profiles.clone(),
                    num_values: *num_values,
                    x: (0..profiles.len()).map(|p| x[p * per..(p + 1) * per].to_vec()).collect(),
                }
            }
            KernelLayout::Ipv { profiles, num_values, n, .. } => ConditionalKernel::Ipv {
                profiles: profiles.clone(),
                x: (0..*n)
                    .map(|i| {
                        (0..profiles.len())
                            .map(|p| {
                                let base = (i * profiles.len() + p) * num_values;
                                x[base..base + num_values].to_vec()
                            })
                            .collect()
                    })
                    .collect(),
            },
            KernelLayout::General { profiles, theta_count, signal_sizes, .. } => {
                let per = theta_count * signal_sizes.iter().product::<usize>();
                ConditionalKernel::General {
                    profiles: profiles.clone(),
                    theta_count: *theta_count,
                    x: (0..profiles.len()).map(|a| x[a * per..(a + 1) * per].to_vec()).collect(),
                }
            }
            KernelLayout::Joint { num_values, num_bids, n } => {
                let per = num_bids.pow(*n as u32);
                ConditionalKernel::Joint {
                    num_values: *num_values,
                    num_profiles: per,
                    mass: x[..num_values * per].to_vec(),
                }
            }
        }
    }
}

/// Per-(player, profile) payoff as a function of the value level:
/// `u = share · (v − price)`. Covers the two built-in rules; custom tables
/// are evaluated pointwise instead.
fn affine_payoff(grid: &SupportGrid, u: &UtilityKernel, i: usize, profile: &[usize]) -> Option<(f64, f64)> {
    match u.rule() {
        AuctionRule::FirstPrice | AuctionRule::SecondPrice => {
            let bids = grid.bids();
            let bi = bids[profile[i]];
            let mut top = f64::NEG_INFINITY;
            for &j in profile {
                top = top.max(bids[j]);
            }
            if bi < top {
                return Some((0.0, 0.0));
            }
            let ties = profile.iter().filter(|&&j| bids[j] == top).count();
            let share = 1.0 / ties as f64;
            let price = match u.rule() {
                AuctionRule::FirstPrice => bi,
                AuctionRule::SecondPrice => {
                    if ties >= 2 {
                        top
                    } else {
                        let mut opp = 0.0f64;
                        for (k, &j) in profile.iter().enumerate() {
                            if k != i {
                                opp = opp.max(bids[j]);
                            }
                        }
                        opp
                    }
                }
                AuctionRule::Custom(_) => unreachable!(),
            };
            Some((share, price))
        }
        AuctionRule::Custom(_) => None,
    }
}

/// Deviation gain `u_i(dev, b_{−i}; v) − u_i(b; v)` for every value index,
/// with the affine fast path when available.
fn deviation_gains(
    grid: &SupportGrid,
    u: &UtilityKernel,
    i: usize,
    profile: &[usize],
    dev: usize,
) -> Vec<f64> {
    let mut dev_profile = profile.to_vec();
    dev_profile[i] = dev;
    let values = grid.values();
    match (affine_payoff(grid, u, i, &dev_profile), affine_payoff(grid, u, i, profile)) {
        (Some((sd, pd)), Some((sr, pr))) => values
            .iter()
            .map(|&v| (v - pd) * sd - (v - pr) * sr)
            .collect(),
        _ => values
            .iter()
            .enumerate()
            .map(|(vi, &v)| {
                u.payoff_idx(grid, i, &dev_profile, vi, v) - u.payoff_idx(grid, i, profile, vi, v)
            })
            .collect(),
    }
}

/// Common-value system: kernel `x(v|b)` per support profile, rows
/// `Σ_{b∈S: b_i = rec} Σ_v φ(b)·x(v|b)·(u_i(dev, b_{−i}; v) − u_i(b; v)) ≤ 0`.
pub fn build_bce_cv(
    phi: &BidDistribution,
    grid: &SupportGrid,
    u: &UtilityKernel,
) -> Result<BceSystem, SharpError> {
    check_players(phi, grid)?;
    let nv = grid.values().len();
    let nb = grid.bids().len();
    let profiles = phi.profiles();
    let mut sys = ConstraintSystem::new(profiles.len() * nv);
    for p in 0..profiles.len() {
        sys.add_block((p * nv..(p + 1) * nv).collect());
    }
    for i in 0..grid.n() {
        for rec in phi.marginal_bid_support(i) {
            let matching: Vec<usize> =
                (0..profiles.len()).filter(|&p| profiles[p][i] == rec).collect();
            for dev in 0..nb {
                let mut coeffs = Vec::new();
                for &p in &matching {
                    let gains = deviation_gains(grid, u, i, &profiles[p], dev);
                    let w = phi.probs()[p];
                    for (v, &g) in gains.iter().enumerate() {
                        let coef = w * g;
                        if coef != 0.0 {
                            coeffs.push((p * nv + v, coef));
                        }
                    }
                }
                sys.push_row(
                    RowLabel::BestResponse { player: i, signal: 0, recommended: rec, deviation: dev },
                    RowClass::BestResponse,
                    coeffs,
                    0.0,
                );
            }
        }
    }
    let mut var_profile = vec![usize::MAX; sys.num_vars()];
    for p in 0..profiles.len() {
        for v in 0..nv {
            var_profile[p * nv + v] = p;
        }
    }
    sys.set_sample_form(var_profile, phi.probs().to_vec());
    Ok(BceSystem {
        system: sys,
        layout: KernelLayout::Cv {
            profiles: profiles.to_vec(),
            probs: phi.probs().to_vec(),
            num_values: nv,
        },
    })
}

/// A finite incomplete-information game: states `θ`, per-player signal and
/// action spaces, and a payoff function over action profiles and states.
pub struct GeneralGame<'a> {
    pub theta_count: usize,
    pub signal_sizes: Vec<usize>,
    pub action_sizes: Vec<usize>,
    pub utility: &'a (dyn Fn(usize, &[usize], usize) -> f64 + 'a),
}

impl GeneralGame<'_> {
    fn n(&self) -> usize {
        self.action_sizes.len()
    }
}

/// General-form system: kernel `x(θ, t | a)` per support action profile,
/// obedience rows for every (player, signal, recommended action,
/// deviation). Specializations embed into this builder: with states equal
/// to the value grid and singleton signals it reproduces [`build_bce_cv`]
/// row for row.
pub fn build_bce_general(
    phi: &BidDistribution,
    game: &GeneralGame<'_>,
) -> Result<BceSystem, SharpError> {
    let n = game.n();
    if game.signal_sizes.len() != n {
        return Err(SharpError::Dimension(format!(
            "{} signal spaces for {} players",
            game.signal_sizes.len(),
            n
        )));
    }
    if phi.n() != n {
        return Err(SharpError::ProfileLength { got: phi.n(), expected: n });
    }
    if game.theta_count == 0 || game.signal_sizes.iter().any(|&s| s == 0) {
        return Err(SharpError::EmptySupport);
    }
    let t_total: usize = game.signal_sizes.iter().product();
    let per = game.theta_count * t_total;
    let profiles = phi.profiles();
    let mut sys = ConstraintSystem::new(profiles.len() * per);
    for a in 0..profiles.len() {
        sys.add_block((a * per..(a + 1) * per).collect());
    }
    // Signal-profile strides for row-major flattening of t.
    let mut strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * game.signal_sizes[i + 1];
    }
    for i in 0..n {
        for t_i in 0..game.signal_sizes[i] {
            for rec in phi.marginal_bid_support(i) {
                let matching: Vec<usize> =
                    (0..profiles.len()).filter(|&a| profiles[a][i] == rec).collect();
                for dev in 0..game.action_sizes[i] {
                    let mut coeffs = Vec::new();
                    for &a in &matching {
                        let mut dev_profile = profiles[a].clone();
                        dev_profile[i] = dev;
                        let w = phi.probs()[a];
                        for theta in 0..game.theta_count {
                            let gain = (game.utility)(i, &dev_profile, theta)
                                - (game.utility)(i, &profiles[a], theta);
                            let coef = w * gain;
                            if coef == 0.0 {
                                continue;
                            }
                            for t in 0..t_total {
                                // Keep only signal profiles whose i-th
                                // coordinate is t_i.
                                if (t / strides[i]) % game.signal_sizes[i] == t_i {
                                    coeffs.push((a * per + theta * t_total + t, coef));
                                }
                            }
                        }
                    }
                    coeffs.sort_unstable_by_key(|&(var, _)| var);
                    sys.push_row(
                        RowLabel::BestResponse { player: i, signal: t_i, recommended: rec, deviation: dev },
                        RowClass::BestResponse,
                        coeffs,
                        0.0,
                    );
                }
            }
        }
    }
    Ok(BceSystem {
        system: sys,
        layout: KernelLayout::General {
            profiles: profiles.to_vec(),
            probs: phi.probs().to_vec(),
            theta_count: game.theta_count,
            signal_sizes: game.signal_sizes.clone(),
        },
    })
}

/// Private-value system: kernel `x(v⃗|b)` per support profile, obedience
/// rows indexed by (player, own value, recommended, deviation) summing over
/// joint values that agree with the player's own value.
pub fn build_bce_pv(
    phi: &BidDistribution,
    grid: &SupportGrid,
    u: &UtilityKernel,
) -> Result<BceSystem, SharpError> {
    check_players(phi, grid)?;
    let n = grid.n();
    let nv = grid.values().len();
    let nb = grid.bids().len();
    let per = nv.pow(n as u32);
    let profiles = phi.profiles();
    let mut sys = ConstraintSystem::new(profiles.len() * per);
    for p in 0..profiles.len() {
        sys.add_block((p * per..(p + 1) * per).collect());
    }
    // Value-profile strides, row-major.
    let mut strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * nv;
    }
    for i in 0..n {
        for v_own in 0..nv {
            for rec in phi.marginal_bid_support(i) {
                let matching: Vec<usize> =
                    (0..profiles.len()).filter(|&p| profiles[p][i] == rec).collect();
                for dev in 0..nb {
                    let mut coeffs = Vec::new();
                    for &p in &matching {
                        let gain = deviation_gains(grid, u, i, &profiles[p], dev)[v_own];
                        let coef = phi.probs()[p] * gain;
                        if coef == 0.0 {
                            continue;
                        }
                        for flat in 0..per {
                            if (flat / strides[i]) % nv == v_own {
                                coeffs.push((p * per + flat, coef));
                            }
                        }
                    }
                    sys.push_row(
                        RowLabel::BestResponse { player: i, signal: v_own, recommended: rec, deviation: dev },
                        RowClass::BestResponse,
                        coeffs,
                        0.0,
                    );
                }
            }
        }
    }
    let mut var_profile = vec![usize::MAX; sys.num_vars()];
    for p in 0..profiles.len() {
        for k in 0..per {
            var_profile[p * per + k] = p;
        }
    }
    sys.set_sample_form(var_profile, phi.probs().to_vec());
    Ok(BceSystem {
        system: sys,
        layout: KernelLayout::Pv {
            profiles: profiles.to_vec(),
            probs: phi.probs().to_vec(),
            num_values: nv,
            n,
        },
    })
}

/// Independent-private-value system: one marginal kernel `x_i(v|b)` per
/// player, obedience rows as in the private-value system but over the
/// player's own marginal.
pub fn build_bce_ipv(
    phi: &BidDistribution,
    grid: &SupportGrid,
    u: &UtilityKernel,
) -> Result<BceSystem, SharpError> {
    check_players(phi, grid)?;
    let n = grid.n();
    let nv = grid.values().len();
    let nb = grid.bids().len();
    let s = phi.support_size();
    let profiles = phi.profiles();
    let mut sys = ConstraintSystem::new(n * s * nv);
    for i in 0..n {
        for p in 0..s {
            let base = (i * s + p) * nv;
            sys.add_block((base..base + nv).collect());
        }
    }
    for i in 0..n {
        for v_own in 0..nv {
            for rec in phi.marginal_bid_support(i) {
                let matching: Vec<usize> =
                    (0..profiles.len()).filter(|&p| profiles[p][i] == rec).collect();
                for dev in 0..nb {
                    let mut coeffs = Vec::new();
                    for &p in &matching {
                        let gain = deviation_gains(grid, u, i, &profiles[p], dev)[v_own];
                        let coef = phi.probs()[p] * gain;
                        if coef != 0.0 {
                            coeffs.push(((i * s + p) * nv + v_own, coef));
                        }
                    }
                    sys.push_row(
                        RowLabel::BestResponse { player: i, signal: v_own, recommended: rec, deviation: dev },
                        RowClass::BestResponse,
                        coeffs,
                        0.0,
                    );
                }
            }
        }
    }
    let mut var_profile = vec![usize::MAX; sys.num_vars()];
    for i in 0..n {
        for p in 0..s {
            for v in 0..nv {
                var_profile[(i * s + p) * nv + v] = p;
            }
        }
    }
    sys.set_sample_form(var_profile, phi.probs().to_vec());
    Ok(BceSystem {
        system: sys,
        layout: KernelLayout::Ipv {
            profiles: profiles.to_vec(),
            probs: phi.probs().to_vec(),
            num_values: nv,
            n,
        },
    })
}

/// Unconditional-mass system over `ψ(v, b)` on the full profile space,
/// with obedience rows for every recommendation (support is part of the
/// unknown). Shared by the winning-bid query and the equilibrium generator.
pub fn build_bce_joint(grid: &SupportGrid, u: &UtilityKernel) -> BceSystem {
    let n = grid.n();
    let nv = grid.values().len();
    let nb = grid.bids().len();
    let per = nb.pow(n as u32);
    let mut sys = ConstraintSystem::new(nv * per);
    sys.add_block((0..nv * per).collect());
    let mut strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * nb;
    }
    let mut profile = vec![0usize; n];
    for i in 0..n {
        for rec in 0..nb {
            let matching: Vec<usize> = (0..per)
                .filter(|&flat| (flat / strides[i]) % nb == rec)
                .collect();
            for dev in 0..nb {
                let mut coeffs = Vec::new();
                for v in 0..nv {
                    for &flat in &matching {
                        unflatten(flat, nb, &mut profile);
                        let gain = deviation_gains_at(grid, u, i, &profile, dev, v);
                        if gain != 0.0 {
                            coeffs.push((v * per + flat, gain));
                        }
                    }
                }
                sys.push_row(
                    RowLabel::BestResponse { player: i, signal: 0, recommended: rec, deviation: dev },
                    RowClass::BestResponse,
                    coeffs,
                    0.0,
                );
            }
        }
    }
    BceSystem { system: sys, layout: KernelLayout::Joint { num_values: nv, num_bids: nb, n } }
}

pub(crate) fn unflatten(mut flat: usize, nb: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = flat % nb;
        flat /= nb;
    }
}

fn deviation_gains_at(
    grid: &SupportGrid,
    u: &UtilityKernel,
    i: usize,
    profile: &[usize],
    dev: usize,
    v_idx: usize,
) -> f64 {
    let mut dev_profile = profile.to_vec();
    dev_profile[i] = dev;
    let v = grid.values()[v_idx];
    match (affine_payoff(grid, u, i, &dev_profile), affine_payoff(grid, u, i, profile)) {
        (Some((sd, pd)), Some((sr, pr))) => (v - pd) * sd - (v - pr) * sr,
        _ => u.payoff_idx(grid, i, &dev_profile, v_idx, v) - u.payoff_idx(grid, i, profile, v_idx, v),
    }
}

/// System for data where only the winning bid is observed: variables are
/// the unconditional mass `ψ(v, b)`, obedience rows as in
/// [`build_bce_joint`], plus rows pinning the maximum-bid cdf:
/// `F_win(x_k) = Σ_v Σ_{b: max b ≤ x_k} ψ(v, b)` at every bid level.
pub fn winning_bid_constraints(
    f_win: &[f64],
    grid: &SupportGrid,
    u: &UtilityKernel,
) -> Result<BceSystem, SharpError> {
    let nb = grid.bids().len();
    if f_win.len() != nb {
        return Err(SharpError::MassLength { got: f_win.len(), expected: nb });
    }
    let ok = f_win.iter().all(|&p| (0.0..=1.0 + 1e-12).contains(&p))
        && f_win.windows(2).all(|w| w[0] <= w[1] + 1e-12)
        && (f_win[nb - 1] - 1.0).abs() <= 1e-9;
    if !ok {
        return Err(SharpError::BadCdf);
    }
    let mut bce = build_bce_joint(grid, u);
    let nv = grid.values().len();
    let n = grid.n();
    let per = nb.pow(n as u32);
    let mut profile = vec![0usize; n];
    for k in 0..nb {
        let mut coeffs = Vec::new();
        for v in 0..nv {
            for flat in 0..per {
                unflatten(flat, nb, &mut profile);
                if profile.iter().all(|&b| b <= k) {
                    coeffs.push((v * per + flat, -1.0));
                }
            }
        }
        // F_win(x_k) − Σ ψ = 0.
        bce.system.push_equality(|positive| RowLabel::WinCdf { bid: k, positive }, coeffs.clone(), f_win[k]);
    }
    Ok(bce)
}

fn check_players(phi: &BidDistribution, grid: &SupportGrid) -> Result<(), SharpError> {
    if phi.n() != grid.n() {
        return Err(SharpError::ProfileLength { got: phi.n(), expected: grid.n() });
    }
    Ok(())
}
