//! Indexed families of linear constraint rows over kernel variables.

use crate::lp::{LinearProgram, Rel, Sense};

/// Which tolerance class a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowClass {
    /// Best-response (obedience) inequality.
    BestResponse,
    /// One side of an equality pinning a distribution or linking blocks.
    Consistency,
}

/// Identifies a row for diagnostics and per-row bookkeeping. Equality
/// constraints are stored as `±` row pairs; `positive` names the side with
/// the pinned quantity entering positively.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowLabel {
    /// Deviation gain of `player` at signal `signal` from `recommended` to
    /// `deviation` (grid indices).
    BestResponse { player: usize, signal: usize, recommended: usize, deviation: usize },
    /// `±(π(v) − Σ_b φ(b) x(v|b)) ≤ 0`.
    ValueConsistency { v: usize, positive: bool },
    /// `±(ρ_i(v) − Σ_b φ(b) x_i(v|b)) ≤ 0`.
    MarginalConsistency { player: usize, v: usize, positive: bool },
    /// `±Σ_b φ(b)(x_i(v|b) − x_0(v|b)) ≤ 0`.
    SymmetryCoupling { player: usize, v: usize, positive: bool },
    /// `±(F_win(x_k) − Σ ψ) ≤ 0` at the k-th bid level.
    WinCdf { bid: usize, positive: bool },
    /// `±(Σ_b ψ̃(v,b) − Σ_b φ(b) x(v|b)) ≤ 0`.
    CounterfactualLink { v: usize, positive: bool },
    /// `±(x₀'β − implied mean) ≤ 0` for the k-th covariate cell.
    CovariateLink { cell: usize, positive: bool },
    /// Ad-hoc row for hand-built systems.
    Free(String),
}

impl RowLabel {
    pub fn free(name: impl Into<String>) -> Self {
        Self::Free(name.into())
    }
}

/// One row `F_j(x) = Σ coeffs·x + constant ≤ 0`, sparse over kernel
/// variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    label: RowLabel,
    class: RowClass,
    coeffs: Vec<(usize, f64)>,
    constant: f64,
}

impl Row {
    pub fn label(&self) -> &RowLabel {
        &self.label
    }

    pub fn class(&self) -> RowClass {
        self.class
    }

    pub fn coeffs(&self) -> &[(usize, f64)] {
        &self.coeffs
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// `F_j(x)`.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        let dot: f64 = self.coeffs.iter().map(|&(v, a)| a * x[v]).sum();
        dot + self.constant
    }
}

/// Per-observation evaluation support: with an empirical distribution the
/// row coefficient on variable `x` in profile block `b` is
/// `φ_N(b) · γ(b)`, so the single-observation row value at a draw equal to
/// `b` is recovered by unscaling with `φ_N(b)`.
#[derive(Debug, Clone)]
pub(crate) struct SampleForm {
    /// Owning profile block per variable.
    pub var_profile: Vec<usize>,
    /// `φ(b)` per profile block.
    pub profile_prob: Vec<f64>,
}

/// An indexed family `{F_j}` of rows over shared kernel variables, plus the
/// structural domain: sum-to-one variable blocks and optional upper bounds.
/// The domain is not part of the row family; tolerances relax rows only.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    num_vars: usize,
    rows: Vec<Row>,
    blocks: Vec<Vec<usize>>,
    upper: Vec<(usize, f64)>,
    pub(crate) sample: Option<SampleForm>,
}

impl ConstraintSystem {
    pub fn new(num_vars: usize) -> Self {
        Self { num_vars, rows: Vec::new(), blocks: Vec::new(), upper: Vec::new(), sample: None }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Sparse per-variable upper bounds (variables are nonnegative by
    /// construction).
    pub fn upper_bounds(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.upper.iter().copied()
    }

    /// Declares `vars` as a probability block: nonnegative, sums to one.
    pub fn add_block(&mut self, vars: Vec<usize>) {
        debug_assert!(vars.iter().all(|&v| v < self.num_vars));
        self.blocks.push(vars);
    }

    pub fn set_upper_bound(&mut self, var: usize, hi: f64) {
        debug_assert!(var < self.num_vars);
        self.upper.push((var, hi));
    }

    /// Appends the row `Σ coeffs·x + constant ≤ 0`.
    pub fn push_row(&mut self, label: RowLabel, class: RowClass, coeffs: Vec<(usize, f64)>, constant: f64) {
        debug_assert!(coeffs.iter().all(|&(v, _)| v < self.num_vars));
        self.rows.push(Row { label, class, coeffs, constant });
    }

    /// Appends `±(lhs + constant) ≤ 0`, the two-row encoding of
    /// `lhs + constant = 0`. `label` receives `positive = true/false`.
    pub fn push_equality(
        &mut self,
        label: impl Fn(bool) -> RowLabel,
        coeffs: Vec<(usize, f64)>,
        constant: f64,
    ) {
        let negated: Vec<(usize, f64)> = coeffs.iter().map(|&(v, a)| (v, -a)).collect();
        self.push_row(label(true), RowClass::Consistency, coeffs, constant);
        self.push_row(label(false), RowClass::Consistency, negated, -constant);
    }

    /// `max_j F_j(x)`.
    pub fn max_row_value(&self, x: &[f64]) -> f64 {
        self.rows.iter().map(|r| r.value_at(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// A copy with every row scaled by `c > 0` (test instrumentation).
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for row in &mut out.rows {
            for entry in &mut row.coeffs {
                entry.1 *= c;
            }
            row.constant *= c;
        }
        out
    }

    /// Imports all structure from `other`, shifting its variables by
    /// `offset`. The caller allocates the combined variable space.
    pub fn absorb(&mut self, other: &ConstraintSystem, offset: usize) {
        debug_assert!(offset + other.num_vars <= self.num_vars);
        for row in &other.rows {
            let coeffs = row.coeffs.iter().map(|&(v, a)| (v + offset, a)).collect();
            self.push_row(row.label.clone(), row.class, coeffs, row.constant);
        }
        for block in &other.blocks {
            self.add_block(block.iter().map(|&v| v + offset).collect());
        }
        for &(v, hi) in &other.upper {
            self.set_upper_bound(v + offset, hi);
        }
    }

    /// Feasibility program for the rows relaxed uniformly to `F_j ≤ sigma`,
    /// over the structural domain.
    pub fn feasibility_lp(&self, sigma: f64) -> LinearProgram {
        let mut lp = self.domain_lp(Sense::Feasibility);
        self.add_relaxed_rows(&mut lp, sigma);
        lp
    }

    /// Optimization program `sense (objective·x)` subject to the relaxed
    /// rows and the structural domain.
    pub fn objective_lp(&self, objective: &[(usize, f64)], sense: Sense, sigma: f64) -> LinearProgram {
        let mut lp = self.domain_lp(sense);
        for &(v, c) in objective {
            lp.set_objective(v, c).expect("objective variable in range");
        }
        self.add_relaxed_rows(&mut lp, sigma);
        lp
    }

    fn domain_lp(&self, sense: Sense) -> LinearProgram {
        let mut lp = LinearProgram::new(self.num_vars, sense);
        for &(v, hi) in &self.upper {
            lp.set_bounds(v, 0.0, hi).expect("bound variable in range");
        }
        for block in &self.blocks {
            let coeffs: Vec<(usize, f64)> = block.iter().map(|&v| (v, 1.0)).collect();
            lp.add_constraint(coeffs, Rel::Eq, 1.0).expect("block variables in range");
        }
        lp
    }

    fn add_relaxed_rows(&self, lp: &mut LinearProgram, sigma: f64) {
        for row in &self.rows {
            lp.add_constraint(row.coeffs.clone(), Rel::Le, sigma - row.constant)
                .expect("row variables in range");
        }
    }

    pub(crate) fn set_sample_form(&mut self, var_profile: Vec<usize>, profile_prob: Vec<f64>) {
        debug_assert_eq!(var_profile.len(), self.num_vars);
        self.sample = Some(SampleForm { var_profile, profile_prob });
    }

    /// Single-observation row values: entry `p` is `f_j(x; b_p)`, the row
    /// value when the whole sample equals support profile `p`. Available
    /// only on systems built from one scaled bid distribution.
    pub fn row_values_per_profile(&self, row: usize, x: &[f64]) -> Option<Vec<f64>> {
        let form = self.sample.as_ref()?;
        let r = &self.rows[row];
        let mut acc = vec![0.0; form.profile_prob.len()];
        for &(v, a) in &r.coeffs {
            let p = form.var_profile[v];
            if p == usize::MAX {
                // Row touches variables outside the scaled blocks; no
                // per-observation form exists.
                return None;
            }
            acc[p] += a * x[v];
        }
        Some(
            acc.iter()
                .zip(&form.profile_prob)
                .map(|(&s, &w)| s / w + r.constant)
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equality_rows_come_in_pairs() {
        let mut sys = ConstraintSystem::new(2);
        sys.push_equality(
            |positive| RowLabel::ValueConsistency { v: 0, positive },
            vec![(0, -1.0)],
            0.25,
        );
        assert_eq!(sys.rows().len(), 2);
        let x = [0.25, 0.0];
        assert!(sys.rows()[0].value_at(&x).abs() < 1e-15);
        assert!(sys.rows()[1].value_at(&x).abs() < 1e-15);
        let y = [0.5, 0.0];
        assert!(sys.rows()[0].value_at(&y) < 0.0);
        assert!(sys.rows()[1].value_at(&y) > 0.0);
    }

    #[test]
    fn absorb_shifts_variables() {
        let mut a = ConstraintSystem::new(3);
        a.add_block(vec![0]);
        let mut b = ConstraintSystem::new(2);
        b.add_block(vec![0, 1]);
        b.push_row(RowLabel::free("r"), RowClass::BestResponse, vec![(1, 2.0)], -0.5);
        a.absorb(&b, 1);
        assert_eq!(a.blocks(), &[vec![0], vec![1, 2]]);
        assert_eq!(a.rows()[0].coeffs(), &[(2, 2.0)]);
    }

    #[test]
    fn per_profile_row_values_unscale() {
        // Two profiles with φ = (0.25, 0.75); one variable per profile.
        let mut sys = ConstraintSystem::new(2);
        sys.push_row(
            RowLabel::free("r"),
            RowClass::BestResponse,
            vec![(0, 0.25 * 2.0), (1, 0.75 * -1.0)],
            0.1,
        );
        sys.set_sample_form(vec![0, 1], vec![0.25, 0.75]);
        let x = [1.0, 1.0];
        let per = sys.row_values_per_profile(0, &x).unwrap();
        // Profile 0: γ = 2, so f = 2 + 0.1; profile 1: f = -1 + 0.1.
        assert!((per[0] - 2.1).abs() < 1e-12);
        assert!((per[1] + 0.9).abs() < 1e-12);
        // φ-weighted average equals the row value.
        let avg = 0.25 * per[0] + 0.75 * per[1];
        assert!((avg - sys.rows()[0].value_at(&x)).abs() < 1e-12);
    }
}
