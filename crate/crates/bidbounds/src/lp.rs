//! Sparse linear programs and the solver contract.
//!
//! Every identification query in this crate reduces to linear programs over
//! probability kernels. This module owns the program representation, the
//! backend solve (a sparse revised simplex), an independent post-solve
//! feasibility audit, the epigraph minimax value, and a plain-text dump in
//! the fixed "LP file" format for debugging.
//!
//! The audit is the contract: a solution is reported `Optimal` only if the
//! returned point satisfies every constraint within [`FEASIBILITY_TOL`],
//! regardless of what the backend claimed.

use std::io::{self, Write};

use thiserror::Error;

/// Post-solve feasibility tolerance. Solutions violating any constraint by
/// more than this are rejected as solver errors, never mis-reported as
/// optimal. Surfaced in every identified-set result.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Optimization sense. `Feasibility` solves with a zero objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
    Feasibility,
}

/// Constraint relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Eq,
    Ge,
}

/// One sparse constraint row: `Σ coeffs · x  rel  rhs`.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub rel: Rel,
    pub rhs: f64,
}

/// Errors from program construction or the backend solve.
#[derive(Debug, Error)]
pub enum LpError {
    #[error("variable index {index} out of range ({num_vars} variables)")]
    VarIndex { index: usize, num_vars: usize },
    #[error("coefficient or bound is not finite")]
    NonFinite,
    #[error("minimax requires at least one constraint row")]
    EmptySystem,
    #[error("solver error: {0}")]
    Numerical(String),
    #[error(
        "solver reported an optimum violating constraints by {violation:.3e} \
         (tolerance {tol:.3e})"
    )]
    ViolatedOptimum { violation: f64, tol: f64 },
}

/// Outcome status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// A solved program. `point` and `objective` are meaningful only when
/// `status == Optimal`; `max_violation` is the audited worst constraint or
/// bound violation at the returned point.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub point: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
}

impl LpSolution {
    fn non_optimal(status: LpStatus) -> Self {
        Self { status, point: Vec::new(), objective: f64::NAN, max_violation: 0.0 }
    }
}

/// A sparse linear program. Variables default to bounds `[0, +inf)`, the
/// natural domain for probability mass; override with [`set_bounds`].
///
/// [`set_bounds`]: LinearProgram::set_bounds
#[derive(Debug, Clone)]
pub struct LinearProgram {
    num_vars: usize,
    sense: Sense,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    pub fn new(num_vars: usize, sense: Sense) -> Self {
        Self {
            num_vars,
            sense,
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    fn check_var(&self, index: usize) -> Result<(), LpError> {
        if index >= self.num_vars {
            return Err(LpError::VarIndex { index, num_vars: self.num_vars });
        }
        Ok(())
    }

    pub fn set_objective(&mut self, var: usize, coef: f64) -> Result<(), LpError> {
        self.check_var(var)?;
        if !coef.is_finite() {
            return Err(LpError::NonFinite);
        }
        self.objective[var] = coef;
        Ok(())
    }

    /// Bounds may be infinite on either side.
    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) -> Result<(), LpError> {
        self.check_var(var)?;
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(LpError::NonFinite);
        }
        self.bounds[var] = (lo, hi);
        Ok(())
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, rel: Rel, rhs: f64) -> Result<(), LpError> {
        for &(v, c) in &coeffs {
            self.check_var(v)?;
            if !c.is_finite() {
                return Err(LpError::NonFinite);
            }
        }
        if !rhs.is_finite() {
            return Err(LpError::NonFinite);
        }
        self.constraints.push(Constraint { coeffs, rel, rhs });
        Ok(())
    }

    /// Worst violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().map(|&(v, a)| a * x[v]).sum();
            let gap = match c.rel {
                Rel::Le => lhs - c.rhs,
                Rel::Ge => c.rhs - lhs,
                Rel::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(gap);
        }
        for (v, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_finite() {
                worst = worst.max(lo - x[v]);
            }
            if hi.is_finite() {
                worst = worst.max(x[v] - hi);
            }
        }
        worst
    }

    /// Objective value at `x` under the program's own sense.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Writes the program in the fixed LP file text format.
    pub fn write_lp_format(&self, w: &mut impl Write) -> io::Result<()> {
        match self.sense {
            Sense::Minimize | Sense::Feasibility => writeln!(w, "Minimize")?,
            Sense::Maximize => writeln!(w, "Maximize")?,
        }
        write!(w, " obj:")?;
        let mut wrote_term = false;
        for (v, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                write_term(w, c, v, !wrote_term)?;
                wrote_term = true;
            }
        }
        if !wrote_term {
            // The format requires at least one objective term.
            write!(w, " 0 x0")?;
        }
        writeln!(w)?;
        writeln!(w, "Subject To")?;
        for (j, c) in self.constraints.iter().enumerate() {
            write!(w, " c{j}:")?;
            let mut first = true;
            for &(v, a) in &c.coeffs {
                if a != 0.0 {
                    write_term(w, a, v, first)?;
                    first = false;
                }
            }
            if first {
                write!(w, " 0 x0")?;
            }
            let rel = match c.rel {
                Rel::Le => "<=",
                Rel::Eq => "=",
                Rel::Ge => ">=",
            };
            writeln!(w, " {} {}", rel, c.rhs)?;
        }
        writeln!(w, "Bounds")?;
        for (v, &(lo, hi)) in self.bounds.iter().enumerate() {
            match (lo == 0.0, hi.is_infinite()) {
                // Default `0 <= x` needs no line.
                (true, true) => {}
                (true, false) => writeln!(w, " x{v} <= {hi}")?,
                (false, _) => {
                    if lo.is_infinite() && hi.is_infinite() {
                        writeln!(w, " x{v} free")?;
                    } else if lo.is_infinite() {
                        writeln!(w, " -inf <= x{v} <= {hi}")?;
                    } else if hi.is_infinite() {
                        writeln!(w, " x{v} >= {lo}")?;
                    } else {
                        writeln!(w, " {lo} <= x{v} <= {hi}")?;
                    }
                }
            }
        }
        writeln!(w, "End")
    }
}

fn write_term(w: &mut impl Write, c: f64, var: usize, first: bool) -> io::Result<()> {
    if first {
        if c < 0.0 {
            write!(w, " -{} x{var}", fmt_mag(c))
        } else {
            write!(w, " {} x{var}", fmt_mag(c))
        }
    } else if c < 0.0 {
        write!(w, " - {} x{var}", fmt_mag(c))
    } else {
        write!(w, " + {} x{var}", fmt_mag(c))
    }
}

fn fmt_mag(c: f64) -> String {
    format!("{}", c.abs())
}

/// Solves the program with the sparse simplex backend, then audits the
/// returned point. Deterministic for a fixed program.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let direction = match lp.sense {
        Sense::Minimize | Sense::Feasibility => microlp::OptimizationDirection::Minimize,
        Sense::Maximize => microlp::OptimizationDirection::Maximize,
    };
    let mut problem = microlp::Problem::new(direction);
    let vars: Vec<microlp::Variable> = (0..lp.num_vars)
        .map(|v| {
            let obj = if lp.sense == Sense::Feasibility { 0.0 } else { lp.objective[v] };
            problem.add_var(obj, lp.bounds[v])
        })
        .collect();
    for c in &lp.constraints {
        let expr: Vec<(microlp::Variable, f64)> =
            c.coeffs.iter().map(|&(v, a)| (vars[v], a)).collect();
        let op = match c.rel {
            Rel::Le => microlp::ComparisonOp::Le,
            Rel::Eq => microlp::ComparisonOp::Eq,
            Rel::Ge => microlp::ComparisonOp::Ge,
        };
        problem.add_constraint(expr, op, c.rhs);
    }
    match problem.solve() {
        Ok(microlp::SolveOutcome::Solution(solution)) => {
            let point: Vec<f64> = vars.iter().map(|&v| solution.var_value(v)).collect();
            let max_violation = lp.max_violation(&point);
            if max_violation > FEASIBILITY_TOL {
                return Err(LpError::ViolatedOptimum { violation: max_violation, tol: FEASIBILITY_TOL });
            }
            let objective = if lp.sense == Sense::Feasibility { 0.0 } else { lp.objective_at(&point) };
            Ok(LpSolution { status: LpStatus::Optimal, point, objective, max_violation })
        }
        Ok(microlp::SolveOutcome::Interrupted(_)) => {
            Err(LpError::Numerical("solver hit a limit before finding an assignment".into()))
        }
        Err(microlp::Error::Infeasible) => Ok(LpSolution::non_optimal(LpStatus::Infeasible)),
        Err(microlp::Error::Unbounded) => Ok(LpSolution::non_optimal(LpStatus::Unbounded)),
        Err(other) => Err(LpError::Numerical(other.to_string())),
    }
}

/// Minimum over admissible `x` of the largest row value `F_j(x)`, computed
/// through the epigraph program `min t  s.t.  F_j(x) ≤ t`. The result is
/// the smallest uniform tolerance making the row system feasible; it is
/// `≤ 0` exactly when the system is feasible as stated.
pub fn minimax_value(system: &crate::sharp::ConstraintSystem) -> Result<f64, LpError> {
    let solution = minimax_solution(system)?;
    Ok(solution.objective)
}

/// Epigraph solve returning the full solution; `point` holds the kernel
/// variables followed by the epigraph variable `t`.
pub fn minimax_solution(system: &crate::sharp::ConstraintSystem) -> Result<LpSolution, LpError> {
    if system.rows().is_empty() {
        return Err(LpError::EmptySystem);
    }
    let n = system.num_vars();
    let t = n;
    let mut lp = LinearProgram::new(n + 1, Sense::Minimize);
    lp.set_objective(t, 1.0)?;
    lp.set_bounds(t, f64::NEG_INFINITY, f64::INFINITY)?;
    for (v, hi) in system.upper_bounds() {
        lp.set_bounds(v, 0.0, hi)?;
    }
    for row in system.rows() {
        // F_j(x) = coeffs·x + constant ≤ t
        let mut coeffs = row.coeffs().to_vec();
        coeffs.push((t, -1.0));
        lp.add_constraint(coeffs, Rel::Le, -row.constant())?;
    }
    for block in system.blocks() {
        let coeffs: Vec<(usize, f64)> = block.iter().map(|&v| (v, 1.0)).collect();
        lp.add_constraint(coeffs, Rel::Eq, 1.0)?;
    }
    let solution = solve(&lp)?;
    match solution.status {
        LpStatus::Optimal => Ok(solution),
        // Probability blocks are compact and t tracks the max row, so the
        // epigraph program is feasible and bounded unless the system
        // declares contradictory structure (e.g. empty blocks).
        LpStatus::Infeasible => Err(LpError::Numerical("epigraph program reported infeasible".into())),
        LpStatus::Unbounded => Err(LpError::Numerical("epigraph program reported unbounded".into())),
    }
}
