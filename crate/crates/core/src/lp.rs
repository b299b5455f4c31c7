//! Dense linear programs with box-bounded variables and a handful of rows.
//!
//! The reweighing problems have the shape `min c'x` subject to one or two
//! functional constraints and `0 <= x_i <= u_i`, with `n` up to the training
//! set size. Two independent solution paths are provided:
//!
//! - [`solve`]: a two-phase bounded-variable simplex. The basis never has
//!   more than `m` columns (here `m <= 2`), so every iteration is an `O(n m)`
//!   pricing pass plus a tiny pivot. Bland's rule keeps it from cycling.
//! - [`dual_value`]: maximizes the Lagrangian dual directly. With the box
//!   bounds, the inner minimum is closed-form and the dual is concave
//!   piecewise-linear in at most two multipliers, so an exact 1-D breakpoint
//!   scan nested in a bisection gives the optimal value to high precision.
//!
//! By strong duality the two values agree on solvable instances; the
//! fairness layer asserts that agreement as a self-check.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Eq,
    Le,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub kind: ConstraintKind,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LpProblem {
    /// Objective coefficients; the solver minimizes.
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// Per-variable upper bounds (lower bounds are all zero).
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Signed feasibility residual per row: `A_r x - b_r` for equalities,
    /// `max(0, A_r x - b_r)` for inequalities.
    pub residuals: Vec<f64>,
}

impl LpProblem {
    fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if n == 0 {
            return Err(Error::LpFailed("no variables".into()));
        }
        if self.upper.len() != n {
            return Err(Error::LpFailed("upper bounds length mismatch".into()));
        }
        for c in &self.constraints {
            if c.coeffs.len() != n {
                return Err(Error::LpFailed("constraint length mismatch".into()));
            }
            if !c.rhs.is_finite() || !c.coeffs.iter().all(|v| v.is_finite()) {
                return Err(Error::LpFailed("non-finite constraint data".into()));
            }
        }
        if !self.upper.iter().all(|u| *u >= 0.0) {
            return Err(Error::LpFailed("negative upper bound".into()));
        }
        Ok(())
    }

    pub fn residuals_at(&self, x: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| {
                let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
                match c.kind {
                    ConstraintKind::Eq => lhs - c.rhs,
                    ConstraintKind::Le => (lhs - c.rhs).max(0.0),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
}

/// Column-oriented view of the expanded problem: structural variables, one
/// slack per inequality row, one artificial per row where needed.
struct Tableau {
    ncols: usize,
    nrows: usize,
    cols: Vec<Vec<f64>>, // per-column coefficients, dense over rows
    cost: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    artificial_start: usize,
}

/// Solves the LP by two-phase bounded-variable simplex.
///
/// `feas_tol` bounds the acceptable phase-1 residual; beyond it the problem
/// reports infeasible with the best residual achieved.
pub fn solve(problem: &LpProblem, feas_tol: f64) -> Result<LpSolution> {
    problem.validate()?;
    let n = problem.objective.len();
    let m = problem.constraints.len();
    if m == 0 {
        // box-only: each variable sits at whichever bound minimizes cost
        let x: Vec<f64> = (0..n)
            .map(|i| if problem.objective[i] < 0.0 { problem.upper[i] } else { 0.0 })
            .collect();
        let objective = x.iter().zip(&problem.objective).map(|(a, b)| a * b).sum();
        return Ok(LpSolution {
            objective,
            residuals: vec![],
            x,
        });
    }

    let n_slack = problem
        .constraints
        .iter()
        .filter(|c| c.kind == ConstraintKind::Le)
        .count();
    let ncols = n + n_slack + m;
    let mut cols = vec![vec![0.0; m]; ncols];
    for (r, c) in problem.constraints.iter().enumerate() {
        for (i, &v) in c.coeffs.iter().enumerate() {
            cols[i][r] = v;
        }
    }
    let mut upper = problem.upper.clone();
    upper.extend(std::iter::repeat_n(f64::INFINITY, n_slack + m));
    let mut rhs = vec![0.0; m];
    let mut slack_idx = n;
    for (r, c) in problem.constraints.iter().enumerate() {
        rhs[r] = c.rhs;
        if c.kind == ConstraintKind::Le {
            cols[slack_idx][r] = 1.0;
            slack_idx += 1;
        }
    }
    // artificial columns: +-1 so the initial basic value is non-negative
    let artificial_start = n + n_slack;
    for r in 0..m {
        cols[artificial_start + r][r] = if rhs[r] >= 0.0 { 1.0 } else { -1.0 };
    }

    let mut tab = Tableau {
        ncols,
        nrows: m,
        cols,
        cost: vec![0.0; ncols],
        upper,
        rhs,

        artificial_start,
    };

    // phase 1: minimize the artificial sum
    for j in artificial_start..ncols {
        tab.cost[j] = 1.0;
    }
    let mut status = vec![VarStatus::AtLower; ncols];
    let mut basis: Vec<usize> = (artificial_start..ncols).collect();
    for &j in &basis {
        status[j] = VarStatus::Basic;
    }
    run_simplex(&tab, &mut basis, &mut status, true)?;
    let x_full = basic_solution(&tab, &basis, &status)?;
    let phase1: f64 = (artificial_start..ncols).map(|j| x_full[j]).sum();
    if phase1 > feas_tol {
        return Err(Error::LpInfeasible { residual: phase1 });
    }

    // phase 2: true objective; artificials are frozen at zero (bound and
    // pricing) so a pivot can never regrow one and lose feasibility
    tab.cost = vec![0.0; ncols];
    tab.cost[..n].copy_from_slice(&problem.objective);
    for j in artificial_start..ncols {
        tab.upper[j] = 0.0;
    }
    run_simplex(&tab, &mut basis, &mut status, false)?;
    let x_full = basic_solution(&tab, &basis, &status)?;
    let x: Vec<f64> = x_full[..n]
        .iter()
        .map(|v| v.clamp(0.0, f64::INFINITY))
        .collect();
    let objective = x.iter().zip(&problem.objective).map(|(a, b)| a * b).sum();
    let residuals = problem.residuals_at(&x);
    let allowance = feas_tol.max(1e-9);
    if let Some(bad) = residuals.iter().find(|r| r.abs() > allowance) {
        return Err(Error::LpFailed(format!(
            "phase 2 lost feasibility: residual {bad:.3e}"
        )));
    }
    Ok(LpSolution {
        x,
        objective,
        residuals,
    })
}

fn invert_basis(tab: &Tableau, basis: &[usize]) -> Result<Vec<Vec<f64>>> {
    let m = tab.nrows;
    // Gauss-Jordan on [B | I]; m is at most a handful
    let mut a = vec![vec![0.0; 2 * m]; m];
    for (k, &j) in basis.iter().enumerate() {
        for r in 0..m {
            a[r][k] = tab.cols[j][r];
        }
    }
    for r in 0..m {
        a[r][m + r] = 1.0;
    }
    for col in 0..m {
        let mut piv = col;
        for r in col + 1..m {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() < PIVOT_TOL {
            return Err(Error::LpFailed("singular basis".into()));
        }
        a.swap(col, piv);
        let d = a[col][col];
        for c in 0..2 * m {
            a[col][c] /= d;
        }
        for r in 0..m {
            if r != col && a[r][col] != 0.0 {
                let f = a[r][col];
                for c in 0..2 * m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Ok((0..m)
        .map(|r| (0..m).map(|c| a[r][m + c]).collect())
        .collect())
}

fn basic_solution(tab: &Tableau, basis: &[usize], status: &[VarStatus]) -> Result<Vec<f64>> {
    let m = tab.nrows;
    let binv = invert_basis(tab, basis)?;
    // residual rhs after nonbasic contributions
    let mut r = tab.rhs.clone();
    for j in 0..tab.ncols {
        if status[j] == VarStatus::AtUpper {
            let u = tab.upper[j];
            for row in 0..m {
                r[row] -= tab.cols[j][row] * u;
            }
        }
    }
    let mut x = vec![0.0; tab.ncols];
    for j in 0..tab.ncols {
        if status[j] == VarStatus::AtUpper {
            x[j] = tab.upper[j];
        }
    }
    for (k, &j) in basis.iter().enumerate() {
        let mut v = 0.0;
        for row in 0..m {
            v += binv[k][row] * r[row];
        }
        x[j] = v;
    }
    Ok(x)
}

/// Bounded-variable simplex with Bland's rule. Mutates basis and statuses in
/// place; `phase1` bars nothing, phase 2 bars artificial columns.
fn run_simplex(
    tab: &Tableau,
    basis: &mut [usize],
    status: &mut [VarStatus],
    phase1: bool,
) -> Result<()> {
    let m = tab.nrows;
    let max_pivots = 200 * (tab.ncols + m) + 1000;
    for _ in 0..max_pivots {
        let binv = invert_basis(tab, basis)?;
        let x = basic_solution(tab, basis, status)?;

        // duals y = c_B' B^{-1}
        let mut y = vec![0.0; m];
        for row in 0..m {
            for (k, &j) in basis.iter().enumerate() {
                y[row] += tab.cost[j] * binv[k][row];
            }
        }

        // entering variable (Bland: lowest eligible index)
        let mut entering: Option<(usize, bool)> = None; // (col, increasing)
        for j in 0..tab.ncols {
            if status[j] == VarStatus::Basic {
                continue;
            }
            if !phase1 && j >= tab.artificial_start {
                continue;
            }
            let mut d = tab.cost[j];
            for row in 0..m {
                d -= y[row] * tab.cols[j][row];
            }
            match status[j] {
                VarStatus::AtLower if d < -COST_TOL => {
                    entering = Some((j, true));
                    break;
                }
                VarStatus::AtUpper if d > COST_TOL => {
                    entering = Some((j, false));
                    break;
                }
                _ => {}
            }
        }
        let Some((enter, increasing)) = entering else {
            return Ok(());
        };

        // direction of basic variables as entering moves by +t
        let mut w = vec![0.0; m];
        for k in 0..m {
            for row in 0..m {
                w[k] += binv[k][row] * tab.cols[enter][row];
            }
        }
        let dir = if increasing { 1.0 } else { -1.0 };

        // ratio test: entering's own bound span, then each basic bound;
        // ties break toward the lowest variable index (Bland)
        let mut t_max = tab.upper[enter];
        let mut leaving: Option<(usize, VarStatus)> = None; // basis slot, bound hit
        for (k, &j) in basis.iter().enumerate() {
            let delta = -dir * w[k]; // change of basic k per unit t
            let (t, bound) = if delta < -PIVOT_TOL {
                (x[j] / (-delta), VarStatus::AtLower)
            } else if delta > PIVOT_TOL && tab.upper[j].is_finite() {
                ((tab.upper[j] - x[j]) / delta, VarStatus::AtUpper)
            } else {
                continue;
            };
            let t = t.max(0.0);
            let replace = match leaving {
                None => t < t_max,
                Some((slot, _)) => {
                    t < t_max - PIVOT_TOL || (t <= t_max + PIVOT_TOL && j < basis[slot])
                }
            };
            if replace {
                t_max = t.min(t_max);
                leaving = Some((k, bound));
            }
        }

        if !t_max.is_finite() {
            return Err(Error::LpFailed("unbounded ray in simplex".into()));
        }

        match leaving {
            None => {
                // bound flip: entering runs to its opposite bound
                status[enter] = if increasing {
                    VarStatus::AtUpper
                } else {
                    VarStatus::AtLower
                };
            }
            Some((slot, bound)) => {
                let old = basis[slot];
                status[old] = bound;
                basis[slot] = enter;
                status[enter] = VarStatus::Basic;
            }
        }
    }
    Err(Error::LpFailed("simplex iteration limit".into()))
}

/// Optimal value of the Lagrangian dual, computed independently of the
/// simplex. Returns `Err(LpInfeasible)` when the dual is unbounded above
/// (primal infeasible). Supports one or two constraint rows.
pub fn dual_value(problem: &LpProblem) -> Result<f64> {
    problem.validate()?;
    match problem.constraints.len() {
        0 => Ok(problem
            .objective
            .iter()
            .zip(&problem.upper)
            .map(|(c, u)| u * c.min(0.0))
            .sum()),
        1 => Ok(max_over_one(problem, 0, &[], &[])?.1),
        2 => max_over_two(problem),
        _ => Err(Error::LpFailed(
            "dual search supports at most two rows".into(),
        )),
    }
}

/// Dual value at fixed multipliers.
fn dual_at(problem: &LpProblem, y: &[f64]) -> f64 {
    let n = problem.objective.len();
    let mut total = 0.0;
    for (r, c) in problem.constraints.iter().enumerate() {
        total -= y[r] * c.rhs;
    }
    for i in 0..n {
        let mut t = problem.objective[i];
        for (r, c) in problem.constraints.iter().enumerate() {
            t += y[r] * c.coeffs[i];
        }
        total += problem.upper[i] * t.min(0.0);
    }
    total
}

/// Exact maximization of the dual over multiplier `row`, the others fixed at
/// `fixed_vals` (indexed by `fixed_rows`). Returns `(argmax, max)`.
/// Uses the breakpoint scan: the derivative is a step function of the
/// multiplier, non-increasing by concavity.
fn max_over_one(
    problem: &LpProblem,
    row: usize,
    fixed_rows: &[usize],
    fixed_vals: &[f64],
) -> Result<(f64, f64)> {
    let n = problem.objective.len();
    let c = &problem.constraints[row];
    let nonneg = c.kind == ConstraintKind::Le;

    // term_i(y) = obj_i + rest_i + A_row,i * y
    let mut rest = problem.objective.clone();
    for (pos, &fr) in fixed_rows.iter().enumerate() {
        let fc = &problem.constraints[fr];
        for i in 0..n {
            rest[i] += fixed_vals[pos] * fc.coeffs[i];
        }
    }

    // the derivative of g along y is the non-increasing step function
    //   deriv(y) = -b_row + sum over {i : term_i(y) < 0} of u_i A_row,i
    // breakpoints are the roots of the terms; each crossing lowers deriv by
    // u_i |A_row,i|
    let mut breaks: Vec<(f64, f64)> = Vec::new(); // (y, derivative drop)
    let mut deriv = -c.rhs;
    let mut drop_scale = c.rhs.abs();
    for i in 0..n {
        let a = c.coeffs[i];
        if a.abs() < 1e-300 || problem.upper[i] == 0.0 {
            continue;
        }
        let yb = -rest[i] / a;
        breaks.push((yb, problem.upper[i] * a.abs()));
        if a > 0.0 {
            // active at y -> -inf
            deriv += problem.upper[i] * a;
        }
        drop_scale += problem.upper[i] * a.abs();
    }
    breaks.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    let tol = 1e-12 * drop_scale.max(1.0);

    let eval = |y: f64| -> f64 {
        let mut ys = vec![0.0; problem.constraints.len()];
        ys[row] = y;
        for (pos, &fr) in fixed_rows.iter().enumerate() {
            ys[fr] = fixed_vals[pos];
        }
        dual_at(problem, &ys)
    };

    // locate the sign change of the derivative
    let y_cross = if deriv <= tol {
        // non-increasing from the far left
        if nonneg {
            Some(0.0)
        } else if deriv >= -tol {
            // flat leftmost segment: its right end attains the max
            Some(breaks.first().map_or(0.0, |b| b.0))
        } else {
            None // g grows without bound toward -inf
        }
    } else {
        let mut found = None;
        for &(yb, d) in &breaks {
            deriv -= d;
            if deriv <= tol {
                found = Some(yb);
                break;
            }
        }
        found // None: still increasing at +inf
    };

    match y_cross {
        Some(y) => {
            let y_star = if nonneg { y.max(0.0) } else { y };
            Ok((y_star, eval(y_star)))
        }
        None => Err(Error::LpInfeasible {
            residual: f64::INFINITY,
        }),
    }
}

/// Maximization over two multipliers: exact scan in row 0 nested inside a
/// ternary search over row 1. The outer function
/// `h(y1) = max over y0 of g(y0, y1)` is concave (partial maximization of a
/// jointly concave function) and evaluated exactly, so ternary search is
/// safe even across its plateaus.
fn max_over_two(problem: &LpProblem) -> Result<f64> {
    let outer_nonneg = problem.constraints[1].kind == ConstraintKind::Le;
    let h = |y1: f64| -> Result<f64> { Ok(max_over_one(problem, 0, &[1], &[y1])?.1) };

    // bracket a maximizer: expand while the value still improves outward;
    // piecewise linearity means an endlessly improving direction is a ray of
    // unbounded dual growth, i.e. primal infeasibility
    let mut hi = 1.0;
    while h(hi)? > h(hi / 2.0)? {
        hi *= 4.0;
        if hi > 1e18 {
            return Err(Error::LpInfeasible {
                residual: f64::INFINITY,
            });
        }
    }
    let mut lo = if outer_nonneg {
        0.0
    } else {
        let mut lo = -1.0;
        while h(lo)? > h(lo / 2.0)? {
            lo *= 4.0;
            if lo < -1e18 {
                return Err(Error::LpInfeasible {
                    residual: f64::INFINITY,
                });
            }
        }
        lo
    };

    let mut best = h(lo)?.max(h(hi)?);
    for _ in 0..300 {
        if (hi - lo).abs() <= 1e-13 * (1.0 + lo.abs() + hi.abs()) {
            break;
        }
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        let v1 = h(m1)?;
        let v2 = h(m2)?;
        best = best.max(v1).max(v2);
        if v1 < v2 {
            lo = m1;
        } else if v1 > v2 {
            hi = m2;
        } else {
            lo = m1;
            hi = m2;
        }
    }
    best = best.max(h(0.5 * (lo + hi))?);
    Ok(best)
}
