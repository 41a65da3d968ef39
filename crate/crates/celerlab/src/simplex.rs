//! Dense phase-I simplex for linear feasibility systems.
//!
//! Solves "does `x >= 0` exist with `A_eq x = b_eq` and `A_ub x <= b_ub`" by
//! minimizing the sum of artificial variables. Pivoting is Dantzig's rule
//! with a deterministic tie-break, falling back to Bland's rule when the
//! objective stalls, so the method terminates and is reproducible bit for
//! bit on identical input.

/// Sparse constraint row: (variable index, coefficient) terms and a RHS.
pub type Row = (Vec<(usize, f64)>, f64);

#[derive(Debug, Clone, Default)]
pub struct FeasibilityProblem {
    pub num_vars: usize,
    pub equalities: Vec<Row>,
    pub inequalities: Vec<Row>,
}

#[derive(Debug, Clone)]
pub enum FeasibilityOutcome {
    /// A feasible point, one value per structural variable.
    Feasible(Vec<f64>),
    /// No feasible point; the residual violations at the phase-I optimum.
    Infeasible { max_violation: f64 },
}

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-8;

pub fn solve_feasibility(problem: &FeasibilityProblem) -> FeasibilityOutcome {
    let m = problem.equalities.len() + problem.inequalities.len();
    let n = problem.num_vars;
    let num_slacks = problem.inequalities.len();
    // Column layout: structural | slacks | artificials; artificials are added
    // lazily, one per row that needs one.
    let mut artificial_cols: Vec<Option<usize>> = vec![None; m];
    let mut next_col = n + num_slacks;
    let mut rows_data: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
    let mut rhs: Vec<f64> = Vec::with_capacity(m);
    let mut basis: Vec<usize> = Vec::with_capacity(m);

    for (row_idx, (terms, b)) in problem.equalities.iter().enumerate() {
        let negate = *b < 0.0;
        let sign = if negate { -1.0 } else { 1.0 };
        let data: Vec<(usize, f64)> = terms.iter().map(|&(j, c)| (j, sign * c)).collect();
        rows_data.push(data);
        rhs.push(sign * b);
        let art = next_col;
        next_col += 1;
        artificial_cols[row_idx] = Some(art);
        basis.push(art);
    }
    for (k, (terms, b)) in problem.inequalities.iter().enumerate() {
        let row_idx = problem.equalities.len() + k;
        let slack_col = n + k;
        if *b >= 0.0 {
            let mut data: Vec<(usize, f64)> = terms.clone();
            data.push((slack_col, 1.0));
            rows_data.push(data);
            rhs.push(*b);
            basis.push(slack_col);
        } else {
            // Negate: -terms - slack = -b (> 0), needs an artificial basis.
            let mut data: Vec<(usize, f64)> = terms.iter().map(|&(j, c)| (j, -c)).collect();
            data.push((slack_col, -1.0));
            rows_data.push(data);
            rhs.push(-b);
            let art = next_col;
            next_col += 1;
            artificial_cols[row_idx] = Some(art);
            basis.push(art);
        }
    }
    let total_cols = next_col;

    // Dense tableau: m constraint rows plus the phase-I objective row.
    let width = total_cols + 1;
    let mut t = vec![0.0f64; (m + 1) * width];
    for (r, data) in rows_data.iter().enumerate() {
        for &(j, c) in data {
            t[r * width + j] += c;
        }
        t[r * width + total_cols] = rhs[r];
        if let Some(art) = artificial_cols[r] {
            t[r * width + art] = 1.0;
        }
    }
    // Objective: minimize sum of artificials. Price out the artificial basis
    // so reduced costs start consistent: obj_row = sum of artificial rows,
    // negated under the "maximize -sum" convention used below.
    let obj = m;
    for r in 0..m {
        if artificial_cols[r].is_some() {
            for j in 0..width {
                t[obj * width + j] -= t[r * width + j];
            }
        }
    }
    for art in artificial_cols.iter().flatten() {
        t[obj * width + art] = 0.0;
    }

    let mut bland = false;
    let mut stall = 0usize;
    let stall_limit = 4 * (m + total_cols) + 64;
    let max_iters = 2000 * (m + total_cols) + 10_000;
    let mut last_obj = f64::INFINITY;

    for _iter in 0..max_iters {
        // Entering column: most negative reduced cost (Dantzig) or first
        // negative (Bland). Artificials never re-enter.
        let mut entering: Option<usize> = None;
        let mut best = -PIVOT_TOL;
        for j in 0..total_cols {
            if j >= n + num_slacks {
                continue;
            }
            let rc = t[obj * width + j];
            if bland {
                if rc < -PIVOT_TOL {
                    entering = Some(j);
                    break;
                }
            } else if rc < best {
                best = rc;
                entering = Some(j);
            }
        }
        let Some(enter) = entering else { break };

        // Ratio test; ties resolved toward the smallest basis variable so
        // the walk is deterministic and (under Bland) cannot cycle.
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for r in 0..m {
            let a = t[r * width + enter];
            if a > PIVOT_TOL {
                let ratio = t[r * width + total_cols] / a;
                let better = ratio < best_ratio - PIVOT_TOL
                    || (ratio < best_ratio + PIVOT_TOL
                        && leave.is_none_or(|lr| basis[r] < basis[lr]));
                if better {
                    best_ratio = ratio;
                    leave = Some(r);
                }
            }
        }
        let Some(pivot_row) = leave else {
            // Unbounded direction cannot reduce a sum of non-negative
            // artificials below zero; treat as converged.
            break;
        };

        // Pivot.
        let pivot = t[pivot_row * width + enter];
        for j in 0..width {
            t[pivot_row * width + j] /= pivot;
        }
        for r in 0..=m {
            if r == pivot_row {
                continue;
            }
            let factor = t[r * width + enter];
            if factor != 0.0 {
                for j in 0..width {
                    t[r * width + j] -= factor * t[pivot_row * width + j];
                }
            }
        }
        basis[pivot_row] = enter;

        let current = -t[obj * width + total_cols];
        if current < last_obj - PIVOT_TOL {
            last_obj = current;
            stall = 0;
        } else {
            stall += 1;
            if stall > stall_limit {
                bland = true;
            }
        }
    }

    // Phase-I value: sum of artificial basic variables.
    let mut total = 0.0f64;
    let mut max_violation = 0.0f64;
    for r in 0..m {
        if basis[r] >= n + num_slacks {
            let v = t[r * width + total_cols].max(0.0);
            total += v;
            max_violation = max_violation.max(v);
        }
    }
    if total <= FEAS_TOL {
        let mut x = vec![0.0f64; n];
        for r in 0..m {
            if basis[r] < n {
                x[basis[r]] = t[r * width + total_cols].max(0.0);
            }
        }
        FeasibilityOutcome::Feasible(x)
    } else {
        FeasibilityOutcome::Infeasible { max_violation }
    }
}
