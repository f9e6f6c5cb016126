//! Exhaustive MILP oracle.
//!
//! Every integer assignment is enumerated in lexicographic order (lowest id
//! most significant, ascending values). The continuous remainder of each
//! assignment is solved by a small dense tableau simplex with Bland's rule
//! that shares no code with [`crate::solve_lp`], so the two solvers can check
//! each other.

use crate::error::MilpError;
use crate::expr::rational_to_f64;
use crate::problem::{Problem, Sense, VarKind};
use crate::solution::{SolveStatus, Solution, SolverParams};

pub const BRUTE_FORCE_MAX_BINARIES: usize = 24;
pub const BRUTE_FORCE_MAX_ASSIGNMENTS: u64 = 1 << 24;

const TOL: f64 = 1e-9;

pub fn brute_force_milp(problem: &Problem, params: &SolverParams) -> Result<Solution, MilpError> {
    params.validate()?;
    let binaries = problem.count_kind(VarKind::Binary);
    if binaries > BRUTE_FORCE_MAX_BINARIES {
        return Err(MilpError::TooLarge(format!(
            "{binaries} binaries exceed the enumeration limit of {BRUTE_FORCE_MAX_BINARIES}"
        )));
    }
    let n = problem.num_variables();
    let mut int_vars = Vec::new();
    let mut ranges = Vec::new();
    let mut assignments: u64 = 1;
    let mut cont_vars = Vec::new();
    for v in problem.variables() {
        let lo = v.lower.map(rational_to_f64);
        let hi = v.upper.map(rational_to_f64);
        if v.kind.is_integral() {
            let (Some(lo), Some(hi)) = (lo, hi) else {
                return Err(MilpError::UnboundedInteger(v.name.clone()));
            };
            let (lo, hi) = ((lo - params.integrality_tol).ceil(), (hi + params.integrality_tol).floor());
            let size = if hi >= lo { (hi - lo) as u64 + 1 } else { 0 };
            assignments = assignments.saturating_mul(size);
            if assignments > BRUTE_FORCE_MAX_ASSIGNMENTS {
                return Err(MilpError::TooLarge(format!(
                    "more than {BRUTE_FORCE_MAX_ASSIGNMENTS} integer assignments"
                )));
            }
            int_vars.push(v.id.index());
            ranges.push((lo, hi));
        } else {
            cont_vars.push((v.id.index(), lo, hi));
        }
    }

    let rows: Vec<(Vec<(usize, f64)>, Sense, f64)> = problem
        .constraints()
        .iter()
        .map(|r| {
            let terms = r.expr.terms().iter().map(|&(v, c)| (v.index(), rational_to_f64(c))).collect();
            (terms, r.sense, rational_to_f64(r.rhs))
        })
        .collect();
    let mut cost = vec![0.0; n];
    for &(v, c) in problem.objective().terms() {
        cost[v.index()] = rational_to_f64(c);
    }
    let constant = rational_to_f64(problem.objective().constant_term());
    let mut cont_pos = vec![usize::MAX; n];
    for (k, &(j, _, _)) in cont_vars.iter().enumerate() {
        cont_pos[j] = k;
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut values = vec![0.0; n];
    let mut counter = vec![0u64; int_vars.len()];
    let mut visited = 0u64;
    if assignments > 0 {
        loop {
            visited += 1;
            for (k, &j) in int_vars.iter().enumerate() {
                values[j] = ranges[k].0 + counter[k] as f64;
            }
            match solve_residual(&rows, &cost, &cont_vars, &cont_pos, &mut values) {
                Residual::Infeasible => {}
                Residual::Unbounded => {
                    let mut sol = Solution::without_values(SolveStatus::Unbounded, problem);
                    sol.nodes = visited;
                    return Ok(sol);
                }
                Residual::Optimal => {
                    let obj = constant + cost.iter().zip(&values).map(|(c, x)| c * x).sum::<f64>();
                    let better = best.as_ref().is_none_or(|(b, _)| obj < b - TOL * b.abs().max(1.0));
                    if better {
                        best = Some((obj, values.clone()));
                    }
                }
            }
            // odometer, last integer variable least significant
            let mut k = int_vars.len();
            let mut carried = true;
            while k > 0 && carried {
                k -= 1;
                counter[k] += 1;
                if ranges[k].0 + counter[k] as f64 > ranges[k].1 {
                    counter[k] = 0;
                } else {
                    carried = false;
                }
            }
            if carried {
                break;
            }
        }
    }

    Ok(match best {
        Some((obj, values)) => {
            let reported = problem.report_objective(obj);
            Solution {
                status: SolveStatus::Optimal,
                values: Some(values),
                objective: reported,
                bound: reported,
                nodes: visited,
                lp_iterations: 0,
            }
        }
        None => Solution {
            nodes: visited,
            ..Solution::without_values(SolveStatus::Infeasible, problem)
        },
    })
}

enum Residual {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solves for the continuous variables with the integer part of `values`
/// fixed, writing the continuous optimum into `values`.
fn solve_residual(
    rows: &[(Vec<(usize, f64)>, Sense, f64)],
    cost: &[f64],
    cont_vars: &[(usize, Option<f64>, Option<f64>)],
    cont_pos: &[usize],
    values: &mut [f64],
) -> Residual {
    // Substitute each continuous variable by nonnegative columns:
    // lo + y, hi - y, or y_plus - y_minus when free.
    let mut columns: Vec<(usize, f64)> = Vec::new(); // (continuous index, sign)
    let mut offset = vec![0.0; cont_vars.len()];
    let mut first_col = vec![0usize; cont_vars.len()];
    let mut extra_rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for (k, &(_, lo, hi)) in cont_vars.iter().enumerate() {
        first_col[k] = columns.len();
        match (lo, hi) {
            (Some(lo), hi) => {
                offset[k] = lo;
                columns.push((k, 1.0));
                if let Some(hi) = hi {
                    extra_rows.push((vec![(first_col[k], 1.0)], hi - lo));
                }
            }
            (None, Some(hi)) => {
                offset[k] = hi;
                columns.push((k, -1.0));
            }
            (None, None) => {
                columns.push((k, 1.0));
                columns.push((k, -1.0));
            }
        }
    }
    let ncols = columns.len();
    let col_of = |k: usize| -> Vec<(usize, f64)> {
        let c = first_col[k];
        if c + 1 < ncols && columns[c + 1].0 == k {
            vec![(c, columns[c].1), (c + 1, columns[c + 1].1)]
        } else {
            vec![(c, columns[c].1)]
        }
    };

    // dense rows over the substituted columns: a x (sense) b
    let mut dense: Vec<(Vec<f64>, Sense, f64)> = Vec::with_capacity(rows.len() + extra_rows.len());
    for (terms, sense, rhs) in rows {
        let mut a = vec![0.0; ncols];
        let mut b = *rhs;
        for &(j, c) in terms {
            let k = cont_pos[j];
            if k == usize::MAX {
                b -= c * values[j];
            } else {
                b -= c * offset[k];
                for (col, s) in col_of(k) {
                    a[col] += c * s;
                }
            }
        }
        if ncols == 0 {
            let ok = match sense {
                Sense::Le => b >= -1e-9,
                Sense::Ge => b <= 1e-9,
                Sense::Eq => b.abs() <= 1e-9,
            };
            if !ok {
                return Residual::Infeasible;
            }
            continue;
        }
        dense.push((a, *sense, b));
    }
    if ncols == 0 {
        return Residual::Optimal;
    }
    for (terms, b) in extra_rows {
        let mut a = vec![0.0; ncols];
        for (c, v) in terms {
            a[c] = v;
        }
        dense.push((a, Sense::Le, b));
    }
    let mut obj = vec![0.0; ncols];
    for (k, &(j, _, _)) in cont_vars.iter().enumerate() {
        for (col, s) in col_of(k) {
            obj[col] += cost[j] * s;
        }
    }

    match tableau_simplex(&dense, &obj) {
        Tableau::Infeasible => Residual::Infeasible,
        Tableau::Unbounded => Residual::Unbounded,
        Tableau::Optimal(x) => {
            for (k, &(j, _, _)) in cont_vars.iter().enumerate() {
                let mut v = offset[k];
                for (col, s) in col_of(k) {
                    v += s * x[col];
                }
                values[j] = v;
            }
            Residual::Optimal
        }
    }
}

enum Tableau {
    Optimal(Vec<f64>),
    Infeasible,
    Unbounded,
}

/// Two-phase dense tableau simplex for `min c x, rows, x >= 0`, Bland's rule
/// throughout. One slack per inequality and one artificial per row.
fn tableau_simplex(rows: &[(Vec<f64>, Sense, f64)], cost: &[f64]) -> Tableau {
    let m = rows.len();
    let n = cost.len();
    let slacks: Vec<Option<usize>> = {
        let mut next = n;
        rows.iter()
            .map(|(_, s, _)| match s {
                Sense::Eq => None,
                _ => {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    };
    let n_struct = n + slacks.iter().flatten().count();
    let width = n_struct + m + 1; // artificials, then rhs
    let mut t = vec![vec![0.0; width]; m];
    for (i, (a, sense, b)) in rows.iter().enumerate() {
        t[i][..n].copy_from_slice(a);
        if let Some(s) = slacks[i] {
            t[i][s] = if *sense == Sense::Le { 1.0 } else { -1.0 };
        }
        t[i][width - 1] = *b;
        if *b < 0.0 {
            for v in t[i].iter_mut() {
                *v = -*v;
            }
        }
        t[i][n_struct + i] = 1.0;
    }
    let mut basis: Vec<usize> = (n_struct..n_struct + m).collect();

    // phase 1: minimize the sum of artificials
    let mut c1 = vec![0.0; width - 1];
    for v in &mut c1[n_struct..] {
        *v = 1.0;
    }
    if !run(&mut t, &mut basis, &c1, width - 1) {
        unreachable!("phase one is bounded below by zero");
    }
    let infeas: f64 = basis
        .iter()
        .enumerate()
        .filter(|&(_, &b)| b >= n_struct)
        .map(|(i, _)| t[i][width - 1])
        .sum();
    let scale = 1.0 + rows.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
    if infeas > 1e-7 * scale {
        return Tableau::Infeasible;
    }
    // drive remaining artificials out of the basis where possible
    for i in 0..m {
        if basis[i] >= n_struct {
            if let Some(j) = (0..n_struct).find(|&j| t[i][j].abs() > 1e-9) {
                pivot(&mut t, &mut basis, i, j);
            }
        }
    }

    // phase 2 over structural columns only; artificials are barred
    let mut c2 = vec![0.0; width - 1];
    c2[..n].copy_from_slice(cost);
    if !run(&mut t, &mut basis, &c2, n_struct) {
        return Tableau::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            x[b] = t[i][width - 1].max(0.0);
        }
    }
    Tableau::Optimal(x)
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let p = t[row][col];
    for v in t[row].iter_mut() {
        *v /= p;
    }
    let pivot_row = t[row].clone();
    for (i, r) in t.iter_mut().enumerate() {
        if i != row {
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    basis[row] = col;
}

/// Returns false on unboundedness. Only columns below `allowed` may enter.
fn run(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], allowed: usize) -> bool {
    let width = cost.len() + 1;
    loop {
        // reduced cost c_j - c_B B^-1 a_j, entering = lowest index with < 0
        let entering = (0..allowed).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let mut d = cost[j];
            for (i, &b) in basis.iter().enumerate() {
                d -= cost[b] * t[i][j];
            }
            d < -TOL
        });
        let Some(col) = entering else {
            return true;
        };
        let mut leave: Option<(usize, f64)> = None;
        for (i, r) in t.iter().enumerate() {
            if r[col] > TOL {
                let ratio = r[width - 1] / r[col];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - TOL || (ratio <= lr + TOL && basis[i] < basis[li]) {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        let Some((row, _)) = leave else {
            return false;
        };
        pivot(t, basis, row, col);
    }
}
