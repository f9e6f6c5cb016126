//! Bounded-variable primal simplex over an explicit basis inverse.
//!
//! Every row `a·x (≤|=|≥) b` gets a slack `s` with `a·x + s = b`, bounded to
//! `[0, ∞)`, `[0, 0]` or `(−∞, 0]` by sense, so the all-slack basis is always
//! available as a starting point. Phase one minimizes the sum of bound
//! violations of the basic variables (the cost vector is re-derived every
//! iteration), phase two the real objective. Pricing is Dantzig's rule until
//! `10·rows` consecutive degenerate pivots, after which Bland's rule takes over
//! until the next improving step.

use log::trace;

use crate::error::MilpError;
use crate::expr::rational_to_f64;
use crate::problem::{Problem, Sense};
use crate::solution::{SolveStatus, Solution, SolverParams};

const PIVOT_TOL: f64 = 1e-7;
const OPTIMALITY_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
const REFACTOR_PERIOD: usize = 100;
const SINGULAR_TOL: f64 = 1e-11;
/// Row and bound residual above which an "optimal" point is rejected.
const ACCEPT_TOL: f64 = 1e-6;

/// Column-compressed floating-point copy of a [`Problem`].
#[derive(Debug, Clone)]
pub(crate) struct LpData {
    pub(crate) num_cols: usize,
    pub(crate) num_rows: usize,
    cost: Vec<f64>,
    cost_constant: f64,
    col_start: Vec<usize>,
    row_index: Vec<usize>,
    value: Vec<f64>,
    rhs: Vec<f64>,
    senses: Vec<Sense>,
    pub(crate) lower: Vec<f64>,
    pub(crate) upper: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) enum LpOutcome {
    Optimal { values: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub(crate) struct LpResult {
    pub(crate) outcome: LpOutcome,
    pub(crate) iterations: u64,
    /// Final basis when the outcome is optimal.
    pub(crate) basis: Option<Basis>,
}

/// A simplex basis that can seed a solve with different column bounds.
#[derive(Debug, Clone)]
pub(crate) struct Basis {
    basic: Vec<usize>,
    /// Nonbasic columns resting at their upper bound, over all columns
    /// including slacks.
    at_upper: Vec<bool>,
}

impl LpData {
    pub(crate) fn from_problem(problem: &Problem) -> Self {
        let num_cols = problem.num_variables();
        let num_rows = problem.num_constraints();
        let mut counts = vec![0usize; num_cols + 1];
        for row in problem.constraints() {
            for (v, _) in row.expr.terms() {
                counts[v.index() + 1] += 1;
            }
        }
        for j in 0..num_cols {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let nnz = col_start[num_cols];
        let mut fill = counts;
        let mut row_index = vec![0usize; nnz];
        let mut value = vec![0f64; nnz];
        for (i, row) in problem.constraints().iter().enumerate() {
            for &(v, c) in row.expr.terms() {
                let slot = fill[v.index()];
                row_index[slot] = i;
                value[slot] = rational_to_f64(c);
                fill[v.index()] += 1;
            }
        }
        let mut cost = vec![0.0; num_cols];
        for &(v, c) in problem.objective().terms() {
            cost[v.index()] = rational_to_f64(c);
        }
        let lower = problem
            .variables()
            .iter()
            .map(|v| v.lower.map_or(f64::NEG_INFINITY, rational_to_f64))
            .collect();
        let upper = problem
            .variables()
            .iter()
            .map(|v| v.upper.map_or(f64::INFINITY, rational_to_f64))
            .collect();
        LpData {
            num_cols,
            num_rows,
            cost,
            cost_constant: rational_to_f64(problem.objective().constant_term()),
            col_start,
            row_index,
            value,
            rhs: problem.constraints().iter().map(|r| rational_to_f64(r.rhs)).collect(),
            senses: problem.constraints().iter().map(|r| r.sense).collect(),
            lower,
            upper,
        }
    }

    fn column(&self, j: usize) -> StructuralColumn<'_> {
        let range = self.col_start[j]..self.col_start[j + 1];
        self.row_index[range.clone()]
            .iter()
            .copied()
            .zip(self.value[range].iter().copied())
    }

    pub(crate) fn objective_value(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + self.cost_constant
    }

    /// Max violation of rows and of the given bounds at `x`.
    pub(crate) fn residual(&self, x: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
        let mut activity = vec![0.0; self.num_rows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (i, a) in self.column(j) {
                    activity[i] += a * xj;
                }
            }
        }
        let rows = activity
            .iter()
            .zip(&self.rhs)
            .zip(&self.senses)
            .map(|((&ax, &b), sense)| {
                let scale = 1.0 + b.abs();
                let v = match sense {
                    Sense::Le => ax - b,
                    Sense::Ge => b - ax,
                    Sense::Eq => (ax - b).abs(),
                };
                v.max(0.0) / scale
            })
            .fold(0.0, f64::max);
        let bounds = x
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(&v, (&l, &u))| (l - v).max(v - u).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Solves the relaxation over the given structural bounds.
    pub(crate) fn solve(
        &self,
        lower: &[f64],
        upper: &[f64],
        params: &SolverParams,
    ) -> Result<LpResult, MilpError> {
        self.solve_from(lower, upper, params, None)
    }

    /// Like [`LpData::solve`], starting from `warm` when it factorizes.
    /// The outcome does not depend on the starting basis except through
    /// the choice among alternative optima.
    pub(crate) fn solve_from(
        &self,
        lower: &[f64],
        upper: &[f64],
        params: &SolverParams,
        warm: Option<&Basis>,
    ) -> Result<LpResult, MilpError> {
        if lower.iter().zip(upper).any(|(l, u)| l > u) {
            return Ok(LpResult {
                outcome: LpOutcome::Infeasible,
                iterations: 0,
                basis: None,
            });
        }
        let mut simplex = Simplex::new(self, lower, upper, params.lp_feasibility_tol);
        if let Some(warm) = warm {
            if !simplex.install(warm) {
                trace!("warm basis is singular, starting from slacks");
                simplex = Simplex::new(self, lower, upper, params.lp_feasibility_tol);
            }
        }
        let outcome = match simplex.run() {
            Ok(outcome) => outcome,
            Err(MilpError::NumericalBreakdown(_)) if warm.is_some() => {
                trace!("warm solve broke down, retrying from slacks");
                return self.solve_from(lower, upper, params, None);
            }
            Err(e) => return Err(e),
        };
        let basis = matches!(outcome, LpOutcome::Optimal { .. }).then(|| simplex.export());
        Ok(LpResult {
            outcome,
            iterations: simplex.iterations,
            basis,
        })
    }
}

struct Simplex<'a> {
    lp: &'a LpData,
    m: usize,
    n: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    /// Basis position of each column, `usize::MAX` when nonbasic.
    position: Vec<usize>,
    binv: Vec<f64>,
    feas_tol: f64,
    iterations: u64,
    since_refactor: usize,
    degenerate_run: usize,
    bland: bool,
}

enum Step {
    BoundFlip,
    Pivot { row: usize, to_upper: bool },
    Unbounded,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LpData, lower: &[f64], upper: &[f64], feas_tol: f64) -> Self {
        let m = lp.num_rows;
        let n = lp.num_cols;
        let mut lo = lower.to_vec();
        let mut hi = upper.to_vec();
        for sense in &lp.senses {
            let (l, u) = match sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Eq => (0.0, 0.0),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
            };
            lo.push(l);
            hi.push(u);
        }
        let mut x = vec![0.0; n + m];
        for j in 0..n {
            x[j] = if lo[j].is_finite() {
                lo[j]
            } else if hi[j].is_finite() {
                hi[j]
            } else {
                0.0
            };
        }
        let mut binv = vec![0.0; m * m];
        for r in 0..m {
            binv[r * m + r] = 1.0;
        }
        let mut position = vec![usize::MAX; n + m];
        let basis: Vec<usize> = (n..n + m).collect();
        for (r, &j) in basis.iter().enumerate() {
            position[j] = r;
        }
        let mut s = Simplex {
            lp,
            m,
            n,
            lower: lo,
            upper: hi,
            x,
            basis,
            position,
            binv,
            feas_tol,
            iterations: 0,
            since_refactor: 0,
            degenerate_run: 0,
            bland: false,
        };
        s.recompute_basic_values();
        s
    }

    /// Replaces the slack basis by `warm`; false if it does not factorize.
    fn install(&mut self, warm: &Basis) -> bool {
        let total = self.n + self.m;
        if warm.basic.len() != self.m || warm.at_upper.len() != total {
            return false;
        }
        self.position.iter_mut().for_each(|p| *p = usize::MAX);
        for (r, &j) in warm.basic.iter().enumerate() {
            self.position[j] = r;
        }
        self.basis.copy_from_slice(&warm.basic);
        for j in 0..total {
            if self.position[j] != usize::MAX {
                continue;
            }
            let (lo, hi) = (self.lower[j], self.upper[j]);
            self.x[j] = if (warm.at_upper[j] && hi.is_finite()) || !lo.is_finite() {
                if hi.is_finite() {
                    hi
                } else {
                    0.0
                }
            } else {
                lo
            };
        }
        self.refactor().is_ok()
    }

    fn export(&self) -> Basis {
        let at_upper = (0..self.n + self.m)
            .map(|j| self.position[j] == usize::MAX && self.upper[j].is_finite() && self.x[j] == self.upper[j])
            .collect();
        Basis {
            basic: self.basis.clone(),
            at_upper,
        }
    }

    fn column(&self, j: usize) -> ColumnIter<'_> {
        if j < self.n {
            ColumnIter::Structural(self.lp.column(j))
        } else {
            ColumnIter::Slack(Some(j - self.n))
        }
    }

    fn total_cost(&self, j: usize) -> f64 {
        if j < self.n {
            self.lp.cost[j]
        } else {
            0.0
        }
    }

    fn recompute_basic_values(&mut self) {
        let m = self.m;
        let mut rhs = self.lp.rhs.clone();
        for j in 0..self.n + m {
            if self.position[j] == usize::MAX && self.x[j] != 0.0 {
                let xj = self.x[j];
                for (i, a) in self.column(j) {
                    rhs[i] -= a * xj;
                }
            }
        }
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            let v: f64 = row.iter().zip(&rhs).map(|(b, v)| b * v).sum();
            self.x[self.basis[r]] = v;
        }
    }

    /// Rebuilds the basis inverse by Gauss-Jordan elimination with partial
    /// pivoting.
    fn refactor(&mut self) -> Result<(), MilpError> {
        let m = self.m;
        if m == 0 {
            return Ok(());
        }
        let width = 2 * m;
        let mut aug = vec![0.0; m * width];
        for r in 0..m {
            for (i, a) in self.column(self.basis[r]) {
                aug[i * width + r] = a;
            }
            aug[r * width + m + r] = 1.0;
        }
        let mut nonzeros: Vec<usize> = Vec::with_capacity(width);
        for c in 0..m {
            let (pivot_row, pivot_abs) = (c..m)
                .map(|i| (i, aug[i * width + c].abs()))
                .fold((c, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs < SINGULAR_TOL {
                return Err(MilpError::NumericalBreakdown(format!(
                    "basis matrix is singular at column {c}"
                )));
            }
            if pivot_row != c {
                for k in 0..width {
                    aug.swap(c * width + k, pivot_row * width + k);
                }
            }
            let inv = 1.0 / aug[c * width + c];
            nonzeros.clear();
            for k in 0..width {
                let v = &mut aug[c * width + k];
                if *v != 0.0 {
                    *v *= inv;
                    nonzeros.push(k);
                }
            }
            for i in 0..m {
                if i == c {
                    continue;
                }
                let factor = aug[i * width + c];
                if factor == 0.0 {
                    continue;
                }
                for &k in &nonzeros {
                    let p = aug[c * width + k];
                    aug[i * width + k] -= factor * p;
                }
                aug[i * width + c] = 0.0;
            }
        }
        // rows of B^-1 follow basis positions; after elimination row r of the
        // right half is row r of the inverse
        for r in 0..m {
            self.binv[r * m..(r + 1) * m].copy_from_slice(&aug[r * width + m..(r + 1) * width]);
        }
        self.since_refactor = 0;
        self.recompute_basic_values();
        Ok(())
    }

    fn run(&mut self) -> Result<LpOutcome, MilpError> {
        let m = self.m;
        let total = self.n + m;
        let iteration_limit = 50 * (total as u64 + 10) + 10_000;
        let mut y = vec![0.0; m];
        let mut alpha = vec![0.0; m];
        let mut fresh = true;
        loop {
            if self.iterations > iteration_limit {
                return Err(MilpError::NumericalBreakdown(format!(
                    "iteration limit {iteration_limit} reached"
                )));
            }
            if self.since_refactor >= REFACTOR_PERIOD {
                self.refactor()?;
                fresh = true;
            }

            // phase-dependent basic costs
            let mut phase_one = false;
            let mut basic_cost = vec![0.0; m];
            for r in 0..m {
                let j = self.basis[r];
                if self.x[j] < self.lower[j] - self.feas_tol {
                    basic_cost[r] = -1.0;
                    phase_one = true;
                } else if self.x[j] > self.upper[j] + self.feas_tol {
                    basic_cost[r] = 1.0;
                    phase_one = true;
                }
            }
            if !phase_one {
                for r in 0..m {
                    basic_cost[r] = self.total_cost(self.basis[r]);
                }
            }
            y.iter_mut().for_each(|v| *v = 0.0);
            for r in 0..m {
                let c = basic_cost[r];
                if c != 0.0 {
                    let row = &self.binv[r * m..(r + 1) * m];
                    for (yi, b) in y.iter_mut().zip(row) {
                        *yi += c * b;
                    }
                }
            }

            // pricing
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..total {
                if self.position[j] != usize::MAX {
                    continue;
                }
                let can_up = self.x[j] < self.upper[j] - DEGENERATE_STEP;
                let can_down = self.x[j] > self.lower[j] + DEGENERATE_STEP;
                if !can_up && !can_down {
                    continue;
                }
                let base = if phase_one { 0.0 } else { self.total_cost(j) };
                let d = base - self.column(j).map(|(i, a)| y[i] * a).sum::<f64>();
                let dir = if d < -OPTIMALITY_TOL && can_up {
                    1.0
                } else if d > OPTIMALITY_TOL && can_down {
                    -1.0
                } else {
                    continue;
                };
                if self.bland {
                    entering = Some((j, dir, d));
                    break;
                }
                if entering.is_none_or(|(_, _, best)| d.abs() > best.abs()) {
                    entering = Some((j, dir, d));
                }
            }

            let Some((q, dir, _)) = entering else {
                if !fresh {
                    // confirm against a clean factorization before stopping
                    self.refactor()?;
                    fresh = true;
                    continue;
                }
                return Ok(if phase_one {
                    LpOutcome::Infeasible
                } else {
                    self.finish()?
                });
            };

            alpha.iter_mut().for_each(|v| *v = 0.0);
            for (l, a) in self.column(q) {
                for r in 0..m {
                    alpha[r] += self.binv[r * m + l] * a;
                }
            }

            let (theta, step) = self.ratio_test(q, dir, &alpha);
            self.iterations += 1;
            match step {
                Step::Unbounded => {
                    if phase_one {
                        return Err(MilpError::NumericalBreakdown(
                            "phase one direction without breakpoint".into(),
                        ));
                    }
                    return Ok(LpOutcome::Unbounded);
                }
                Step::BoundFlip => {
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                    for r in 0..m {
                        if alpha[r] != 0.0 {
                            self.x[self.basis[r]] -= dir * theta * alpha[r];
                        }
                    }
                }
                Step::Pivot { row, to_upper } => {
                    self.x[q] += dir * theta;
                    for r in 0..m {
                        if alpha[r] != 0.0 {
                            self.x[self.basis[r]] -= dir * theta * alpha[r];
                        }
                    }
                    let leaving = self.basis[row];
                    self.x[leaving] = if to_upper {
                        self.upper[leaving]
                    } else {
                        self.lower[leaving]
                    };
                    self.position[leaving] = usize::MAX;
                    self.basis[row] = q;
                    self.position[q] = row;
                    self.update_inverse(row, &alpha);
                    self.since_refactor += 1;
                    fresh = false;
                }
            }
            if theta <= DEGENERATE_STEP {
                self.degenerate_run += 1;
                if !self.bland && self.degenerate_run > 10 * m.max(1) {
                    trace!("switching to Bland's rule after {} degenerate pivots", self.degenerate_run);
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
                self.bland = false;
            }
        }
    }

    /// Returns the step length and what happens at it.
    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64]) -> (f64, Step) {
        let harris = 0.5 * self.feas_tol;
        let mut candidates: Vec<(usize, f64, bool)> = Vec::new();
        let mut relaxed_min = f64::INFINITY;
        for (r, &a) in alpha.iter().enumerate() {
            if a.abs() < PIVOT_TOL {
                continue;
            }
            let j = self.basis[r];
            let delta = -dir * a;
            let (x, lo, hi) = (self.x[j], self.lower[j], self.upper[j]);
            let below = x < lo - self.feas_tol;
            let above = x > hi + self.feas_tol;
            let (exact, relaxed, to_upper) = if delta < 0.0 {
                if above {
                    ((x - hi) / -delta, (x - hi + harris) / -delta, true)
                } else if below || !lo.is_finite() {
                    continue;
                } else {
                    ((x - lo) / -delta, (x - lo + harris) / -delta, false)
                }
            } else if below {
                ((lo - x) / delta, (lo - x + harris) / delta, false)
            } else if above || !hi.is_finite() {
                continue;
            } else {
                ((hi - x) / delta, (hi - x + harris) / delta, true)
            };
            relaxed_min = relaxed_min.min(relaxed);
            candidates.push((r, exact.max(0.0), to_upper));
        }
        let flip = self.upper[q] - self.lower[q];
        if flip.is_finite() && flip <= relaxed_min {
            return (flip, Step::BoundFlip);
        }
        if candidates.is_empty() {
            return (f64::INFINITY, Step::Unbounded);
        }
        let chosen = if self.bland {
            let min_exact = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            candidates
                .iter()
                .filter(|c| c.1 <= min_exact + DEGENERATE_STEP)
                .min_by_key(|c| self.basis[c.0])
                .copied()
        } else {
            candidates
                .iter()
                .filter(|c| c.1 <= relaxed_min)
                .max_by(|a, b| {
                    alpha[a.0]
                        .abs()
                        .partial_cmp(&alpha[b.0].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(b.0.cmp(&a.0))
                })
                .copied()
        };
        let (row, theta, to_upper) = chosen.expect("candidate set is nonempty");
        (theta, Step::Pivot { row, to_upper })
    }

    fn update_inverse(&mut self, row: usize, alpha: &[f64]) {
        let m = self.m;
        let inv = 1.0 / alpha[row];
        let mut pivot_nz: Vec<(usize, f64)> = Vec::new();
        for k in 0..m {
            let v = &mut self.binv[row * m + k];
            if *v != 0.0 {
                *v *= inv;
                pivot_nz.push((k, *v));
            }
        }
        for (r, &a) in alpha.iter().enumerate() {
            if r == row || a == 0.0 {
                continue;
            }
            let base = r * m;
            for &(k, p) in &pivot_nz {
                self.binv[base + k] -= a * p;
            }
        }
    }

    fn finish(&self) -> Result<LpOutcome, MilpError> {
        let values: Vec<f64> = self.x[..self.n].to_vec();
        let residual = self
            .lp
            .residual(&values, &self.lower[..self.n], &self.upper[..self.n]);
        if residual > ACCEPT_TOL {
            return Err(MilpError::NumericalBreakdown(format!(
                "optimal basis violates constraints by {residual:e}"
            )));
        }
        let objective = self.lp.objective_value(&values);
        Ok(LpOutcome::Optimal { values, objective })
    }
}

type StructuralColumn<'a> =
    std::iter::Zip<std::iter::Copied<std::slice::Iter<'a, usize>>, std::iter::Copied<std::slice::Iter<'a, f64>>>;

enum ColumnIter<'a> {
    Structural(StructuralColumn<'a>),
    Slack(Option<usize>),
}

impl Iterator for ColumnIter<'_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            ColumnIter::Structural(it) => it.next(),
            ColumnIter::Slack(row) => row.take().map(|r| (r, 1.0)),
        }
    }
}

/// Solves the LP relaxation of `problem` (integrality is ignored).
pub fn solve_lp(problem: &Problem, params: &SolverParams) -> Result<Solution, MilpError> {
    params.validate()?;
    let lp = LpData::from_problem(problem);
    let result = lp.solve(&lp.lower, &lp.upper, params)?;
    Ok(match result.outcome {
        LpOutcome::Optimal { values, objective } => {
            let reported = problem.report_objective(objective);
            Solution {
                status: SolveStatus::Optimal,
                values: Some(values),
                objective: reported,
                bound: reported,
                nodes: 0,
                lp_iterations: result.iterations,
            }
        }
        LpOutcome::Infeasible => Solution {
            lp_iterations: result.iterations,
            ..Solution::without_values(SolveStatus::Infeasible, problem)
        },
        LpOutcome::Unbounded => Solution {
            lp_iterations: result.iterations,
            ..Solution::without_values(SolveStatus::Unbounded, problem)
        },
    })
}
