use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::Instant;

use log::debug;

use crate::error::MilpError;
use crate::problem::Problem;
use crate::simplex::{Basis, LpData, LpOutcome};
use crate::solution::{SolveStatus, Solution, SolverParams};

/// Open node of the search tree. `changes` holds every bound tightening on
/// the path from the root.
struct Node {
    bound: f64,
    key: i64,
    seq: u64,
    changes: Vec<(usize, f64, f64)>,
    /// Optimal basis of the parent relaxation.
    warm: Option<Rc<Basis>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap pops the greatest: lowest bound first, then newest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.cmp(&self.key).then(self.seq.cmp(&other.seq))
    }
}

/// Bounds closer than this are treated as ties in node selection.
const BOUND_QUANTUM: f64 = 1e-9;

fn bound_key(bound: f64) -> i64 {
    let q = (bound / BOUND_QUANTUM).round();
    q.clamp(i64::MIN as f64, i64::MAX as f64) as i64
}

struct Incumbent {
    values: Vec<f64>,
    objective: f64,
}

fn lexicographically_smaller(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Less => return true,
            Ordering::Greater => return false,
            Ordering::Equal => {}
        }
    }
    false
}

/// Most fractional integer variable, lowest id on ties.
fn most_fractional(integer_vars: &[usize], values: &[f64], tol: f64) -> Option<(usize, f64)> {
    integer_vars
        .iter()
        .map(|&j| (j, values[j], (values[j] - values[j].round()).abs()))
        .filter(|&(_, _, frac)| frac > tol)
        .fold(None::<(usize, f64, f64)>, |best, cur| match best {
            Some(b) if b.2 >= cur.2 => Some(b),
            _ => Some(cur),
        })
        .map(|(j, v, _)| (j, v))
}

fn round_integers(mut values: Vec<f64>, integer_vars: &[usize]) -> Vec<f64> {
    for &j in integer_vars {
        values[j] = values[j].round();
    }
    values
}

/// Best-bound branch-and-bound.
///
/// Branches on the most fractional integer variable (lowest id on ties).
/// Open nodes are explored lowest bound first; among equal bounds the most
/// recently created node goes first. Each node's relaxation starts from its
/// parent's optimal basis.
pub fn solve_milp(problem: &Problem, params: &SolverParams) -> Result<Solution, MilpError> {
    params.validate()?;
    let started = Instant::now();
    let lp = LpData::from_problem(problem);
    let integer_vars: Vec<usize> = problem
        .variables()
        .iter()
        .filter(|v| v.kind.is_integral())
        .map(|v| v.id.index())
        .collect();

    let mut root_lower = lp.lower.clone();
    let mut root_upper = lp.upper.clone();
    for &j in &integer_vars {
        if !root_lower[j].is_finite() || !root_upper[j].is_finite() {
            return Err(MilpError::UnboundedInteger(problem.variables()[j].name.clone()));
        }
        root_lower[j] = (root_lower[j] - params.integrality_tol).ceil();
        root_upper[j] = (root_upper[j] + params.integrality_tol).floor();
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        key: i64::MIN,
        seq,
        changes: Vec::new(),
        warm: None,
    });
    let mut incumbent: Option<Incumbent> = None;
    let mut nodes = 0u64;
    let mut iterations = 0u64;
    let mut lower = root_lower.clone();
    let mut upper = root_upper.clone();
    let mut limit_hit = false;

    while let Some(node) = heap.peek() {
        if let Some(inc) = &incumbent {
            if node.bound >= inc.objective - prune_tol(params, inc.objective) {
                // every remaining node is at least as bad
                heap.clear();
                break;
            }
        }
        if nodes >= params.max_nodes
            || params.time_limit.is_some_and(|limit| started.elapsed() >= limit)
        {
            limit_hit = true;
            break;
        }
        let node = heap.pop().expect("peeked");
        nodes += 1;

        lower.copy_from_slice(&root_lower);
        upper.copy_from_slice(&root_upper);
        for &(j, lo, hi) in &node.changes {
            lower[j] = lo;
            upper[j] = hi;
        }
        let result = lp.solve_from(&lower, &upper, params, node.warm.as_deref())?;
        iterations += result.iterations;
        let warm = result.basis.map(Rc::new);
        let (values, objective) = match result.outcome {
            LpOutcome::Infeasible => continue,
            LpOutcome::Unbounded => {
                let mut sol = Solution::without_values(SolveStatus::Unbounded, problem);
                sol.nodes = nodes;
                sol.lp_iterations = iterations;
                return Ok(sol);
            }
            LpOutcome::Optimal { values, objective } => (values, objective),
        };
        if let Some(inc) = &incumbent {
            if objective >= inc.objective - prune_tol(params, inc.objective) && !params.deterministic {
                continue;
            }
            if objective > inc.objective + prune_tol(params, inc.objective) {
                continue;
            }
        }

        let branch = most_fractional(&integer_vars, &values, params.integrality_tol);
        match branch {
            None => {
                let rounded = round_integers(values, &integer_vars);
                let objective = lp.objective_value(&rounded);
                if offer(&mut incumbent, rounded, objective, params) {
                    debug!("incumbent {objective} at node {nodes}");
                }
            }
            Some((j, value)) => {
                if let Some(inc) = &incumbent {
                    // a node tied with the incumbent can only supply a
                    // lexicographic tie-break; do not split it further
                    if objective >= inc.objective - prune_tol(params, inc.objective) {
                        continue;
                    }
                }
                let (lo, hi) = (lower[j], upper[j]);
                for (child_lo, child_hi) in [(lo, value.floor()), (value.ceil(), hi)] {
                    seq += 1;
                    let mut changes = node.changes.clone();
                    changes.push((j, child_lo, child_hi));
                    heap.push(Node {
                        bound: objective,
                        key: bound_key(objective),
                        seq,
                        changes,
                        warm: warm.clone(),
                    });
                }
            }
        }
    }

    let open_bound = heap
        .iter()
        .map(|n| n.bound)
        .fold(f64::INFINITY, f64::min);
    let solution = match incumbent {
        Some(inc) => {
            let status = if limit_hit {
                SolveStatus::LimitReached
            } else {
                SolveStatus::Optimal
            };
            let bound = if limit_hit {
                open_bound.min(inc.objective)
            } else {
                inc.objective
            };
            Solution {
                status,
                objective: problem.report_objective(inc.objective),
                bound: problem.report_objective(bound),
                values: Some(inc.values),
                nodes,
                lp_iterations: iterations,
            }
        }
        None if limit_hit => Solution {
            status: SolveStatus::LimitReached,
            values: None,
            objective: problem.report_objective(f64::INFINITY),
            bound: problem.report_objective(open_bound),
            nodes,
            lp_iterations: iterations,
        },
        None => Solution {
            nodes,
            lp_iterations: iterations,
            ..Solution::without_values(SolveStatus::Infeasible, problem)
        },
    };
    Ok(solution)
}

/// Replaces the incumbent if `values` is better, or equally good and
/// lexicographically smaller in deterministic mode.
fn offer(incumbent: &mut Option<Incumbent>, values: Vec<f64>, objective: f64, params: &SolverParams) -> bool {
    let better = match incumbent {
        None => true,
        Some(inc) => {
            let tol = prune_tol(params, inc.objective);
            objective < inc.objective - tol
                || (params.deterministic
                    && objective <= inc.objective + tol
                    && lexicographically_smaller(&values, &inc.values))
        }
    };
    if better {
        *incumbent = Some(Incumbent { values, objective });
    }
    better
}

fn prune_tol(params: &SolverParams, incumbent: f64) -> f64 {
    params.integrality_tol * incumbent.abs().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{LinearExpr, Rational};
    use crate::problem::{ConstraintRow, ObjectiveSense, VariableSpec};

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    #[test]
    fn empty_problem_is_optimal_at_zero() {
        let sol = solve_milp(&Problem::new(), &SolverParams::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.values, Some(vec![]));
    }

    #[test]
    fn binary_knapsack_picks_the_heavier_item() {
        let mut p = Problem::new();
        let a = p.add_variable(VariableSpec::binary("a")).unwrap();
        let b = p.add_variable(VariableSpec::binary("b")).unwrap();
        p.add_constraint(ConstraintRow::le("one", LinearExpr::from_terms([(a, r(1)), (b, r(1))]), r(1)))
            .unwrap();
        p.set_objective(LinearExpr::from_terms([(a, r(5)), (b, r(4))]), ObjectiveSense::Maximize)
            .unwrap();
        let sol = solve_milp(&p, &SolverParams::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.values, Some(vec![1.0, 0.0]));
        assert!((sol.objective - 5.0).abs() < 1e-9);
        assert!((sol.bound - 5.0).abs() < 1e-9);
    }

    #[test]
    fn fractional_relaxation_needs_branching() {
        // max x + y, 2x + 2y <= 3, binaries: LP gives 1.5, MILP gives 1
        let mut p = Problem::new();
        let x = p.add_variable(VariableSpec::binary("x")).unwrap();
        let y = p.add_variable(VariableSpec::binary("y")).unwrap();
        p.add_constraint(ConstraintRow::le("cap", LinearExpr::from_terms([(x, r(2)), (y, r(2))]), r(3)))
            .unwrap();
        p.set_objective(LinearExpr::from_terms([(x, r(1)), (y, r(1))]), ObjectiveSense::Maximize)
            .unwrap();
        let sol = solve_milp(&p, &SolverParams::default()).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-9);
        // deterministic mode prefers the lexicographically smaller optimum
        assert_eq!(sol.values, Some(vec![0.0, 1.0]));
        assert!(sol.nodes > 1);
    }

    #[test]
    fn integer_without_bounds_is_rejected() {
        let mut p = Problem::new();
        p.add_variable(VariableSpec {
            name: "n".into(),
            kind: crate::VarKind::Integer,
            lower: Some(r(0)),
            upper: None,
        })
        .unwrap();
        assert!(matches!(
            solve_milp(&p, &SolverParams::default()),
            Err(MilpError::UnboundedInteger(_))
        ));
    }

    #[test]
    fn unbounded_continuous_part_is_reported() {
        let mut p = Problem::new();
        let b = p.add_variable(VariableSpec::binary("b")).unwrap();
        let z = p.add_variable(VariableSpec::nonnegative("z")).unwrap();
        p.set_objective(LinearExpr::from_terms([(b, r(1)), (z, r(-1))]), ObjectiveSense::Minimize)
            .unwrap();
        let sol = solve_milp(&p, &SolverParams::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Unbounded);
    }

    #[test]
    fn node_limit_returns_incumbent_and_bound() {
        // many symmetric binaries with a fractional relaxation
        let mut p = Problem::new();
        let vars: Vec<_> = (0..6)
            .map(|i| p.add_variable(VariableSpec::binary(format!("b{i}"))).unwrap())
            .collect();
        let row = LinearExpr::from_terms(vars.iter().map(|&v| (v, r(2))));
        p.add_constraint(ConstraintRow::le("cap", row, r(5))).unwrap();
        p.set_objective(LinearExpr::from_terms(vars.iter().map(|&v| (v, r(1)))), ObjectiveSense::Maximize)
            .unwrap();
        let params = SolverParams {
            max_nodes: 3,
            ..SolverParams::default()
        };
        let sol = solve_milp(&p, &params).unwrap();
        assert_eq!(sol.status, SolveStatus::LimitReached);
        assert_eq!(sol.nodes, 3);
        if sol.has_values() {
            assert!(sol.bound >= sol.objective - 1e-9);
        }
        let full = solve_milp(&p, &SolverParams::default()).unwrap();
        assert_eq!(full.status, SolveStatus::Optimal);
        assert!((full.objective - 2.0).abs() < 1e-9);
    }
}
