use amod_milp::{
    solve_lp, ConstraintRow, LinearExpr, ObjectiveSense, Problem, Rational, SolveStatus, SolverParams, VarId,
    VariableSpec,
};

use super::DispatchError;

const INTEGRAL_TOL: f64 = 1e-6;

fn int(n: i64) -> Rational {
    Rational::from_integer(n)
}

/// Matches rows (requests) to columns (vehicles). `None` marks a forbidden
/// pair. The matching has maximum cardinality and, among those, minimum
/// total cost. Bipartite matching polytopes are integral, so the LP
/// relaxation is solved directly.
pub fn min_cost_assignment(costs: &[Vec<Option<u64>>]) -> Result<Vec<Option<usize>>, DispatchError> {
    let rows = costs.len();
    let cols = costs.first().map_or(0, Vec::len);
    if costs.iter().any(|r| r.len() != cols) {
        return Err(DispatchError::Config("ragged assignment cost matrix".into()));
    }
    let max_cost = costs.iter().flatten().flatten().copied().max().unwrap_or(0) as i64;
    // any extra match outweighs every cost difference
    let reward = (max_cost + 1) * (rows.min(cols) as i64 + 1);
    let mut p = Problem::new();
    let mut vars: Vec<(usize, usize, VarId)> = Vec::new();
    let mut objective = LinearExpr::new();
    for (r, row) in costs.iter().enumerate() {
        for (c, cost) in row.iter().enumerate() {
            if let Some(cost) = cost {
                let x = p.add_variable(VariableSpec::continuous(format!("x[{r}][{c}]"), Some(int(0)), Some(int(1))))?;
                objective.add_term(x, int(*cost as i64 - reward));
                vars.push((r, c, x));
            }
        }
    }
    for r in 0..rows {
        let e = LinearExpr::from_terms(vars.iter().filter(|v| v.0 == r).map(|v| (v.2, int(1))));
        if !e.is_empty() {
            p.add_constraint(ConstraintRow::le(format!("request[{r}]"), e, int(1)))?;
        }
    }
    for c in 0..cols {
        let e = LinearExpr::from_terms(vars.iter().filter(|v| v.1 == c).map(|v| (v.2, int(1))));
        if !e.is_empty() {
            p.add_constraint(ConstraintRow::le(format!("vehicle[{c}]"), e, int(1)))?;
        }
    }
    p.set_objective(objective, ObjectiveSense::Minimize)?;
    let sol = solve_lp(&p, &SolverParams::default())?;
    if sol.status != SolveStatus::Optimal {
        return Err(DispatchError::NoSolution("assignment"));
    }
    let mut out = vec![None; rows];
    for &(r, c, x) in &vars {
        let v = sol.value(x).expect("optimal");
        if (v - v.round()).abs() > INTEGRAL_TOL {
            return Err(DispatchError::Fractional("assignment"));
        }
        if v.round() == 1.0 {
            out[r] = Some(c);
        }
    }
    Ok(out)
}

/// Shipments between stations at minimum total `cost`. With `balanced`
/// every supply and demand is met exactly (totals must agree); otherwise
/// both are upper limits and the shipped total is the smaller of the two
/// totals.
fn transport(
    supply: &[Rational],
    demand: &[Rational],
    cost: &[Vec<u32>],
    balanced: bool,
) -> Result<Vec<Vec<f64>>, DispatchError> {
    let n = supply.len();
    if demand.len() != n || cost.len() != n || cost.iter().any(|r| r.len() != n) {
        return Err(DispatchError::Config("transport dimensions disagree".into()));
    }
    let mut p = Problem::new();
    let mut x = vec![vec![VarId(0); n]; n];
    let mut objective = LinearExpr::new();
    for i in 0..n {
        for j in 0..n {
            x[i][j] = p.add_variable(VariableSpec::nonnegative(format!("x[{i}][{j}]")))?;
            objective.add_term(x[i][j], int(cost[i][j] as i64));
        }
    }
    let row = |name: String, e: LinearExpr, rhs: Rational| {
        if balanced {
            ConstraintRow::eq(name, e, rhs)
        } else {
            ConstraintRow::le(name, e, rhs)
        }
    };
    for i in 0..n {
        let e = LinearExpr::from_terms((0..n).map(|j| (x[i][j], int(1))));
        p.add_constraint(row(format!("supply[{i}]"), e, supply[i]))?;
    }
    for j in 0..n {
        let e = LinearExpr::from_terms((0..n).map(|i| (x[i][j], int(1))));
        p.add_constraint(row(format!("demand[{j}]"), e, demand[j]))?;
    }
    if !balanced {
        let total_s: Rational = supply.iter().sum();
        let total_d: Rational = demand.iter().sum();
        let e = LinearExpr::from_terms(x.iter().flatten().map(|&v| (v, int(1))));
        p.add_constraint(ConstraintRow::eq("total", e, total_s.min(total_d)))?;
    }
    p.set_objective(objective, ObjectiveSense::Minimize)?;
    let sol = solve_lp(&p, &SolverParams::default())?;
    if sol.status != SolveStatus::Optimal {
        return Err(DispatchError::NoSolution("transport"));
    }
    Ok(x
        .iter()
        .map(|row| row.iter().map(|&v| sol.value(v).expect("optimal").max(0.0)).collect())
        .collect())
}

/// Integral shipments from surplus to deficit stations; transportation
/// polytopes with integer data have integral vertices.
pub fn min_cost_transport(supply: &[u64], demand: &[u64], cost: &[Vec<u32>]) -> Result<Vec<Vec<u64>>, DispatchError> {
    let s: Vec<Rational> = supply.iter().map(|&v| int(v as i64)).collect();
    let d: Vec<Rational> = demand.iter().map(|&v| int(v as i64)).collect();
    let flows = transport(&s, &d, cost, false)?;
    flows
        .iter()
        .map(|row| {
            row.iter()
                .map(|&v| {
                    if (v - v.round()).abs() > INTEGRAL_TOL {
                        Err(DispatchError::Fractional("transport"))
                    } else {
                        Ok(v.round() as u64)
                    }
                })
                .collect()
        })
        .collect()
}

/// Fractional mass moving `supply` onto `demand` exactly; totals must agree.
pub(crate) fn mass_transport(
    supply: &[Rational],
    demand: &[Rational],
    cost: &[Vec<u32>],
) -> Result<Vec<Vec<f64>>, DispatchError> {
    transport(supply, demand, cost, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matching_wins() {
        let costs = vec![vec![Some(1), Some(9)], vec![Some(9), Some(1)]];
        assert_eq!(min_cost_assignment(&costs).unwrap(), vec![Some(0), Some(1)]);
    }

    #[test]
    fn cardinality_beats_cost() {
        // request 0 could take the cheap vehicle 0, but then request 1 has none
        let costs = vec![vec![Some(0), Some(50)], vec![Some(1), None]];
        assert_eq!(min_cost_assignment(&costs).unwrap(), vec![Some(1), Some(0)]);
    }

    #[test]
    fn more_requests_than_vehicles() {
        let costs = vec![vec![Some(3)], vec![Some(1)], vec![Some(2)]];
        assert_eq!(min_cost_assignment(&costs).unwrap(), vec![None, Some(0), None]);
        assert_eq!(min_cost_assignment(&[]).unwrap(), Vec::<Option<usize>>::new());
    }

    #[test]
    fn surplus_ships_to_deficit() {
        let cost = vec![vec![0, 1], vec![1, 0]];
        let flows = min_cost_transport(&[1, 0], &[0, 1], &cost).unwrap();
        assert_eq!(flows, vec![vec![0, 1], vec![0, 0]]);
        let none = min_cost_transport(&[0, 0], &[0, 0], &cost).unwrap();
        assert_eq!(none, vec![vec![0, 0], vec![0, 0]]);
    }

    #[test]
    fn mass_transport_stays_home_when_balanced() {
        let cost = vec![vec![0, 3], vec![3, 0]];
        let s = [int(2), int(1)];
        let flows = mass_transport(&s, &s, &cost).unwrap();
        assert_eq!(flows, vec![vec![2.0, 0.0], vec![0.0, 1.0]]);
    }
}
