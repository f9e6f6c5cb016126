use std::collections::HashMap;
use std::fmt;

use num_traits::{One, Zero};

use crate::error::MilpError;
use crate::expr::{LinearExpr, Rational};

/// Dense variable index, assigned in insertion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConstraintId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub kind: VarKind,
    /// `None` is −∞.
    pub lower: Option<Rational>,
    /// `None` is +∞.
    pub upper: Option<Rational>,
}

/// Everything needed to declare a variable.
#[derive(Debug, Clone)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VarKind,
    pub lower: Option<Rational>,
    pub upper: Option<Rational>,
}

impl VariableSpec {
    pub fn binary(name: impl Into<String>) -> Self {
        VariableSpec {
            name: name.into(),
            kind: VarKind::Binary,
            lower: Some(Rational::zero()),
            upper: Some(Rational::one()),
        }
    }

    /// Continuous, `[0, +∞)`.
    pub fn nonnegative(name: impl Into<String>) -> Self {
        VariableSpec {
            name: name.into(),
            kind: VarKind::Continuous,
            lower: Some(Rational::zero()),
            upper: None,
        }
    }

    pub fn continuous(name: impl Into<String>, lower: Option<Rational>, upper: Option<Rational>) -> Self {
        VariableSpec {
            name: name.into(),
            kind: VarKind::Continuous,
            lower,
            upper,
        }
    }

    pub fn integer(name: impl Into<String>, lower: Rational, upper: Rational) -> Self {
        VariableSpec {
            name: name.into(),
            kind: VarKind::Integer,
            lower: Some(lower),
            upper: Some(upper),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

/// `expr sense rhs`, stored with the expression constant folded into `rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintRow {
    pub name: String,
    pub expr: LinearExpr,
    pub sense: Sense,
    pub rhs: Rational,
}

impl ConstraintRow {
    pub fn new(name: impl Into<String>, expr: LinearExpr, sense: Sense, rhs: Rational) -> Self {
        ConstraintRow {
            name: name.into(),
            expr,
            sense,
            rhs,
        }
    }

    pub fn le(name: impl Into<String>, expr: LinearExpr, rhs: Rational) -> Self {
        Self::new(name, expr, Sense::Le, rhs)
    }

    pub fn eq(name: impl Into<String>, expr: LinearExpr, rhs: Rational) -> Self {
        Self::new(name, expr, Sense::Eq, rhs)
    }

    pub fn ge(name: impl Into<String>, expr: LinearExpr, rhs: Rational) -> Self {
        Self::new(name, expr, Sense::Ge, rhs)
    }

    /// Largest violation of this row at `values` (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.expr.evaluate(values);
        let rhs = crate::expr::rational_to_f64(self.rhs);
        match self.sense {
            Sense::Le => (lhs - rhs).max(0.0),
            Sense::Ge => (rhs - lhs).max(0.0),
            Sense::Eq => (lhs - rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ObjectiveSense {
    #[default]
    Minimize,
    Maximize,
}

/// Names are written verbatim into LP files, so they must be a single token
/// the LP grammar cannot confuse with a number, operator or keyword.
pub fn validate_name(name: &str) -> Result<(), MilpError> {
    let invalid = |reason| {
        Err(MilpError::InvalidName {
            name: name.to_string(),
            reason,
        })
    };
    let Some(first) = name.chars().next() else {
        return invalid("empty");
    };
    if name.len() > 255 {
        return invalid("longer than 255 characters");
    }
    if !(first.is_ascii_alphabetic() || first == '_') {
        return invalid("must start with a letter or underscore");
    }
    if let Some(c) = name.chars().find(|c| !is_name_char(*c)) {
        return if c.is_whitespace() {
            invalid("contains whitespace")
        } else {
            invalid("contains a character outside the LP name alphabet")
        };
    }
    let lower = name.to_ascii_lowercase();
    if matches!(lower.as_str(), "inf" | "infinity" | "free" | "st" | "end") {
        return invalid("reserved word");
    }
    // `e12` would read as an exponent in some LP readers
    if (first == 'e' || first == 'E') && name[1..].starts_with(|c: char| c.is_ascii_digit()) {
        return invalid("looks like an exponent");
    }
    Ok(())
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "_[].{}()!#$%&@~|,;?'\"`".contains(c)
}

/// A mixed-integer linear program in canonical minimization form.
///
/// Maximization objectives are negated on the way in and the original sense
/// is remembered for reporting and for LP-file output.
#[derive(Debug, Clone, Default)]
pub struct Problem {
    variables: Vec<Variable>,
    constraints: Vec<ConstraintRow>,
    objective: LinearExpr,
    sense: ObjectiveSense,
    names: HashMap<String, VarId>,
    row_names: HashMap<String, ConstraintId>,
}

impl PartialEq for Problem {
    fn eq(&self, other: &Self) -> bool {
        self.variables == other.variables
            && self.constraints == other.constraints
            && self.objective == other.objective
            && self.sense == other.sense
    }
}

impl Problem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, spec: VariableSpec) -> Result<VarId, MilpError> {
        validate_name(&spec.name)?;
        if self.names.contains_key(&spec.name) {
            return Err(MilpError::DuplicateName(spec.name));
        }
        let (lower, upper) = match spec.kind {
            VarKind::Binary => {
                let zero = Rational::zero();
                let one = Rational::one();
                let lo = spec.lower.unwrap_or(zero);
                let hi = spec.upper.unwrap_or(one);
                if lo < zero || hi > one {
                    return Err(MilpError::InvalidBounds {
                        name: spec.name,
                        reason: "binary bounds must lie within [0, 1]",
                    });
                }
                (Some(lo), Some(hi))
            }
            _ => (spec.lower, spec.upper),
        };
        if let (Some(lo), Some(hi)) = (lower, upper) {
            if lo > hi {
                return Err(MilpError::InvalidBounds {
                    name: spec.name,
                    reason: "lower bound exceeds upper bound",
                });
            }
        }
        let id = VarId(self.variables.len());
        self.names.insert(spec.name.clone(), id);
        self.variables.push(Variable {
            id,
            name: spec.name,
            kind: spec.kind,
            lower,
            upper,
        });
        Ok(id)
    }

    /// Stores the row with its expression constant moved into the right-hand
    /// side. An empty name is replaced by `c<id>`.
    pub fn add_constraint(&mut self, mut row: ConstraintRow) -> Result<ConstraintId, MilpError> {
        self.check_ids(&row.expr)?;
        if row.name.is_empty() {
            row.name = format!("c{}", self.constraints.len());
        }
        validate_name(&row.name)?;
        if self.row_names.contains_key(&row.name) {
            return Err(MilpError::DuplicateName(row.name));
        }
        let constant = row.expr.take_constant();
        row.rhs -= constant;
        let id = ConstraintId(self.constraints.len());
        self.row_names.insert(row.name.clone(), id);
        self.constraints.push(row);
        Ok(id)
    }

    pub fn set_objective(&mut self, expr: LinearExpr, sense: ObjectiveSense) -> Result<(), MilpError> {
        self.check_ids(&expr)?;
        self.objective = match sense {
            ObjectiveSense::Minimize => expr,
            ObjectiveSense::Maximize => expr.negated(),
        };
        self.sense = sense;
        Ok(())
    }

    fn check_ids(&self, expr: &LinearExpr) -> Result<(), MilpError> {
        match expr.terms().iter().find(|(v, _)| v.index() >= self.variables.len()) {
            Some((v, _)) => Err(MilpError::UnknownVariable(v.index())),
            None => Ok(()),
        }
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.index()]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.names.get(name).copied()
    }

    pub fn constraints(&self) -> &[ConstraintRow] {
        &self.constraints
    }

    /// The objective in minimization form.
    pub fn objective(&self) -> &LinearExpr {
        &self.objective
    }

    /// The objective as the caller stated it (un-negated for maximization).
    pub fn user_objective(&self) -> LinearExpr {
        match self.sense {
            ObjectiveSense::Minimize => self.objective.clone(),
            ObjectiveSense::Maximize => self.objective.negated(),
        }
    }

    pub fn sense(&self) -> ObjectiveSense {
        self.sense
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn count_kind(&self, kind: VarKind) -> usize {
        self.variables.iter().filter(|v| v.kind == kind).count()
    }

    /// Same problem with every integrality requirement dropped.
    pub fn relaxed(&self) -> Problem {
        let mut relaxed = self.clone();
        for v in &mut relaxed.variables {
            v.kind = VarKind::Continuous;
        }
        relaxed
    }

    /// Converts a minimization-form objective value into the caller's sense.
    pub fn report_objective(&self, internal: f64) -> f64 {
        match self.sense {
            ObjectiveSense::Minimize => internal,
            ObjectiveSense::Maximize => -internal,
        }
    }

    /// Largest row or bound violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|r| r.violation(values))
            .fold(0.0, f64::max);
        let bounds = self
            .variables
            .iter()
            .map(|v| {
                let x = values[v.id.index()];
                let lo = v.lower.map_or(0.0, |l| (crate::expr::rational_to_f64(l) - x).max(0.0));
                let hi = v.upper.map_or(0.0, |u| (x - crate::expr::rational_to_f64(u)).max(0.0));
                lo.max(hi)
            })
            .fold(0.0, f64::max);
        rows.max(bounds)
    }
}
