//! CPLEX-LP text format bridge for external solvers.
//!
//! The writer emits `Minimize|Maximize / Subject To / Bounds / Binary /
//! General / End` with every variable listed in the `Bounds` section in id
//! order, which is what lets [`parse_lp`] rebuild a problem with identical
//! ids. Coefficients are written as exact decimals whenever the rational
//! allows it.
//!
//! Solutions come back as plain text, one `name value` pair per line. Blank
//! lines and lines starting with `#` are ignored and an optional
//! `status=<optimal|infeasible|unbounded|limit>` line sets the status.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use num_traits::{One, Zero};

use crate::error::MilpError;
use crate::expr::{format_rational, parse_decimal, LinearExpr, Rational};
use crate::problem::{ConstraintRow, ObjectiveSense, Problem, Sense, VarKind, VariableSpec};
use crate::solution::{SolveStatus, Solution};

const WRAP: usize = 72;

fn append_terms(out: &mut String, expr: &LinearExpr, problem: &Problem, line_len: &mut usize) {
    let mut first = true;
    let push = |out: &mut String, piece: String, line_len: &mut usize| {
        if *line_len + piece.len() > WRAP && *line_len > 0 {
            out.push_str("\n   ");
            *line_len = 3;
        }
        *line_len += piece.len();
        out.push_str(&piece);
    };
    for &(v, c) in expr.terms() {
        let name = &problem.variable(v).name;
        let negative = c < Rational::zero();
        let mag = if negative { -c } else { c };
        let coef = if mag.is_one() {
            String::new()
        } else {
            format!("{} ", format_rational(mag))
        };
        let sign = match (first, negative) {
            (true, false) => "",
            (true, true) => "- ",
            (false, false) => " + ",
            (false, true) => " - ",
        };
        push(out, format!("{sign}{coef}{name}"), line_len);
        first = false;
    }
    let constant = expr.constant_term();
    if !constant.is_zero() {
        let negative = constant < Rational::zero();
        let mag = if negative { -constant } else { constant };
        let sign = match (first, negative) {
            (true, false) => "",
            (true, true) => "- ",
            (false, false) => " + ",
            (false, true) => " - ",
        };
        push(out, format!("{sign}{}", format_rational(mag)), line_len);
        first = false;
    }
    if first {
        push(out, "0".to_string(), line_len);
    }
}

/// Renders `problem` as CPLEX-LP text.
pub fn to_lp_string(problem: &Problem) -> String {
    let mut out = String::new();
    out.push_str("\\ written by amod-milp\n");
    out.push_str(match problem.sense() {
        ObjectiveSense::Minimize => "Minimize\n",
        ObjectiveSense::Maximize => "Maximize\n",
    });
    out.push_str(" obj: ");
    let objective = problem.user_objective();
    if objective.is_empty() && objective.constant_term().is_zero() {
        out.push('\n');
    } else {
        let mut len = 6;
        append_terms(&mut out, &objective, problem, &mut len);
        out.push('\n');
    }
    out.push_str("Subject To\n");
    for row in problem.constraints() {
        let _ = write!(out, " {}: ", row.name);
        let mut len = row.name.len() + 3;
        append_terms(&mut out, &row.expr, problem, &mut len);
        let _ = writeln!(out, " {} {}", row.sense.symbol(), format_rational(row.rhs));
    }
    out.push_str("Bounds\n");
    for v in problem.variables() {
        let line = match (v.lower, v.upper) {
            (None, None) => format!(" {} free", v.name),
            (Some(lo), None) => format!(" {} >= {}", v.name, format_rational(lo)),
            (None, Some(hi)) => format!(" -inf <= {} <= {}", v.name, format_rational(hi)),
            (Some(lo), Some(hi)) if lo == hi => format!(" {} = {}", v.name, format_rational(lo)),
            (Some(lo), Some(hi)) => format!(
                " {} <= {} <= {}",
                format_rational(lo),
                v.name,
                format_rational(hi)
            ),
        };
        out.push_str(&line);
        out.push('\n');
    }
    for (header, kind) in [("Binary", VarKind::Binary), ("General", VarKind::Integer)] {
        out.push_str(header);
        out.push('\n');
        let names: Vec<&str> = problem
            .variables()
            .iter()
            .filter(|v| v.kind == kind)
            .map(|v| v.name.as_str())
            .collect();
        for chunk in names.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

pub fn write_lp<W: Write>(problem: &Problem, mut out: W) -> Result<(), MilpError> {
    out.write_all(to_lp_string(problem).as_bytes())?;
    Ok(())
}

pub fn write_lp_file(problem: &Problem, path: impl AsRef<Path>) -> Result<(), MilpError> {
    let file = std::fs::File::create(path)?;
    let mut buf = std::io::BufWriter::new(file);
    write_lp(problem, &mut buf)?;
    buf.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Name(String),
    Number(Rational),
    Plus,
    Minus,
    Colon,
    Sense(Sense),
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binary,
    General,
    End,
}

fn section_header(line: &str) -> Option<(Section, Option<ObjectiveSense>)> {
    let lower = line.trim().to_ascii_lowercase();
    let collapsed: String = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    Some(match collapsed.as_str() {
        "minimize" | "minimum" | "min" => (Section::Objective, Some(ObjectiveSense::Minimize)),
        "maximize" | "maximum" | "max" => (Section::Objective, Some(ObjectiveSense::Maximize)),
        "subject to" | "such that" | "st" | "s.t." | "st." => (Section::Constraints, None),
        "bounds" | "bound" => (Section::Bounds, None),
        "binary" | "binaries" | "bin" => (Section::Binary, None),
        "general" | "generals" | "gen" => (Section::General, None),
        "end" => (Section::End, None),
        _ => return None,
    })
}

fn lex_line(line: &str, line_no: usize, out: &mut Vec<(Token, usize)>) -> Result<(), MilpError> {
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let two = line.get(i..i + 2).unwrap_or("");
        let (token, len) = match c {
            '+' => (Token::Plus, 1),
            '-' => (Token::Minus, 1),
            ':' => (Token::Colon, 1),
            '<' | '=' | '>' => match two {
                "<=" | "=<" => (Token::Sense(Sense::Le), 2),
                ">=" | "=>" => (Token::Sense(Sense::Ge), 2),
                _ if c == '<' => (Token::Sense(Sense::Le), 1),
                _ if c == '>' => (Token::Sense(Sense::Ge), 1),
                _ => (Token::Sense(Sense::Eq), 1),
            },
            _ if c.is_ascii_digit() || c == '.' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let text = &line[i..j];
                let value = parse_decimal(text)
                    .ok_or_else(|| MilpError::parse(line_no, format!("bad number `{text}`")))?;
                (Token::Number(value), j - i)
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < bytes.len() {
                    let ch = bytes[j] as char;
                    if ch.is_ascii_alphanumeric() || "_[].{}()!#$%&@~|,;?'\"`".contains(ch) {
                        j += 1;
                    } else {
                        break;
                    }
                }
                let word = &line[i..j];
                let lower = word.to_ascii_lowercase();
                let token = if lower == "inf" || lower == "infinity" {
                    Token::Infinity
                } else {
                    Token::Name(word.to_string())
                };
                (token, j - i)
            }
            _ => {
                return Err(MilpError::parse(line_no, format!("unexpected character `{c}`")));
            }
        };
        out.push((token, line_no));
        i += len;
    }
    Ok(())
}

struct Builder {
    order: Vec<String>,
    seen: HashMap<String, usize>,
    bounds_order: Vec<String>,
    lower: HashMap<String, Option<Rational>>,
    upper: HashMap<String, Option<Rational>>,
    kinds: HashMap<String, VarKind>,
}

impl Builder {
    fn touch(&mut self, name: &str) {
        if !self.seen.contains_key(name) {
            self.seen.insert(name.to_string(), self.order.len());
            self.order.push(name.to_string());
        }
    }
}

struct Cursor<'a> {
    tokens: &'a [(Token, usize)],
    pos: usize,
    last_line: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn peek2(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos + 1).map(|(t, _)| t)
    }

    fn line(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.last_line, |(_, l)| *l)
    }

    fn next(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.pos).map(|(t, _)| t);
        self.pos += 1;
        t
    }

    fn done(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn err(&self, message: impl Into<String>) -> MilpError {
        MilpError::parse(self.line(), message)
    }

    fn optional_label(&mut self) -> Option<String> {
        if let (Some(Token::Name(n)), Some(Token::Colon)) = (self.peek(), self.peek2()) {
            self.pos += 2;
            return Some(n.clone());
        }
        None
    }

    /// Reads `±c name` / `±c` terms until a sense token or the end.
    fn terms(&mut self, builder: &mut Builder) -> Result<(Vec<(String, Rational)>, Rational), MilpError> {
        let mut terms = Vec::new();
        let mut constant = Rational::zero();
        loop {
            let mut sign = Rational::one();
            let mut saw_sign = false;
            while let Some(tok) = self.peek() {
                match tok {
                    Token::Plus => {}
                    Token::Minus => sign = -sign,
                    _ => break,
                }
                saw_sign = true;
                self.pos += 1;
            }
            match self.peek() {
                Some(Token::Number(c)) => {
                    let c = *c * sign;
                    self.pos += 1;
                    if let Some(Token::Name(n)) = self.peek() {
                        if self.peek2() == Some(&Token::Colon) {
                            // next statement's label
                            constant += c;
                            return Ok((terms, constant));
                        }
                        builder.touch(n);
                        terms.push((n.clone(), c));
                        self.pos += 1;
                    } else {
                        constant += c;
                    }
                }
                Some(Token::Name(n)) if self.peek2() != Some(&Token::Colon) => {
                    builder.touch(n);
                    terms.push((n.clone(), sign));
                    self.pos += 1;
                }
                _ => {
                    if saw_sign {
                        return Err(self.err("dangling sign"));
                    }
                    return Ok((terms, constant));
                }
            }
        }
    }

    fn signed_value(&mut self) -> Result<Option<Rational>, MilpError> {
        let mut negative = false;
        while let Some(tok) = self.peek() {
            match tok {
                Token::Plus => {}
                Token::Minus => negative = !negative,
                _ => break,
            }
            self.pos += 1;
        }
        match self.next() {
            Some(Token::Number(v)) => Ok(Some(if negative { -*v } else { *v })),
            Some(Token::Infinity) => Ok(if negative { None } else { None }),
            _ => Err(self.err("expected a number")),
        }
    }
}

fn expr_from(terms: &[(String, Rational)], ids: &HashMap<String, crate::VarId>) -> LinearExpr {
    LinearExpr::from_terms(terms.iter().map(|(n, c)| (ids[n], *c)))
}

/// Parses CPLEX-LP text into a [`Problem`].
pub fn parse_lp(text: &str) -> Result<Problem, MilpError> {
    let mut sections: Vec<(Section, Vec<(Token, usize)>)> = Vec::new();
    let mut sense = ObjectiveSense::Minimize;
    let mut current = Section::Preamble;
    let mut tokens = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.split('\\').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if let Some((section, obj_sense)) = section_header(line) {
            sections.push((current, std::mem::take(&mut tokens)));
            current = section;
            if let Some(s) = obj_sense {
                sense = s;
            }
            if section == Section::End {
                break;
            }
            continue;
        }
        if current == Section::Preamble {
            return Err(MilpError::parse(line_no, "content before the objective section"));
        }
        lex_line(line, line_no, &mut tokens)?;
    }
    sections.push((current, tokens));

    let mut builder = Builder {
        order: Vec::new(),
        seen: HashMap::new(),
        bounds_order: Vec::new(),
        lower: HashMap::new(),
        upper: HashMap::new(),
        kinds: HashMap::new(),
    };
    let mut objective: Option<(Vec<(String, Rational)>, Rational)> = None;
    let mut rows: Vec<(String, Vec<(String, Rational)>, Rational, Sense, Rational, usize)> = Vec::new();

    for (section, toks) in &sections {
        let mut cur = Cursor {
            tokens: toks,
            pos: 0,
            last_line,
        };
        match section {
            Section::Preamble | Section::End => {}
            Section::Objective => {
                cur.optional_label();
                let parsed = cur.terms(&mut builder)?;
                if !cur.done() {
                    return Err(cur.err("unexpected token in objective"));
                }
                objective = Some(parsed);
            }
            Section::Constraints => {
                while !cur.done() {
                    let line = cur.line();
                    let name = cur.optional_label().unwrap_or_default();
                    let (terms, constant) = cur.terms(&mut builder)?;
                    let sense = match cur.next() {
                        Some(Token::Sense(s)) => *s,
                        _ => return Err(MilpError::parse(line, "expected <=, >= or =")),
                    };
                    let rhs = cur
                        .signed_value()?
                        .ok_or_else(|| MilpError::parse(line, "infinite right-hand side"))?;
                    rows.push((name, terms, constant, sense, rhs, line));
                }
            }
            Section::Bounds => {
                while !cur.done() {
                    parse_bound(&mut cur, &mut builder)?;
                }
            }
            Section::Binary | Section::General => {
                let kind = if *section == Section::Binary {
                    VarKind::Binary
                } else {
                    VarKind::Integer
                };
                while let Some(tok) = cur.next() {
                    match tok {
                        Token::Name(n) => {
                            builder.touch(n);
                            builder.kinds.insert(n.clone(), kind);
                        }
                        _ => return Err(cur.err("expected a variable name")),
                    }
                }
            }
        }
    }

    let mut names: Vec<String> = Vec::with_capacity(builder.order.len());
    let mut placed: std::collections::HashSet<&str> = std::collections::HashSet::new();
    for n in builder.bounds_order.iter().chain(builder.order.iter()) {
        if placed.insert(n.as_str()) {
            names.push(n.clone());
        }
    }

    let mut problem = Problem::new();
    let mut ids = HashMap::new();
    for name in &names {
        let kind = builder.kinds.get(name).copied().unwrap_or(VarKind::Continuous);
        let mut lower = builder.lower.get(name).copied().unwrap_or(Some(Rational::zero()));
        let mut upper = builder.upper.get(name).copied().unwrap_or(None);
        if kind == VarKind::Binary {
            lower = Some(lower.unwrap_or(Rational::zero()).max(Rational::zero()));
            upper = Some(upper.unwrap_or(Rational::one()).min(Rational::one()));
        }
        let id = problem.add_variable(VariableSpec {
            name: name.clone(),
            kind,
            lower,
            upper,
        })?;
        ids.insert(name.clone(), id);
    }
    if let Some((terms, constant)) = objective {
        let mut expr = expr_from(&terms, &ids);
        expr.add_constant(constant);
        problem.set_objective(expr, sense)?;
    }
    for (name, terms, constant, sense, rhs, line) in rows {
        let expr = expr_from(&terms, &ids);
        problem
            .add_constraint(ConstraintRow::new(name, expr, sense, rhs - constant))
            .map_err(|e| MilpError::parse(line, e.to_string()))?;
    }
    Ok(problem)
}

fn parse_bound(cur: &mut Cursor<'_>, builder: &mut Builder) -> Result<(), MilpError> {
    let line = cur.line();
    let record = |builder: &mut Builder, name: &str| {
        builder.touch(name);
        if !builder.bounds_order.iter().any(|n| n == name) {
            builder.bounds_order.push(name.to_string());
        }
    };
    match cur.peek() {
        Some(Token::Name(name)) => {
            let name = name.clone();
            cur.pos += 1;
            record(builder, &name);
            match cur.next() {
                Some(Token::Name(w)) if w.eq_ignore_ascii_case("free") => {
                    builder.lower.insert(name.clone(), None);
                    builder.upper.insert(name, None);
                }
                Some(Token::Sense(s)) => {
                    let s = *s;
                    let negative = matches!(cur.peek(), Some(Token::Minus));
                    let value = cur.signed_value()?;
                    apply_bound(builder, &name, s, value, negative);
                }
                _ => return Err(MilpError::parse(line, "malformed bound")),
            }
        }
        Some(_) => {
            let negative = matches!(cur.peek(), Some(Token::Minus));
            let value = cur.signed_value()?;
            let s = match cur.next() {
                Some(Token::Sense(s)) => *s,
                _ => return Err(MilpError::parse(line, "malformed bound")),
            };
            let name = match cur.next() {
                Some(Token::Name(n)) => n.clone(),
                _ => return Err(MilpError::parse(line, "expected a variable name")),
            };
            record(builder, &name);
            // `v <= x` is `x >= v`
            let flipped = match s {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
            apply_bound(builder, &name, flipped, value, negative);
            if let Some(Token::Sense(s2)) = cur.peek() {
                let s2 = *s2;
                cur.pos += 1;
                let negative = matches!(cur.peek(), Some(Token::Minus));
                let value = cur.signed_value()?;
                apply_bound(builder, &name, s2, value, negative);
            }
        }
        None => {}
    }
    Ok(())
}

/// `value == None` is an infinity whose sign is `negative`.
fn apply_bound(builder: &mut Builder, name: &str, sense: Sense, value: Option<Rational>, negative: bool) {
    match (sense, value) {
        (Sense::Le, v) => {
            if v.is_none() && negative {
                // x <= -inf: leave as is, no finite bound implied
                return;
            }
            builder.upper.insert(name.to_string(), v);
        }
        (Sense::Ge, v) => {
            if v.is_none() && !negative {
                return;
            }
            builder.lower.insert(name.to_string(), v);
        }
        (Sense::Eq, v) => {
            builder.lower.insert(name.to_string(), v);
            builder.upper.insert(name.to_string(), v);
        }
    }
}

pub fn parse_lp_file(path: impl AsRef<Path>) -> Result<Problem, MilpError> {
    parse_lp(&std::fs::read_to_string(path)?)
}

/// Reads `name value` lines into a [`Solution`] for `problem`. Variables
/// absent from the text are taken as zero.
pub fn read_solution(text: &str, problem: &Problem) -> Result<Solution, MilpError> {
    let mut values = vec![0.0; problem.num_variables()];
    let mut status = SolveStatus::Optimal;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(word) = line.strip_prefix("status=") {
            status = match word.trim().to_ascii_lowercase().as_str() {
                "optimal" => SolveStatus::Optimal,
                "infeasible" => SolveStatus::Infeasible,
                "unbounded" => SolveStatus::Unbounded,
                "limit" | "limitreached" | "limit_reached" => SolveStatus::LimitReached,
                other => return Err(MilpError::parse(line_no, format!("unknown status `{other}`"))),
            };
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(MilpError::parse(line_no, "expected `name value`"));
        };
        let id = problem
            .var_by_name(name)
            .ok_or_else(|| MilpError::parse(line_no, format!("unknown variable `{name}`")))?;
        values[id.index()] = value
            .parse::<f64>()
            .map_err(|_| MilpError::parse(line_no, format!("bad value `{value}`")))?;
    }
    if matches!(status, SolveStatus::Infeasible | SolveStatus::Unbounded) {
        return Ok(Solution::without_values(status, problem));
    }
    let objective = problem.user_objective().evaluate(&values);
    Ok(Solution {
        status,
        values: Some(values),
        objective,
        bound: objective,
        nodes: 0,
        lp_iterations: 0,
    })
}

/// Writes the `name value` form read by [`read_solution`]. Values use the
/// shortest representation that round-trips the `f64`.
pub fn write_solution<W: Write>(solution: &Solution, problem: &Problem, mut out: W) -> Result<(), MilpError> {
    let status = match solution.status {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::Unbounded => "unbounded",
        SolveStatus::LimitReached => "limit",
    };
    writeln!(out, "status={status}")?;
    if let Some(values) = &solution.values {
        for (v, x) in problem.variables().iter().zip(values) {
            writeln!(out, "{} {}", v.name, x)?;
        }
    }
    Ok(())
}
