use std::fmt;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::problem::VarId;

/// Exact coefficient type of the model layer.
pub type Rational = Ratio<i64>;

pub fn rational_to_f64(r: Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Converts through the shortest decimal representation of `x`, so `0.01`
/// becomes exactly `1/100` rather than the nearest binary fraction.
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    parse_decimal(&format!("{x}"))
}

/// Parses a decimal literal (`-12`, `0.75`, `1.5e-3`, `.5`) exactly.
pub(crate) fn parse_decimal(text: &str) -> Option<Rational> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = match digits.find('.') {
        Some(pos) => (&digits[..pos], &digits[pos + 1..]),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut numer: i64 = 0;
    for b in int_part.bytes().chain(frac_part.bytes()) {
        numer = numer.checked_mul(10)?.checked_add(i64::from(b - b'0'))?;
    }
    let mut scale = exponent - frac_part.len() as i32;
    let pow10 = |e: u32| 10i64.checked_pow(e);
    // Literals finer than i64 can carry are truncated, not rejected.
    while scale < 0 && pow10(scale.unsigned_abs()).is_none() && numer != 0 {
        numer /= 10;
        scale += 1;
    }
    let value = if scale >= 0 {
        Rational::from_integer(numer.checked_mul(pow10(scale as u32)?)?)
    } else {
        Rational::new(numer, pow10(scale.unsigned_abs())?)
    };
    Some(if negative { -value } else { value })
}

/// Formats a rational as a decimal literal. Exact when the reduced
/// denominator only has factors 2 and 5, otherwise rounded to 17 significant
/// digits.
pub(crate) fn format_rational(r: Rational) -> String {
    if r.is_integer() {
        return r.numer().to_string();
    }
    let mut den = *r.denom();
    let mut twos = 0u32;
    let mut fives = 0u32;
    while den % 2 == 0 {
        den /= 2;
        twos += 1;
    }
    while den % 5 == 0 {
        den /= 5;
        fives += 1;
    }
    if den == 1 {
        let digits = twos.max(fives);
        // scale numerator so the denominator becomes 10^digits
        let factor = 2i128.pow(digits - twos) * 5i128.pow(digits - fives);
        let scaled = i128::from(*r.numer()) * factor;
        let negative = scaled < 0;
        let abs = scaled.unsigned_abs().to_string();
        let digits = digits as usize;
        let padded = if abs.len() <= digits {
            format!("{}{}", "0".repeat(digits + 1 - abs.len()), abs)
        } else {
            abs
        };
        let split = padded.len() - digits;
        let body = format!("{}.{}", &padded[..split], &padded[split..]);
        return if negative { format!("-{body}") } else { body };
    }
    format!("{:.17e}", rational_to_f64(r))
}

/// Sparse linear form `Σ coef·x + constant`.
///
/// Terms are kept sorted by variable id with no duplicates and no zero
/// coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinearExpr {
    terms: Vec<(VarId, Rational)>,
    constant: Rational,
}

impl LinearExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: Rational) -> Self {
        LinearExpr {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (VarId, Rational)>,
    {
        let mut expr = LinearExpr {
            terms: terms.into_iter().collect(),
            constant: Rational::zero(),
        };
        expr.normalize();
        expr
    }

    /// Adds `coef·var`, merging with an existing term.
    pub fn add_term(&mut self, var: VarId, coef: Rational) -> &mut Self {
        match self.terms.binary_search_by_key(&var, |(v, _)| *v) {
            Ok(pos) => {
                self.terms[pos].1 += coef;
                if self.terms[pos].1.is_zero() {
                    self.terms.remove(pos);
                }
            }
            Err(pos) => {
                if !coef.is_zero() {
                    self.terms.insert(pos, (var, coef));
                }
            }
        }
        self
    }

    pub fn add_constant(&mut self, value: Rational) -> &mut Self {
        self.constant += value;
        self
    }

    pub fn add_expr(&mut self, other: &LinearExpr, scale: Rational) -> &mut Self {
        self.terms
            .extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += other.constant * scale;
        self.normalize();
        self
    }

    pub fn with_term(mut self, var: VarId, coef: Rational) -> Self {
        self.add_term(var, coef);
        self
    }

    pub fn terms(&self) -> &[(VarId, Rational)] {
        &self.terms
    }

    pub fn constant_term(&self) -> Rational {
        self.constant
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, var: VarId) -> Rational {
        self.terms
            .binary_search_by_key(&var, |(v, _)| *v)
            .map(|pos| self.terms[pos].1)
            .unwrap_or_else(|_| Rational::zero())
    }

    pub fn negated(&self) -> LinearExpr {
        LinearExpr {
            terms: self.terms.iter().map(|&(v, c)| (v, -c)).collect(),
            constant: -self.constant,
        }
    }

    pub(crate) fn take_constant(&mut self) -> Rational {
        std::mem::replace(&mut self.constant, Rational::zero())
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|&(v, c)| rational_to_f64(c) * values[v.index()])
            .sum::<f64>()
            + rational_to_f64(self.constant)
    }

    fn normalize(&mut self) {
        self.terms.sort_by_key(|(v, _)| *v);
        let mut merged: Vec<(VarId, Rational)> = Vec::with_capacity(self.terms.len());
        for &(v, c) in &self.terms {
            match merged.last_mut() {
                Some((last, acc)) if *last == v => *acc += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|(_, c)| !c.is_zero());
        self.terms = merged;
    }
}

impl fmt::Display for LinearExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for &(v, c) in &self.terms {
            if !first {
                f.write_str(" + ")?;
            }
            write!(f, "{} {}", format_rational(c), v)?;
            first = false;
        }
        if !self.constant.is_zero() || first {
            if !first {
                f.write_str(" + ")?;
            }
            f.write_str(&format_rational(self.constant))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(parse_decimal("0.01"), Some(Rational::new(1, 100)));
        assert_eq!(parse_decimal("-2.5"), Some(Rational::new(-5, 2)));
        assert_eq!(parse_decimal("1.5e-3"), Some(Rational::new(3, 2000)));
        assert_eq!(parse_decimal("3E2"), Some(Rational::from_integer(300)));
        assert_eq!(parse_decimal(".5"), Some(Rational::new(1, 2)));
        assert_eq!(parse_decimal("abc"), None);
        assert_eq!(parse_decimal("-"), None);
        assert_eq!(parse_decimal("1e"), None);
    }

    #[test]
    fn formatting_round_trips_decimal_rationals() {
        for r in [
            Rational::new(1, 100),
            Rational::new(-37, 10000),
            Rational::new(7, 8),
            Rational::from_integer(-4),
            Rational::new(1, 3125),
        ] {
            assert_eq!(parse_decimal(&format_rational(r)), Some(r), "{r}");
        }
        assert_eq!(format_rational(Rational::new(-1, 20)), "-0.05");
    }

    #[test]
    fn from_f64_uses_shortest_decimal() {
        assert_eq!(rational_from_f64(0.001), Some(Rational::new(1, 1000)));
        assert_eq!(rational_from_f64(0.2), Some(Rational::new(1, 5)));
        assert_eq!(rational_from_f64(f64::INFINITY), None);
    }

    #[test]
    fn terms_stay_sorted_and_merged() {
        let r = Rational::from_integer;
        let mut e = LinearExpr::from_terms([(VarId(3), r(1)), (VarId(1), r(2)), (VarId(3), r(-1))]);
        assert_eq!(e.terms(), &[(VarId(1), r(2))]);
        e.add_term(VarId(0), r(5)).add_term(VarId(1), r(-2));
        assert_eq!(e.terms(), &[(VarId(0), r(5))]);
    }
}
