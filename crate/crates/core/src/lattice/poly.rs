//! Integer polynomials without constant term.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `c_1 x + c_2 x^2 + ... + c_d x^d` with `c_d != 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntPolynomial {
    /// `coeffs[i]` is the coefficient of `x^(i+1)`.
    coeffs: Vec<i64>,
}

impl IntPolynomial {
    /// From `c_1, ..., c_d`; trailing zeros are trimmed.
    pub fn new(mut coeffs: Vec<i64>) -> Result<Self> {
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            return Err(Error::Precondition("polynomial must be non-constant".into()));
        }
        Ok(IntPolynomial { coeffs })
    }

    pub fn monomial(degree: usize) -> Self {
        let mut c = vec![0; degree];
        c[degree - 1] = 1;
        IntPolynomial { coeffs: c }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    /// `c_1..c_d`.
    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    /// Coefficient of `x^e` (zero for `e = 0` and beyond the degree).
    pub fn coeff(&self, e: usize) -> i64 {
        if e == 0 {
            0
        } else {
            self.coeffs.get(e - 1).copied().unwrap_or(0)
        }
    }

    pub fn leading_coefficient(&self) -> i64 {
        *self.coeffs.last().expect("non-constant")
    }

    pub fn eval_big(&self, n: &BigInt) -> BigInt {
        // Horner on c_d x^{d-1} + ... + c_1, then times x.
        let inner = self.coeffs.iter().rev().fold(BigInt::zero(), |acc, &c| acc * n + c);
        inner * n
    }

    /// Exact value if it fits in `i128`.
    pub fn eval_i128(&self, n: i128) -> Option<i128> {
        let mut acc: i128 = 0;
        for &c in self.coeffs.iter().rev() {
            acc = acc.checked_mul(n)?.checked_add(c as i128)?;
        }
        acc.checked_mul(n)
    }

    /// `Σ m_i P_i` as a coefficient vector (may be identically zero).
    pub fn combination(polys: &[IntPolynomial], m: &[i64]) -> Vec<BigInt> {
        let d = polys.iter().map(IntPolynomial::degree).max().unwrap_or(0);
        (1..=d)
            .map(|e| polys.iter().zip(m).map(|(p, &mi)| BigInt::from(p.coeff(e)) * mi).sum())
            .collect()
    }
}

impl FromStr for IntPolynomial {
    type Err = Error;

    /// Parses forms like `x^2+3x`, `-x^3 + 2 x`, `4*x^2-x`.
    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(Error::Parse("empty polynomial".into()));
        }
        let mut terms = Vec::new();
        let mut start = 0;
        for (i, ch) in compact.char_indices() {
            if (ch == '+' || ch == '-') && i > start && !compact[..i].ends_with('^') {
                terms.push(&compact[start..i]);
                start = i;
            }
        }
        terms.push(&compact[start..]);
        let mut coeffs: Vec<i64> = Vec::new();
        for term in terms {
            let (sign, body) = match term.as_bytes().first() {
                Some(b'-') => (-1i64, &term[1..]),
                Some(b'+') => (1, &term[1..]),
                _ => (1, term),
            };
            let Some(xpos) = body.find('x') else {
                return Err(Error::Parse(format!("constant term {term:?} not allowed")));
            };
            let coef_str = body[..xpos].trim_end_matches('*');
            let coef: i64 = if coef_str.is_empty() {
                1
            } else {
                coef_str.parse().map_err(|_| Error::Parse(format!("bad coefficient in {term:?}")))?
            };
            let rest = &body[xpos + 1..];
            let exp: usize = if rest.is_empty() {
                1
            } else if let Some(e) = rest.strip_prefix('^') {
                e.parse().map_err(|_| Error::Parse(format!("bad exponent in {term:?}")))?
            } else {
                return Err(Error::Parse(format!("unexpected {rest:?} in {term:?}")));
            };
            if exp == 0 {
                return Err(Error::Parse(format!("constant term {term:?} not allowed")));
            }
            if coeffs.len() < exp {
                coeffs.resize(exp, 0);
            }
            coeffs[exp - 1] = coeffs[exp - 1]
                .checked_add(sign * coef)
                .ok_or_else(|| Error::Parse("coefficient overflow".into()))?;
        }
        IntPolynomial::new(coeffs)
    }
}

impl fmt::Display for IntPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            let e = i + 1;
            if !first {
                f.write_str(if c < 0 { "-" } else { "+" })?;
            } else if c < 0 {
                f.write_str("-")?;
            }
            first = false;
            let a = c.unsigned_abs();
            if a != 1 {
                write!(f, "{a}")?;
            }
            f.write_str("x")?;
            if e > 1 {
                write!(f, "^{e}")?;
            }
        }
        Ok(())
    }
}

impl Serialize for IntPolynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for IntPolynomial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a comma-separated list such as `"x,x^2,x+x^2"`.
pub fn parse_family(s: &str) -> Result<Vec<IntPolynomial>> {
    s.split(',').map(str::parse).collect()
}

/// `true` iff the combination `Σ m_i P_i` vanishes identically.
pub fn is_relation(polys: &[IntPolynomial], m: &[i64]) -> bool {
    IntPolynomial::combination(polys, m).iter().all(Zero::is_zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        let p: IntPolynomial = "x^2+3x".parse().unwrap();
        assert_eq!(p.coeffs(), &[3, 1]);
        assert_eq!(p.to_string(), "x^2+3x");
        let q: IntPolynomial = " -x^3 + 2 x ".parse().unwrap();
        assert_eq!(q.coeffs(), &[2, 0, -1]);
        assert_eq!(q.to_string(), "-x^3+2x");
        assert_eq!("4*x^2-x".parse::<IntPolynomial>().unwrap().coeffs(), &[-1, 4]);
        assert_eq!("x+x".parse::<IntPolynomial>().unwrap().coeffs(), &[2]);
    }

    #[test]
    fn rejects_constants() {
        assert!("x^2+1".parse::<IntPolynomial>().is_err());
        assert!("5".parse::<IntPolynomial>().is_err());
        assert!("x-x".parse::<IntPolynomial>().is_err());
        assert!("x^0".parse::<IntPolynomial>().is_err());
        assert!("".parse::<IntPolynomial>().is_err());
    }

    #[test]
    fn evaluation_agrees() {
        let p: IntPolynomial = "2x^3-5x^2+x".parse().unwrap();
        for n in -20i128..20 {
            let big = p.eval_big(&BigInt::from(n));
            assert_eq!(BigInt::from(p.eval_i128(n).unwrap()), big);
        }
        assert_eq!(p.eval_i128(0), Some(0));
        assert!(IntPolynomial::monomial(5).eval_i128(1 << 40).is_none());
    }

    #[test]
    fn relations() {
        let fam = parse_family("x,x^2,x+x^2").unwrap();
        assert!(is_relation(&fam, &[1, 1, -1]));
        assert!(!is_relation(&fam, &[1, 0, 0]));
        let fam = parse_family("2x,x").unwrap();
        assert!(is_relation(&fam, &[1, -2]));
    }
}
