//! Named real constants and precision escalation.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::fixed::FracKernel;
use super::real::{Certainty, PreciseReal};
use crate::error::{Error, Result};

/// Working-precision settings shared by every certified computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Precision {
    pub bits: u32,
    pub guard_bits: u32,
    pub max_escalations: u32,
}

impl Default for Precision {
    fn default() -> Self {
        Precision { bits: 256, guard_bits: 32, max_escalations: 4 }
    }
}

impl Precision {
    pub fn with_bits(bits: u32) -> Self {
        Precision { bits, ..Precision::default() }
    }

    /// Bits used at escalation `level` (doubling each time).
    pub fn bits_at(&self, level: u32) -> u32 {
        self.bits.max(64) << level
    }
}

/// A real supplied by name: square roots, base-2 logarithms, the golden
/// ratio, rationals, and finite sums of these.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RealConst {
    Sqrt(u64),
    Log2(u64),
    Golden,
    Rational(BigInt, BigInt),
    Sum(Vec<RealConst>),
}

impl RealConst {
    pub fn rational(num: i64, den: i64) -> Self {
        RealConst::Rational(BigInt::from(num), BigInt::from(den))
    }

    /// `log2 p_2 + ... + log2 p_{k+1}`: the default torus frequencies for dimension `k`.
    pub fn log2_primes(k: usize) -> Vec<RealConst> {
        first_primes(k + 1).into_iter().skip(1).map(RealConst::Log2).collect()
    }

    /// True when the constant is known to be rational.
    pub fn is_rational(&self) -> bool {
        match self {
            RealConst::Sqrt(n) => {
                let s = (*n as f64).sqrt() as u64;
                (s.saturating_sub(1)..=s + 1).any(|r| r * r == *n)
            }
            RealConst::Log2(n) => n.is_power_of_two(),
            RealConst::Golden => false,
            RealConst::Rational(..) => true,
            RealConst::Sum(parts) => parts.iter().all(RealConst::is_rational),
        }
    }

    /// Certified value at `bits` of precision.
    pub fn eval(&self, bits: u32, guard: u32) -> PreciseReal {
        match self {
            RealConst::Sqrt(n) => PreciseReal::sqrt(*n, bits),
            RealConst::Log2(n) => PreciseReal::log2(*n, bits, guard),
            RealConst::Golden => PreciseReal::golden_ratio(bits),
            RealConst::Rational(p, q) => PreciseReal::from_ratio(p.clone(), q.clone(), bits),
            RealConst::Sum(parts) => parts
                .iter()
                .map(|p| p.eval(bits, guard))
                .fold(PreciseReal::from_int(0, bits), |acc, x| acc.add(&x)),
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.eval(64, 16).to_f64()
    }

    fn parse_atom(s: &str) -> Result<RealConst> {
        let s = s.trim();
        let lower = s.to_ascii_lowercase();
        let arg = |prefix: &str| -> Option<String> {
            let rest = lower.strip_prefix(prefix)?;
            let rest = rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')).unwrap_or(rest);
            Some(rest.trim().to_string())
        };
        if lower == "phi" || lower == "golden" {
            return Ok(RealConst::Golden);
        }
        if let Some(a) = arg("sqrt") {
            let n: u64 = a.parse().map_err(|_| Error::Parse(format!("bad sqrt argument in {s:?}")))?;
            return Ok(RealConst::Sqrt(n));
        }
        if let Some(a) = arg("log2") {
            let n: u64 = a.parse().map_err(|_| Error::Parse(format!("bad log2 argument in {s:?}")))?;
            if n == 0 {
                return Err(Error::Parse("log2(0) is undefined".into()));
            }
            return Ok(RealConst::Log2(n));
        }
        let (p, q) = s.split_once('/').unwrap_or((s, "1"));
        let p: BigInt = p.trim().parse().map_err(|_| Error::Parse(format!("unknown constant {s:?}")))?;
        let q: BigInt = q.trim().parse().map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        Ok(RealConst::Rational(p, q))
    }
}

impl FromStr for RealConst {
    type Err = Error;

    /// Accepts `sqrt2`, `sqrt(2)`, `phi`, `golden`, `log2(3)`, `p/q` and
    /// `+`-separated sums of these.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('+').collect();
        if parts.iter().any(|p| p.trim().is_empty()) {
            return Err(Error::Parse(format!("malformed constant {s:?}")));
        }
        if parts.len() == 1 {
            return RealConst::parse_atom(parts[0]);
        }
        Ok(RealConst::Sum(parts.into_iter().map(RealConst::parse_atom).collect::<Result<_>>()?))
    }
}

impl fmt::Display for RealConst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RealConst::Sqrt(n) => write!(f, "sqrt({n})"),
            RealConst::Log2(n) => write!(f, "log2({n})"),
            RealConst::Golden => write!(f, "phi"),
            RealConst::Rational(p, q) if q.is_one() => write!(f, "{p}"),
            RealConst::Rational(p, q) => write!(f, "{p}/{q}"),
            RealConst::Sum(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str("+")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
        }
    }
}

impl Serialize for RealConst {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for RealConst {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

const MAX_LEVELS: usize = 8;

/// A named constant with its approximations cached per escalation level.
///
/// Cloning is cheap and clones share the cache.
#[derive(Clone)]
pub struct CertifiedReal {
    inner: Arc<Inner>,
}

struct Inner {
    constant: RealConst,
    precision: Precision,
    values: [OnceLock<PreciseReal>; MAX_LEVELS],
    kernels: [OnceLock<FracKernel>; MAX_LEVELS],
}

impl fmt::Debug for CertifiedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CertifiedReal")
            .field("constant", &self.inner.constant)
            .field("precision", &self.inner.precision)
            .finish()
    }
}

impl CertifiedReal {
    pub fn new(constant: RealConst, precision: Precision) -> Self {
        let mut precision = precision;
        precision.max_escalations = precision.max_escalations.min(MAX_LEVELS as u32 - 1);
        CertifiedReal {
            inner: Arc::new(Inner {
                constant,
                precision,
                values: Default::default(),
                kernels: Default::default(),
            }),
        }
    }

    pub fn constant(&self) -> &RealConst {
        &self.inner.constant
    }

    pub fn precision(&self) -> Precision {
        self.inner.precision
    }

    pub fn levels(&self) -> u32 {
        self.inner.precision.max_escalations + 1
    }

    pub fn at_level(&self, level: u32) -> &PreciseReal {
        let p = self.inner.precision;
        self.inner.values[level as usize].get_or_init(|| self.inner.constant.eval(p.bits_at(level), p.guard_bits))
    }

    pub fn kernel(&self, level: u32) -> &FracKernel {
        self.inner.kernels[level as usize].get_or_init(|| FracKernel::new(self.at_level(level)))
    }

    pub fn value(&self) -> &PreciseReal {
        self.at_level(0)
    }

    /// Runs `test` at increasing precision until it is decided.
    ///
    /// Returns the final outcome and the level at which it was reached;
    /// `Uncertain` survives only when every level was tried.
    pub fn decide<F>(&self, mut test: F) -> (Certainty, u32)
    where
        F: FnMut(&CertifiedReal, u32) -> Certainty,
    {
        let mut last = Certainty::Uncertain;
        for level in 0..self.levels() {
            last = test(self, level);
            if !last.is_uncertain() {
                return (last, level);
            }
        }
        (last, self.levels() - 1)
    }
}

/// The first `n` primes.
pub fn first_primes(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut c = 2u64;
    while out.len() < n {
        if out.iter().take_while(|&&p| p * p <= c).all(|&p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}
