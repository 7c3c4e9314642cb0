//! Fixed-point reals with a certified error radius.
//!
//! A [`PreciseReal`] at `bits` of precision stands for every real in
//! `[c - e, c + e] / 2^bits`, where `c` is the scaled center and `e` the error
//! radius in units of `2^-bits` (ulps). All arithmetic propagates the radius
//! outward, so a comparison that comes back certain holds for the true value.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Three-valued outcome of a certified comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certainty {
    True,
    False,
    Uncertain,
}

impl Certainty {
    pub fn is_true(self) -> bool {
        self == Certainty::True
    }

    pub fn is_uncertain(self) -> bool {
        self == Certainty::Uncertain
    }

    /// Conjunction: false dominates, then uncertain.
    pub fn and(self, other: Certainty) -> Certainty {
        match (self, other) {
            (Certainty::False, _) | (_, Certainty::False) => Certainty::False,
            (Certainty::True, Certainty::True) => Certainty::True,
            _ => Certainty::Uncertain,
        }
    }
}

/// An exact positive rational used as a comparison threshold (`eps`, `1/q`, ...).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Threshold(BigRational);

impl Threshold {
    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Result<Self> {
        let den = den.into();
        if den.is_zero() {
            return Err(Error::Parse("threshold with zero denominator".into()));
        }
        let r = BigRational::new(num.into(), den);
        if !r.is_positive() {
            return Err(Error::Precondition(format!("threshold must be positive, got {r}")));
        }
        Ok(Threshold(r))
    }

    pub fn from_rational(r: BigRational) -> Result<Self> {
        if !r.is_positive() {
            return Err(Error::Precondition(format!("threshold must be positive, got {r}")));
        }
        Ok(Threshold(r))
    }

    /// Parses `"0.1"`, `"3/8"`, `"1e-3"` or `"2.5e-2"` exactly.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
            let d: BigInt = d.trim().parse().map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
            return Threshold::new(n, d);
        }
        let (mantissa, exp) = match s.find(['e', 'E']) {
            Some(i) => {
                let e: i32 = s[i + 1..].parse().map_err(|_| Error::Parse(format!("bad exponent in {s:?}")))?;
                (&s[..i], e)
            }
            None => (s, 0),
        };
        let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(Error::Parse(format!("empty number {s:?}")));
        }
        let digits = format!("{int_part}{frac_part}");
        let num: BigInt = digits.parse().map_err(|_| Error::Parse(format!("bad decimal {s:?}")))?;
        let scale = exp - frac_part.len() as i32;
        let ten = BigInt::from(10u32);
        let r = if scale >= 0 {
            BigRational::from_integer(num * num_traits::pow(ten, scale as usize))
        } else {
            BigRational::new(num, num_traits::pow(ten, (-scale) as usize))
        };
        Threshold::from_rational(r)
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.numer().to_f64().unwrap_or(f64::NAN) / self.0.denom().to_f64().unwrap_or(f64::NAN)
    }

    /// `self / 2^k`.
    pub fn halved(&self, k: u32) -> Threshold {
        Threshold(&self.0 / BigRational::from_integer(BigInt::one() << k))
    }

    /// `self * (1 - 2^-k)`.
    pub fn times_one_minus_pow2(&self, k: u32) -> Threshold {
        let p = BigInt::one() << k;
        Threshold(&self.0 * BigRational::new(&p - 1, p))
    }

    /// True iff the threshold is strictly below `1/2`.
    pub fn below_half(&self) -> bool {
        self.0 < BigRational::new(BigInt::one(), BigInt::from(2))
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Threshold {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Threshold::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// A real number known to within `err_ulp * 2^-bits`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreciseReal {
    integer_part: BigInt,
    /// Fractional part scaled by `2^bits`; always `< 2^bits`.
    frac_fixed: BigUint,
    err_ulp: BigUint,
    bits: u32,
}

impl PreciseReal {
    pub fn from_scaled(scaled: BigInt, err_ulp: BigUint, bits: u32) -> Self {
        let one = BigInt::one() << bits;
        let (q, r) = scaled.div_mod_floor(&one);
        PreciseReal { integer_part: q, frac_fixed: r.to_biguint().expect("floor remainder is non-negative"), err_ulp, bits }
    }

    /// Smallest ball containing the scaled interval `[lo, hi]`.
    pub fn from_interval(lo: &BigInt, hi: &BigInt, bits: u32) -> Self {
        debug_assert!(lo <= hi);
        let center: BigInt = (lo + hi) >> 1;
        let r1 = hi - &center;
        let r2 = &center - lo;
        let err = r1.max(r2).to_biguint().expect("radius is non-negative");
        PreciseReal::from_scaled(center, err, bits)
    }

    /// Rounds a scaled interval at `from_bits` outward to `to_bits`.
    pub(crate) fn from_interval_rounded(lo: &BigInt, hi: &BigInt, from_bits: u32, to_bits: u32) -> Self {
        debug_assert!(from_bits >= to_bits);
        let d = from_bits - to_bits;
        let lo_t = lo >> d;
        let hi_t = -((-hi) >> d);
        PreciseReal::from_interval(&lo_t, &hi_t, to_bits)
    }

    pub fn from_int(n: impl Into<BigInt>, bits: u32) -> Self {
        PreciseReal::from_scaled(n.into() << bits, BigUint::zero(), bits)
    }

    /// `num/den` rounded to nearest; exact when the quotient is dyadic at this precision.
    pub fn from_ratio(num: impl Into<BigInt>, den: impl Into<BigInt>, bits: u32) -> Self {
        let num = num.into();
        let den = den.into();
        assert!(!den.is_zero(), "zero denominator");
        let (num, den) = if den.is_negative() { (-num, -den) } else { (num, den) };
        let (q, r) = (num << bits).div_mod_floor(&den);
        if r.is_zero() {
            PreciseReal::from_scaled(q, BigUint::zero(), bits)
        } else {
            // Rounding to the floor leaves the true value within one ulp above.
            PreciseReal::from_interval(&q, &(&q + 1), bits)
        }
    }

    /// Square root of a non-negative integer.
    pub fn sqrt(n: u64, bits: u32) -> Self {
        let target = BigUint::from(n) << (2 * bits);
        let s = target.sqrt();
        let exact = &s * &s == target;
        let s = BigInt::from(s);
        if exact {
            PreciseReal::from_scaled(s, BigUint::zero(), bits)
        } else {
            PreciseReal::from_interval(&s, &(&s + 1), bits)
        }
    }

    /// The golden ratio `(1 + sqrt 5) / 2`.
    pub fn golden_ratio(bits: u32) -> Self {
        let w = bits + 2;
        let s = BigInt::from((BigUint::from(5u32) << (2 * w)).sqrt());
        // lo/hi bound 1 + sqrt 5 at w bits, i.e. the golden ratio at w + 1 bits.
        let lo = (BigInt::one() << w) + &s;
        let hi = &lo + 1;
        PreciseReal::from_interval_rounded(&lo, &hi, w + 1, bits)
    }

    /// `log2(n)` for an integer `n >= 1`, evaluated with `guard` extra bits.
    pub fn log2(n: u64, bits: u32, guard: u32) -> Self {
        assert!(n >= 1, "log2 of zero");
        let w = bits + guard.max(8);
        let (lo, hi) = log2_interval(n, w);
        PreciseReal::from_interval_rounded(&lo, &hi, w, bits)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn integer_part(&self) -> &BigInt {
        &self.integer_part
    }

    pub fn frac_fixed(&self) -> &BigUint {
        &self.frac_fixed
    }

    pub fn err_ulp(&self) -> &BigUint {
        &self.err_ulp
    }

    pub fn scaled(&self) -> BigInt {
        (&self.integer_part << self.bits) + BigInt::from(self.frac_fixed.clone())
    }

    pub fn lower_scaled(&self) -> BigInt {
        self.scaled() - BigInt::from(self.err_ulp.clone())
    }

    pub fn upper_scaled(&self) -> BigInt {
        self.scaled() + BigInt::from(self.err_ulp.clone())
    }

    pub fn is_exact(&self) -> bool {
        self.err_ulp.is_zero()
    }

    /// Drops precision to `bits`, rounding outward.
    pub fn with_bits(&self, bits: u32) -> PreciseReal {
        match bits.cmp(&self.bits) {
            Ordering::Equal => self.clone(),
            Ordering::Less => PreciseReal::from_interval_rounded(&self.lower_scaled(), &self.upper_scaled(), self.bits, bits),
            Ordering::Greater => {
                let d = bits - self.bits;
                PreciseReal::from_scaled(self.scaled() << d, &self.err_ulp << d, bits)
            }
        }
    }

    pub fn add(&self, other: &PreciseReal) -> PreciseReal {
        let bits = self.bits.min(other.bits);
        let a = self.with_bits(bits);
        let b = other.with_bits(bits);
        PreciseReal::from_scaled(a.scaled() + b.scaled(), &a.err_ulp + &b.err_ulp, bits)
    }

    pub fn neg(&self) -> PreciseReal {
        PreciseReal::from_scaled(-self.scaled(), self.err_ulp.clone(), self.bits)
    }

    /// Exact product with an integer; the error radius scales by `|n|`.
    pub fn mul_int(&self, n: &BigInt) -> PreciseReal {
        let err = &self.err_ulp * n.magnitude();
        PreciseReal::from_scaled(self.scaled() * n, err, self.bits)
    }

    /// `{x}` in `[0, 1)`: the integer part is discarded, the radius is kept.
    pub fn frac_part(&self) -> PreciseReal {
        PreciseReal { integer_part: BigInt::zero(), frac_fixed: self.frac_fixed.clone(), err_ulp: self.err_ulp.clone(), bits: self.bits }
    }

    /// `||x|| = min({x}, 1 - {x})`. Distance to the nearest integer is
    /// 1-Lipschitz, so the radius carries over unchanged.
    pub fn dist_to_int(&self) -> PreciseReal {
        let one = BigUint::one() << self.bits;
        let f = &self.frac_fixed;
        let g = &one - f;
        let d = if *f <= g { f.clone() } else { g };
        PreciseReal { integer_part: BigInt::zero(), frac_fixed: d, err_ulp: self.err_ulp.clone(), bits: self.bits }
    }

    /// Certified `x < t`.
    pub fn lt(&self, t: &Threshold) -> Certainty {
        let scaled_t = t.numer() << self.bits;
        let den = t.denom();
        if self.upper_scaled() * den < scaled_t {
            Certainty::True
        } else if self.lower_scaled() * den >= scaled_t {
            Certainty::False
        } else {
            Certainty::Uncertain
        }
    }

    /// Certified `x > 0`.
    pub fn is_positive(&self) -> Certainty {
        if self.lower_scaled().is_positive() {
            Certainty::True
        } else if self.upper_scaled().sign() != Sign::Plus {
            Certainty::False
        } else {
            Certainty::Uncertain
        }
    }

    /// Nearest `f64` to the center.
    pub fn to_f64(&self) -> f64 {
        let shift = self.bits.saturating_sub(64);
        let top = (&self.frac_fixed >> shift).to_f64().unwrap_or(0.0);
        let frac = top / 2f64.powi((self.bits - shift) as i32);
        self.integer_part.to_f64().unwrap_or(f64::NAN) + frac
    }

    /// Radius as a real number (for reporting).
    pub fn err_f64(&self) -> f64 {
        self.err_ulp.to_f64().unwrap_or(f64::INFINITY) / 2f64.powi(self.bits as i32)
    }
}

impl fmt::Display for PreciseReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ± {:e}", self.to_f64(), self.err_f64())
    }
}

/// `atanh(p/q) * 2^w` for `0 < p/q <= 1/3`, as a scaled interval.
///
/// Every floor in the series loses at most one unit, the power recurrence
/// drifts by at most one unit per step, and the tail after the power hits zero
/// is bounded by the geometric sum of the accumulated drift.
fn atanh_interval(p: u64, q: u64, w: u32) -> (BigInt, BigInt) {
    debug_assert!(3 * p <= q);
    let p2 = BigInt::from(p) * p;
    let q2 = BigInt::from(q) * q;
    let mut pow = (BigInt::one() << w) * p / q;
    let mut sum = BigInt::zero();
    let mut j: u64 = 0;
    while !pow.is_zero() {
        sum += &pow / (2 * j + 1);
        pow = pow * &p2 / &q2;
        j += 1;
    }
    let err = BigInt::from(4 * j + 4);
    let hi = &sum + err;
    (sum, hi)
}

/// `log2(n) * 2^w` as a scaled interval.
fn log2_interval(n: u64, w: u32) -> (BigInt, BigInt) {
    let e = 63 - n.leading_zeros();
    let int = BigInt::from(e) << w;
    if n.is_power_of_two() {
        return (int.clone(), int);
    }
    // log2(n) = e + ln(m)/ln 2 with m = n/2^e in (1, 2),
    // ln(m) = 2 atanh((n - 2^e)/(n + 2^e)), ln 2 = 2 atanh(1/3).
    let pe = 1u64 << e;
    let w2 = w + 16;
    let (a_lo, a_hi) = atanh_interval(n - pe, n + pe, w2);
    let (b_lo, b_hi) = atanh_interval(1, 3, w2);
    let frac_lo = (a_lo << w) / b_hi;
    let frac_hi = -((-(a_hi << w)).div_floor(&b_lo));
    (&int + frac_lo, int + frac_hi)
}
