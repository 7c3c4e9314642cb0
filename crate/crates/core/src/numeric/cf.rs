//! Continued fractions of certified reals.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::constant::CertifiedReal;
use super::real::{Certainty, PreciseReal, Threshold};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContinuedFraction {
    pub partial_quotients: Vec<BigInt>,
    /// `(p_n, q_n)` for `n = 0, 1, ...`.
    pub convergents: Vec<(BigInt, BigInt)>,
}

impl ContinuedFraction {
    pub fn from_quotients(quotients: Vec<BigInt>) -> Self {
        let mut convergents = Vec::with_capacity(quotients.len());
        let (mut p2, mut p1) = (BigInt::zero(), BigInt::one());
        let (mut q2, mut q1) = (BigInt::one(), BigInt::zero());
        for a in &quotients {
            let p = a * &p1 + &p2;
            let q = a * &q1 + &q2;
            convergents.push((p.clone(), q.clone()));
            (p2, p1) = (p1, p);
            (q2, q1) = (q1, q);
        }
        ContinuedFraction { partial_quotients: quotients, convergents }
    }

    pub fn len(&self) -> usize {
        self.partial_quotients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partial_quotients.is_empty()
    }

    pub fn denominators(&self) -> impl Iterator<Item = &BigInt> {
        self.convergents.iter().map(|(_, q)| q)
    }

    /// `p_n q_{n-1} - p_{n-1} q_n = (-1)^{n+1}` for every `n >= 1`.
    pub fn determinants_ok(&self) -> bool {
        self.convergents.windows(2).enumerate().all(|(i, w)| {
            let d = &w[1].0 * &w[0].1 - &w[0].0 * &w[1].1;
            let expected = if i % 2 == 0 { BigInt::one() } else { BigInt::from(-1) };
            d == expected
        })
    }
}

/// The first `count` partial quotients of `beta`, each certified.
///
/// Euclid's algorithm runs on both endpoints of the enclosing interval; a
/// quotient is accepted only when both agree.
pub fn convergents_of(beta: &PreciseReal, count: usize) -> Result<ContinuedFraction> {
    let scale = BigInt::one() << beta.bits();
    // Current interval [lo_n/lo_d, hi_n/hi_d] with positive denominators.
    let (mut lo_n, mut lo_d) = (beta.lower_scaled(), scale.clone());
    let (mut hi_n, mut hi_d) = (beta.upper_scaled(), scale);
    let mut quotients = Vec::with_capacity(count);
    while quotients.len() < count {
        let a_lo = lo_n.div_floor(&lo_d);
        let a_hi = hi_n.div_floor(&hi_d);
        if a_lo != a_hi {
            return Err(Error::PrecisionExhausted(format!(
                "partial quotient {} not determined at {} bits",
                quotients.len(),
                beta.bits()
            )));
        }
        if !quotients.is_empty() && !a_lo.is_positive() {
            return Err(Error::InternalInvariantBroken("non-positive partial quotient".into()));
        }
        let r_lo = &lo_n - &a_lo * &lo_d;
        let r_hi = &hi_n - &a_lo * &hi_d;
        quotients.push(a_lo);
        if quotients.len() == count {
            break;
        }
        if r_lo.is_zero() || r_hi.is_zero() {
            if beta.is_exact() {
                return Err(Error::RationalExpansion { terms: quotients.len() });
            }
            return Err(Error::PrecisionExhausted(format!(
                "expansion reached an interval endpoint after {} terms",
                quotients.len()
            )));
        }
        // x -> 1/(x - a) reverses the order of the endpoints.
        (lo_n, lo_d, hi_n, hi_d) = (hi_d, r_hi, lo_d, r_lo);
    }
    Ok(ContinuedFraction::from_quotients(quotients))
}

/// `count` convergents, escalating precision until every quotient is certified.
pub fn convergents_certified(beta: &CertifiedReal, count: usize) -> Result<ContinuedFraction> {
    let mut last = None;
    for level in 0..beta.levels() {
        match convergents_of(beta.at_level(level), count) {
            Ok(cf) => return Ok(cf),
            Err(e @ Error::RationalExpansion { .. }) => return Err(e),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::PrecisionExhausted("no precision levels".into())))
}

/// Certified `||q·beta|| < eps` with escalation.
pub fn norm_of_multiple_lt(beta: &CertifiedReal, q: &BigInt, eps: &Threshold) -> Certainty {
    beta.decide(|b, level| b.at_level(level).mul_int(q).dist_to_int().lt(eps)).0
}

/// The smallest convergent denominator `q > floor` of `beta` with certified
/// `||q·beta|| < eps`.
///
/// For `floor = 0` this is the smallest positive integer with the property,
/// since that integer is a best approximation and hence a convergent
/// denominator.
pub fn small_norm_multiple_above(beta: &CertifiedReal, eps: &Threshold, floor: u128) -> Result<u128> {
    if !eps.below_half() {
        return Err(Error::Precondition(format!("eps must lie in (0, 1/2), got {eps}")));
    }
    let mut count = 16;
    loop {
        let cf = convergents_certified(beta, count)?;
        let mut prev: Option<&BigInt> = None;
        for q in cf.denominators() {
            if prev == Some(q) || !q.is_positive() {
                continue;
            }
            prev = Some(q);
            let Some(qu) = q.to_u128() else {
                return Err(Error::PrecisionExhausted("convergent denominator exceeds 128 bits".into()));
            };
            if qu <= floor {
                continue;
            }
            match norm_of_multiple_lt(beta, q, eps) {
                Certainty::True => return Ok(qu),
                Certainty::False => {}
                Certainty::Uncertain => {
                    return Err(Error::PrecisionExhausted(format!("||{q}·beta|| < {eps} undecided at every level")))
                }
            }
        }
        count *= 2;
    }
}

/// The smallest positive integer `x` with certified `||x·beta|| < eps`.
pub fn small_norm_multiple(beta: &CertifiedReal, eps: &Threshold) -> Result<u128> {
    small_norm_multiple_above(beta, eps, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{Precision, RealConst};

    fn pairs(cf: &ContinuedFraction) -> Vec<(i64, i64)> {
        cf.convergents.iter().map(|(p, q)| (p.to_i64().unwrap(), q.to_i64().unwrap())).collect()
    }

    #[test]
    fn golden_ratio_expansion() {
        let cf = convergents_of(&PreciseReal::golden_ratio(256), 6).unwrap();
        assert!(cf.partial_quotients.iter().all(|a| a.is_one()));
        assert_eq!(pairs(&cf), vec![(1, 1), (2, 1), (3, 2), (5, 3), (8, 5), (13, 8)]);
        assert!(cf.determinants_ok());
    }

    #[test]
    fn sqrt2_expansion() {
        let cf = convergents_of(&PreciseReal::sqrt(2, 256), 4).unwrap();
        let a: Vec<i64> = cf.partial_quotients.iter().map(|a| a.to_i64().unwrap()).collect();
        assert_eq!(a, vec![1, 2, 2, 2]);
        assert_eq!(pairs(&cf), vec![(1, 1), (3, 2), (7, 5), (17, 12)]);
    }

    #[test]
    fn rational_input_terminates() {
        let third = PreciseReal::from_ratio(1, 3, 256);
        // 1/3 is not dyadic, so its enclosure has width; the expansion still
        // stops at the endpoint.
        let err = convergents_of(&third, 10).unwrap_err();
        assert!(matches!(err, Error::PrecisionExhausted(_) | Error::RationalExpansion { .. }), "{err:?}");
        let half = PreciseReal::from_ratio(1, 2, 256);
        assert_eq!(convergents_of(&half, 5).unwrap_err(), Error::RationalExpansion { terms: 2 });
    }

    #[test]
    fn low_precision_is_reported() {
        let s2 = PreciseReal::sqrt(2, 64);
        assert!(matches!(convergents_of(&s2, 200), Err(Error::PrecisionExhausted(_))));
    }

    #[test]
    fn small_multiples() {
        let phi = CertifiedReal::new(RealConst::Golden, Precision::default());
        let s2 = CertifiedReal::new(RealConst::Sqrt(2), Precision::default());
        assert_eq!(small_norm_multiple(&phi, &Threshold::parse("0.1").unwrap()).unwrap(), 5);
        assert_eq!(small_norm_multiple(&s2, &Threshold::parse("0.3").unwrap()).unwrap(), 2);
        assert_eq!(small_norm_multiple(&s2, &Threshold::parse("0.4999").unwrap()).unwrap(), 1);
        assert_eq!(small_norm_multiple(&s2, &Threshold::parse("0.41").unwrap()).unwrap(), 2);
        assert!(small_norm_multiple(&s2, &Threshold::parse("0.5").unwrap()).is_err());
    }

    #[test]
    fn smallest_multiple_agrees_with_linear_scan() {
        let s3 = CertifiedReal::new(RealConst::Sqrt(3), Precision::default());
        let x = 3f64.sqrt();
        for eps in ["0.3", "0.1", "0.05", "0.01", "0.003"] {
            let t = Threshold::parse(eps).unwrap();
            let e = t.to_f64();
            let scan = (1u128..).find(|&n| {
                let v = n as f64 * x;
                (v - v.round()).abs() < e
            });
            assert_eq!(Some(small_norm_multiple(&s3, &t).unwrap()), scan, "eps = {eps}");
        }
    }
}
