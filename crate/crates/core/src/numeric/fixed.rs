//! 128-bit fractional arithmetic for the hot loops.
//!
//! The torus and Weyl scans evaluate `{n·β}` for millions of integers `n`.
//! [`FracKernel`] keeps the fractional part of `β` as machine limbs and
//! returns the top 128 bits of `{n·β}` together with an error radius, both in
//! units of `2^-128`. Comparisons against a threshold go through
//! [`FixedThreshold`], which rounds the exact rational once.

use num_bigint::{BigInt, BigUint};
use num_traits::{ToPrimitive, Zero};

use super::real::{Certainty, PreciseReal, Threshold};

/// A point of the circle `R/Z` at 128-bit resolution with an error radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Frac128 {
    pub value: u128,
    pub err: u128,
}

pub const HALF: u128 = 1u128 << 127;

impl Frac128 {
    pub const ZERO: Frac128 = Frac128 { value: 0, err: 0 };

    pub fn exact(value: u128) -> Self {
        Frac128 { value, err: 0 }
    }

    /// Sum on the circle; radii add.
    #[inline]
    pub fn add(self, other: Frac128) -> Frac128 {
        Frac128 { value: self.value.wrapping_add(other.value), err: self.err.saturating_add(other.err) }
    }

    #[inline]
    pub fn neg(self) -> Frac128 {
        Frac128 { value: self.value.wrapping_neg(), err: self.err }
    }

    /// Center of `||x||` in units of `2^-128`; never exceeds `2^127`.
    #[inline]
    pub fn dist_center(self) -> u128 {
        self.value.min(self.value.wrapping_neg())
    }

    /// Certified `||x|| < eps`.
    #[inline]
    pub fn norm_lt(self, t: &FixedThreshold) -> Certainty {
        t.compare(self.dist_center(), self.err)
    }

    pub fn to_f64(self) -> f64 {
        self.value as f64 / 2f64.powi(128)
    }

    /// Phase `2π{x}` for exponential sums.
    #[inline]
    pub fn angle(self) -> f64 {
        // Top 64 bits carry far more than double precision.
        ((self.value >> 64) as u64) as f64 * (std::f64::consts::TAU / 2f64.powi(64))
    }
}

/// `eps` rounded to the 128-bit grid with a flag for exactness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedThreshold {
    floor: u128,
    exact: bool,
    /// `eps > 1/2`: every distance to an integer is below it.
    trivial: bool,
}

impl FixedThreshold {
    pub fn new(t: &Threshold) -> Self {
        let half = Threshold::new(1, 2).expect("1/2 is positive");
        if *t > half {
            return FixedThreshold { floor: HALF, exact: false, trivial: true };
        }
        let scaled: BigInt = t.numer() << 128u32;
        let (q, r) = num_integer::Integer::div_rem(&scaled, t.denom());
        FixedThreshold { floor: q.to_u128().expect("eps <= 1/2 fits"), exact: r.is_zero(), trivial: false }
    }

    /// Certified `d < eps` for a true value in `[d - err, d + err]`.
    #[inline]
    pub fn compare(&self, d: u128, err: u128) -> Certainty {
        if self.trivial {
            return Certainty::True;
        }
        let hi = d.saturating_add(err);
        let below = if self.exact { hi < self.floor } else { hi <= self.floor };
        if below {
            return Certainty::True;
        }
        let Some(lo) = d.checked_sub(err) else {
            return Certainty::Uncertain;
        };
        let above = if self.exact { lo >= self.floor } else { lo > self.floor };
        if above {
            Certainty::False
        } else {
            Certainty::Uncertain
        }
    }

    pub fn floor(&self) -> u128 {
        self.floor
    }
}

/// The fractional part of a real, ready for fast multiplication by integers.
#[derive(Debug, Clone)]
pub struct FracKernel {
    /// Little-endian limbs of `frac · 2^(64·limbs.len())`.
    limbs: Vec<u64>,
    /// Error radius in ulps of the limb representation.
    err: BigUint,
    /// Precomputed `err` rescaled to `2^-128` units when it fits.
    err128: Option<u128>,
}

impl FracKernel {
    pub fn new(x: &PreciseReal) -> Self {
        let bits = x.bits().max(128).div_ceil(64) * 64;
        let x = x.with_bits(bits);
        let n = (bits / 64) as usize;
        let mut limbs = x.frac_fixed().to_u64_digits();
        limbs.resize(n, 0);
        let err = x.err_ulp().clone();
        let shift = bits - 128;
        // Rounded up: ceil(err / 2^shift).
        let err128 = if shift == 0 {
            err.to_u128()
        } else {
            let q: BigUint = (&err + ((BigUint::from(1u8) << shift) - 1u8)) >> shift;
            q.to_u128()
        };
        FracKernel { limbs, err, err128 }
    }

    pub fn bits(&self) -> u32 {
        64 * self.limbs.len() as u32
    }

    /// The fractional part itself.
    pub fn frac(&self) -> Frac128 {
        self.mul(1)
    }

    /// `{n·x}` at 128-bit resolution.
    ///
    /// The radius combines the scaled input error `|n|·err` with one ulp for
    /// truncating the limbs below bit 128.
    pub fn mul(&self, n: i128) -> Frac128 {
        let m = n.unsigned_abs();
        let value = self.mul_top(m);
        let err = match self.err128 {
            Some(e) => e.checked_mul(m).and_then(|v| v.checked_add(1)).unwrap_or(u128::MAX),
            None => u128::MAX,
        };
        let f = Frac128 { value, err };
        if n < 0 {
            f.neg()
        } else {
            f
        }
    }

    /// `{n·x}` for a big multiplier; exact integer product, then truncation.
    pub fn mul_big(&self, n: &BigInt) -> Frac128 {
        if let Some(small) = n.to_i128() {
            return self.mul(small);
        }
        let bits = self.bits();
        let frac = BigUint::from_slice(
            &self.limbs.iter().flat_map(|&l| [l as u32, (l >> 32) as u32]).collect::<Vec<_>>(),
        );
        let prod: BigUint = frac * n.magnitude();
        let top = (prod >> (bits - 128)).to_u64_digits();
        let lo = top.first().copied().unwrap_or(0) as u128;
        let hi = top.get(1).copied().unwrap_or(0) as u128;
        let value = lo | (hi << 64);
        let err_big: BigUint = ((&self.err * n.magnitude()) >> (bits - 128)) + 2u8;
        let err = err_big.to_u128().unwrap_or(u128::MAX);
        let f = Frac128 { value, err };
        if n.sign() == num_bigint::Sign::Minus {
            f.neg()
        } else {
            f
        }
    }

    /// Top 128 bits of `(frac · m) mod 2^bits`.
    #[inline]
    fn mul_top(&self, m: u128) -> u128 {
        let n = self.limbs.len();
        let m_lo = m as u64 as u128;
        let m_hi = (m >> 64) as u64 as u128;
        let mut out = [0u64; 8];
        let out = if n <= 8 { &mut out[..n] } else { return self.mul_top_slow(m) };
        // Schoolbook product truncated to n limbs.
        let mut carry: u128 = 0;
        for i in 0..n {
            let p = self.limbs[i] as u128 * m_lo + out[i] as u128 + carry;
            out[i] = p as u64;
            carry = p >> 64;
        }
        if m_hi != 0 {
            let mut carry: u128 = 0;
            for i in 0..n - 1 {
                let p = self.limbs[i] as u128 * m_hi + out[i + 1] as u128 + carry;
                out[i + 1] = p as u64;
                carry = p >> 64;
            }
        }
        (out[n - 1] as u128) << 64 | out[n - 2] as u128
    }

    fn mul_top_slow(&self, m: u128) -> u128 {
        let bits = self.bits();
        let frac = BigUint::from_slice(
            &self.limbs.iter().flat_map(|&l| [l as u32, (l >> 32) as u32]).collect::<Vec<_>>(),
        );
        let prod: BigUint = (frac * m) % (BigUint::from(1u8) << bits);
        (prod >> (bits - 128)).to_u128().unwrap_or(0)
    }
}

/// `floor(x · 2^128)` for a rational `0 <= x < 1`, as an exact or rounded word.
pub fn rational_to_frac128(num: &BigInt, den: &BigInt) -> Frac128 {
    let scaled: BigInt = num << 128u32;
    let (q, r): (BigInt, BigInt) = num_integer::Integer::div_mod_floor(&scaled, den);
    let one: BigInt = BigInt::from(1u8) << 128u32;
    let v: u128 = num_integer::Integer::mod_floor(&q, &one).to_u128().expect("reduced below 2^128");
    Frac128 { value: v, err: if r.is_zero() { 0 } else { 1 } }
}
