//! Finite fields with elements numbered `0..q` in a fixed canonical order.
//!
//! Prime fields use residues directly. With the `prime-power` feature,
//! `F_{p^e}` is built as `F_p[X]/(g)` for the first monic irreducible `g` of
//! degree `e` in lexicographic order; an element `c_0 + c_1 X + ...` has index
//! `Σ c_i p^i`, so the order is lexicographic in `(c_{e-1}, ..., c_0)`.

use crate::error::{Error, Result};

pub type Fq = u32;

#[derive(Debug, Clone)]
pub struct Field {
    q: u32,
    p: u32,
    degree: u32,
    tables: Option<Tables>,
}

#[derive(Debug, Clone)]
struct Tables {
    add: Vec<Fq>,
    mul: Vec<Fq>,
    neg: Vec<Fq>,
    inv: Vec<Fq>,
}

/// `(p, e)` with `q = p^e`, if `q` is a prime power.
pub fn prime_power(q: u64) -> Option<(u64, u32)> {
    if q < 2 {
        return None;
    }
    let p = (2..=q).find(|d| q % d == 0)?;
    let mut e = 0;
    let mut rest = q;
    while rest % p == 0 {
        rest /= p;
        e += 1;
    }
    (rest == 1).then_some((p, e))
}

pub fn is_prime(q: u64) -> bool {
    prime_power(q).is_some_and(|(_, e)| e == 1)
}

/// Largest field order accepted, keeping `q^3` matrices addressable.
pub const MAX_Q: u64 = 1 << 10;

impl Field {
    /// `F_q` for an odd prime `q`, or an odd prime power with `prime-power`.
    pub fn new(q: u64) -> Result<Field> {
        if q % 2 == 0 || q > MAX_Q {
            return Err(Error::UnsupportedField(q));
        }
        let (p, e) = prime_power(q).ok_or(Error::UnsupportedField(q))?;
        if e == 1 {
            return Ok(Field { q: q as u32, p: p as u32, degree: 1, tables: None });
        }
        Self::extension(p as u32, e)
    }

    #[cfg(not(feature = "prime-power"))]
    fn extension(p: u32, e: u32) -> Result<Field> {
        Err(Error::UnsupportedField((p as u64).pow(e)))
    }

    #[cfg(feature = "prime-power")]
    fn extension(p: u32, e: u32) -> Result<Field> {
        let q = p.pow(e);
        let modulus = first_irreducible(p, e);
        let digits = |x: u32| -> Vec<u32> { (0..e).map(|i| x / p.pow(i) % p).collect() };
        let index = |c: &[u32]| -> u32 { c.iter().enumerate().map(|(i, &d)| d * p.pow(i as u32)).sum() };
        let n = q as usize;
        let mut add = vec![0; n * n];
        let mut mul = vec![0; n * n];
        for a in 0..q {
            let da = digits(a);
            for b in 0..q {
                let db = digits(b);
                let s: Vec<u32> = da.iter().zip(&db).map(|(x, y)| (x + y) % p).collect();
                add[(a * q + b) as usize] = index(&s);
                mul[(a * q + b) as usize] = index(&poly_mulmod(&da, &db, &modulus, p));
            }
        }
        let neg = (0..q).map(|a| (0..q).find(|&b| add[(a * q + b) as usize] == 0).unwrap()).collect();
        let inv = (0..q).map(|a| if a == 0 { 0 } else { (1..q).find(|&b| mul[(a * q + b) as usize] == 1).unwrap() }).collect();
        Ok(Field { q, p, degree: e, tables: Some(Tables { add, mul, neg, inv }) })
    }

    pub fn order(&self) -> u32 {
        self.q
    }

    pub fn characteristic(&self) -> u32 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    #[inline]
    pub fn add(&self, a: Fq, b: Fq) -> Fq {
        match &self.tables {
            None => {
                let s = a + b;
                if s >= self.q {
                    s - self.q
                } else {
                    s
                }
            }
            Some(t) => t.add[(a * self.q + b) as usize],
        }
    }

    #[inline]
    pub fn neg(&self, a: Fq) -> Fq {
        match &self.tables {
            None => {
                if a == 0 {
                    0
                } else {
                    self.q - a
                }
            }
            Some(t) => t.neg[a as usize],
        }
    }

    #[inline]
    pub fn sub(&self, a: Fq, b: Fq) -> Fq {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: Fq, b: Fq) -> Fq {
        match &self.tables {
            None => ((a as u64 * b as u64) % self.q as u64) as u32,
            Some(t) => t.mul[(a * self.q + b) as usize],
        }
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: Fq) -> Option<Fq> {
        if a == 0 {
            return None;
        }
        Some(match &self.tables {
            None => pow_mod(a as u64, self.q as u64 - 2, self.q as u64) as u32,
            Some(t) => t.inv[a as usize],
        })
    }
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    acc
}

/// `a·b mod g` over `F_p`, coefficients low to high, `g` monic of degree `e`.
#[cfg(feature = "prime-power")]
fn poly_mulmod(a: &[u32], b: &[u32], g: &[u32], p: u32) -> Vec<u32> {
    let e = g.len() - 1;
    let mut prod = vec![0u32; a.len() + b.len()];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + x * y) % p;
        }
    }
    for d in (e..prod.len()).rev() {
        let c = prod[d];
        if c != 0 {
            for (k, &gk) in g.iter().enumerate() {
                let idx = d - e + k;
                prod[idx] = (prod[idx] + p - c * gk % p) % p;
            }
        }
    }
    prod.truncate(e);
    prod
}

/// The first monic irreducible polynomial of degree `e` over `F_p`, found by
/// trial division by every monic polynomial of degree `1..=e/2`.
#[cfg(feature = "prime-power")]
fn first_irreducible(p: u32, e: u32) -> Vec<u32> {
    let monic = |deg: u32, idx: u32| -> Vec<u32> {
        let mut c: Vec<u32> = (0..deg).map(|i| idx / p.pow(i) % p).collect();
        c.push(1);
        c
    };
    let divides = |d: &[u32], f: &[u32]| -> bool {
        let mut rem = f.to_vec();
        let dd = d.len() - 1;
        for top in (dd..rem.len()).rev() {
            let c = rem[top];
            if c != 0 {
                for (k, &dk) in d.iter().enumerate() {
                    let idx = top - dd + k;
                    rem[idx] = (rem[idx] + p - c * dk % p) % p;
                }
            }
        }
        rem[..dd].iter().all(|&x| x == 0)
    };
    (0..p.pow(e))
        .map(|idx| monic(e, idx))
        .find(|f| (1..=e / 2).all(|deg| (0..p.pow(deg)).all(|i| !divides(&monic(deg, i), f))))
        .expect("irreducible polynomials exist in every degree")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_axioms(f: &Field) {
        let q = f.order();
        for a in 0..q {
            assert_eq!(f.add(a, 0), a);
            assert_eq!(f.mul(a, 1), a);
            assert_eq!(f.add(a, f.neg(a)), 0);
            if a != 0 {
                assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
            }
            for b in 0..q {
                assert_eq!(f.add(a, b), f.add(b, a));
                assert_eq!(f.mul(a, b), f.mul(b, a));
                for c in [0, 1, q / 2, q - 1] {
                    assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                    assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                }
            }
        }
    }

    #[test]
    fn prime_fields() {
        for q in [3, 5, 7, 11, 13, 37] {
            check_axioms(&Field::new(q).unwrap());
        }
        let f = Field::new(5).unwrap();
        assert_eq!(f.inv(2), Some(3));
        assert_eq!(f.neg(3), 2);
    }

    #[test]
    fn rejected_orders() {
        assert_eq!(Field::new(2).unwrap_err(), Error::UnsupportedField(2));
        assert_eq!(Field::new(15).unwrap_err(), Error::UnsupportedField(15));
        assert_eq!(Field::new(1).unwrap_err(), Error::UnsupportedField(1));
        #[cfg(not(feature = "prime-power"))]
        assert_eq!(Field::new(9).unwrap_err(), Error::UnsupportedField(9));
    }

    #[cfg(feature = "prime-power")]
    #[test]
    fn extension_fields() {
        for q in [9, 25, 27] {
            let f = Field::new(q).unwrap();
            check_axioms(&f);
            let nonzero = (1..f.order()).filter(|&a| f.mul(a, a) != 0).count();
            assert_eq!(nonzero as u32, f.order() - 1);
        }
    }
}
