//! Independent oracles shared by the integration tests.
//!
//! The relation-lattice oracle works over the rationals: it takes the kernel
//! of the coefficient matrix in reduced row echelon form, clears
//! denominators, and saturates the resulting integer basis one prime at a
//! time. It shares no code with the library's Hermite normal form.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use raimi_core::lattice::IntPolynomial;

/// A random nonconstant polynomial with zero constant term.
pub fn random_poly<R: Rng>(rng: &mut R, max_deg: usize) -> IntPolynomial {
    loop {
        let deg = rng.gen_range(1..=max_deg);
        let coeffs: Vec<i64> = (0..deg).map(|_| rng.gen_range(-9..=9)).collect();
        if let Ok(p) = IntPolynomial::new(coeffs) {
            return p;
        }
    }
}

/// A family of `f <= 4` polynomials of degree `<= 5`, biased towards
/// families that carry relations.
pub fn random_family<R: Rng>(rng: &mut R) -> Vec<IntPolynomial> {
    let f = rng.gen_range(1..=4);
    let max_deg = rng.gen_range(1..=5);
    let mut polys: Vec<IntPolynomial> = Vec::with_capacity(f);
    for i in 0..f {
        if i >= 1 && rng.gen_bool(0.4) {
            let m: Vec<i64> = (0..i).map(|_| rng.gen_range(-3..=3)).collect();
            let combo = IntPolynomial::combination(&polys, &m);
            let coeffs: Vec<i64> = combo.iter().map(|c| c.to_i64().unwrap()).collect();
            if let Ok(p) = IntPolynomial::new(coeffs) {
                polys.push(p);
                continue;
            }
        }
        polys.push(random_poly(rng, max_deg));
    }
    polys
}

fn rref(mut m: Vec<Vec<BigRational>>) -> (Vec<Vec<BigRational>>, Vec<usize>) {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let factor = m[i][c].clone();
                for j in 0..cols {
                    let delta = &factor * &m[r][j];
                    m[i][j] = &m[i][j] - delta;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows {
            break;
        }
    }
    (m, pivots)
}

/// Rational basis of `{m ∈ Q^f : Σ m_i P_i = 0}`.
pub fn rational_kernel(polys: &[IntPolynomial]) -> Vec<Vec<BigRational>> {
    let f = polys.len();
    let d = polys.iter().map(|p| p.degree()).max().unwrap_or(0);
    let a: Vec<Vec<BigRational>> = (1..=d)
        .map(|e| polys.iter().map(|p| BigRational::from_integer(BigInt::from(p.coeff(e)))).collect())
        .collect();
    let (r, pivots) = rref(a);
    (0..f)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v = vec![BigRational::zero(); f];
            v[free] = BigRational::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -r[row][free].clone();
            }
            v
        })
        .collect()
}

fn primitive(v: &[BigRational]) -> Vec<BigInt> {
    let l = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| (x * BigRational::from_integer(l.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    ints.into_iter().map(|x| x / &g).collect()
}

fn det(mut m: Vec<Vec<BigInt>>) -> BigInt {
    // Bareiss fraction-free elimination.
    let n = m.len();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if m[k][k].is_zero() {
            match (k + 1..n).find(|&i| !m[i][k].is_zero()) {
                Some(i) => {
                    m.swap(k, i);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                m[i][j] = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &prev;
            }
        }
        prev = m[k][k].clone();
    }
    sign * &m[n - 1][n - 1]
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = combinations(n - 1, k);
    for mut c in combinations(n - 1, k - 1) {
        c.push(n - 1);
        out.push(c);
    }
    out
}

/// gcd of the maximal minors: the index of the lattice in its saturation.
fn minor_gcd(b: &[Vec<BigInt>]) -> BigInt {
    let s = b.len();
    let f = b[0].len();
    combinations(f, s).into_iter().fold(BigInt::zero(), |g, cols| {
        let m: Vec<Vec<BigInt>> = b.iter().map(|row| cols.iter().map(|&c| row[c].clone()).collect()).collect();
        g.gcd(&det(m))
    })
}

fn smallest_prime_factor(n: &BigInt) -> u64 {
    let n = n.abs().to_u64().expect("minor gcd fits in u64");
    (2..).find(|d| n % d == 0 || d * d > n).map(|d| if n % d == 0 { d } else { n }).unwrap()
}

/// A nonzero `c ∈ F_p^s` with `c·B ≡ 0 (mod p)`.
fn left_kernel_mod_p(b: &[Vec<BigInt>], p: u64) -> Vec<u64> {
    let s = b.len();
    let f = b[0].len();
    let pi = BigInt::from(p);
    // Columns of B^T are the rows of B; solve B^T c = 0 over F_p.
    let mut m: Vec<Vec<u64>> =
        (0..f).map(|j| (0..s).map(|i| b[i][j].mod_floor(&pi).to_u64().unwrap()).collect()).collect();
    let inv = |a: u64| -> u64 {
        let mut acc = 1u64;
        let (mut base, mut e) = (a % p, p - 2);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base % p;
            }
            base = base * base % p;
            e >>= 1;
        }
        acc
    };
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..s {
        let Some(pr) = (r..f).find(|&i| m[i][c] != 0) else { continue };
        m.swap(r, pr);
        let iv = inv(m[r][c]);
        for x in m[r].iter_mut() {
            *x = *x * iv % p;
        }
        for i in 0..f {
            if i != r && m[i][c] != 0 {
                let factor = m[i][c];
                for j in 0..s {
                    m[i][j] = (m[i][j] + p * p - factor * m[r][j] % p) % p;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let free = (0..s).find(|c| !pivots.contains(c)).expect("p divides every maximal minor");
    let mut c = vec![0u64; s];
    c[free] = 1;
    for (row, &pc) in pivots.iter().enumerate() {
        c[pc] = (p - m[row][free]) % p;
    }
    c
}

/// Integer basis of the saturated relation lattice.
pub fn oracle_lattice(polys: &[IntPolynomial]) -> Vec<Vec<BigInt>> {
    let mut b: Vec<Vec<BigInt>> = rational_kernel(polys).iter().map(|v| primitive(v)).collect();
    if b.is_empty() {
        return b;
    }
    loop {
        let g = minor_gcd(&b);
        assert!(!g.is_zero(), "kernel basis must have full rank");
        if g.is_one() {
            return b;
        }
        let p = smallest_prime_factor(&g);
        let c = left_kernel_mod_p(&b, p);
        let j = c.iter().position(|&x| x == 1).expect("kernel vector is normalized");
        let f = b[0].len();
        let combined: Vec<BigInt> = (0..f)
            .map(|col| (0..b.len()).map(|i| BigInt::from(c[i]) * &b[i][col]).sum::<BigInt>())
            .collect();
        let pi = BigInt::from(p);
        assert!(combined.iter().all(|x| (x % &pi).is_zero()));
        b[j] = combined.into_iter().map(|x| x / &pi).collect();
    }
}

/// Whether `v` is an integer combination of the rows of `b` (full row rank).
pub fn in_span(b: &[Vec<BigInt>], v: &[BigInt]) -> bool {
    if b.is_empty() {
        return v.iter().all(|x| x.is_zero());
    }
    let s = b.len();
    let f = v.len();
    // Solve x·B = v: RREF of the augmented system B^T x = v.
    let aug: Vec<Vec<BigRational>> = (0..f)
        .map(|j| {
            let mut row: Vec<BigRational> = (0..s).map(|i| BigRational::from_integer(b[i][j].clone())).collect();
            row.push(BigRational::from_integer(v[j].clone()));
            row
        })
        .collect();
    let (r, pivots) = rref(aug);
    if pivots.contains(&s) {
        return false;
    }
    let mut x = vec![BigRational::zero(); s];
    for (row, &pc) in pivots.iter().enumerate() {
        x[pc] = r[row][s].clone();
    }
    if !x.iter().all(|q| q.is_integer()) {
        return false;
    }
    (0..f).all(|j| {
        let sum: BigRational = (0..s).map(|i| &x[i] * BigRational::from_integer(b[i][j].clone())).sum();
        sum == BigRational::from_integer(v[j].clone())
    })
}
