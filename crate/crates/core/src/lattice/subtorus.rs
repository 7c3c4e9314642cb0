//! Relation lattices of polynomial families and the subtori they cut out.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hnf::{hnf, hnf_contains, identity, integer_left_kernel, smith, Matrix};
use super::poly::IntPolynomial;
use crate::error::{Error, Result};

/// Integer vectors `m` with `Σ m_i P_i ≡ 0`, as a basis in Hermite normal form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationLattice {
    pub f: usize,
    pub basis: Matrix,
}

impl RelationLattice {
    /// Canonicalizes an arbitrary generating set.
    pub fn from_generators(f: usize, rows: Matrix) -> Result<Self> {
        if rows.iter().any(|r| r.len() != f) {
            return Err(Error::Precondition(format!("generators must have {f} entries")));
        }
        let basis = if rows.is_empty() { Vec::new() } else { hnf(rows)? };
        Ok(RelationLattice { f, basis })
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn contains(&self, m: &[i128]) -> bool {
        m.len() == self.f && hnf_contains(&self.basis, m)
    }
}

/// The relation lattice of `polys`: the integer kernel of the coefficient
/// matrix, reduced to Hermite normal form.
pub fn relation_lattice(polys: &[IntPolynomial]) -> Result<RelationLattice> {
    let f = polys.len();
    if f == 0 {
        return Err(Error::Precondition("empty polynomial family".into()));
    }
    let d = polys.iter().map(IntPolynomial::degree).max().unwrap_or(0);
    let a: Matrix = polys.iter().map(|p| (1..=d).map(|e| p.coeff(e) as i128).collect()).collect();
    let kernel = integer_left_kernel(&a, f, d)?;
    RelationLattice::from_generators(f, kernel)
}

/// `H = { z ∈ T^f : m·z ∈ Z for every m ∈ R }`, parametrized through the Smith
/// normal form of a basis of `R`.
///
/// With `U·B·V = diag(d)` and `W = V^{-1}`, `z ∈ H` iff `d_i·(Wz)_i ∈ Z` for
/// `i < s`; coordinates `s..f` of `Wz` are free.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtorusH {
    pub f: usize,
    pub basis: Matrix,
    pub d: Vec<i128>,
    pub w: Matrix,
    pub v: Matrix,
    pub dim: usize,
    pub component_count: u128,
}

/// Bits of resolution for sampled free coordinates.
const SAMPLE_BITS: u32 = 40;

/// A point of `T^f` with rational coordinates `num_j / den`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusPoint {
    pub num: Vec<i128>,
    pub den: i128,
}

impl TorusPoint {
    pub fn to_f64(&self) -> Vec<f64> {
        self.num.iter().map(|&n| n as f64 / self.den as f64).collect()
    }

    /// `||z_j|| < eps` for every coordinate.
    pub fn in_box(&self, eps: f64) -> bool {
        let lim = eps * self.den as f64;
        self.num.iter().all(|&n| {
            let r = n.rem_euclid(self.den);
            ((r.min(self.den - r)) as f64) < lim
        })
    }
}

pub fn subtorus_param(r: &RelationLattice) -> Result<SubtorusH> {
    let f = r.f;
    let s = r.rank();
    let (d, w, v) = if s == 0 {
        (Vec::new(), identity(f), identity(f))
    } else {
        let sm = smith(&r.basis, f)?;
        (sm.diag, sm.w, sm.v)
    };
    let component_count = d.iter().try_fold(1u128, |acc, &x| acc.checked_mul(x as u128)).ok_or_else(|| {
        Error::InternalInvariantBroken("component count overflows".into())
    })?;
    Ok(SubtorusH { f, basis: r.basis.clone(), d, w, v, dim: f - s, component_count })
}

impl SubtorusH {
    fn s(&self) -> usize {
        self.d.len()
    }

    fn lcm_d(&self) -> i128 {
        self.d.iter().fold(1i128, |acc, &x| num_integer::lcm(acc, x))
    }

    /// Exact membership for a rational point.
    pub fn contains(&self, z: &TorusPoint) -> bool {
        (0..self.s()).all(|i| {
            let wz: i128 = self.w[i].iter().zip(&z.num).map(|(a, b)| a * b).sum();
            (self.d[i] * wz).rem_euclid(z.den) == 0
        })
    }

    /// Membership for a floating-point point, up to `tol`.
    pub fn contains_approx(&self, z: &[f64], tol: f64) -> bool {
        (0..self.s()).all(|i| {
            let wz: f64 = self.w[i].iter().zip(z).map(|(&a, b)| a as f64 * b).sum();
            let x = self.d[i] as f64 * wz;
            (x - x.round()).abs() <= tol
        })
    }

    /// One Haar-random point: torsion coordinates uniform over `(1/d_i)Z/Z`,
    /// free coordinates uniform on a `2^-40` grid, mapped back by `V`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> TorusPoint {
        let l = self.lcm_d();
        let den = l << SAMPLE_BITS;
        let y: Vec<i128> = (0..self.f)
            .map(|i| {
                if i < self.s() {
                    rng.gen_range(0..self.d[i]) * (den / self.d[i])
                } else {
                    (rng.gen::<u64>() >> (64 - SAMPLE_BITS)) as i128 * l
                }
            })
            .collect();
        let num = self.v.iter().map(|row| row.iter().zip(&y).map(|(a, b)| a * b).sum::<i128>().rem_euclid(den)).collect();
        TorusPoint { num, den }
    }

    /// Columns `s..f` of `V`: the linear map from the free torus onto the
    /// identity component.
    pub fn free_map(&self) -> Vec<Vec<i128>> {
        self.v.iter().map(|row| row[self.s()..].to_vec()).collect()
    }
}

/// Monte-Carlo estimate of `m_H((-ε, ε)^f ∩ H)` with a 95% binomial
/// half-width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub estimate: f64,
    pub half_width: f64,
    pub samples: u64,
    pub hits: u64,
    pub seed: u64,
}

const CHUNK: u64 = 1 << 16;

pub fn haar_box_measure(h: &SubtorusH, eps: f64, samples: u64, seed: u64) -> Result<MeasureEstimate> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Precondition(format!("eps must lie in (0, 1/2), got {eps}")));
    }
    if samples == 0 {
        return Err(Error::Precondition("need at least one sample".into()));
    }
    let chunks = samples.div_ceil(CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let n = CHUNK.min(samples - c * CHUNK);
            (0..n).filter(|_| h.sample(&mut rng).in_box(eps)).count() as u64
        })
        .sum();
    let p = hits as f64 / samples as f64;
    Ok(MeasureEstimate { estimate: p, half_width: 1.96 * (p * (1.0 - p) / samples as f64).sqrt(), samples, hits, seed })
}

/// Exact `m_H((-ε, ε)^f ∩ H)` for connected `H` (every `d_i = 1`) of
/// dimension at most 3; `None` otherwise.
///
/// `H` is the image of `T^dim` under the free map `y ↦ V'y`, so the measure
/// is the volume of `{ y ∈ [0,1)^dim : ||(V'y)_j|| < ε for all j }`. That set
/// is a disjoint union of polytopes, one per choice of the nearest integers
/// `n_j`, each measured by exact slicing.
pub fn exact_box_measure(h: &SubtorusH, eps: f64) -> Option<f64> {
    if h.d.iter().any(|&x| x != 1) || h.dim > 3 || !(eps > 0.0 && eps < 0.5) {
        return None;
    }
    if h.dim == 0 {
        return Some(1.0);
    }
    let forms = h.free_map();
    let dim = h.dim;
    let ranges: Vec<(i64, i64)> = forms
        .iter()
        .map(|row| {
            let lo: i128 = row.iter().filter(|&&c| c < 0).sum();
            let hi: i128 = row.iter().filter(|&&c| c > 0).sum();
            (lo as i64 - 1, hi as i64 + 1)
        })
        .collect();
    let mut total = 0.0;
    let mut n: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        let mut a: Vec<Vec<f64>> = Vec::new();
        let mut b: Vec<f64> = Vec::new();
        for c in 0..dim {
            let mut e = vec![0.0; dim];
            e[c] = 1.0;
            a.push(e.iter().map(|x| -x).collect());
            b.push(0.0);
            a.push(e);
            b.push(1.0);
        }
        for (row, &nj) in forms.iter().zip(&n) {
            let rf: Vec<f64> = row.iter().map(|&x| x as f64).collect();
            a.push(rf.clone());
            b.push(nj as f64 + eps);
            a.push(rf.iter().map(|x| -x).collect());
            b.push(-(nj as f64 - eps));
        }
        total += polytope_volume(&a, &b, dim);
        // Odometer over the integer choices.
        let mut idx = 0;
        loop {
            if idx == n.len() {
                return Some(total);
            }
            n[idx] += 1;
            if n[idx] <= ranges[idx].1 {
                break;
            }
            n[idx] = ranges[idx].0;
            idx += 1;
        }
    }
}

const TOL: f64 = 1e-12;

/// Volume of the bounded polytope `{ y : a_k·y <= b_k }` in `R^dim`.
///
/// The volume of the slice at height `y_dim = s` is a polynomial of degree
/// `dim - 1` between consecutive vertex heights, so Simpson's rule on each
/// piece is exact for `dim <= 4`.
pub fn polytope_volume(a: &[Vec<f64>], b: &[f64], dim: usize) -> f64 {
    if dim == 1 {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (row, &bk) in a.iter().zip(b) {
            let c = row[0];
            if c > TOL {
                hi = hi.min(bk / c);
            } else if c < -TOL {
                lo = lo.max(bk / c);
            } else if bk < -TOL {
                return 0.0;
            }
        }
        return (hi - lo).max(0.0);
    }
    let mut heights = vertex_heights(a, b, dim);
    heights.sort_by(f64::total_cmp);
    heights.dedup_by(|x, y| (*x - *y).abs() < 1e-13);
    if heights.len() < 2 {
        return 0.0;
    }
    let slice = |s: f64| -> f64 {
        let a2: Vec<Vec<f64>> = a.iter().map(|r| r[..dim - 1].to_vec()).collect();
        let b2: Vec<f64> = a.iter().zip(b).map(|(r, &bk)| bk - r[dim - 1] * s).collect();
        polytope_volume(&a2, &b2, dim - 1)
    };
    heights
        .windows(2)
        .map(|w| {
            let (s0, s1) = (w[0], w[1]);
            (s1 - s0) / 6.0 * (slice(s0) + 4.0 * slice(0.5 * (s0 + s1)) + slice(s1))
        })
        .sum()
}

/// Last coordinate of every vertex (feasible solution of `dim` tight constraints).
fn vertex_heights(a: &[Vec<f64>], b: &[f64], dim: usize) -> Vec<f64> {
    let m = a.len();
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..dim).collect();
    if m < dim {
        return out;
    }
    loop {
        if let Some(x) = solve(&idx.iter().map(|&i| a[i].clone()).collect::<Vec<_>>(), &idx.iter().map(|&i| b[i]).collect::<Vec<_>>()) {
            let feasible = a.iter().zip(b).all(|(row, &bk)| row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= bk + 1e-9);
            if feasible {
                out.push(x[dim - 1]);
            }
        }
        // Next combination in lexicographic order.
        let mut i = dim;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < m - dim + i {
                idx[i] += 1;
                for j in i + 1..dim {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &bk)| r.iter().copied().chain([bk]).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c].abs() < 1e-12 {
            return None;
        }
        m.swap(c, p);
        for i in 0..n {
            if i != c {
                let factor = m[i][c] / m[c][c];
                for j in c..=n {
                    m[i][j] -= factor * m[c][j];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}
