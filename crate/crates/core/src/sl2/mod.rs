//! Raimi partitions of `SL2(F_q)`.
//!
//! Pieces are `E_i = { M : x(M) ∈ I_i }` for intervals `I_1..I_r` of the
//! canonical order of `F_q`. For a coloring, the largest class is projected
//! onto its first rows `(x, y)`; rows with many completions form a set
//! `U ⊂ F_q^2`. A direction `v` along which `U` meets most lines
//! `ℓ_{v,λ} = { u : u·v = λ }` substantially gives the shift
//! `h = [[v_1, -1/v_2], [v_2, 0]]`, and the `x`-entry of `M·h` is `(x, y)·v`.

pub mod field;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Threshold;
pub use field::{is_prime, prime_power, Field, Fq};

pub const SL2_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SL2Mat {
    pub x: Fq,
    pub y: Fq,
    pub z: Fq,
    pub w: Fq,
}

impl SL2Mat {
    pub fn det(&self, f: &Field) -> Fq {
        f.sub(f.mul(self.x, self.w), f.mul(self.y, self.z))
    }

    pub fn mul(&self, o: &SL2Mat, f: &Field) -> SL2Mat {
        SL2Mat {
            x: f.add(f.mul(self.x, o.x), f.mul(self.y, o.z)),
            y: f.add(f.mul(self.x, o.y), f.mul(self.y, o.w)),
            z: f.add(f.mul(self.z, o.x), f.mul(self.w, o.z)),
            w: f.add(f.mul(self.z, o.y), f.mul(self.w, o.w)),
        }
    }
}

/// `SL2(F_q)` with a fixed enumeration.
///
/// Elements are grouped by first row `(x, y) ≠ (0, 0)` in lexicographic
/// order; within a row the free entry (`z` if `x ≠ 0`, else `w`) runs
/// through `0..q`. So the index is `(x·q + y - 1)·q + free`.
#[derive(Debug, Clone)]
pub struct Sl2Group {
    pub field: Field,
}

impl Sl2Group {
    pub fn new(q: u64) -> Result<Self> {
        Ok(Sl2Group { field: Field::new(q)? })
    }

    pub fn q(&self) -> u32 {
        self.field.order()
    }

    /// `q^3 - q`.
    pub fn order(&self) -> usize {
        let q = self.q() as usize;
        q * q * q - q
    }

    pub fn element(&self, index: usize) -> SL2Mat {
        let f = &self.field;
        let q = self.q() as usize;
        let row = index / q + 1;
        let free = (index % q) as Fq;
        let (x, y) = ((row / q) as Fq, (row % q) as Fq);
        if x != 0 {
            // w = (1 + y z) / x
            let w = f.mul(f.add(1, f.mul(y, free)), f.inv(x).unwrap());
            SL2Mat { x, y, z: free, w }
        } else {
            let z = f.neg(f.inv(y).unwrap());
            SL2Mat { x, y, z, w: free }
        }
    }

    pub fn index_of(&self, m: &SL2Mat) -> usize {
        let q = self.q() as usize;
        let row = m.x as usize * q + m.y as usize;
        let free = if m.x != 0 { m.z } else { m.w } as usize;
        (row - 1) * q + free
    }

    pub fn iter(&self) -> impl Iterator<Item = SL2Mat> + '_ {
        (0..self.order()).map(|i| self.element(i))
    }
}

/// Every element of `SL2(F_q)` once.
pub fn enumerate_sl2(q: u64) -> Result<Vec<SL2Mat>> {
    let g = Sl2Group::new(q)?;
    Ok(g.iter().collect())
}

/// Intervals `I_1..I_r` of `0..q` with `|I_i| = ⌊q/r⌋` for `i < r`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SL2Partition {
    pub q: u32,
    pub r: u32,
    /// Inclusive bounds of each `I_i`.
    pub intervals: Vec<(Fq, Fq)>,
}

impl SL2Partition {
    pub fn new(q: u32, r: u32) -> Result<Self> {
        if r == 0 || r > q {
            return Err(Error::Precondition(format!("need 1 <= r <= q, got r = {r}")));
        }
        let w = q / r;
        let intervals = (0..r).map(|i| (i * w, if i + 1 == r { q - 1 } else { (i + 1) * w - 1 })).collect();
        Ok(SL2Partition { q, r, intervals })
    }

    /// 1-based piece of a first entry `x`.
    #[inline]
    pub fn piece_of_entry(&self, x: Fq) -> usize {
        ((x / (self.q / self.r)) as usize).min(self.r as usize - 1) + 1
    }

    /// `|E_i|`: `q(q-1)` matrices have `x = 0` and `q^2` have each `x ≠ 0`.
    pub fn piece_sizes(&self) -> Vec<u64> {
        let q = self.q as u64;
        self.intervals
            .iter()
            .map(|&(lo, hi)| {
                let len = (hi - lo + 1) as u64;
                if lo == 0 {
                    q * (q - 1) + (len - 1) * q * q
                } else {
                    len * q * q
                }
            })
            .collect()
    }
}

/// `m(v, λ)` for every `λ`, i.e. the line counts of `U` in direction `v`.
fn line_counts(f: &Field, u: &[(Fq, Fq)], v: (Fq, Fq)) -> Vec<u64> {
    let mut m = vec![0u64; f.order() as usize];
    for &(a, b) in u {
        m[f.add(f.mul(a, v.0), f.mul(b, v.1)) as usize] += 1;
    }
    m
}

/// `Σ_{v ≠ 0} Σ_λ m(v, λ)^2`, summed exactly over all nonzero directions.
pub fn second_moment(f: &Field, u: &[(Fq, Fq)]) -> u128 {
    let q = f.order();
    (0..q * q)
        .into_par_iter()
        .filter(|&i| i != 0)
        .map(|i| line_counts(f, u, (i / q, i % q)).iter().map(|&c| (c as u128) * (c as u128)).sum::<u128>())
        .sum()
}

/// `(q - 1)|U|(|U| + q)`.
pub fn second_moment_closed_form(q: u64, size: u64) -> u128 {
    (q as u128 - 1) * size as u128 * (size as u128 + q as u128)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionCertificate {
    pub v: (Fq, Fq),
    /// `#{λ : m(v, λ) >= q/(2 t_eff)}`.
    pub good_lambdas: u64,
    /// `(1 - c)·q`.
    pub required_good: f64,
    pub t_eff: u32,
    pub c: Threshold,
    /// Directions examined (all `v` with `v_2 ≠ 0`).
    pub scanned: u64,
    /// Directions meeting the good-line requirement.
    pub admissible: u64,
    /// The direction with the smallest `Σ_λ m(v, λ)^2`, and that sum.
    pub min_moment_v: (Fq, Fq),
    pub min_moment: u128,
    /// Whether `q > 4 t_eff / c`, under which a direction is guaranteed.
    pub theory_guaranteed: bool,
}

/// Scans all `v` with `v_2 ≠ 0` in lexicographic order and returns the first
/// along which at least `(1 - c)q` lines carry `q/(2 t_eff)` points of `U`.
pub fn find_direction(f: &Field, u: &[(Fq, Fq)], t_eff: u32, c: &Threshold) -> Result<DirectionCertificate> {
    let q = f.order() as u64;
    let (cn, cd) = (c.numer().clone(), c.denom().clone());
    let one_minus_c = Threshold::new(&cd - &cn, cd.clone()).map_err(|_| Error::Precondition("c must be < 1".into()))?;
    // good·den >= (den - num)·q, in u128 after checking sizes.
    let (num, den) = (
        u128::try_from(one_minus_c.numer().clone()).map_err(|_| Error::Precondition("c too fine".into()))?,
        u128::try_from(one_minus_c.denom().clone()).map_err(|_| Error::Precondition("c too fine".into()))?,
    );
    let scans: Vec<((Fq, Fq), u64, u128)> = (0..q as u32)
        .flat_map(|v1| (1..q as u32).map(move |v2| (v1, v2)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|v| {
            let m = line_counts(f, u, v);
            let good = m.iter().filter(|&&c| c * 2 * t_eff as u64 >= q).count() as u64;
            let moment = m.iter().map(|&c| (c as u128) * (c as u128)).sum();
            (v, good, moment)
        })
        .collect();
    let ok = |good: u64| good as u128 * den >= num * q as u128;
    let admissible = scans.iter().filter(|s| ok(s.1)).count() as u64;
    let (min_moment_v, _, min_moment) = *scans.iter().min_by_key(|s| s.2).expect("q >= 3 gives directions");
    let required_good = one_minus_c.to_f64() * q as f64;
    let theory_guaranteed = (q as u128) * cn.try_into().unwrap_or(u128::MAX) > 4 * t_eff as u128 * u128::try_from(cd).unwrap_or(0);
    match scans.iter().find(|s| ok(s.1)) {
        Some(&(v, good_lambdas, _)) => Ok(DirectionCertificate {
            v,
            good_lambdas,
            required_good,
            t_eff,
            c: c.clone(),
            scanned: scans.len() as u64,
            admissible,
            min_moment_v,
            min_moment,
            theory_guaranteed,
        }),
        None => Err(Error::NoDirectionFound(format!(
            "{} directions with v_2 != 0 scanned, best good-line count {} < {required_good}",
            scans.len(),
            scans.iter().map(|s| s.1).max().unwrap_or(0)
        ))),
    }
}

/// `h = [[v_1, -1/v_2], [v_2, 0]]`.
pub fn shift_matrix(f: &Field, v: (Fq, Fq)) -> Result<SL2Mat> {
    let inv = f.inv(v.1).ok_or(Error::ZeroSecondCoordinate)?;
    let h = SL2Mat { x: v.0, y: f.neg(inv), z: v.1, w: 0 };
    if h.det(f) != 1 {
        return Err(Error::InternalInvariantBroken("shift matrix determinant is not 1".into()));
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Sl2Options {
    /// Skip the `q > 8rt` requirement (for oracle comparisons at small `q`).
    pub relaxed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SL2ShiftCertificate {
    pub schema_version: u32,
    pub q: u32,
    pub r: u32,
    pub t: u32,
    pub m: u32,
    pub class_size: u64,
    /// `|SL2|/t`, the exact pigeonhole floor for `class_size`.
    pub class_floor_exact: f64,
    /// `q^3/(2t)`.
    pub class_floor_q3: f64,
    pub pruned_rows: u64,
    /// `q^2/(4t)`.
    pub pruned_required: f64,
    pub direction: DirectionCertificate,
    pub h: SL2Mat,
    pub counts: Vec<u64>,
    pub piece_sizes: Vec<u64>,
    /// `⌈q^3/(64 r t^2)⌉`.
    pub required_count: u64,
    /// Whether every count also reaches `q^3/(4 r t^2)`.
    pub meets_q3_over_4rt2: bool,
    /// `min count / (q^3/(64 r t^2))`.
    pub achieved_ratio: f64,
    pub relaxed: bool,
    pub pass: bool,
}

impl SL2ShiftCertificate {
    pub fn min_count(&self) -> u64 {
        self.counts.iter().copied().min().unwrap_or(0)
    }
}

fn check_coloring(g: &Sl2Group, colors: &[u32], t: u32) -> Result<()> {
    if colors.len() != g.order() {
        return Err(Error::Precondition(format!("coloring has {} entries, expected {}", colors.len(), g.order())));
    }
    if let Some(c) = colors.iter().find(|&&c| c == 0 || c > t) {
        return Err(Error::Precondition(format!("color {c} outside 1..={t}")));
    }
    Ok(())
}

/// The precondition `q` odd prime (or supported prime power) and `q > 8rt`.
pub fn check_sl2_precondition(q: u64, r: u32, t: u32, relaxed: bool) -> Result<()> {
    let supported = Field::new(q).is_ok();
    if !supported || (!relaxed && q <= 8 * r as u64 * t as u64) {
        return Err(Error::Precondition("q must be an odd prime > 8rt".into()));
    }
    Ok(())
}

/// `|(F_m·h) ∩ E_i|` for each piece.
pub fn piece_counts(g: &Sl2Group, p: &SL2Partition, colors: &[u32], m: u32, h: &SL2Mat) -> Vec<u64> {
    let f = &g.field;
    let mut counts = vec![0u64; p.r as usize];
    for (i, &c) in colors.iter().enumerate() {
        if c == m {
            let a = g.element(i);
            let x = f.add(f.mul(a.x, h.x), f.mul(a.y, h.z));
            counts[p.piece_of_entry(x) - 1] += 1;
        }
    }
    counts
}

/// Largest class, ties to the smallest index.
pub fn largest_class(colors: &[u32], t: u32) -> (u32, u64) {
    let mut sizes = vec![0u64; t as usize + 1];
    for &c in colors {
        sizes[c as usize] += 1;
    }
    (1..=t).map(|m| (m, sizes[m as usize])).fold((1, 0), |best, cur| if cur.1 > best.1 { cur } else { best })
}

/// Builds the shift certificate for a coloring `colors[index]` of `SL2(F_q)`.
pub fn find_shift_sl2(g: &Sl2Group, colors: &[u32], r: u32, t: u32, opts: Sl2Options) -> Result<SL2ShiftCertificate> {
    let q = g.q() as u64;
    check_sl2_precondition(q, r, t, opts.relaxed)?;
    check_coloring(g, colors, t)?;
    let f = &g.field;
    let p = SL2Partition::new(g.q(), r)?;
    let (m, class_size) = largest_class(colors, t);
    // Rows (x, y) of F_m and their completion counts; row index x·q + y.
    let mut rows = vec![0u64; (q * q) as usize];
    for (i, &c) in colors.iter().enumerate() {
        if c == m {
            rows[i / q as usize + 1] += 1;
        }
    }
    let four_t = 4 * t as u64;
    let u: Vec<(Fq, Fq)> = rows
        .iter()
        .enumerate()
        .filter(|(_, &c)| c * four_t >= q)
        .map(|(i, _)| ((i as u64 / q) as Fq, (i as u64 % q) as Fq))
        .collect();
    let pruned_required = (q * q) as f64 / four_t as f64;
    if (u.len() as u64) * four_t < q * q {
        return Err(Error::PruningAssumptionFailed { size: u.len() as u64, required: pruned_required });
    }
    let c = Threshold::new(1, 2 * r)?;
    let direction = find_direction(f, &u, four_t as u32, &c)?;
    let h = shift_matrix(f, direction.v)?;
    let counts = piece_counts(g, &p, colors, m, &h);
    if counts.iter().sum::<u64>() != class_size {
        return Err(Error::InternalInvariantBroken("right multiplication lost elements".into()));
    }
    let q3 = (q as u128).pow(3);
    let den = 64 * r as u128 * (t as u128).pow(2);
    let required_count = q3.div_ceil(den) as u64;
    let pass = counts.iter().all(|&c| c as u128 * den >= q3);
    let meets_q3_over_4rt2 = counts.iter().all(|&c| c as u128 * 4 * r as u128 * (t as u128).pow(2) >= q3);
    let min = counts.iter().copied().min().unwrap_or(0);
    Ok(SL2ShiftCertificate {
        schema_version: SL2_SCHEMA_VERSION,
        q: g.q(),
        r,
        t,
        m,
        class_size,
        class_floor_exact: g.order() as f64 / t as f64,
        class_floor_q3: q3 as f64 / (2 * t) as f64,
        pruned_rows: u.len() as u64,
        pruned_required,
        direction,
        h,
        counts,
        piece_sizes: p.piece_sizes(),
        required_count,
        meets_q3_over_4rt2,
        achieved_ratio: min as f64 * den as f64 / q3 as f64,
        relaxed: opts.relaxed,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn group_orders() {
        assert_eq!(enumerate_sl2(3).unwrap().len(), 24);
        assert_eq!(enumerate_sl2(5).unwrap().len(), 120);
        assert_eq!(enumerate_sl2(2).unwrap_err(), Error::UnsupportedField(2));
    }

    #[test]
    fn enumeration_is_a_bijection_onto_sl2() {
        for q in [3u64, 5, 7] {
            let g = Sl2Group::new(q).unwrap();
            let f = &g.field;
            let mut seen = std::collections::HashSet::new();
            for (i, m) in g.iter().enumerate() {
                assert_eq!(m.det(f), 1);
                assert_eq!(g.index_of(&m), i);
                assert!(seen.insert(m));
            }
            // Brute force over all q^4 matrices.
            let q = q as u32;
            let all = (0..q.pow(4))
                .filter(|i| {
                    let m = SL2Mat { x: i % q, y: i / q % q, z: i / q / q % q, w: i / q / q / q };
                    m.det(f) == 1
                })
                .count();
            assert_eq!(all, seen.len());
        }
    }

    #[test]
    fn partition_piece_sizes() {
        for (q, r) in [(7u64, 2u32), (11, 3), (13, 4)] {
            let g = Sl2Group::new(q).unwrap();
            let p = SL2Partition::new(q as u32, r).unwrap();
            let mut sizes = vec![0u64; r as usize];
            for m in g.iter() {
                sizes[p.piece_of_entry(m.x) - 1] += 1;
            }
            assert_eq!(sizes, p.piece_sizes());
            for (i, &(lo, hi)) in p.intervals.iter().enumerate() {
                if i + 1 < r as usize {
                    assert_eq!(hi - lo + 1, q as u32 / r);
                }
            }
        }
    }

    #[test]
    fn second_moment_examples() {
        let f = Field::new(3).unwrap();
        let all: Vec<(Fq, Fq)> = (0..9).map(|i| (i / 3, i % 3)).collect();
        assert_eq!(second_moment(&f, &all), 216);
        assert_eq!(second_moment(&f, &[]), 0);
        let f = Field::new(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts: Vec<(Fq, Fq)> = (0..25).map(|i| (i / 5, i % 5)).collect();
        for i in 0..10 {
            let j = rng.gen_range(i..25);
            pts.swap(i, j);
        }
        pts.truncate(10);
        assert_eq!(second_moment(&f, &pts), 600);
    }

    #[test]
    fn shift_matrix_examples() {
        let f5 = Field::new(5).unwrap();
        assert_eq!(shift_matrix(&f5, (1, 2)).unwrap(), SL2Mat { x: 1, y: 2, z: 2, w: 0 });
        let f7 = Field::new(7).unwrap();
        assert_eq!(shift_matrix(&f7, (0, 1)).unwrap(), SL2Mat { x: 0, y: 6, z: 1, w: 0 });
        assert_eq!(shift_matrix(&f7, (1, 0)).unwrap_err(), Error::ZeroSecondCoordinate);
    }

    #[test]
    fn full_plane_takes_the_first_direction() {
        let f = Field::new(11).unwrap();
        let all: Vec<(Fq, Fq)> = (0..121).map(|i| (i / 11, i % 11)).collect();
        let d = find_direction(&f, &all, 4, &Threshold::new(1, 4).unwrap()).unwrap();
        assert_eq!(d.v, (0, 1));
        assert_eq!(d.good_lambdas, 11);
        assert_eq!(d.admissible, 110);
    }

    #[test]
    fn rows_concentrated_on_few_lines_avoid_their_normal() {
        // U = five full rows y ∈ {0..4}. Along v = (0, v_2) only five lines
        // are occupied, so those directions fail; every other direction sees
        // five points on each of its 13 lines.
        let f = Field::new(13).unwrap();
        let u: Vec<(Fq, Fq)> = (0..13).flat_map(|x| (0..5).map(move |y| (x, y))).collect();
        let d = find_direction(&f, &u, 2, &Threshold::new(1, 4).unwrap()).unwrap();
        assert_eq!(d.v, (1, 1));
        assert_eq!(d.good_lambdas, 13);
        assert_eq!(d.admissible, 13 * 12 - 12);
        assert_eq!(line_counts(&f, &u, (0, 1)).iter().filter(|&&c| c > 0).count(), 5);
    }

    #[test]
    fn precondition_message() {
        let err = check_sl2_precondition(33, 2, 2, false).unwrap_err();
        assert_eq!(err.to_string(), "precondition: q must be an odd prime > 8rt");
        assert!(check_sl2_precondition(31, 2, 2, false).is_err());
        assert!(check_sl2_precondition(37, 2, 2, false).is_ok());
        assert!(check_sl2_precondition(7, 2, 2, true).is_ok());
    }

    #[test]
    fn single_class_passes() {
        let g = Sl2Group::new(37).unwrap();
        let colors = vec![1u32; g.order()];
        let cert = find_shift_sl2(&g, &colors, 2, 1, Sl2Options::default()).unwrap();
        assert!(cert.pass);
        assert_eq!(cert.counts, cert.piece_sizes);
    }
}
