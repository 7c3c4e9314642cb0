//! Explicit Raimi partitions of `Z_N` and the shift search for a coloring.
//!
//! `Z_N` is cut into nested-scale intervals `E_1 = [0, Δ_1]` and
//! `E_i = (u_i, v_i]` with `Δ_i = Δ_{i-1}/k`. Given a `t`-coloring, a largest
//! class `F_m` is first translated to meet `E_1` in its fair share, then each
//! further translation `h_{s+1}` moves the rightmost well-populated block of
//! `E_s` onto `E_{s+1}` while disturbing the earlier pieces only slightly.
//!
//! Colorings of `Z_N` are slices `colors[x]` with values in `1..=t`.

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Threshold;

pub const CYCLIC_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CyclicPartition {
    pub n: u64,
    pub r: u32,
    pub t: u32,
    pub k: u64,
    /// `1 + 1/k + ... + 1/k^(r-1)`.
    pub s_k: Threshold,
    /// `Δ_1, ..., Δ_r`.
    pub deltas: Vec<u64>,
    /// Inclusive index ranges of `E_1..E_r`, with the remainder already
    /// merged into `E_r`.
    pub pieces: Vec<(u64, u64)>,
    /// The leftover `{v_r + 1, ..., N - 1}` before merging, if nonempty.
    pub remainder: Option<(u64, u64)>,
    /// Smallest admissible `N`.
    pub n0: u64,
}

impl CyclicPartition {
    /// `u_s = Δ_1 + ... + Δ_{s-1}` (1-based `s`).
    pub fn u(&self, s: usize) -> u64 {
        self.deltas[..s - 1].iter().sum()
    }

    pub fn piece_sizes(&self) -> Vec<u64> {
        self.pieces.iter().map(|&(lo, hi)| hi - lo + 1).collect()
    }

    /// 1-based piece containing `x`.
    pub fn piece_of(&self, x: u64) -> usize {
        self.pieces.iter().position(|&(lo, hi)| (lo..=hi).contains(&x)).expect("pieces cover Z_N") + 1
    }
}

fn checked_pow(k: u64, e: u32) -> Option<u128> {
    (k as u128).checked_pow(e)
}

/// `(k, k^(r-1), G = 1 + k + ... + k^(r-1))`, or `None` on overflow.
fn scale(r: u32, t: u32) -> Option<(u64, u128, u128)> {
    let k = 1u64.checked_add(1u64.checked_shl(r + 3)?.checked_mul(t as u64)?)?;
    let top = checked_pow(k, r - 1)?;
    let mut g: u128 = 0;
    for i in 0..r {
        g = g.checked_add(checked_pow(k, i)?)?;
    }
    Some((k, top, g))
}

/// Minimal admissible order `N_0 = 1 + k^(r-1)·S_k`.
pub fn min_order(r: u32, t: u32) -> Result<u64> {
    check_rt(r, t)?;
    scale(r, t)
        .and_then(|(_, _, g)| u64::try_from(g + 1).ok())
        .ok_or_else(|| Error::Precondition(format!("N_0 for r = {r}, t = {t} exceeds 64 bits")))
}

fn check_rt(r: u32, t: u32) -> Result<()> {
    if r == 0 || t == 0 {
        return Err(Error::Precondition("r and t must be at least 1".into()));
    }
    Ok(())
}

pub fn build_partition(n: u64, r: u32, t: u32) -> Result<CyclicPartition> {
    let n0 = min_order(r, t)?;
    if n < n0 {
        return Err(Error::TooSmallN { n, n0 });
    }
    let (k, top, g) = scale(r, t).expect("checked by min_order");
    let delta1 = top * ((n as u128 - 1) / g);
    let mut deltas = vec![delta1 as u64];
    for _ in 1..r {
        let prev = *deltas.last().unwrap();
        deltas.push(prev / k);
    }
    let mut pieces = vec![(0, deltas[0])];
    let mut v = deltas[0];
    for &d in &deltas[1..] {
        pieces.push((v + 1, v + d));
        v += d;
    }
    let remainder = (v + 1 < n).then_some((v + 1, n - 1));
    if let Some((_, hi)) = remainder {
        pieces.last_mut().unwrap().1 = hi;
    }
    let s_k = Threshold::new(BigInt::from(g), BigInt::from(top))?;
    Ok(CyclicPartition { n, r, t, k, s_k, deltas, pieces, remainder, n0 })
}

/// Circular prefix counts of one color class.
struct ClassCounter {
    n: u64,
    prefix: Vec<u64>,
}

impl ClassCounter {
    fn new(colors: &[u32], m: u32) -> Self {
        let mut prefix = Vec::with_capacity(colors.len() + 1);
        prefix.push(0);
        let mut acc = 0;
        for &c in colors {
            acc += (c == m) as u64;
            prefix.push(acc);
        }
        ClassCounter { n: colors.len() as u64, prefix }
    }

    /// `#{x in [lo, hi] : x - h ∈ F_m}` with `lo <= hi < N`.
    fn shifted(&self, lo: u64, hi: u64, h: u64) -> u64 {
        let n = self.n;
        let len = hi - lo + 1;
        let start = (lo + n - h % n) % n;
        let end = start + len;
        if end <= n {
            self.prefix[end as usize] - self.prefix[start as usize]
        } else {
            self.prefix[n as usize] - self.prefix[start as usize] + self.prefix[(end - n) as usize]
        }
    }
}

fn check_coloring(colors: &[u32], p: &CyclicPartition) -> Result<()> {
    if colors.len() as u64 != p.n {
        return Err(Error::Precondition(format!("coloring has {} entries, expected N = {}", colors.len(), p.n)));
    }
    if let Some(c) = colors.iter().find(|&&c| c == 0 || c > p.t) {
        return Err(Error::Precondition(format!("color {c} outside 1..={}", p.t)));
    }
    Ok(())
}

/// Largest color class, ties to the smallest index.
pub fn largest_class(colors: &[u32], t: u32) -> (u32, u64) {
    let mut sizes = vec![0u64; t as usize + 1];
    for &c in colors {
        sizes[c as usize] += 1;
    }
    (1..=t).map(|m| (m, sizes[m as usize])).fold((1, 0), |best, cur| if cur.1 > best.1 { cur } else { best })
}

/// `(m, h_1)`: the largest class and the smallest shift with
/// `|(F_m + h_1) ∩ E_1| >= |E_1|/t`.
pub fn find_h1(colors: &[u32], p: &CyclicPartition) -> Result<(u32, u64)> {
    check_coloring(colors, p)?;
    let (m, _) = largest_class(colors, p.t);
    let counter = ClassCounter::new(colors, m);
    let (lo, hi) = p.pieces[0];
    let size = hi - lo + 1;
    (0..p.n)
        .find(|&h| counter.shifted(lo, hi, h) * p.t as u64 >= size)
        .map(|h| (m, h))
        .ok_or_else(|| Error::InternalInvariantBroken("no shift meets the average on E_1".into()))
}

/// Progress of the shift construction after stage `s = shifts.len()`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineState {
    pub m: u32,
    /// `h_1, ..., h_s`.
    pub shifts: Vec<u64>,
}

impl RefineState {
    pub fn stage(&self) -> usize {
        self.shifts.len()
    }

    pub fn total(&self, n: u64) -> u64 {
        self.shifts.iter().fold(0, |acc, &h| (acc + h) % n)
    }
}

/// `h_{s+1}`: splits `E_s` into `k` blocks of length `Δ_{s+1}`, takes the
/// rightmost block `(a_j, a_j + Δ_{s+1}]` holding at least a `1/(t·2^s)`
/// share of `F_m + h_1 + ... + h_s`, and returns `u_{s+1} - a_j`.
pub fn refine_step(colors: &[u32], p: &CyclicPartition, state: &RefineState) -> Result<u64> {
    let s = state.stage();
    if s == 0 || s >= p.r as usize {
        return Err(Error::Precondition(format!("refinement stage {s} outside 1..{}", p.r)));
    }
    let counter = ClassCounter::new(colors, state.m);
    let total = state.total(p.n);
    let width = p.deltas[s];
    let u_s = p.u(s);
    let need = |count: u64| (count as u128) * (p.t as u128) << s >= width as u128;
    (1..=p.k)
        .rev()
        .map(|j| u_s + (j - 1) * width)
        .find(|&a| need(counter.shifted(a + 1, a + width, total)))
        .map(|a| p.u(s + 1) - a)
        .ok_or_else(|| Error::InternalInvariantBroken(format!("no block of E_{s} reaches the stage density")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCheck {
    pub s: usize,
    pub count: u64,
    /// `Δ_s / (t·2^(s+2))`.
    pub required: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub s: usize,
    /// `h_{s+2} + ... + h_r`.
    pub tail: u64,
    /// `Δ_s / (t·2^(s+3))`.
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclicShiftCertificate {
    pub schema_version: u32,
    pub n: u64,
    pub r: u32,
    pub t: u32,
    pub k: u64,
    pub m: u32,
    pub class_size: u64,
    pub h_list: Vec<u64>,
    pub h: u64,
    pub counts: Vec<u64>,
    pub piece_sizes: Vec<u64>,
    /// `1/t`.
    pub density_floor: Threshold,
    /// `α = Δ_1 / (t·k^(r-1)·2^(r+2)·N)`.
    pub alpha_used: Threshold,
    /// `⌈α·N⌉`, the count every piece must reach.
    pub required_count: u64,
    /// `2/(k^r - 1)`.
    pub closed_form_bound: f64,
    pub closed_form_holds: bool,
    pub stage_checks: Vec<StageCheck>,
    pub tail_checks: Vec<TailCheck>,
    pub pass: bool,
}

impl CyclicShiftCertificate {
    pub fn min_count(&self) -> u64 {
        self.counts.iter().copied().min().unwrap_or(0)
    }
}

/// `α·N` as an exact fraction `(Δ_1, t·k^(r-1)·2^(r+2))`.
fn alpha_times_n(p: &CyclicPartition) -> (BigInt, BigInt) {
    let den = BigInt::from(p.t) * BigInt::from(p.k).pow(p.r - 1) * (BigInt::from(1u8) << (p.r + 2));
    (BigInt::from(p.deltas[0]), den)
}

/// `α(r, t)` for the partition.
pub fn alpha(p: &CyclicPartition) -> Threshold {
    let (num, den) = alpha_times_n(p);
    Threshold::new(num, den * BigInt::from(p.n)).expect("Δ_1 > 0")
}

/// Whether `α >= 2/(k^r - 1)` holds exactly.
pub fn closed_form_holds(p: &CyclicPartition) -> bool {
    let (num, den) = alpha_times_n(p);
    num * (BigInt::from(p.k).pow(p.r) - 1) >= BigInt::from(2u8) * den * BigInt::from(p.n)
}

/// `|(F_m + h) ∩ E_i|` for every piece.
pub fn piece_counts(colors: &[u32], p: &CyclicPartition, m: u32, h: u64) -> Vec<u64> {
    let counter = ClassCounter::new(colors, m);
    p.pieces.iter().map(|&(lo, hi)| counter.shifted(lo, hi, h)).collect()
}

/// Runs `find_h1` and `r - 1` refinement steps and checks the bounds.
pub fn find_shift(colors: &[u32], p: &CyclicPartition) -> Result<CyclicShiftCertificate> {
    let (m, h1) = find_h1(colors, p)?;
    let mut state = RefineState { m, shifts: vec![h1] };
    while state.stage() < p.r as usize {
        let next = refine_step(colors, p, &state)?;
        state.shifts.push(next);
    }
    let h = state.total(p.n);
    let counts = piece_counts(colors, p, m, h);
    let t = p.t as u128;
    let stage_checks = (1..=p.r as usize)
        .map(|s| {
            let count = counts[s - 1];
            let d = p.deltas[s - 1];
            StageCheck {
                s,
                count,
                required: d as f64 / (t as f64 * 2f64.powi(s as i32 + 2)),
                ok: ((count as u128 * t) << (s + 2)) >= d as u128,
            }
        })
        .collect();
    let tail_checks = (1..=(p.r as usize).saturating_sub(2))
        .map(|s| {
            let tail: u64 = state.shifts[s + 1..].iter().sum();
            let d = p.deltas[s - 1];
            TailCheck {
                s,
                tail,
                bound: d as f64 / (t as f64 * 2f64.powi(s as i32 + 3)),
                ok: ((tail as u128 * t) << (s + 3)) <= d as u128,
            }
        })
        .collect();
    let (num, den) = alpha_times_n(p);
    let required: BigInt = (&num + &den - 1u8) / &den;
    let required_count = u64::try_from(required).expect("α·N <= N");
    let pass = counts.iter().all(|&c| c >= required_count);
    Ok(CyclicShiftCertificate {
        schema_version: CYCLIC_SCHEMA_VERSION,
        n: p.n,
        r: p.r,
        t: p.t,
        k: p.k,
        m,
        class_size: largest_class(colors, p.t).1,
        h_list: state.shifts,
        h,
        counts,
        piece_sizes: p.piece_sizes(),
        density_floor: Threshold::new(1, p.t)?,
        alpha_used: alpha(p),
        required_count,
        closed_form_bound: 2.0 / ((p.k as f64).powi(p.r as i32) - 1.0),
        closed_form_holds: closed_form_holds(p),
        stage_checks,
        tail_checks,
        pass,
    })
}

/// A coloring of `Z_N × G'` with `G' = Z_{o_1} × ... × Z_{o_l}`, stored as
/// `colors[x·|G'| + y]` for `y` in mixed radix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductColoring {
    pub n: u64,
    pub orders: Vec<u64>,
    pub colors: Vec<u32>,
}

impl ProductColoring {
    pub fn fiber_size(&self) -> u64 {
        self.orders.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbelianLiftCertificate {
    pub schema_version: u32,
    pub n: u64,
    pub gprime_orders: Vec<u64>,
    pub gprime_size: u64,
    /// Sizes of the slice classes `C_1..C_t`.
    pub slice_sizes: Vec<u64>,
    pub base: CyclicShiftCertificate,
    pub m: u32,
    /// `(h, 0_{G'})`.
    pub h: u64,
    pub counts: Vec<u64>,
    /// `⌈(α/t)·N·|G'|⌉`.
    pub required_count: u64,
    pub pass: bool,
}

/// Lifts the cyclic construction to `Z_N × G'` through the slice coloring
/// `m(x) = argmax_m |A_m(x)|` (ties to the smallest `m`).
pub fn abelian_lift(coloring: &ProductColoring, r: u32, t: u32) -> Result<AbelianLiftCertificate> {
    let g = coloring.fiber_size();
    if g == 0 || coloring.colors.len() as u64 != coloring.n * g {
        return Err(Error::Precondition("coloring size must be N·|G'|".into()));
    }
    if let Some(c) = coloring.colors.iter().find(|&&c| c == 0 || c > t) {
        return Err(Error::Precondition(format!("color {c} outside 1..={t}")));
    }
    let p = build_partition(coloring.n, r, t)?;
    // fiber[x][m-1] = |A_m(x)|
    let fiber: Vec<Vec<u64>> = coloring
        .colors
        .chunks(g as usize)
        .map(|row| {
            let mut c = vec![0u64; t as usize];
            for &x in row {
                c[x as usize - 1] += 1;
            }
            c
        })
        .collect();
    let slice: Vec<u32> = fiber
        .iter()
        .map(|c| c.iter().enumerate().fold((0, 0), |best, (i, &v)| if v > best.1 { (i, v) } else { best }).0 as u32 + 1)
        .collect();
    let slice_sizes = (1..=t).map(|m| slice.iter().filter(|&&c| c == m).count() as u64).collect();
    let base = find_shift(&slice, &p)?;
    let m = base.m;
    let counts: Vec<u64> = p
        .pieces
        .iter()
        .map(|&(lo, hi)| (lo..=hi).map(|x| fiber[((x + p.n - base.h) % p.n) as usize][m as usize - 1]).sum())
        .collect();
    let (num, den) = alpha_times_n(&p);
    let den = den * BigInt::from(t);
    let required: BigInt = (num * BigInt::from(g) + &den - 1u8) / &den;
    let required_count = u64::try_from(required).expect("bounded by |G|");
    let pass = counts.iter().all(|&c| c >= required_count);
    Ok(AbelianLiftCertificate {
        schema_version: CYCLIC_SCHEMA_VERSION,
        n: coloring.n,
        gprime_orders: coloring.orders.clone(),
        gprime_size: g,
        slice_sizes,
        h: base.h,
        base,
        m,
        counts,
        required_count,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_examples() {
        let p = build_partition(1000, 2, 2).unwrap();
        assert_eq!(p.k, 65);
        assert_eq!(p.s_k, Threshold::new(66, 65).unwrap());
        assert_eq!(p.deltas, vec![975, 15]);
        assert_eq!(p.pieces, vec![(0, 975), (976, 999)]);
        assert_eq!(p.remainder, Some((991, 999)));
        assert_eq!(build_partition(66, 2, 2).unwrap_err(), Error::TooSmallN { n: 66, n0: 67 });
        assert!(build_partition(67, 2, 2).is_ok());
        let p = build_partition(100_000, 2, 2).unwrap();
        assert_eq!(p.deltas, vec![98475, 1515]);
    }

    #[test]
    fn partition_invariants_on_a_grid() {
        for r in 1..=3 {
            for t in 1..=3 {
                let n0 = min_order(r, t).unwrap();
                for n in [n0, n0 + 1, 2 * n0 + 7, 5 * n0 - 1] {
                    let p = build_partition(n, r, t).unwrap();
                    let top = (p.k as u128).pow(r - 1);
                    assert_eq!(p.deltas[0] as u128 % top, 0);
                    assert!(*p.deltas.last().unwrap() >= 1);
                    let sizes = p.piece_sizes();
                    assert_eq!(sizes.iter().sum::<u64>(), n);
                    let rem = p.remainder.map_or(0, |(a, b)| b - a + 1) as u128;
                    let g: u128 = (0..r).map(|i| (p.k as u128).pow(i)).sum();
                    assert!(rem < g);
                }
            }
        }
    }

    #[test]
    fn single_color_is_trivial() {
        let p = build_partition(1000, 2, 1).unwrap();
        let colors = vec![1u32; 1000];
        assert_eq!(find_h1(&colors, &p).unwrap(), (1, 0));
        let cert = find_shift(&colors, &p).unwrap();
        assert!(cert.pass);
        assert_eq!(cert.counts, p.piece_sizes());
        // Every block qualifies, so the rightmost one is taken: h_2 = Δ_2.
        assert_eq!(cert.h_list[1], p.deltas[1]);
    }

    #[test]
    fn class_equal_to_e1_needs_no_first_shift() {
        let p = build_partition(1000, 2, 2).unwrap();
        let colors: Vec<u32> = (0..1000).map(|x| if x <= 975 { 1 } else { 2 }).collect();
        assert_eq!(find_h1(&colors, &p).unwrap(), (1, 0));
    }

    #[test]
    fn left_packed_class_forces_a_large_second_shift() {
        let p = build_partition(100_000, 2, 2).unwrap();
        let colors: Vec<u32> = (0..100_000).map(|x| if x < 50_000 { 1 } else { 2 }).collect();
        let cert = find_shift(&colors, &p).unwrap();
        assert!(cert.pass, "{cert:?}");
        assert!(cert.stage_checks.iter().all(|s| s.ok));
    }

    #[test]
    fn alpha_examples() {
        let p = build_partition(100_000, 2, 2).unwrap();
        let a = alpha(&p);
        assert_eq!(a, Threshold::new(98475, 2u64 * 65 * 16 * 100_000).unwrap());
        let (num, den) = alpha_times_n(&p);
        assert_eq!((num, den), (BigInt::from(98475), BigInt::from(2080)));
    }

    #[test]
    fn fiber_constant_lift_scales_counts() {
        let n = 1000;
        let base: Vec<u32> = (0..n).map(|x| ((x * 7919 + 13) % 5 < 2) as u32 + 1).collect();
        let colors: Vec<u32> = base.iter().flat_map(|&c| std::iter::repeat(c).take(3)).collect();
        let lift = abelian_lift(&ProductColoring { n: n as u64, orders: vec![3], colors }, 2, 2).unwrap();
        let p = build_partition(n as u64, 2, 2).unwrap();
        let direct = find_shift(&base, &p).unwrap();
        assert_eq!(lift.counts, direct.counts.iter().map(|c| c * 3).collect::<Vec<_>>());
        assert!(lift.pass);
    }

    #[test]
    fn trivial_fiber_reduces_to_cyclic() {
        let n = 500u64;
        let colors: Vec<u32> = (0..n).map(|x| (x % 3 == 0) as u32 + 1).collect();
        let lift = abelian_lift(&ProductColoring { n, orders: vec![], colors: colors.clone() }, 2, 2).unwrap();
        let direct = find_shift(&colors, &build_partition(n, 2, 2).unwrap()).unwrap();
        assert_eq!(lift.counts, direct.counts);
        assert_eq!(lift.h, direct.h);
    }
}
