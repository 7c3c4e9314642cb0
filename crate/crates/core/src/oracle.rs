//! Exhaustive oracles for the finite-group shift certificates.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cyclic::CyclicPartition;
use crate::error::{Error, Result};
use crate::sl2::{SL2Mat, SL2Partition, Sl2Group};

/// Largest `N` accepted by the cyclic oracle.
pub const CYCLIC_ORACLE_LIMIT: u64 = 10_000;
/// Largest `q` accepted by the SL2 oracle.
pub const SL2_ORACLE_LIMIT: u64 = 13;
/// Above this `N` the cyclic counts go through FFT correlation.
pub const FFT_THRESHOLD: u64 = 2000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResult<H> {
    pub h: H,
    pub min_count: u64,
}

/// `counts[h][i] = |(F_m + h) ∩ E_i|` for every `h ∈ Z_N`.
pub fn cyclic_shift_table(colors: &[u32], p: &CyclicPartition, m: u32) -> Vec<Vec<u64>> {
    if (colors.len() as u64) > FFT_THRESHOLD {
        cyclic_table_fft(colors, p, m)
    } else {
        cyclic_table_direct(colors, p, m)
    }
}

fn cyclic_table_direct(colors: &[u32], p: &CyclicPartition, m: u32) -> Vec<Vec<u64>> {
    let n = colors.len();
    let piece: Vec<usize> = (0..n as u64).map(|x| p.piece_of(x) - 1).collect();
    (0..n)
        .into_par_iter()
        .map(|h| {
            let mut c = vec![0u64; p.pieces.len()];
            for x in 0..n {
                if colors[(x + n - h) % n] == m {
                    c[piece[x]] += 1;
                }
            }
            c
        })
        .collect()
}

/// `c_i(h) = Σ_x E_i(x) F_m(x - h)`, the circular convolution of `E_i` with
/// the reflection of `F_m`.
fn cyclic_table_fft(colors: &[u32], p: &CyclicPartition, m: u32) -> Vec<Vec<u64>> {
    let n = colors.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut refl: Vec<Complex<f64>> =
        (0..n).map(|y| Complex::new((colors[(n - y) % n] == m) as u8 as f64, 0.0)).collect();
    fwd.process(&mut refl);
    let mut table = vec![vec![0u64; p.pieces.len()]; n];
    for (i, &(lo, hi)) in p.pieces.iter().enumerate() {
        let mut e: Vec<Complex<f64>> =
            (0..n as u64).map(|x| Complex::new(((lo..=hi).contains(&x)) as u8 as f64, 0.0)).collect();
        fwd.process(&mut e);
        for (a, b) in e.iter_mut().zip(&refl) {
            *a *= b;
        }
        inv.process(&mut e);
        for (h, v) in e.iter().enumerate() {
            table[h][i] = (v.re / n as f64).round() as u64;
        }
    }
    table
}

/// Maximizes `min_i |(F_m + h) ∩ E_i|` over all `h ∈ Z_N`; ties go to the
/// smallest `h`.
pub fn brute_best_shift_cyclic(colors: &[u32], p: &CyclicPartition, m: u32) -> Result<OracleResult<u64>> {
    if p.n > CYCLIC_ORACLE_LIMIT {
        return Err(Error::OracleLimitExceeded(format!("N = {} > {CYCLIC_ORACLE_LIMIT}", p.n)));
    }
    if colors.len() as u64 != p.n {
        return Err(Error::Precondition("coloring size must equal N".into()));
    }
    let table = cyclic_shift_table(colors, p, m);
    let (h, min_count) = table
        .iter()
        .enumerate()
        .map(|(h, c)| (h as u64, *c.iter().min().unwrap()))
        .fold((0, 0), |best, cur| if cur.1 > best.1 { cur } else { best });
    Ok(OracleResult { h, min_count })
}

/// Maximizes `min_i |(F_m·h) ∩ E_i|` over all `h ∈ SL2(F_q)`.
pub fn brute_best_shift_sl2(g: &Sl2Group, colors: &[u32], p: &SL2Partition, m: u32) -> Result<OracleResult<SL2Mat>> {
    if g.q() as u64 > SL2_ORACLE_LIMIT {
        return Err(Error::OracleLimitExceeded(format!("q = {} > {SL2_ORACLE_LIMIT}", g.q())));
    }
    if colors.len() != g.order() {
        return Err(Error::Precondition("coloring size must equal |SL2(F_q)|".into()));
    }
    let f = &g.field;
    let class: Vec<SL2Mat> = colors.iter().enumerate().filter(|(_, &c)| c == m).map(|(i, _)| g.element(i)).collect();
    let best = (0..g.order())
        .into_par_iter()
        .map(|hi| {
            let h = g.element(hi);
            let mut c = vec![0u64; p.r as usize];
            for a in &class {
                c[p.piece_of_entry(a.mul(&h, f).x) - 1] += 1;
            }
            (hi, *c.iter().min().unwrap())
        })
        .reduce(|| (usize::MAX, 0), |a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a });
    Ok(OracleResult { h: g.element(best.0.min(g.order() - 1)), min_count: best.1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coloring::{Carrier, ColoringKind, ColoringSpec};
    use crate::cyclic::{build_partition, find_shift, largest_class};
    use crate::sl2::{find_shift_sl2, Sl2Options};

    fn colors(kind: ColoringKind, t: u32, seed: u64, n: u64) -> Vec<u32> {
        ColoringSpec { kind, t, seed, carrier: Carrier::Cyclic { n } }.table().unwrap()
    }

    #[test]
    fn fft_matches_direct() {
        let n = 2500;
        let c = colors(ColoringKind::Random, 2, 3, n);
        let p = build_partition(n, 2, 2).unwrap();
        assert_eq!(cyclic_table_fft(&c, &p, 1), cyclic_table_direct(&c, &p, 1));
    }

    #[test]
    fn single_color_oracle() {
        let p = build_partition(100, 1, 1).unwrap();
        let res = brute_best_shift_cyclic(&[1; 100], &p, 1).unwrap();
        assert_eq!(res, OracleResult { h: 0, min_count: 100 });
        let p = build_partition(1000, 2, 1).unwrap();
        let res = brute_best_shift_cyclic(&[1; 1000], &p, 1).unwrap();
        assert_eq!(res.h, 0);
        assert_eq!(res.min_count, *p.piece_sizes().iter().min().unwrap());
    }

    #[test]
    fn oracle_dominates_certificate() {
        let p = build_partition(1000, 2, 2).unwrap();
        let c = colors(ColoringKind::Random, 2, 1, 1000);
        let cert = find_shift(&c, &p).unwrap();
        let best = brute_best_shift_cyclic(&c, &p, cert.m).unwrap();
        assert!(best.min_count >= cert.min_count());
    }

    #[test]
    fn limits() {
        let p = build_partition(10_001, 2, 2).unwrap();
        assert_eq!(brute_best_shift_cyclic(&vec![1; 10_001], &p, 1).unwrap_err().kind(), "OracleLimitExceeded");
        let g = Sl2Group::new(17).unwrap();
        let part = SL2Partition::new(17, 2).unwrap();
        assert_eq!(brute_best_shift_sl2(&g, &vec![1; g.order()], &part, 1).unwrap_err().kind(), "OracleLimitExceeded");
    }

    #[test]
    fn sl2_oracle_dominates_certificate() {
        let g = Sl2Group::new(7).unwrap();
        let c = ColoringSpec { kind: ColoringKind::Random, t: 2, seed: 1, carrier: Carrier::Sl2 { q: 7 } }.table().unwrap();
        let part = SL2Partition::new(7, 2).unwrap();
        let (m, _) = largest_class(&c, 2);
        let best = brute_best_shift_sl2(&g, &c, &part, m).unwrap();
        match find_shift_sl2(&g, &c, 2, 2, Sl2Options { relaxed: true }) {
            Ok(cert) => assert!(best.min_count >= cert.min_count()),
            Err(e) => assert!(matches!(e.kind(), "PruningAssumptionFailed" | "NoDirectionFound")),
        }
    }
}
