mod common;

use num_bigint::BigInt;
use num_integer::Roots;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use raimi_core::coloring::{Carrier, ColoringKind, ColoringSpec};
use raimi_core::cyclic::{alpha, build_partition, find_shift, min_order};
use raimi_core::fs::build_fs;
use raimi_core::lattice::{parse_family, relation_lattice, subtorus_param, IntPolynomial};
use raimi_core::numeric::{convergents_certified, norm_of_multiple_lt, CertifiedReal, Precision, PreciseReal, RealConst, Threshold};
use raimi_core::oracle::{brute_best_shift_cyclic, brute_best_shift_sl2, cyclic_shift_table};
use raimi_core::sl2::{find_shift_sl2, largest_class, second_moment, second_moment_closed_form, Field, SL2Partition, Sl2Group, Sl2Options};
use raimi_core::torus::{color_point, BoxColoring, count_shifted, sandwich_holds, tile_of, Arc, TorusPartitionSpec};
use raimi_core::weyl::{find_x_eps, return_times, weyl_sum, Frequency, XEpsOptions};

fn exact(num: i128) -> PreciseReal {
    PreciseReal::from_ratio(num, BigInt::one() << 64u32, 128)
}

fn config() -> ProptestConfig {
    ProptestConfig { cases: 64, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn norm_is_a_seminorm(a in (i128::MIN >> 20)..(i128::MAX >> 20), b in (i128::MIN >> 20)..(i128::MAX >> 20)) {
        let (x, y) = (exact(a), exact(b));
        let (nx, ny) = (x.dist_to_int(), y.dist_to_int());
        prop_assert!(x.add(&y).dist_to_int().scaled() <= nx.scaled() + ny.scaled());
        prop_assert_eq!(x.neg().dist_to_int().scaled(), nx.scaled());
        let diff = x.add(&y.neg()).dist_to_int();
        prop_assert_eq!(x.frac_part().add(&y.frac_part().neg()).dist_to_int().scaled(), diff.scaled());
        prop_assert!((nx.scaled() - ny.scaled()) <= diff.scaled());
        prop_assert!(nx.scaled() <= BigInt::one() << 127u32);
    }

    #[test]
    fn convergents_approximate_well(n in 2u64..400) {
        prop_assume!(n.sqrt() * n.sqrt() != n);
        let beta = CertifiedReal::new(RealConst::Sqrt(n), Precision::default());
        let cf = convergents_certified(&beta, 12).unwrap();
        prop_assert!(cf.determinants_ok());
        let qs: Vec<&BigInt> = cf.denominators().collect();
        for w in qs.windows(2).skip(1) {
            let t = Threshold::new(1, w[1].clone()).unwrap();
            prop_assert!(norm_of_multiple_lt(&beta, w[0], &t).is_true());
        }
    }

    #[test]
    fn fs_sums_compose(mask_a in 0u32..64, mask_b in 0u32..64) {
        let beta = CertifiedReal::new(RealConst::Sqrt(3), Precision::default());
        let seq = build_fs(&beta, &Threshold::new(1, 4).unwrap(), 6).unwrap();
        let mask_b = mask_b & !mask_a;
        let sum = |mask: u32| -> BigInt {
            seq.elements.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &x)| BigInt::from(x)).sum()
        };
        let norm = |s: &BigInt| beta.value().mul_int(s).dist_to_int();
        let (na, nb, nab) = (norm(&sum(mask_a)), norm(&sum(mask_b)), norm(&(sum(mask_a) + sum(mask_b))));
        prop_assert!(nab.lower_scaled() <= na.upper_scaled() + nb.upper_scaled());
        prop_assert!(nab.to_f64() < 0.25);
    }

    #[test]
    fn tiles_partition_the_circle(u in 1u128.., r in 1u32..9) {
        let t = tile_of(u, r).unwrap();
        let one = BigInt::one() << 128u32;
        let a = &one - (&one >> t.j);
        let w = &one >> (t.j + 1);
        let d = (BigInt::from(u) - &a) * BigInt::from(r);
        prop_assert!(d > &w * BigInt::from(t.i - 1) && d <= &w * BigInt::from(t.i));
    }

    #[test]
    fn sandwich_lemma(start in any::<u128>(), len in 1u128..(1 << 127), sigma in any::<u128>(),
                      eps in 1u128..(1 << 120), frac in 0.0f64..1.0, up in any::<bool>()) {
        let d = ((eps as f64) * frac) as u128 % eps;
        let gamma = if up { sigma.wrapping_add(d) } else { sigma.wrapping_sub(d) };
        let arc = Arc { start, len };
        prop_assert!(sandwich_holds(arc, sigma, gamma, eps));
    }

    #[test]
    fn lattice_matches_rational_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let polys = common::random_family(&mut rng);
        let lat = relation_lattice(&polys).unwrap();
        let oracle = common::oracle_lattice(&polys);
        prop_assert_eq!(lat.rank(), oracle.len());
        let basis: Vec<Vec<BigInt>> = lat.basis.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect();
        for row in &basis {
            prop_assert!(common::in_span(&oracle, row));
        }
        for row in &oracle {
            prop_assert!(common::in_span(&basis, row));
        }
    }

    #[test]
    fn sampled_points_are_annihilated(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let polys = common::random_family(&mut rng);
        let lat = relation_lattice(&polys).unwrap();
        let h = subtorus_param(&lat).unwrap();
        for _ in 0..20 {
            let z = h.sample(&mut rng);
            prop_assert!(h.contains(&z));
            for m in &lat.basis {
                let pairing: i128 = m.iter().zip(&z.num).map(|(a, b)| a * b).sum();
                prop_assert_eq!(pairing.rem_euclid(z.den), 0);
            }
        }
    }

    #[test]
    fn second_moment_identity(q in prop::sample::select(vec![3u32, 5, 7, 11]), bits in any::<u128>(), extra in any::<u64>()) {
        let f = Field::new(q as u64).unwrap();
        let u: Vec<(u32, u32)> = (0..q * q)
            .filter(|&i| (bits >> (i % 128)) & 1 == 1 || (extra >> (i % 64)) & 1 == 1 && i % 3 == 0)
            .map(|i| (i / q, i % q))
            .collect();
        prop_assert_eq!(second_moment(&f, &u), second_moment_closed_form(q as u64, u.len() as u64));
    }

    #[test]
    fn cyclic_certificate_dominated_by_oracle(n in 200u64..3000, seed in any::<u64>(), kind in 0usize..4) {
        let kinds = [ColoringKind::Random, ColoringKind::AdversarialLeftPack, ColoringKind::FourierSparse, ColoringKind::Intervals];
        let p = build_partition(n, 2, 2).unwrap();
        let colors = ColoringSpec { kind: kinds[kind], t: 2, seed, carrier: Carrier::Cyclic { n } }.table().unwrap();
        let cert = find_shift(&colors, &p).unwrap();
        prop_assert!(cert.pass);
        prop_assert!(cert.tail_checks.iter().all(|c| c.ok));
        let best = brute_best_shift_cyclic(&colors, &p, cert.m).unwrap();
        prop_assert!(best.min_count >= cert.min_count());
        prop_assert!(cert.min_count() >= cert.required_count);
    }

    #[test]
    fn averaging_identity(n in 200u64..3000, seed in any::<u64>(), m in 1u32..=3) {
        let p = build_partition(n, 1, 3).unwrap();
        let colors = ColoringSpec { kind: ColoringKind::Random, t: 3, seed, carrier: Carrier::Cyclic { n } }.table().unwrap();
        let fm = colors.iter().filter(|&&c| c == m).count() as u64;
        let table = cyclic_shift_table(&colors, &p, m);
        for (i, size) in p.piece_sizes().iter().enumerate() {
            prop_assert_eq!(table.iter().map(|row| row[i]).sum::<u64>(), fm * size);
        }
    }
}

/// `(1 - G/N)·2/(k^r - 1) <= α < 2/(k^r - 1)` with `G = 1 + k + ... + k^(r-1)`.
#[test]
fn alpha_grid_relation() {
    for r in 1..=3u32 {
        for t in 1..=3u32 {
            let n0 = min_order(r, t).unwrap();
            let k = BigInt::from(1 + t as u64 * (1u64 << (r + 3)));
            let g = n0 - 1;
            let bound = BigRational::new(BigInt::from(2), k.pow(r) - 1);
            for n in [n0, n0 + 1, 2 * n0 - 1, 2 * n0, 10 * n0 + 7, 1_000_003.max(n0)] {
                let a = alpha(&build_partition(n, r, t).unwrap());
                let a = a.as_rational();
                let lower = &bound * BigRational::new(BigInt::from(n - g), BigInt::from(n));
                assert!(a < &bound, "r = {r}, t = {t}, N = {n}");
                assert!(a >= &lower, "r = {r}, t = {t}, N = {n}");
            }
        }
    }
}

#[test]
fn sl2_oracle_dominance() {
    for q in [7u64, 11, 13] {
        let g = Sl2Group::new(q).unwrap();
        let part = SL2Partition::new(q as u32, 2).unwrap();
        for seed in 0..4 {
            let colors = ColoringSpec { kind: ColoringKind::Random, t: 2, seed, carrier: Carrier::Sl2 { q } }.table().unwrap();
            let (m, _) = largest_class(&colors, 2);
            let best = brute_best_shift_sl2(&g, &colors, &part, m).unwrap();
            if let Ok(cert) = find_shift_sl2(&g, &colors, 2, 2, Sl2Options { relaxed: true }) {
                assert_eq!(cert.m, m);
                assert!(cert.min_count() <= best.min_count, "q = {q}, seed = {seed}");
            }
        }
    }
}

/// `||√2·n|| < 1/10`, decided with integer square roots.
fn sqrt2_near_integer(n: u64) -> bool {
    let n = n as u128;
    let target = 200 * n * n;
    let s = (2 * n * n).sqrt();
    [s, s + 1].iter().any(|&k| {
        let lo = (10 * k).saturating_sub(1);
        lo * lo < target && target < (10 * k + 1) * (10 * k + 1)
    })
}

#[test]
fn return_times_match_integer_oracle() {
    let beta = CertifiedReal::new(RealConst::Sqrt(2), Precision::default());
    let polys = parse_family("x,x^2").unwrap();
    let (hits, uncertain) = return_times(&beta, &polys, &Threshold::new(1, 10).unwrap(), 30_000).unwrap();
    assert_eq!(uncertain, 0);
    let expected: Vec<u64> = (1..=30_000u64).filter(|&h| sqrt2_near_integer(h) && sqrt2_near_integer(h * h)).collect();
    assert_eq!(hits, expected);
}

#[test]
fn density_within_five_intervals() {
    let beta = CertifiedReal::new(RealConst::Sqrt(2), Precision::default());
    for family in ["x,x^2", "x,x^2,x+x^2", "x,2x"] {
        let polys = parse_family(family).unwrap();
        let rep = find_x_eps(&beta, &polys, &Threshold::new(1, 10).unwrap(), 200_000, XEpsOptions::default()).unwrap();
        let predicted = rep.predicted.unwrap();
        let last = rep.sweep.last().unwrap();
        assert!((rep.empirical_density - predicted).abs() <= 5.0 * last.ci, "{family}: {} vs {predicted}", rep.empirical_density);
    }
}

#[test]
fn relation_characters_are_trivial() {
    let beta = Frequency::Real(CertifiedReal::new(RealConst::Sqrt(2), Precision::default()));
    let polys = parse_family("x,x^2,x+x^2,3x^2").unwrap();
    let lat = relation_lattice(&polys).unwrap();
    assert_eq!(lat.rank(), 2);
    for row in &lat.basis {
        let m: Vec<i64> = row.iter().map(|&x| x as i64).collect();
        let q = IntPolynomial::combination(&polys, &m);
        assert!(q.iter().all(|c| c.is_zero()));
        for n in [1, 17, 5000] {
            let s = weyl_sum(&beta, &q, n).unwrap();
            assert_eq!((s.re, s.im), (1.0, 0.0));
        }
    }
}

#[test]
fn diagonal_shift_is_equivariant() {
    let spec = TorusPartitionSpec::new(2, 3, Precision::default()).unwrap();
    let coloring = ColoringSpec { kind: ColoringKind::Random, t: 2, seed: 7, carrier: Carrier::Box { k: 2, side: 40 } }
        .box_coloring()
        .unwrap();
    let shifts = [0u128, 1, 5, 12_345];
    let (counts, uncertain) = count_shifted(&coloring, &spec, 1, &shifts).unwrap();
    assert_eq!(uncertain, 0);
    for (s, &h) in shifts.iter().enumerate() {
        let mut direct = [0u64; 3];
        for x in 1..=40u64 {
            for y in 1..=40u64 {
                if coloring.color(&[x, y]) == 1 {
                    let i = color_point(&spec, &[x + h as u64, y + h as u64]).unwrap();
                    direct[i as usize - 1] += 1;
                }
            }
        }
        assert_eq!(counts[s].counts, direct.to_vec(), "h = {h}");
    }
}
