//! Deterministic coloring generators shared by the tools and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::BoxColoring;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColoringKind {
    /// Independent uniform colors.
    Random,
    /// `t` contiguous blocks of the carrier order.
    Intervals,
    /// `x mod t + 1`.
    Residues,
    /// Level sets of a random three-term trigonometric sum.
    FourierSparse,
    /// Random on the cyclic coordinate, constant along the remaining ones.
    FiberConstant,
    /// Color 1 fills an initial segment of length `⌈size/t⌉`; the rest is random.
    AdversarialLeftPack,
}

impl std::str::FromStr for ColoringKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
            .map_err(|_| Error::Parse(format!("unknown coloring kind {s:?}")))
    }
}

/// The finite set being colored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Carrier {
    /// `[1, side]^k`.
    Box { k: usize, side: u64 },
    /// `Z_N`.
    Cyclic { n: u64 },
    /// `Z_N × Z_{o_1} × ... × Z_{o_l}`, stored as `x·|G'| + y`.
    Product { n: u64, orders: Vec<u64> },
    /// `SL2(F_q)` in the enumeration order of [`crate::sl2::Sl2Group`].
    Sl2 { q: u64 },
}

impl Carrier {
    /// Number of elements; `None` if it does not fit in `u64`.
    pub fn size(&self) -> Option<u64> {
        match self {
            Carrier::Box { k, side } => side.checked_pow(*k as u32),
            Carrier::Cyclic { n } => Some(*n),
            Carrier::Product { n, orders } => orders.iter().try_fold(*n, |acc, &o| acc.checked_mul(o)),
            Carrier::Sl2 { q } => q.checked_pow(3).map(|c| c - q),
        }
    }

    /// Length of the base cyclic coordinate: `N`, the box side, or `q`.
    fn base_len(&self) -> u64 {
        match self {
            Carrier::Box { side, .. } => *side,
            Carrier::Cyclic { n } | Carrier::Product { n, .. } => *n,
            Carrier::Sl2 { q } => *q,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColoringSpec {
    pub kind: ColoringKind,
    pub t: u32,
    pub seed: u64,
    pub carrier: Carrier,
}

/// Largest carrier materialized as a table.
pub const TABLE_LIMIT: u64 = 1 << 28;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of trial `i` under a root seed.
pub fn derive_seed(root: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(root) ^ trial)
}

/// Parameters of the trigonometric sum behind `FourierSparse`.
fn fourier_terms(seed: u64, len: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xF0F0);
    (0..3).map(|_| (rng.gen_range(1..len.clamp(2, 64)) as f64, rng.gen::<f64>())).collect()
}

fn fourier_color(terms: &[(f64, f64)], x: u64, len: u64, t: u32) -> u32 {
    let s: f64 = terms.iter().map(|&(xi, ph)| (std::f64::consts::TAU * (xi * x as f64 / len as f64 + ph)).cos()).sum();
    let bucket = ((s + 3.0) / 6.0 * t as f64).floor() as i64;
    bucket.clamp(0, t as i64 - 1) as u32 + 1
}

impl ColoringSpec {
    fn check(&self) -> Result<()> {
        if self.t == 0 {
            return Err(Error::Precondition("t must be at least 1".into()));
        }
        match &self.carrier {
            Carrier::Box { k, side } if *k == 0 || *side == 0 => Err(Error::Precondition("empty box".into())),
            Carrier::Cyclic { n } | Carrier::Product { n, .. } if *n == 0 => Err(Error::Precondition("empty group".into())),
            Carrier::Product { orders, .. } if orders.contains(&0) => Err(Error::Precondition("zero factor order".into())),
            _ => Ok(()),
        }
    }

    /// Colors of every element in carrier order, `1..=t`.
    pub fn table(&self) -> Result<Vec<u32>> {
        self.check()?;
        let size = self.carrier.size().filter(|&s| s <= TABLE_LIMIT).ok_or_else(|| {
            Error::Precondition(format!("carrier too large to tabulate (limit {TABLE_LIMIT})"))
        })?;
        let t = self.t;
        let fiber = size / self.carrier.base_len().max(1);
        let out = match self.kind {
            ColoringKind::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                (0..size).map(|_| rng.gen_range(1..=t)).collect()
            }
            ColoringKind::Intervals => (0..size).map(|i| (i as u128 * t as u128 / size as u128) as u32 + 1).collect(),
            ColoringKind::Residues => match self.carrier {
                Carrier::Product { .. } => (0..size).map(|i| ((i / fiber) % t as u64) as u32 + 1).collect(),
                _ => (0..size).map(|i| (i % t as u64) as u32 + 1).collect(),
            },
            ColoringKind::FourierSparse => {
                let terms = fourier_terms(self.seed, size);
                (0..size).map(|i| fourier_color(&terms, i, size, t)).collect()
            }
            ColoringKind::FiberConstant => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let base: Vec<u32> = (0..size / fiber).map(|_| rng.gen_range(1..=t)).collect();
                (0..size).map(|i| base[(i / fiber) as usize]).collect()
            }
            ColoringKind::AdversarialLeftPack => {
                let lead = size.div_ceil(t as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                (0..size).map(|i| if i < lead || t == 1 { 1 } else { rng.gen_range(2..=t) }).collect()
            }
        };
        Ok(out)
    }

    /// A lazily evaluated coloring of a box carrier.
    pub fn box_coloring(&self) -> Result<SpecBoxColoring> {
        self.check()?;
        let Carrier::Box { k, side } = self.carrier else {
            return Err(Error::Precondition("box coloring needs a box carrier".into()));
        };
        Ok(SpecBoxColoring {
            kind: self.kind,
            t: self.t,
            seed: self.seed,
            k,
            side,
            terms: fourier_terms(self.seed, side),
        })
    }
}

/// Expansion of a [`ColoringSpec`] on `[1, side]^k`, evaluated per point.
#[derive(Debug, Clone)]
pub struct SpecBoxColoring {
    kind: ColoringKind,
    t: u32,
    seed: u64,
    k: usize,
    side: u64,
    terms: Vec<(f64, f64)>,
}

impl SpecBoxColoring {
    fn hash(&self, a: &[u64]) -> u64 {
        a.iter().fold(splitmix64(self.seed), |h, &x| splitmix64(h ^ x))
    }

    fn uniform(&self, h: u64, lo: u32) -> u32 {
        let span = (self.t - lo + 1) as u64;
        ((h as u128 * span as u128) >> 64) as u32 + lo
    }

    /// 0-based position of `a` in row-major order.
    fn linear(&self, a: &[u64]) -> u128 {
        a.iter().fold(0u128, |acc, &x| acc * self.side as u128 + (x - 1) as u128)
    }
}

impl BoxColoring for SpecBoxColoring {
    fn dim(&self) -> usize {
        self.k
    }

    fn side(&self) -> u64 {
        self.side
    }

    fn colors(&self) -> u32 {
        self.t
    }

    fn color(&self, a: &[u64]) -> u32 {
        let t = self.t;
        match self.kind {
            ColoringKind::Random => self.uniform(self.hash(a), 1),
            ColoringKind::Intervals => ((a[0] - 1) as u128 * t as u128 / self.side as u128) as u32 + 1,
            ColoringKind::Residues => (a.iter().sum::<u64>() % t as u64) as u32 + 1,
            ColoringKind::FourierSparse => fourier_color(&self.terms, a[0] - 1, self.side, t),
            ColoringKind::FiberConstant => self.uniform(self.hash(&a[..1]), 1),
            ColoringKind::AdversarialLeftPack => {
                let total = (self.side as u128).pow(self.k as u32);
                if t == 1 || self.linear(a) < total.div_ceil(t as u128) {
                    1
                } else {
                    self.uniform(self.hash(a), 2)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: ColoringKind, t: u32, seed: u64, carrier: Carrier) -> ColoringSpec {
        ColoringSpec { kind, t, seed, carrier }
    }

    #[test]
    fn random_is_stable() {
        let s = spec(ColoringKind::Random, 2, 1, Carrier::Cyclic { n: 10 });
        let a = s.table().unwrap();
        assert_eq!(a, s.table().unwrap());
        assert_eq!(a.len(), 10);
        assert!(a.iter().all(|&c| c == 1 || c == 2));
        assert_ne!(a, spec(ColoringKind::Random, 2, 2, Carrier::Cyclic { n: 10 }).table().unwrap());
    }

    #[test]
    fn residues_and_intervals() {
        let r = spec(ColoringKind::Residues, 3, 0, Carrier::Cyclic { n: 7 }).table().unwrap();
        assert_eq!(r, vec![1, 2, 3, 1, 2, 3, 1]);
        let i = spec(ColoringKind::Intervals, 2, 0, Carrier::Cyclic { n: 6 }).table().unwrap();
        assert_eq!(i, vec![1, 1, 1, 2, 2, 2]);
    }

    #[test]
    fn left_pack_puts_color_one_first() {
        let a = spec(ColoringKind::AdversarialLeftPack, 3, 5, Carrier::Cyclic { n: 100 }).table().unwrap();
        assert!(a[..34].iter().all(|&c| c == 1));
        assert!(a[34..].iter().all(|&c| c != 1));
    }

    #[test]
    fn fiber_constant_on_products() {
        let a = spec(ColoringKind::FiberConstant, 2, 9, Carrier::Product { n: 50, orders: vec![3, 2] }).table().unwrap();
        assert_eq!(a.len(), 300);
        for row in a.chunks(6) {
            assert!(row.iter().all(|&c| c == row[0]));
        }
    }

    #[test]
    fn box_colorings_are_total_and_deterministic() {
        for kind in [
            ColoringKind::Random,
            ColoringKind::Intervals,
            ColoringKind::Residues,
            ColoringKind::FourierSparse,
            ColoringKind::FiberConstant,
            ColoringKind::AdversarialLeftPack,
        ] {
            let c = spec(kind, 3, 4, Carrier::Box { k: 2, side: 20 }).box_coloring().unwrap();
            let c2 = spec(kind, 3, 4, Carrier::Box { k: 2, side: 20 }).box_coloring().unwrap();
            for a in 1..=20 {
                for b in 1..=20 {
                    let col = c.color(&[a, b]);
                    assert!((1..=3).contains(&col));
                    assert_eq!(col, c2.color(&[a, b]));
                }
            }
        }
    }

    #[test]
    fn kinds_parse() {
        assert_eq!("fourier-sparse".parse::<ColoringKind>().unwrap(), ColoringKind::FourierSparse);
        assert_eq!("adversarial_left_pack".parse::<ColoringKind>().unwrap(), ColoringKind::AdversarialLeftPack);
        assert!("stripes".parse::<ColoringKind>().is_err());
    }

    #[test]
    fn spec_json_shape() {
        let s = spec(ColoringKind::Random, 2, 1, Carrier::Product { n: 10, orders: vec![3] });
        let v = serde_json::to_value(&s).unwrap();
        assert_eq!(v["kind"], "random");
        assert_eq!(v["carrier"]["type"], "product");
        assert_eq!(serde_json::from_value::<ColoringSpec>(v).unwrap(), s);
    }
}
