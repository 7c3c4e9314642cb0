//! Finite sequences whose finite sums all stay close to the integers.
//!
//! An [`FsSequence`] `x_1 < ... < x_K` satisfies `||β x_k|| < ε/2^k`; by the
//! triangle inequality every nonempty subset sum `h` then has
//! `||β h|| < ε(1 - 2^-K)`. [`verify_fs`] re-checks that bound over all
//! `2^K - 1` sums with certified arithmetic.

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{
    norm_of_multiple_lt, small_norm_multiple_above, Certainty, CertifiedReal, FixedThreshold, Frac128, RealConst,
    Threshold,
};

/// Largest `K` verified by full enumeration.
pub const EXHAUSTIVE_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsSequence {
    #[serde(rename = "beta_descriptor")]
    pub beta: RealConst,
    pub eps: Threshold,
    pub elements: Vec<u128>,
}

impl FsSequence {
    pub fn k(&self) -> usize {
        self.elements.len()
    }

    /// The bound every subset sum must beat: `eps·(1 - 2^-K)`.
    pub fn sum_bound(&self) -> Threshold {
        self.eps.times_one_minus_pow2(self.k() as u32)
    }

    /// Appends `x` if it meets the next level's bound `eps/2^(K+1)`.
    pub fn extend(&mut self, beta: &CertifiedReal, x: u128) -> Result<()> {
        let level = self.k() as u32 + 1;
        if let Some(&last) = self.elements.last() {
            if x <= last {
                return Err(Error::Precondition(format!("elements must increase: {x} <= {last}")));
            }
        }
        match norm_of_multiple_lt(beta, &BigInt::from(x), &self.eps.halved(level)) {
            Certainty::True => {
                self.elements.push(x);
                Ok(())
            }
            Certainty::False => Err(Error::Precondition(format!("||{x}·beta|| is not below eps/2^{level}"))),
            Certainty::Uncertain => Err(Error::PrecisionExhausted(format!("||{x}·beta|| < eps/2^{level} undecided"))),
        }
    }
}

/// Builds `x_1 < ... < x_K` with `x_k` the smallest convergent denominator
/// above `x_{k-1}` satisfying `||β x_k|| < eps/2^k`.
pub fn build_fs(beta: &CertifiedReal, eps: &Threshold, k: usize) -> Result<FsSequence> {
    if !eps.below_half() {
        return Err(Error::Precondition(format!("eps must lie in (0, 1/2), got {eps}")));
    }
    let mut seq = FsSequence { beta: beta.constant().clone(), eps: eps.clone(), elements: Vec::with_capacity(k) };
    let mut prev = 0u128;
    for level in 1..=k as u32 {
        let x = small_norm_multiple_above(beta, &eps.halved(level), prev)?;
        seq.elements.push(x);
        prev = x;
    }
    if k <= EXHAUSTIVE_LIMIT {
        let report = verify_fs(&seq, beta)?;
        if !report.pass {
            return Err(Error::InternalInvariantBroken(format!(
                "FS bound violated by subset {:?} (norm {})",
                report.worst_subset, report.max_norm
            )));
        }
    }
    Ok(seq)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsReport {
    /// Largest `||β h||` seen (center of the certified enclosure).
    pub max_norm: f64,
    /// Indices (into `elements`) of the subset achieving `max_norm`.
    pub worst_subset: Vec<usize>,
    pub bound: f64,
    pub checked: u64,
    pub total: u64,
    pub exhaustive: bool,
    pub uncertain: u64,
    pub failures: u64,
    pub pass: bool,
}

impl FsReport {
    pub fn coverage(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.checked as f64 / self.total as f64
        }
    }
}

struct Checker<'a> {
    beta: &'a CertifiedReal,
    elements: &'a [u128],
    bound: Threshold,
    fixed: FixedThreshold,
    fracs: Vec<Frac128>,
    err_total: u128,
}

impl<'a> Checker<'a> {
    fn new(seq: &'a FsSequence, beta: &'a CertifiedReal) -> Result<Self> {
        if seq.elements.iter().any(|&x| x > i128::MAX as u128) {
            return Err(Error::Precondition("FS elements must fit in 127 bits".into()));
        }
        let bound = seq.sum_bound();
        let kernel = beta.kernel(0);
        let fracs: Vec<Frac128> = seq.elements.iter().map(|&x| kernel.mul(x as i128)).collect();
        let err_total = fracs.iter().fold(0u128, |a, f| a.saturating_add(f.err));
        Ok(Checker { beta, elements: &seq.elements, fixed: FixedThreshold::new(&bound), bound, fracs, err_total })
    }

    /// Decides one subset given its 128-bit sum, escalating if needed.
    fn decide(&self, mask: u64, value: u128) -> Certainty {
        match self.fixed.compare(value.min(value.wrapping_neg()), self.err_total) {
            Certainty::Uncertain => {
                let h: BigInt = indices(mask).map(|i| BigInt::from(self.elements[i])).sum();
                norm_of_multiple_lt(self.beta, &h, &self.bound)
            }
            c => c,
        }
    }

    fn sum_of(&self, mask: u64) -> u128 {
        indices(mask).fold(0u128, |a, i| a.wrapping_add(self.fracs[i].value))
    }
}

fn indices(mask: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |i| mask >> i & 1 == 1)
}

#[derive(Default)]
struct Tally {
    max_center: u128,
    worst: u64,
    checked: u64,
    uncertain: u64,
    failures: u64,
}

impl Tally {
    fn record(&mut self, mask: u64, value: u128, outcome: Certainty) {
        let d = value.min(value.wrapping_neg());
        if d > self.max_center || self.checked == 0 {
            self.max_center = d;
            self.worst = mask;
        }
        self.checked += 1;
        match outcome {
            Certainty::True => {}
            Certainty::False => self.failures += 1,
            Certainty::Uncertain => self.uncertain += 1,
        }
    }

    fn report(self, seq: &FsSequence, total: u64, exhaustive: bool) -> FsReport {
        FsReport {
            max_norm: self.max_center as f64 / 2f64.powi(128),
            worst_subset: indices(self.worst).collect(),
            bound: seq.sum_bound().to_f64(),
            checked: self.checked,
            total,
            exhaustive,
            uncertain: self.uncertain,
            failures: self.failures,
            pass: self.failures == 0 && self.uncertain == 0,
        }
    }
}

/// Checks every nonempty subset sum against `eps·(1 - 2^-K)`.
///
/// Sums are walked in Gray-code order so each step adds or removes a single
/// element.
pub fn verify_fs(seq: &FsSequence, beta: &CertifiedReal) -> Result<FsReport> {
    let k = seq.k();
    if k > EXHAUSTIVE_LIMIT {
        return Err(Error::ExhaustiveLimitExceeded { k, limit: EXHAUSTIVE_LIMIT });
    }
    let checker = Checker::new(seq, beta)?;
    let total = (1u64 << k) - 1;
    let mut tally = Tally::default();
    let mut value = 0u128;
    for i in 1..=total {
        let bit = i.trailing_zeros() as usize;
        let gray = i ^ (i >> 1);
        if gray >> bit & 1 == 1 {
            value = value.wrapping_add(checker.fracs[bit].value);
        } else {
            value = value.wrapping_sub(checker.fracs[bit].value);
        }
        let outcome = checker.decide(gray, value);
        tally.record(gray, value, outcome);
    }
    Ok(tally.report(seq, total, true))
}

/// Checks `samples` seeded random nonempty subsets; for long sequences.
pub fn verify_fs_sampled(seq: &FsSequence, beta: &CertifiedReal, samples: u64, seed: u64) -> Result<FsReport> {
    let k = seq.k();
    if k > 64 {
        return Err(Error::Precondition("sampled verification supports at most 64 elements".into()));
    }
    let checker = Checker::new(seq, beta)?;
    let total = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
    let mut tally = Tally::default();
    if k == 0 {
        return Ok(tally.report(seq, 0, false));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let mask = rng.gen_range(1..=total);
        let value = checker.sum_of(mask);
        let outcome = checker.decide(mask, value);
        tally.record(mask, value, outcome);
    }
    Ok(tally.report(seq, total, false))
}

/// Subset sums used as shifts: all of them when there are at most `budget`,
/// otherwise `samples` seeded draws. Each entry is `(mask, sum)`.
pub fn fs_shifts(elements: &[u128], budget: u64, samples: usize, seed: u64) -> (Vec<(u64, u128)>, bool) {
    let k = elements.len();
    if k == 0 {
        return (Vec::new(), false);
    }
    let total = if k >= 64 { u64::MAX } else { (1u64 << k) - 1 };
    let sum = |mask: u64| indices(mask).map(|i| elements[i]).sum::<u128>();
    if total <= budget {
        return ((1..=total).map(|m| (m, sum(m))).collect(), false);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut masks: Vec<u64> = Vec::with_capacity(samples);
    while masks.len() < samples {
        let m = rng.gen_range(1..=total);
        if !masks.contains(&m) {
            masks.push(m);
        }
    }
    (masks.into_iter().map(|m| (m, sum(m))).collect(), true)
}
