//! Exponential sums along polynomial orbits, the return set `X_ε`, and the
//! polynomial version of the diagonal-shift certificate.
//!
//! For a family `P_1..P_f` and a frequency `β` the orbit is
//! `v(n) = ({βP_1(n)}, ..., {βP_f(n)})` in `T^f`. It equidistributes on the
//! subtorus `H` cut out by the relation lattice, so the set of `h` with every
//! coordinate within `ε` of zero has density about `m_H((-ε, ε)^f ∩ H)`.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{exact_box_measure, haar_box_measure, relation_lattice, subtorus_param, IntPolynomial, SubtorusH};
use crate::numeric::{rational_to_frac128, Certainty, CertifiedReal, FixedThreshold, Frac128, Threshold};
use crate::torus::{
    count_shifted, find_dense_interval, plan_shift, BoxColoring, PlanParams, ShiftCounts, TorusPartitionSpec, EPS_RULE,
};

/// Current version of the polynomial certificate JSON layout.
pub const POLY_SCHEMA_VERSION: u32 = 1;

const CHUNK: u64 = 1 << 13;

/// The multiplier `β` of an exponential sum: a certified real or an exact
/// rational override.
#[derive(Debug, Clone)]
pub enum Frequency {
    Real(CertifiedReal),
    Rational { num: i128, den: i128 },
}

impl Frequency {
    fn frac(&self, q: &BigInt) -> Frac128 {
        match self {
            Frequency::Real(b) => match q.to_i128() {
                Some(n) => b.kernel(0).mul(n),
                None => b.kernel(0).mul_big(q),
            },
            Frequency::Rational { num, den } => rational_to_frac128(&(q * BigInt::from(*num)), &BigInt::from(*den)),
        }
    }
}

/// `Q(n)` for coefficients `c_1..c_d` (no constant term).
fn eval_coeffs(coeffs: &[BigInt], n: u64) -> BigInt {
    let n = BigInt::from(n);
    coeffs.iter().rev().fold(BigInt::zero(), |acc, c| acc * &n + c) * n
}

/// `(1/N) Σ_{n=1}^{N} e^{2πi βQ(n)}` for `Q` given by `c_1..c_d`.
///
/// An identically zero `Q` returns exactly `1`. Chunks are summed in a fixed
/// order, so the result does not depend on the thread count.
pub fn weyl_sum(beta: &Frequency, q: &[BigInt], n: u64) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::Precondition("N must be at least 1".into()));
    }
    if q.iter().all(Zero::is_zero) {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let small: Option<Vec<i128>> = q.iter().map(ToPrimitive::to_i128).collect();
    let chunks: Vec<Complex64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK + 1;
            let hi = (lo + CHUNK - 1).min(n);
            (lo..=hi)
                .map(|x| {
                    let value = small
                        .as_deref()
                        .and_then(|cs| eval_i128(cs, x as i128))
                        .map(BigInt::from)
                        .unwrap_or_else(|| eval_coeffs(q, x));
                    Complex64::from_polar(1.0, beta.frac(&value).angle())
                })
                .sum::<Complex64>()
        })
        .collect();
    let total: Complex64 = chunks.into_iter().sum();
    Ok(total / n as f64)
}

fn eval_i128(coeffs: &[i128], n: i128) -> Option<i128> {
    let mut acc: i128 = 0;
    for &c in coeffs.iter().rev() {
        acc = acc.checked_mul(n)?.checked_add(c)?;
    }
    acc.checked_mul(n)
}

/// How a trial vector `m` relates to the relation lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharacterClass {
    /// `m = 0`; excluded.
    Trivial,
    /// `m ∈ R`: the character is trivial on `H` and the average is `1`.
    Relation,
    /// `m ∉ R`: the average should tend to `0`.
    Generic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquidistRow {
    pub m: Vec<i64>,
    pub class: CharacterClass,
    /// `|S_N|`, absent for the trivial character.
    pub abs_sum: Option<f64>,
}

/// `|S_N|` for each trial `m` against the character `χ_m` on `H`.
pub fn equidist_on_h(beta: &Frequency, polys: &[IntPolynomial], trial_ms: &[Vec<i64>], n: u64) -> Result<Vec<EquidistRow>> {
    let lattice = relation_lattice(polys)?;
    trial_ms
        .iter()
        .map(|m| {
            if m.len() != polys.len() {
                return Err(Error::Precondition(format!("trial vector {m:?} must have {} entries", polys.len())));
            }
            if m.iter().all(|&x| x == 0) {
                return Ok(EquidistRow { m: m.clone(), class: CharacterClass::Trivial, abs_sum: None });
            }
            let wide: Vec<i128> = m.iter().map(|&x| x as i128).collect();
            let class = if lattice.contains(&wide) { CharacterClass::Relation } else { CharacterClass::Generic };
            let q = IntPolynomial::combination(polys, m);
            let s = weyl_sum(beta, &q, n)?;
            Ok(EquidistRow { m: m.clone(), class, abs_sum: Some(s.norm()) })
        })
        .collect()
}

/// One line of the prefix sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixRow {
    pub prefix_n: u64,
    pub hits: u64,
    pub density: f64,
    pub predicted: Option<f64>,
    /// 95% binomial half-width of `density`.
    pub ci: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XEpsReport {
    pub eps: Threshold,
    pub n: u64,
    pub hit_count: u64,
    /// The first hits, at most `XEpsOptions::hit_cap` of them.
    pub hits: Vec<u64>,
    pub empirical_density: f64,
    /// Minimum density over the dyadic prefixes in `sweep`.
    pub prefix_min: f64,
    /// `m_H((-ε, ε)^f ∩ H)`, exact when available, otherwise Monte Carlo.
    pub predicted: Option<f64>,
    pub predicted_ci: Option<f64>,
    pub predicted_exact: bool,
    pub uncertain_count: u64,
    pub sweep: Vec<PrefixRow>,
}

impl XEpsReport {
    /// CSV with columns `prefix_N,hits,density,predicted,ci`.
    pub fn sweep_csv(&self) -> String {
        let mut out = String::from("prefix_N,hits,density,predicted,ci\n");
        for row in &self.sweep {
            let pred = row.predicted.map(|p| p.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{},{}\n", row.prefix_n, row.hits, row.density, pred, row.ci));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct XEpsOptions {
    pub hit_cap: usize,
    /// Monte-Carlo budget for the prediction when no exact value exists;
    /// `0` skips the prediction.
    pub measure_samples: u64,
    pub seed: u64,
    /// Smallest prefix reported in the sweep.
    pub min_prefix: u64,
}

impl Default for XEpsOptions {
    fn default() -> Self {
        XEpsOptions { hit_cap: 1000, measure_samples: 1 << 20, seed: 0, min_prefix: 1024 }
    }
}

fn check_family(polys: &[IntPolynomial]) -> Result<()> {
    if polys.is_empty() {
        return Err(Error::Precondition("empty polynomial family".into()));
    }
    Ok(())
}

/// Certified `max_i ||βP_i(h)|| < ε`, escalating precision on ties.
pub fn is_return_time(beta: &CertifiedReal, polys: &[IntPolynomial], h: u64, eps: &FixedThreshold) -> Certainty {
    let values: Vec<BigInt> = polys.iter().map(|p| p.eval_big(&BigInt::from(h))).collect();
    beta.decide(|b, level| {
        let kern = b.kernel(level);
        values.iter().fold(Certainty::True, |acc, v| {
            if acc == Certainty::False {
                return acc;
            }
            let f = match v.to_i128() {
                Some(x) => kern.mul(x),
                None => kern.mul_big(v),
            };
            acc.and(f.norm_lt(eps))
        })
    })
    .0
}

/// Fast first pass at level 0; `None` means undecided there.
fn return_time_fast(kern: &crate::numeric::FracKernel, coeffs: &[Vec<i128>], h: u64, eps: &FixedThreshold) -> Certainty {
    let mut acc = Certainty::True;
    for cs in coeffs {
        let f = match eval_i128(cs, h as i128) {
            Some(v) => kern.mul(v),
            None => return Certainty::Uncertain,
        };
        acc = acc.and(f.norm_lt(eps));
        if acc == Certainty::False {
            return acc;
        }
    }
    acc
}

/// All `h in 1..=n` that are certified return times, plus the undecided count.
pub fn return_times(beta: &CertifiedReal, polys: &[IntPolynomial], eps: &Threshold, n: u64) -> Result<(Vec<u64>, u64)> {
    check_family(polys)?;
    if !eps.below_half() {
        return Err(Error::Precondition("eps must lie in (0, 1/2)".into()));
    }
    let ft = FixedThreshold::new(eps);
    let coeffs: Vec<Vec<i128>> = polys.iter().map(|p| p.coeffs().iter().map(|&c| c as i128).collect()).collect();
    let kern = beta.kernel(0);
    let parts: Vec<(Vec<u64>, u64)> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK + 1;
            let hi = (lo + CHUNK - 1).min(n);
            let mut hits = Vec::new();
            let mut uncertain = 0;
            for h in lo..=hi {
                let outcome = match return_time_fast(kern, &coeffs, h, &ft) {
                    Certainty::Uncertain => is_return_time(beta, polys, h, &ft),
                    other => other,
                };
                match outcome {
                    Certainty::True => hits.push(h),
                    Certainty::False => {}
                    Certainty::Uncertain => uncertain += 1,
                }
            }
            (hits, uncertain)
        })
        .collect();
    let uncertain = parts.iter().map(|p| p.1).sum();
    Ok((parts.into_iter().flat_map(|p| p.0).collect(), uncertain))
}

/// `m_H((-ε, ε)^f ∩ H)`: exact when `H` is connected of dimension at most 3,
/// otherwise a Monte-Carlo estimate with its half-width.
pub fn predicted_density(h: &SubtorusH, eps: f64, samples: u64, seed: u64) -> Result<Option<(f64, f64, bool)>> {
    if let Some(v) = exact_box_measure(h, eps) {
        return Ok(Some((v, 0.0, true)));
    }
    if samples == 0 {
        return Ok(None);
    }
    let est = haar_box_measure(h, eps, samples, seed)?;
    Ok(Some((est.estimate, est.half_width, false)))
}

/// Scans `h = 1..=n` for `max_i ||βP_i(h)|| < ε` and compares the hit
/// density with the Haar prediction on `H`.
///
/// Undecided `h` are never hits; they are counted in `uncertain_count`.
pub fn find_x_eps(
    beta: &CertifiedReal,
    polys: &[IntPolynomial],
    eps: &Threshold,
    n: u64,
    opts: XEpsOptions,
) -> Result<XEpsReport> {
    if n == 0 {
        return Err(Error::Precondition("N must be at least 1".into()));
    }
    let (hits, uncertain_count) = return_times(beta, polys, eps, n)?;
    let eps_f = eps.to_f64();
    let prediction = if opts.measure_samples == 0 {
        exact_box_measure(&subtorus_param(&relation_lattice(polys)?)?, eps_f).map(|v| (v, 0.0, true))
    } else {
        predicted_density(&subtorus_param(&relation_lattice(polys)?)?, eps_f, opts.measure_samples, opts.seed)?
    };
    let mut prefixes = Vec::new();
    let mut p = n;
    loop {
        prefixes.push(p);
        if p / 2 < opts.min_prefix.max(1) {
            break;
        }
        p /= 2;
    }
    prefixes.reverse();
    let sweep: Vec<PrefixRow> = prefixes
        .iter()
        .map(|&pn| {
            let count = hits.partition_point(|&h| h <= pn) as u64;
            let density = count as f64 / pn as f64;
            PrefixRow {
                prefix_n: pn,
                hits: count,
                density,
                predicted: prediction.map(|x| x.0),
                ci: 1.96 * (density * (1.0 - density) / pn as f64).sqrt(),
            }
        })
        .collect();
    let prefix_min = sweep.iter().map(|r| r.density).fold(f64::INFINITY, f64::min);
    Ok(XEpsReport {
        eps: eps.clone(),
        n,
        hit_count: hits.len() as u64,
        empirical_density: hits.len() as f64 / n as f64,
        hits: hits.into_iter().take(opts.hit_cap).collect(),
        prefix_min,
        predicted: prediction.map(|x| x.0),
        predicted_ci: prediction.map(|x| x.1),
        predicted_exact: prediction.is_some_and(|x| x.2),
        uncertain_count,
        sweep,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyParams {
    pub delta_grid: f64,
    pub plan: PlanParams,
    /// Horizon for the `X_ε` scan.
    pub scan_n: u64,
    /// Number of return times `h` to certify.
    pub h_count: usize,
}

impl Default for PolyParams {
    fn default() -> Self {
        PolyParams { delta_grid: 0.01, plan: PlanParams::default(), scan_n: 100_000, h_count: 4 }
    }
}

/// Counts for the shift `x0 + P_j(h)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyShift {
    pub h: u64,
    /// 0-based index into the family.
    pub j: usize,
    pub shift: u128,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyCertificate {
    pub schema_version: u32,
    pub k: usize,
    pub r: u32,
    pub t: u32,
    pub box_side: u64,
    pub alphas: Vec<String>,
    pub polys: Vec<IntPolynomial>,
    pub m: u32,
    pub interval: (f64, f64),
    pub interval_fixed: (u128, u128),
    pub j_star: u32,
    pub x0: u64,
    pub eps: Threshold,
    pub eps_rule: String,
    pub scan_n: u64,
    pub return_times_found: u64,
    pub shifts: Vec<PolyShift>,
    pub uncertain: u64,
    pub valid: bool,
}

impl PolyCertificate {
    /// `(h, j, i)` with zero count.
    pub fn failures(&self) -> Vec<(u64, usize, u32)> {
        self.shifts
            .iter()
            .flat_map(|s| s.counts.iter().enumerate().filter(|(_, &c)| c == 0).map(move |(i, _)| (s.h, s.j, i as u32 + 1)))
            .collect()
    }
}

/// Certifies that every piece `E_i` meets `F_m + (x0 + P_j(h))·1` inside the
/// box for several return times `h` and every `j`.
pub fn poly_raimi_certify(
    coloring: &dyn BoxColoring,
    spec: &TorusPartitionSpec,
    polys: &[IntPolynomial],
    params: &PolyParams,
) -> Result<PolyCertificate> {
    let cert = poly_raimi_certificate(coloring, spec, polys, params)?;
    if !cert.valid {
        return Err(Error::CertificateFailed(format!("zero counts at (h, j, i) = {:?}", cert.failures())));
    }
    Ok(cert)
}

/// Like [`poly_raimi_certify`] but returns the certificate even when it fails.
pub fn poly_raimi_certificate(
    coloring: &dyn BoxColoring,
    spec: &TorusPartitionSpec,
    polys: &[IntPolynomial],
    params: &PolyParams,
) -> Result<PolyCertificate> {
    check_family(polys)?;
    if let Some(p) = polys.iter().find(|p| p.leading_coefficient() < 0) {
        return Err(Error::Precondition(format!("leading coefficient of {p} must be positive")));
    }
    let dense = find_dense_interval(coloring, spec, params.delta_grid)?;
    let plan = plan_shift(&dense, &spec.beta, params.plan)?;
    let (hits, _) = return_times(&spec.beta, polys, &plan.eps, params.scan_n)?;
    let return_times_found = hits.len() as u64;
    let mut selected = Vec::new();
    for &h in &hits {
        if selected.len() == params.h_count {
            break;
        }
        let values: Option<Vec<u128>> = polys
            .iter()
            .map(|p| p.eval_i128(h as i128).and_then(|v| u128::try_from(v).ok()).and_then(|v| v.checked_add(plan.x0 as u128)))
            .collect();
        if let Some(v) = values {
            selected.push((h, v));
        }
    }
    let flat: Vec<u128> = selected.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    let (counts, uncertain) = count_shifted(coloring, spec, dense.m, &flat)?;
    let f = polys.len();
    let shifts: Vec<PolyShift> = counts
        .into_iter()
        .enumerate()
        .map(|(idx, ShiftCounts { h: shift, counts })| PolyShift { h: selected[idx / f].0, j: idx % f, shift, counts })
        .collect();
    let valid = !shifts.is_empty() && shifts.iter().all(|s| s.counts.iter().all(|&c| c > 0));
    Ok(PolyCertificate {
        schema_version: POLY_SCHEMA_VERSION,
        k: spec.k,
        r: spec.r,
        t: coloring.colors(),
        box_side: coloring.side(),
        alphas: spec.alpha_descriptors(),
        polys: polys.to_vec(),
        m: dense.m,
        interval: dense.bounds_f64(),
        interval_fixed: (dense.x, dense.y),
        j_star: plan.j_star,
        x0: plan.x0,
        eps: plan.eps,
        eps_rule: EPS_RULE.into(),
        scan_n: params.scan_n,
        return_times_found,
        shifts,
        uncertain,
        valid,
    })
}
