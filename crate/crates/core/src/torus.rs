//! The band/tile partition of `N^k` and diagonal-shift certificates.
//!
//! A point `a` of `N^k` is sent to `φ(a) = {Σ α_m a_m}` in `(0, 1)`. The unit
//! interval is cut into bands `S_j = (1 - 2^-j, 1 - 2^-(j+1)]`, each band into
//! `r` equal tiles, and `a` gets the index of its tile. Shifting `a` by `h·1`
//! rotates `φ(a)` by `{hβ}` with `β = Σ α_m`, which is what makes the
//! partition unavoidable.
//!
//! All positions on the circle are 128-bit fractions ([`Frac128`]).

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fs::{build_fs, fs_shifts, FsSequence};
use crate::numeric::{Certainty, CertifiedReal, Frac128, PreciseReal, Precision, RealConst, Threshold};

/// Current version of the certificate JSON layout.
pub const HD_SCHEMA_VERSION: u32 = 1;

/// A finite coloring of the box `[1, M]^k` with colors `1..=t`.
pub trait BoxColoring: Sync {
    fn dim(&self) -> usize;
    fn side(&self) -> u64;
    fn colors(&self) -> u32;
    /// Color of `a`, every coordinate in `1..=side`.
    fn color(&self, a: &[u64]) -> u32;
}

/// Frequencies `α_1..α_k`, their sum `β`, and the piece count `r`.
#[derive(Debug, Clone)]
pub struct TorusPartitionSpec {
    pub r: u32,
    pub k: usize,
    pub alphas: Vec<CertifiedReal>,
    pub beta: CertifiedReal,
}

impl TorusPartitionSpec {
    /// `α_i = log2 p_{i+1}`: `log2 3, log2 5, log2 7, ...`.
    pub fn new(k: usize, r: u32, precision: Precision) -> Result<Self> {
        Self::with_alphas(RealConst::log2_primes(k), r, precision)
    }

    pub fn with_alphas(alphas: Vec<RealConst>, r: u32, precision: Precision) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::Precondition("dimension k must be at least 1".into()));
        }
        if r < 1 {
            return Err(Error::Precondition("piece count r must be at least 1".into()));
        }
        if let Some(a) = alphas.iter().find(|a| a.is_rational()) {
            return Err(Error::Precondition(format!("frequency {a} is rational")));
        }
        let beta = if alphas.len() == 1 { alphas[0].clone() } else { RealConst::Sum(alphas.clone()) };
        Ok(TorusPartitionSpec {
            r,
            k: alphas.len(),
            alphas: alphas.into_iter().map(|a| CertifiedReal::new(a, precision)).collect(),
            beta: CertifiedReal::new(beta, precision),
        })
    }

    pub fn alpha_descriptors(&self) -> Vec<String> {
        self.alphas.iter().map(|a| a.constant().to_string()).collect()
    }

    fn levels(&self) -> u32 {
        self.beta.levels()
    }

    /// `φ(a) + {hβ}` at escalation `level`.
    fn phi_shifted_at(&self, a: &[u64], h: &BigInt, level: u32) -> Frac128 {
        let base = a
            .iter()
            .zip(&self.alphas)
            .fold(Frac128::ZERO, |acc, (&x, alpha)| acc.add(alpha.kernel(level).mul(x as i128)));
        if h == &BigInt::from(0) {
            base
        } else {
            base.add(self.beta.kernel(level).mul_big(h))
        }
    }

    /// Tile of `a + h·1` with escalation; `None` if still undecided.
    fn tile_shifted(&self, a: &[u64], h: &BigInt) -> Option<BandTile> {
        (0..self.levels()).find_map(|level| certified_tile(self.phi_shifted_at(a, h, level), self.r))
    }
}

/// `φ(a)` as a certified fraction.
pub fn phi(spec: &TorusPartitionSpec, a: &[u64]) -> Result<Frac128> {
    check_point(spec, a)?;
    let f = spec.phi_shifted_at(a, &BigInt::from(0), 0);
    if f.value <= f.err || f.value.wrapping_neg() <= f.err {
        return Err(Error::PrecisionExhausted("φ(a) too close to 0 to certify".into()));
    }
    Ok(f)
}

/// `φ(a)` as an arbitrary-precision real, for reporting and cross-checks.
pub fn phi_precise(spec: &TorusPartitionSpec, a: &[u64]) -> Result<PreciseReal> {
    check_point(spec, a)?;
    let bits = spec.beta.precision().bits;
    let sum = a
        .iter()
        .zip(&spec.alphas)
        .map(|(&x, alpha)| alpha.value().mul_int(&BigInt::from(x)))
        .fold(PreciseReal::from_int(0, bits), |acc, v| acc.add(&v));
    Ok(sum.frac_part())
}

fn check_point(spec: &TorusPartitionSpec, a: &[u64]) -> Result<()> {
    if a.len() != spec.k {
        return Err(Error::Precondition(format!("point has {} coordinates, expected {}", a.len(), spec.k)));
    }
    if a.contains(&0) {
        return Err(Error::Precondition("coordinates start at 1".into()));
    }
    Ok(())
}

/// Tile index `i` (1-based) of `a`.
pub fn color_point(spec: &TorusPartitionSpec, a: &[u64]) -> Result<u32> {
    check_point(spec, a)?;
    spec.tile_shifted(a, &BigInt::from(0))
        .map(|t| t.i)
        .ok_or_else(|| Error::PrecisionExhausted(format!("tile of {a:?} undecided")))
}

/// Tile `T_{j,i}` of band `S_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BandTile {
    pub j: u32,
    pub i: u32,
    pub r: u32,
}

impl BandTile {
    /// `a_j = 1 - 2^-j`.
    pub fn a_j(&self) -> f64 {
        1.0 - 2f64.powi(-(self.j as i32))
    }

    /// `w_j = |S_j| = 2^-(j+1)`.
    pub fn w_j(&self) -> f64 {
        2f64.powi(-(self.j as i32 + 1))
    }

    pub fn tau_j(&self) -> f64 {
        self.w_j() / self.r as f64
    }

    /// `(a_j + (i-1)τ_j, a_j + iτ_j]` in floating point.
    pub fn bounds(&self) -> (f64, f64) {
        let (a, tau) = (self.a_j(), self.tau_j());
        (a + (self.i - 1) as f64 * tau, a + self.i as f64 * tau)
    }
}

/// Left end `a_j` of band `j` and its width `w_j`, in units of `2^-128`.
///
/// Band 127 reaches the last representable fraction; later bands are empty.
pub fn band_bounds(j: u32) -> (u128, u128) {
    assert!(j < 128, "band index beyond 128-bit resolution");
    let a = if j == 0 { 0 } else { (1u128 << (128 - j)).wrapping_neg() };
    (a, 1u128 << (127 - j))
}

/// The tile holding `u ∈ (0, 1)`; `None` for `u = 0`.
pub fn tile_of(u: u128, r: u32) -> Option<BandTile> {
    if u == 0 || r == 0 {
        return None;
    }
    // u ∈ S_j  ⟺  2^-(j+1) <= 1 - u < 2^-j.
    let v = u.wrapping_neg();
    let j = v.leading_zeros();
    let (a, _) = band_bounds(j);
    let d = u.wrapping_sub(a);
    // i = ceil(d·r / w) with d ∈ (0, w], w = 2^(127-j).
    let s = 127 - j;
    let i = ceil_mul_shift(d, r as u64, s);
    debug_assert!((1..=r as u128).contains(&i));
    Some(BandTile { j, i: i as u32, r })
}

/// `ceil(d·m / 2^s)` without overflow.
fn ceil_mul_shift(d: u128, m: u64, s: u32) -> u128 {
    let lo = (d as u64 as u128) * m as u128;
    let hi = (d >> 64) * m as u128;
    // d·m = hi·2^64 + lo, a 192-bit value.
    let total_lo = lo.wrapping_add(hi << 64);
    let carry = (total_lo < lo) as u128;
    let total_hi = (hi >> 64) + carry;
    let (q, exact) = if s == 0 {
        (total_lo, true)
    } else if s < 128 {
        let q = (total_lo >> s) | (total_hi << (128 - s));
        (q, total_lo & ((1u128 << s) - 1) == 0)
    } else {
        (total_hi >> (s - 128), total_lo == 0 && total_hi & ((1u128 << (s - 128)) - 1) == 0)
    };
    if exact {
        q
    } else {
        q + 1
    }
}

/// Tile of a certified fraction, if the whole enclosure lies in one tile.
pub fn certified_tile(f: Frac128, r: u32) -> Option<BandTile> {
    let lo = f.value.checked_sub(f.err)?;
    let hi = f.value.checked_add(f.err)?;
    let a = tile_of(lo, r)?;
    let b = tile_of(hi, r)?;
    (a == b).then_some(a)
}

/// Tile `(j, i)` of every point of `[lo, hi]` computed on the top 64 bits,
/// or `None` when that resolution cannot separate the tiles involved.
#[inline]
fn coarse_tile(f: Frac128, r: u32) -> Option<(u32, u32)> {
    let lo = f.value.checked_sub(f.err)? >> 64;
    let hi = (f.value.checked_add(f.err)? >> 64).checked_add(1)?;
    if lo == 0 || hi > u64::MAX as u128 {
        return None;
    }
    let tile = |x: u64| -> (u32, u32) {
        let j = x.wrapping_neg().leading_zeros();
        let a = if j == 0 { 0 } else { (1u64 << (64 - j)).wrapping_neg() };
        let s = 63 - j;
        let i = ((x - a) as u128 * r as u128 + (1u128 << s) - 1) >> s;
        (j, i as u32)
    };
    let t = tile(lo as u64);
    (t.0 < 63 && t == tile(hi as u64)).then_some(t)
}

/// Per-axis tables `{α_m x}` for `x = 1..=M`, built once per box.
struct PhiTables {
    axes: Vec<Vec<Frac128>>,
}

impl PhiTables {
    fn new(spec: &TorusPartitionSpec, side: u64) -> Self {
        let axes = spec
            .alphas
            .iter()
            .map(|alpha| {
                let kern = alpha.kernel(0);
                (1..=side).map(|x| kern.mul(x as i128)).collect()
            })
            .collect();
        PhiTables { axes }
    }

    #[inline]
    fn prefix(&self, a: &[u64]) -> Frac128 {
        a.iter().zip(&self.axes).fold(Frac128::ZERO, |acc, (&x, t)| acc.add(t[(x - 1) as usize]))
    }
}

/// Calls `visit(a, φ(a))` for every point of the box, rows in parallel.
///
/// `init` builds per-worker state and `merge` combines states.
fn scan_box<S, I, V, Mg>(spec: &TorusPartitionSpec, coloring: &dyn BoxColoring, init: I, visit: V, merge: Mg) -> S
where
    S: Send,
    I: Fn() -> S + Sync + Send,
    V: Fn(&mut S, &[u64], u32, Frac128) + Sync + Send,
    Mg: Fn(S, S) -> S + Sync + Send,
{
    let k = spec.k;
    let side = coloring.side();
    let tables = PhiTables::new(spec, side);
    let rows = side.pow(k as u32 - 1);
    (0..rows)
        .into_par_iter()
        .fold(&init, |mut state, row| {
            let mut a = vec![1u64; k];
            let mut rest = row;
            for c in a.iter_mut().take(k - 1) {
                *c = rest % side + 1;
                rest /= side;
            }
            let base = tables.prefix(&a[..k - 1]);
            let last = &tables.axes[k - 1];
            for x in 1..=side {
                a[k - 1] = x;
                let f = base.add(last[(x - 1) as usize]);
                let c = coloring.color(&a);
                visit(&mut state, &a, c, f);
            }
            state
        })
        .reduce(&init, merge)
}

/// A color class and an interval on which its `φ`-image is dense at the
/// chosen resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseInterval {
    pub m: u32,
    /// Endpoints of `J = (x, y)` in units of `2^-128`.
    pub x: u128,
    pub y: u128,
    pub delta_grid: f64,
    /// Number of grid cells of width `δ_grid/2` making up `J`.
    pub cells: usize,
}

impl DenseInterval {
    pub fn len(&self) -> u128 {
        self.y - self.x
    }

    pub fn is_empty(&self) -> bool {
        self.y <= self.x
    }

    pub fn bounds_f64(&self) -> (f64, f64) {
        (self.x as f64 / 2f64.powi(128), self.y as f64 / 2f64.powi(128))
    }
}

/// Finds a color class `m` and the longest interval `J` such that every
/// subinterval of `J` of length `δ_grid` contains some `φ(a)`, `a ∈ F_m`.
///
/// `(0, 1)` is cut into cells of width `δ_grid/2`; a run of cells each hit by
/// `F_m` has this property because any interval of length `δ_grid` inside the
/// run covers a whole cell. Ties go to the longer run, then the smaller `m`.
pub fn find_dense_interval(coloring: &dyn BoxColoring, spec: &TorusPartitionSpec, delta_grid: f64) -> Result<DenseInterval> {
    if !(delta_grid > 0.0 && delta_grid < 1.0 / 3.0) {
        return Err(Error::Precondition(format!("delta_grid must lie in (0, 1/3), got {delta_grid}")));
    }
    check_coloring(coloring, spec)?;
    // A multiple of 2^-64, so cells are found with 64-bit division.
    let width64 = (delta_grid / 2.0 * 2f64.powi(64)) as u64;
    let width = (width64 as u128) << 64;
    let cells = (u64::MAX / width64 + 1) as usize;
    let t = coloring.colors() as usize;
    let words = cells.div_ceil(64);
    let occupancy = scan_box(
        spec,
        coloring,
        || vec![0u64; t * words],
        |occ, _, c, f| {
            let (Some(lo), Some(hi)) = (f.value.checked_sub(f.err), f.value.checked_add(f.err)) else { return };
            let cell = ((lo >> 64) as u64 / width64) as usize;
            if cell == ((hi >> 64) as u64 / width64) as usize {
                let idx = (c as usize - 1) * words + cell / 64;
                occ[idx] |= 1 << (cell % 64);
            }
        },
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x |= y);
            a
        },
    );
    let mut best: Option<(usize, usize, u32)> = None;
    for m in 1..=t as u32 {
        let occ = &occupancy[(m as usize - 1) * words..m as usize * words];
        let hit = |c: usize| occ[c / 64] >> (c % 64) & 1 == 1;
        let mut c = 0;
        while c < cells {
            if !hit(c) {
                c += 1;
                continue;
            }
            let start = c;
            while c < cells && hit(c) {
                c += 1;
            }
            let len = c - start;
            if best.is_none_or(|(_, l, _)| len > l) {
                best = Some((start, len, m));
            }
        }
    }
    let min_cells = 6;
    match best {
        Some((start, len, m)) if len >= min_cells => {
            let x = start as u128 * width;
            let y = ((start + len) as u128).checked_mul(width).unwrap_or(u128::MAX).min(u128::MAX);
            Ok(DenseInterval { m, x, y, delta_grid, cells: len })
        }
        _ => Err(Error::NoDenseInterval { delta_grid, min_len: 3.0 * delta_grid }),
    }
}

fn check_coloring(coloring: &dyn BoxColoring, spec: &TorusPartitionSpec) -> Result<()> {
    if coloring.dim() != spec.k {
        return Err(Error::Precondition(format!("coloring has dimension {}, partition {}", coloring.dim(), spec.k)));
    }
    if coloring.side() == 0 || coloring.colors() == 0 {
        return Err(Error::Precondition("empty box or color set".into()));
    }
    Ok(())
}

/// An open arc `(start, start + len)` of the circle, in units of `2^-128`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    pub start: u128,
    pub len: u128,
}

impl Arc {
    pub fn shifted(self, s: u128) -> Arc {
        Arc { start: self.start.wrapping_add(s), len: self.len }
    }

    /// `A_{-ε}`: points farther than `ε` from the boundary.
    pub fn shrunk(self, eps: u128) -> Option<Arc> {
        (self.len > 2 * eps).then(|| Arc { start: self.start.wrapping_add(eps), len: self.len - 2 * eps })
    }

    /// `A_{+ε}`, capped just short of the full circle.
    pub fn grown(self, eps: u128) -> Arc {
        let len = self.len.saturating_add(eps.saturating_mul(2));
        Arc { start: self.start.wrapping_sub(eps), len }
    }

    /// Whether `other ⊆ self`.
    pub fn contains_arc(&self, other: &Arc) -> bool {
        if other.len == 0 {
            return true;
        }
        if self.len == u128::MAX {
            return true;
        }
        let offset = other.start.wrapping_sub(self.start);
        offset.checked_add(other.len).is_some_and(|end| end <= self.len)
    }
}

/// The sandwich `(A+σ)_{-ε} ⊆ A+γ ⊆ (A+σ)_{+ε}` for `||γ - σ|| < ε`.
pub fn sandwich_holds(a: Arc, sigma: u128, gamma: u128, eps: u128) -> bool {
    let inner = a.shifted(sigma).shrunk(eps);
    let middle = a.shifted(gamma);
    let outer = a.shifted(sigma).grown(eps);
    inner.is_none_or(|i| middle.contains_arc(&i)) && outer.contains_arc(&middle)
}

/// Output of [`plan_shift`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftPlan {
    pub j_star: u32,
    pub x0: u64,
    /// `{x0·β}` (center) in units of `2^-128`.
    pub sigma: u128,
    /// Certified distances from `S_{j*}` to the left and right ends of `J + σ`.
    pub margin_left: u128,
    pub margin_right: u128,
    /// `ε = min margin / 2`, an exact dyadic rational.
    pub eps: Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanParams {
    pub x0_max: u64,
    pub j_max: u32,
}

impl Default for PlanParams {
    fn default() -> Self {
        PlanParams { x0_max: 1_000_000, j_max: 100 }
    }
}

/// Picks the band `S_{j*}` and the base shift `x0` with `S_{j*} ⊂ (J+σ)_{-ε}`.
///
/// `j*` is the least `j` with `2^-(j+1) <= |J|/3`. The scan accepts the first
/// `x0` whose certified margins on both sides of `S_{j*}` inside `J + σ` are
/// at least `(|J| - |S_{j*}|)/4`, and sets `ε` to half the smaller margin.
pub fn plan_shift(j: &DenseInterval, beta: &CertifiedReal, params: PlanParams) -> Result<ShiftPlan> {
    let len = j.len();
    if len == 0 {
        return Err(Error::Precondition("empty interval".into()));
    }
    let third = len / 3;
    let j_star = (0..128u32.min(params.j_max + 1))
        .find(|&jj| (1u128 << (127 - jj)) <= third)
        .ok_or_else(|| Error::SearchExhausted(format!("no band with width <= |J|/3 up to j = {}", params.j_max)))?;
    let (s_start, sw) = band_bounds(j_star);
    let need = (len - sw) / 4;
    let kern = beta.kernel(0);
    for x0 in 1..=params.x0_max {
        let sigma = kern.mul(x0 as i128);
        let left = s_start.wrapping_sub(j.x.wrapping_add(sigma.value));
        let Some(right) = len.checked_sub(left).and_then(|v| v.checked_sub(sw)) else { continue };
        let (Some(l), Some(r)) = (left.checked_sub(sigma.err), right.checked_sub(sigma.err)) else { continue };
        if l >= need && r >= need {
            let eps_units = l.min(r) / 2;
            let eps = Threshold::new(BigInt::from(eps_units), BigInt::from(1u8) << 128u32)?;
            return Ok(ShiftPlan { j_star, x0, sigma: sigma.value, margin_left: l, margin_right: r, eps });
        }
    }
    Err(Error::SearchExhausted(format!("no x0 <= {} places S_{j_star} inside J + σ", params.x0_max)))
}

/// Counts of `(F_m + h·1) ∩ E_i` for one shift `h`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftCounts {
    pub h: u128,
    /// Per-piece counts, `counts[i-1]` for piece `i`.
    pub counts: Vec<u64>,
}

/// For every shift `h`, the number of `a ∈ F_m ∩ [1,M]^k` whose shifted
/// point `a + h·1` has color `i`, for each `i`.
///
/// The shifted point may leave the box; its color is computed from `φ`.
/// Returns the counts and the number of points left undecided at every
/// precision level (never counted).
pub fn count_shifted(
    coloring: &dyn BoxColoring,
    spec: &TorusPartitionSpec,
    m: u32,
    shifts: &[u128],
) -> Result<(Vec<ShiftCounts>, u64)> {
    check_coloring(coloring, spec)?;
    let r = spec.r as usize;
    let kern = spec.beta.kernel(0);
    let gammas: Vec<Frac128> = shifts
        .iter()
        .map(|&h| i128::try_from(h).map(|h| kern.mul(h)).map_err(|_| Error::Precondition("shift exceeds 127 bits".into())))
        .collect::<Result<_>>()?;
    let hs: Vec<BigInt> = shifts.iter().map(|&h| BigInt::from(h)).collect();
    let stride = r + 1;
    let flat = scan_box(
        spec,
        coloring,
        || vec![0u64; shifts.len() * stride],
        |acc, a, c, f| {
            if c != m {
                return;
            }
            for (s, g) in gammas.iter().enumerate() {
                let g = f.add(*g);
                let tile = coarse_tile(g, spec.r)
                    .map(|(_, i)| i)
                    .or_else(|| certified_tile(g, spec.r).map(|t| t.i))
                    .or_else(|| spec.tile_shifted(a, &hs[s]).map(|t| t.i));
                match tile {
                    Some(i) => acc[s * stride + i as usize - 1] += 1,
                    None => acc[s * stride + r] += 1,
                }
            }
        },
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        },
    );
    let mut uncertain = 0;
    let out = shifts
        .iter()
        .enumerate()
        .map(|(s, &h)| {
            uncertain += flat[s * stride + r];
            ShiftCounts { h, counts: flat[s * stride..s * stride + r].to_vec() }
        })
        .collect();
    Ok((out, uncertain))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HdParams {
    pub delta_grid: f64,
    /// Length of the FS sequence.
    pub fs_len: usize,
    /// Use every FS sum as a shift when there are at most this many.
    pub h_budget: u64,
    /// Number of seeded FS sums otherwise.
    pub h_samples: usize,
    pub seed: u64,
    pub plan: PlanParams,
}

impl Default for HdParams {
    fn default() -> Self {
        HdParams { delta_grid: 0.01, fs_len: 3, h_budget: 16, h_samples: 8, seed: 0, plan: PlanParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HdCertificate {
    pub schema_version: u32,
    pub k: usize,
    pub r: u32,
    pub t: u32,
    pub box_side: u64,
    pub alphas: Vec<String>,
    pub m: u32,
    /// `J = (x, y)` as decimals and as exact 128-bit fractions.
    pub interval: (f64, f64),
    pub interval_fixed: (u128, u128),
    pub delta_grid: f64,
    pub j_star: u32,
    pub x0: u64,
    pub sigma: f64,
    pub eps: Threshold,
    /// How `ε` was chosen.
    pub eps_rule: String,
    pub fs: FsSequence,
    pub h_sampled: bool,
    pub sample_seed: u64,
    pub sampled_h: Vec<ShiftCounts>,
    pub uncertain: u64,
    pub valid: bool,
}

impl HdCertificate {
    /// The `(h, i)` pairs with zero count.
    pub fn failures(&self) -> Vec<(u128, u32)> {
        self.sampled_h
            .iter()
            .flat_map(|s| s.counts.iter().enumerate().filter(|(_, &c)| c == 0).map(move |(i, _)| (s.h, i as u32 + 1)))
            .collect()
    }

    pub fn min_count(&self) -> u64 {
        self.sampled_h.iter().flat_map(|s| s.counts.iter().copied()).min().unwrap_or(0)
    }
}

pub(crate) const EPS_RULE: &str = "half_min_margin";

/// Runs the diagonal-shift pipeline on the box and certifies positivity.
///
/// Returns `CertificateFailed` (naming the failing shifts and pieces) when
/// some count is zero.
pub fn hd_certify(coloring: &dyn BoxColoring, spec: &TorusPartitionSpec, params: &HdParams) -> Result<HdCertificate> {
    let cert = hd_certificate(coloring, spec, params)?;
    if !cert.valid {
        return Err(Error::CertificateFailed(format!("zero counts at (h, i) = {:?}", cert.failures())));
    }
    Ok(cert)
}

/// Like [`hd_certify`] but returns the certificate even when it fails.
pub fn hd_certificate(coloring: &dyn BoxColoring, spec: &TorusPartitionSpec, params: &HdParams) -> Result<HdCertificate> {
    let dense = find_dense_interval(coloring, spec, params.delta_grid)?;
    let plan = plan_shift(&dense, &spec.beta, params.plan)?;
    let fs = build_fs(&spec.beta, &plan.eps, params.fs_len)?;
    let (sums, h_sampled) = fs_shifts(&fs.elements, params.h_budget, params.h_samples, params.seed);
    let shifts: Vec<u128> = sums.iter().map(|&(_, s)| plan.x0 as u128 + s).collect();
    let (sampled_h, uncertain) = count_shifted(coloring, spec, dense.m, &shifts)?;
    let valid = !sampled_h.is_empty() && sampled_h.iter().all(|s| s.counts.iter().all(|&c| c > 0));
    Ok(HdCertificate {
        schema_version: HD_SCHEMA_VERSION,
        k: spec.k,
        r: spec.r,
        t: coloring.colors(),
        box_side: coloring.side(),
        alphas: spec.alpha_descriptors(),
        m: dense.m,
        interval: dense.bounds_f64(),
        interval_fixed: (dense.x, dense.y),
        delta_grid: dense.delta_grid,
        j_star: plan.j_star,
        x0: plan.x0,
        sigma: plan.sigma as f64 / 2f64.powi(128),
        eps: plan.eps,
        eps_rule: EPS_RULE.into(),
        fs,
        h_sampled,
        sample_seed: params.seed,
        sampled_h,
        uncertain,
        valid,
    })
}

/// Certified check that `S_{j*} ⊂ J + {hβ}` for a shift `h`.
pub fn band_inside_shifted(j: &DenseInterval, j_star: u32, beta: &CertifiedReal, h: &BigInt) -> Certainty {
    let (s_start, sw) = band_bounds(j_star);
    beta.decide(|b, level| {
        let g = b.kernel(level).mul_big(h);
        let left = s_start.wrapping_sub(j.x.wrapping_add(g.value));
        let fits = |l: u128| l.checked_add(sw).is_some_and(|e| e <= j.len());
        match (left.checked_sub(g.err), left.checked_add(g.err)) {
            (Some(lo), Some(hi)) if fits(lo) && fits(hi) && lo > 0 => Certainty::True,
            (Some(lo), Some(hi)) if !fits(lo) && !fits(hi) => Certainty::False,
            _ => Certainty::Uncertain,
        }
    })
    .0
}
