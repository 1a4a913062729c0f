//! Antecedent characterization and feasibility search.
//!
//! A quantized block `c` has an integer antecedent iff there is an integer
//! vector `k` such that `x~ = [y] - k` lies in `[0, 255]` and the DCT
//! rounding error `u~ = M (k - e) / q` of `x~` lies in the half-open box
//! selected by the sign of each coefficient. This module builds that system
//! in the form `A k <= b` with per-row strictness, bounds `k`, and decides
//! feasibility either by exhaustive enumeration (small blocks, used as an
//! oracle) or by the column-wise search in [`search`].
//!
//! Every reported antecedent is confirmed by recompressing it, so the row
//! arithmetic only has to be sound for pruning.

mod plan;
mod search;

use std::time::{Duration, Instant};

use crate::codec::{compress, DctBlock, DecompResult, PixelBlock};
use crate::error::{Error, Result};
use crate::transform::DctMatrix;

pub use search::{solve_feasibility, Solver, UnverifiedPolicy};

/// Default tolerance standing in for the strict inequalities.
pub const DEFAULT_EPS: f64 = 1e-9;

/// Default cap on the number of candidates the exhaustive oracle may visit.
pub const DEFAULT_ENUMERATION_CAP: u128 = 100_000_000;

/// Slack added when rounding the analytic `k` bounds to integers.
const BOUND_SLACK: f64 = 1e-9;

/// Candidate offset between the rounded decompression and an antecedent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KVector(pub Vec<i32>);

impl KVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn as_slice(&self) -> &[i32] {
        &self.0
    }
}

/// Inclusive integer range of one `k` coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KRange {
    pub lo: i32,
    pub hi: i32,
}

impl KRange {
    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn width(&self) -> u128 {
        if self.is_empty() {
            0
        } else {
            (self.hi - self.lo) as u128 + 1
        }
    }

    pub fn contains(&self, v: i32) -> bool {
        self.lo <= v && v <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IgnoreReason {
    /// The search produced an integer point that does not recompress to the
    /// block: the sign proxy misdescribed a zero coefficient.
    UnverifiedSolution,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// A verified antecedent offset.
    Feasible(KVector),
    /// No antecedent exists.
    Infeasible,
    /// The budget ran out first.
    Exhausted,
    Ignored(IgnoreReason),
}

/// Result of one feasibility search.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub outcome: Outcome,
    pub nodes: u64,
    pub elapsed: Duration,
}

impl Verdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self.outcome, Outcome::Feasible(_))
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self.outcome, Outcome::Infeasible)
    }

    pub fn antecedent_offset(&self) -> Option<&KVector> {
        match &self.outcome {
            Outcome::Feasible(k) => Some(k),
            _ => None,
        }
    }
}

/// Limits on a search. Node counts are reproducible; wall-clock is not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Budget {
    pub max_nodes: Option<u64>,
    pub max_time: Option<Duration>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn nodes(n: u64) -> Self {
        Self {
            max_nodes: Some(n),
            max_time: None,
        }
    }

    pub fn time(limit: Duration) -> Self {
        Self {
            max_nodes: None,
            max_time: Some(limit),
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.max_nodes.is_some() || self.max_time.is_some()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.max_nodes == Some(0) || self.max_time == Some(Duration::ZERO) {
            return Err(Error::ZeroBudget);
        }
        Ok(())
    }
}

/// The antecedent system `A k <= b` for one block.
///
/// `A` stacks the scaled transform `M_r / q_r` over its negation; row `r`
/// bounds `u~_r` from above and row `n + r` from below. `strict[i]` marks the
/// open side of each coordinate, already tightened by `eps` in `b`.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    block: DctBlock,
    dct: DctMatrix,
    rounded: Vec<i32>,
    e: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    strict: Vec<bool>,
    eps: f64,
}

/// Builds the antecedent system of `block` from its decompression.
///
/// The sign of each coefficient stands in for the sign of the unknown
/// unquantized coefficient when picking the strict side.
pub fn build_constraints(
    block: &DctBlock,
    dct: &DctMatrix,
    spatial: &DecompResult,
    eps: f64,
) -> Result<ConstraintSystem> {
    if dct.shape() != block.shape() {
        return Err(Error::ShapeMismatch(format!(
            "block is {}, transform is {}",
            block.shape(),
            dct.shape()
        )));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidEpsilon(eps));
    }
    let n = dct.dim();
    for len in [spatial.e.len(), spatial.rounded.len()] {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: len,
            });
        }
    }

    let quant = block.quant();
    let mut a = vec![0.0; 2 * n * n];
    for r in 0..n {
        let q = quant.get(r) as f64;
        for (j, &m) in dct.row(r).iter().enumerate() {
            a[r * n + j] = m / q;
            a[(n + r) * n + j] = -m / q;
        }
    }
    let mut b = vec![0.0; 2 * n];
    let mut strict = vec![false; 2 * n];
    for r in 0..n {
        let ae: f64 = a[r * n..(r + 1) * n]
            .iter()
            .zip(&spatial.e)
            .map(|(x, y)| x * y)
            .sum();
        let nonneg = block.coeffs()[r] >= 0;
        // Non-negative coefficient: -0.5 < u~ <= 0.5, the lower side is open.
        strict[r] = !nonneg;
        strict[n + r] = nonneg;
        b[r] = 0.5 + ae - if strict[r] { eps } else { 0.0 };
        b[n + r] = 0.5 - ae - if strict[n + r] { eps } else { 0.0 };
    }

    Ok(ConstraintSystem {
        block: block.clone(),
        dct: dct.clone(),
        rounded: spatial.rounded.clone(),
        e: spatial.e.clone(),
        a,
        b,
        strict,
        eps,
    })
}

impl ConstraintSystem {
    /// Decompresses `block` and builds its system.
    pub fn from_block(block: &DctBlock, dct: &DctMatrix, eps: f64) -> Result<Self> {
        let spatial = crate::codec::decompress(block, dct)?;
        build_constraints(block, dct, &spatial, eps)
    }

    /// Number of unknowns `nm`.
    pub fn dim(&self) -> usize {
        self.rounded.len()
    }

    pub fn block(&self) -> &DctBlock {
        &self.block
    }

    pub fn dct(&self) -> &DctMatrix {
        &self.dct
    }

    /// Rounded (unclamped) decompression `[y]`.
    pub fn rounded(&self) -> &[i32] {
        &self.rounded
    }

    /// Spatial rounding error `e`.
    pub fn e(&self) -> &[f64] {
        &self.e
    }

    /// Row-major `2nm x nm` matrix.
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn a_row(&self, row: usize) -> &[f64] {
        let n = self.dim();
        &self.a[row * n..(row + 1) * n]
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn strict(&self) -> &[bool] {
        &self.strict
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// The same system with every inequality closed.
    pub fn closed(&self) -> Self {
        let n = self.dim();
        let mut out = self.clone();
        for i in 0..2 * n {
            if out.strict[i] {
                out.b[i] += self.eps;
                out.strict[i] = false;
            }
        }
        out
    }

    /// Whether `k` satisfies every row of `A k <= b`.
    pub fn satisfied_by(&self, k: &[i32]) -> bool {
        (0..2 * self.dim()).all(|i| {
            let v: f64 = self.a_row(i).iter().zip(k).map(|(a, &x)| a * x as f64).sum();
            v <= self.b[i]
        })
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.a.len() != 2 * n * n || self.b.len() != 2 * n || self.strict.len() != 2 * n {
            return Err(Error::MalformedSystem("inconsistent dimensions".into()));
        }
        if self.e.len() != n || self.block.coeffs().len() != n || self.dct.dim() != n {
            return Err(Error::MalformedSystem("inconsistent block data".into()));
        }
        for r in 0..n {
            if self.a_row(r).iter().zip(self.a_row(n + r)).any(|(x, y)| *x != -*y) {
                return Err(Error::MalformedSystem(format!(
                    "row {} is not the negation of row {r}",
                    n + r
                )));
            }
        }
        if self.a.iter().chain(&self.b).any(|v| !v.is_finite()) {
            return Err(Error::MalformedSystem("non-finite entry".into()));
        }
        if (0..n).any(|r| -self.b[n + r] > self.b[r]) {
            return Err(Error::MalformedSystem("empty row range".into()));
        }
        Ok(())
    }

    /// Sound per-coordinate enclosure of every `k` satisfying the rows.
    ///
    /// From `k - e = M^T (u~ * q)` with `|u~_j| <= 1/2`, each `k_i` lies within
    /// `e_i +- s_i`, `s_i = 1/2 * sum_j |M_ji| q_j`.
    pub fn k_bounds(&self) -> Vec<KRange> {
        let quant = self.block.quant();
        (0..self.dim())
            .map(|i| {
                let s = 0.5 * self.dct.weighted_column_norm(i, quant);
                KRange {
                    lo: (self.e[i] - s - BOUND_SLACK).ceil() as i32,
                    hi: (self.e[i] + s + BOUND_SLACK).floor() as i32,
                }
            })
            .collect()
    }

    /// [`k_bounds`](Self::k_bounds) intersected with the offsets that keep
    /// `x~ = [y] - k` inside `[0, 255]`.
    pub fn search_bounds(&self) -> Vec<KRange> {
        self.k_bounds()
            .into_iter()
            .zip(&self.rounded)
            .map(|(r, &y)| KRange {
                lo: r.lo.max(y - 255),
                hi: r.hi.min(y),
            })
            .collect()
    }

    /// The candidate antecedent `[y] - k`.
    pub fn candidate(&self, k: &[i32]) -> Result<PixelBlock> {
        let values: Vec<i32> = self.rounded.iter().zip(k).map(|(y, k)| y - k).collect();
        for (index, &value) in values.iter().enumerate() {
            if !(0..=255).contains(&value) {
                return Err(Error::CandidateOutOfRange { index, value });
            }
        }
        PixelBlock::from_i32(self.block.shape(), &values)
    }

    /// True iff `[y] - k` recompresses to exactly this block.
    pub fn verify(&self, k: &[i32]) -> Result<bool> {
        if k.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                actual: k.len(),
            });
        }
        let x = self.candidate(k)?;
        let (c, _) = compress(&x, self.block.quant(), &self.dct)?;
        Ok(c.coeffs() == self.block.coeffs())
    }
}

/// Checks that `[y] - k` is an antecedent of the block the system was built
/// for. An out-of-range candidate is an error, not a `false`.
pub fn verify_antecedent(k: &KVector, system: &ConstraintSystem) -> Result<bool> {
    system.verify(&k.0)
}

fn box_size(bounds: &[KRange], cap: u128) -> Result<u128> {
    let total = bounds
        .iter()
        .fold(1u128, |acc, r| acc.saturating_mul(r.width()));
    if total > cap {
        return Err(Error::EnumerationCap {
            candidates: total,
            cap,
        });
    }
    Ok(total)
}

/// Visits every point of the box in lexicographic order (last coordinate
/// fastest) until `visit` returns `true`. Returns the number of points seen.
fn walk_box(
    bounds: &[KRange],
    mut visit: impl FnMut(&[i32]) -> Result<bool>,
) -> Result<u64> {
    if bounds.iter().any(KRange::is_empty) {
        return Ok(0);
    }
    let mut k: Vec<i32> = bounds.iter().map(|r| r.lo).collect();
    let mut seen = 0u64;
    loop {
        seen += 1;
        if visit(&k)? {
            return Ok(seen);
        }
        let mut i = k.len();
        loop {
            if i == 0 {
                return Ok(seen);
            }
            i -= 1;
            if k[i] < bounds[i].hi {
                k[i] += 1;
                break;
            }
            k[i] = bounds[i].lo;
        }
    }
}

/// Exhaustive search over [`ConstraintSystem::search_bounds`] in
/// lexicographic order, verifying each candidate by recompression.
pub fn brute_force_antecedent(system: &ConstraintSystem, cap: u128) -> Result<Verdict> {
    let start = Instant::now();
    let bounds = system.search_bounds();
    box_size(&bounds, cap)?;
    let mut found = None;
    let nodes = walk_box(&bounds, |k| {
        let ok = system.verify(k)?;
        if ok {
            found = Some(KVector(k.to_vec()));
        }
        Ok(ok)
    })?;
    Ok(Verdict {
        outcome: found.map_or(Outcome::Infeasible, Outcome::Feasible),
        nodes,
        elapsed: start.elapsed(),
    })
}

/// Every verified antecedent offset of a block, in lexicographic order.
pub fn all_antecedents(system: &ConstraintSystem, cap: u128) -> Result<Vec<KVector>> {
    let bounds = system.search_bounds();
    box_size(&bounds, cap)?;
    let mut found = Vec::new();
    walk_box(&bounds, |k| {
        if system.verify(k)? {
            found.push(KVector(k.to_vec()));
        }
        Ok(false)
    })?;
    Ok(found)
}
