//! Stego-signal simulators working directly on quantized coefficients.
//!
//! [`modify_random`] applies a fixed number of +-1 changes to one block.
//! [`lsbm_embed`] spreads a payload, measured in bits per non-zero AC
//! coefficient, over a whole image with the change rate of optimal binary
//! coding.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::DctBlock;
use crate::error::{Error, Result};

/// One coefficient change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Change {
    pub block: usize,
    pub coeff: usize,
    /// `+1` or `-1`.
    pub delta: i32,
}

/// Changes at distinct positions, sorted by `(block, coeff)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChangeSet {
    changes: Vec<Change>,
}

impl ChangeSet {
    /// Builds a set, rejecting duplicate positions and deltas other than
    /// +-1.
    pub fn new(mut changes: Vec<Change>) -> Result<Self> {
        changes.sort();
        for pair in changes.windows(2) {
            if (pair[0].block, pair[0].coeff) == (pair[1].block, pair[1].coeff) {
                return Err(Error::InvalidChange(format!(
                    "coefficient {} of block {} changed twice",
                    pair[0].coeff, pair[0].block
                )));
            }
        }
        if let Some(c) = changes.iter().find(|c| c.delta.abs() != 1) {
            return Err(Error::InvalidChange(format!(
                "change of {} is not +-1",
                c.delta
            )));
        }
        Ok(Self { changes })
    }

    pub fn changes(&self) -> &[Change] {
        &self.changes
    }

    pub fn len(&self) -> usize {
        self.changes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }

    /// Indices of the blocks touched by at least one change.
    pub fn modified_blocks(&self) -> BTreeSet<usize> {
        self.changes.iter().map(|c| c.block).collect()
    }

    /// Adds every change to `blocks`.
    pub fn apply(&self, blocks: &mut [DctBlock]) -> Result<()> {
        for c in &self.changes {
            let len = blocks.len();
            let block = blocks.get_mut(c.block).ok_or(Error::LengthMismatch {
                expected: c.block + 1,
                actual: len,
            })?;
            let available = block.coeffs().len();
            let coeff = block.coeffs_mut().get_mut(c.coeff).ok_or(Error::LengthMismatch {
                expected: c.coeff + 1,
                actual: available,
            })?;
            *coeff += c.delta;
        }
        Ok(())
    }
}

/// Changes `p` distinct coefficients of `c` (DC included) by +-1 with equal
/// probability.
pub fn modify_random<R: Rng + ?Sized>(
    c: &DctBlock,
    p: usize,
    rng: &mut R,
) -> Result<(DctBlock, ChangeSet)> {
    let available = c.coeffs().len();
    if p > available {
        return Err(Error::TooManyChanges {
            requested: p,
            available,
        });
    }
    let changes = sample(rng, available, p)
        .into_iter()
        .map(|coeff| Change {
            block: 0,
            coeff,
            delta: if rng.gen_bool(0.5) { 1 } else { -1 },
        })
        .collect();
    let set = ChangeSet::new(changes)?;
    let mut out = [c.clone()];
    set.apply(&mut out)?;
    let [out] = out;
    Ok((out, set))
}

/// Number of non-zero AC coefficients (every index but 0) over `blocks`.
pub fn count_nzac(blocks: &[DctBlock]) -> usize {
    blocks
        .iter()
        .map(|b| b.coeffs()[1..].iter().filter(|&&v| v != 0).count())
        .sum()
}

/// `H2(p) = -p log2 p - (1 - p) log2 (1 - p)`, with `H2(0) = H2(1) = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// Change rate `beta` in `[0, 1/2]` with `H2(beta) = payload`, found by
/// bisection.
pub fn change_rate(payload: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&payload) {
        return Err(Error::InvalidPayload(payload));
    }
    if payload == 0.0 {
        return Ok(0.0);
    }
    // H2 is flat at its maximum, where bisection cannot resolve the root.
    if payload == 1.0 {
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if binary_entropy(mid)? < payload {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Payload and seed of one embedding run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingParams {
    /// Bits per non-zero AC coefficient.
    pub payload: f64,
    pub seed: u64,
}

impl EmbeddingParams {
    /// [`lsbm_embed`] with a generator seeded from `self.seed`.
    pub fn embed(&self, blocks: &[DctBlock]) -> Result<(Vec<DctBlock>, ChangeSet)> {
        lsbm_embed(blocks, self.payload, &mut ChaCha8Rng::seed_from_u64(self.seed))
    }
}

/// LSB-matching simulator over one image.
///
/// Makes `round(beta * nzac)` changes at non-zero AC coefficients drawn
/// uniformly without replacement. Each change is +-1 with equal probability,
/// except that a coefficient at +-1 always moves away from zero so the count
/// of non-zero AC coefficients is preserved.
pub fn lsbm_embed<R: Rng + ?Sized>(
    blocks: &[DctBlock],
    payload: f64,
    rng: &mut R,
) -> Result<(Vec<DctBlock>, ChangeSet)> {
    let beta = change_rate(payload)?;
    let eligible: Vec<(usize, usize)> = blocks
        .iter()
        .enumerate()
        .flat_map(|(b, block)| {
            block
                .coeffs()
                .iter()
                .enumerate()
                .skip(1)
                .filter(|(_, &v)| v != 0)
                .map(move |(i, _)| (b, i))
        })
        .collect();
    let count = (beta * eligible.len() as f64).round() as usize;
    let changes = sample(rng, eligible.len(), count)
        .into_iter()
        .map(|pick| {
            let (block, coeff) = eligible[pick];
            let value = blocks[block].coeffs()[coeff];
            let coin = if rng.gen_bool(0.5) { 1 } else { -1 };
            let delta = if value.abs() == 1 { value } else { coin };
            Change { block, coeff, delta }
        })
        .collect();
    let set = ChangeSet::new(changes)?;
    let mut out = blocks.to_vec();
    set.apply(&mut out)?;
    Ok((out, set))
}
