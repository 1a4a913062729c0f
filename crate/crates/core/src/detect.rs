//! Block classification, per-image features and detector metrics.
//!
//! A block is skipped when its decompression leaves the pixel range, proven
//! incompatible when the search is infeasible, and otherwise counted as
//! feasible, unsolved (budget spent) or ignored (a relaxation point that did
//! not recompress). A single incompatible block proves an image is stego; the
//! ratio of unsolved blocks is the timing feature.

use std::time::Duration;

use crate::codec::{decompress, DctBlock};
use crate::error::{Error, Result};
use crate::feasibility::{
    build_constraints, Budget, Outcome, Solver, UnverifiedPolicy, Verdict, DEFAULT_EPS,
};
use crate::transform::DctMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockStatus {
    /// Decompression clipped; not analysed.
    Skipped,
    Feasible,
    /// No antecedent exists: the block was modified after compression.
    Incompatible,
    /// The budget ran out first.
    Unsolved,
    /// The formulation produced a point that did not recompress.
    Ignored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub index: usize,
    pub status: BlockStatus,
    /// Absent for skipped blocks.
    pub verdict: Option<Verdict>,
    pub clipped: bool,
    pub nodes: u64,
    pub elapsed: Duration,
}

impl BlockReport {
    /// Status under a node limit no larger than the one this report was
    /// produced with. Searches are deterministic, so a smaller limit only
    /// cuts the same search short.
    pub fn status_within(&self, max_nodes: u64) -> BlockStatus {
        match self.status {
            BlockStatus::Skipped => BlockStatus::Skipped,
            _ if self.nodes > max_nodes => BlockStatus::Unsolved,
            status => status,
        }
    }
}

/// Decompresses, solves under `budget` and classifies one block.
pub fn classify_block(
    index: usize,
    c: &DctBlock,
    dct: &DctMatrix,
    budget: Budget,
) -> Result<BlockReport> {
    let spatial = decompress(c, dct)?;
    if spatial.clipped {
        return Ok(BlockReport {
            index,
            status: BlockStatus::Skipped,
            verdict: None,
            clipped: true,
            nodes: 0,
            elapsed: Duration::ZERO,
        });
    }
    let system = build_constraints(c, dct, &spatial, DEFAULT_EPS)?;
    let verdict = Solver::new(UnverifiedPolicy::Ignore).solve(&system, budget)?;
    let status = match verdict.outcome {
        Outcome::Feasible(_) => BlockStatus::Feasible,
        Outcome::Infeasible => BlockStatus::Incompatible,
        Outcome::Exhausted => BlockStatus::Unsolved,
        Outcome::Ignored(_) => BlockStatus::Ignored,
    };
    Ok(BlockReport {
        index,
        status,
        nodes: verdict.nodes,
        elapsed: verdict.elapsed,
        verdict: Some(verdict),
        clipped: false,
    })
}

/// Classifies every block of an image, in block order.
pub fn classify_image(blocks: &[DctBlock], dct: &DctMatrix, budget: Budget) -> Result<Vec<BlockReport>> {
    blocks
        .iter()
        .enumerate()
        .map(|(i, c)| classify_block(i, c, dct, budget))
        .collect()
}

/// What the block verdicts establish about an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    /// Every analysed block has an antecedent.
    Cover,
    /// At least one block is incompatible.
    Stego,
    /// Some blocks are unsolved and none is incompatible.
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageScore {
    pub n_blocks: usize,
    pub n_skipped: usize,
    pub n_ignored: usize,
    pub n_feasible: usize,
    pub n_unsolved: usize,
    pub n_incompatible: usize,
    /// Unsolved blocks over blocks that were neither skipped nor ignored
    /// (0 when there are none).
    pub unsolved_ratio: f64,
    pub label: Label,
}

impl ImageScore {
    pub fn from_statuses(statuses: impl IntoIterator<Item = BlockStatus>) -> Result<Self> {
        let mut s = Self {
            n_blocks: 0,
            n_skipped: 0,
            n_ignored: 0,
            n_feasible: 0,
            n_unsolved: 0,
            n_incompatible: 0,
            unsolved_ratio: 0.0,
            label: Label::Cover,
        };
        for status in statuses {
            s.n_blocks += 1;
            match status {
                BlockStatus::Skipped => s.n_skipped += 1,
                BlockStatus::Ignored => s.n_ignored += 1,
                BlockStatus::Feasible => s.n_feasible += 1,
                BlockStatus::Unsolved => s.n_unsolved += 1,
                BlockStatus::Incompatible => s.n_incompatible += 1,
            }
        }
        if s.n_blocks == 0 {
            return Err(Error::Empty("block reports"));
        }
        let eligible = s.n_blocks - s.n_skipped - s.n_ignored;
        if eligible > 0 {
            s.unsolved_ratio = s.n_unsolved as f64 / eligible as f64;
        }
        s.label = if s.n_incompatible > 0 {
            Label::Stego
        } else if s.n_unsolved > 0 {
            Label::Unknown
        } else {
            Label::Cover
        };
        Ok(s)
    }

    pub fn stego_proven(&self) -> bool {
        self.n_incompatible > 0
    }

    /// Detector score: the unsolved ratio, or infinity once an incompatible
    /// block certifies the image.
    pub fn detector_score(&self) -> f64 {
        if self.stego_proven() {
            f64::INFINITY
        } else {
            self.unsolved_ratio
        }
    }
}

/// Aggregates the reports of one image.
pub fn score_image(reports: &[BlockReport]) -> Result<ImageScore> {
    ImageScore::from_statuses(reports.iter().map(|r| r.status))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    /// Images with a score strictly above this are called stego.
    pub threshold: f64,
    pub p_fa: f64,
    pub p_md: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeMin {
    pub pe: f64,
    pub threshold: f64,
    pub p_fa: f64,
    pub p_md: f64,
    /// Every threshold tried, ascending, starting at negative infinity.
    pub sweep: Vec<SweepPoint>,
}

/// Minimal total error `(P_FA + P_MD) / 2` over all thresholds, calling a
/// score stego when it is strictly above the threshold. Ties go to the
/// smaller false-alarm rate.
pub fn pe_min(cover: &[f64], stego: &[f64]) -> Result<PeMin> {
    if cover.is_empty() {
        return Err(Error::Empty("cover scores"));
    }
    if stego.is_empty() {
        return Err(Error::Empty("stego scores"));
    }
    if cover.iter().chain(stego).any(|v| v.is_nan()) {
        return Err(Error::NanScore);
    }
    let mut cover = cover.to_vec();
    let mut stego = stego.to_vec();
    cover.sort_by(f64::total_cmp);
    stego.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = cover.iter().chain(&stego).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.insert(0, f64::NEG_INFINITY);

    let (nc, ns) = (cover.len(), stego.len());
    let mut sweep = Vec::with_capacity(thresholds.len());
    // (errors scaled by nc * ns, false alarms, index)
    let mut best: Option<(usize, usize, usize)> = None;
    let (mut ci, mut si) = (0, 0);
    for (t, &tau) in thresholds.iter().enumerate() {
        while ci < nc && cover[ci] <= tau {
            ci += 1;
        }
        while si < ns && stego[si] <= tau {
            si += 1;
        }
        let (fa, md) = (nc - ci, si);
        sweep.push(SweepPoint {
            threshold: tau,
            p_fa: fa as f64 / nc as f64,
            p_md: md as f64 / ns as f64,
        });
        let total = fa * ns + md * nc;
        if best.map_or(true, |(bt, bfa, _)| (total, fa) < (bt, bfa)) {
            best = Some((total, fa, t));
        }
    }
    let (total, _, t) = best.expect("at least one threshold");
    let point = sweep[t];
    Ok(PeMin {
        pe: total as f64 / (2 * nc * ns) as f64,
        threshold: point.threshold,
        p_fa: point.p_fa,
        p_md: point.p_md,
        sweep,
    })
}

/// Probability that none of `r` modified blocks is detected when each is
/// detected independently with probability `p_single`.
pub fn expected_miss(p_single: f64, r: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_single) {
        return Err(Error::InvalidProbability(p_single));
    }
    Ok((1.0 - p_single).powi(r as i32))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub budget: Budget,
    pub cover: Vec<ImageScore>,
    pub stego: Vec<ImageScore>,
    pub pe: PeMin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorCurve {
    pub points: Vec<CurvePoint>,
}

enum BudgetKind {
    Nodes,
    Time,
}

fn budget_kind(budgets: &[Budget]) -> Result<BudgetKind> {
    if budgets.is_empty() {
        return Err(Error::Empty("budgets"));
    }
    for b in budgets {
        b.validate()?;
    }
    let nodes: Option<Vec<u64>> = budgets
        .iter()
        .map(|b| b.max_nodes.filter(|_| b.max_time.is_none()))
        .collect();
    if let Some(n) = nodes {
        return if n.windows(2).all(|w| w[0] < w[1]) {
            Ok(BudgetKind::Nodes)
        } else {
            Err(Error::UnsortedBudgets)
        };
    }
    let times: Option<Vec<Duration>> = budgets
        .iter()
        .map(|b| b.max_time.filter(|_| b.max_nodes.is_none()))
        .collect();
    match times {
        Some(t) if t.windows(2).all(|w| w[0] < w[1]) => Ok(BudgetKind::Time),
        _ => Err(Error::UnsortedBudgets),
    }
}

/// Reports of every block of every image under one budget.
fn classify_all(images: &[Vec<DctBlock>], dct: &DctMatrix, budget: Budget) -> Result<Vec<Vec<BlockReport>>> {
    images.iter().map(|b| classify_image(b, dct, budget)).collect()
}

fn curve_point(budget: Budget, cover: Vec<ImageScore>, stego: Vec<ImageScore>) -> Result<CurvePoint> {
    let c: Vec<f64> = cover.iter().map(ImageScore::detector_score).collect();
    let s: Vec<f64> = stego.iter().map(ImageScore::detector_score).collect();
    Ok(CurvePoint {
        budget,
        pe: pe_min(&c, &s)?,
        cover,
        stego,
    })
}

fn scores_within(images: &[Vec<BlockReport>], max_nodes: u64) -> Result<Vec<ImageScore>> {
    images
        .iter()
        .map(|image| ImageScore::from_statuses(image.iter().map(|r| r.status_within(max_nodes))))
        .collect()
}

/// Detector curve over strictly ascending node budgets, from reports
/// produced with a node limit of at least the largest budget.
pub fn curve_from_reports(
    cover: &[Vec<BlockReport>],
    stego: &[Vec<BlockReport>],
    budgets: &[Budget],
) -> Result<DetectorCurve> {
    if !matches!(budget_kind(budgets)?, BudgetKind::Nodes) {
        return Err(Error::UnsortedBudgets);
    }
    let points = budgets
        .iter()
        .map(|&b| {
            let n = b.max_nodes.expect("node budget");
            curve_point(b, scores_within(cover, n)?, scores_within(stego, n)?)
        })
        .collect::<Result<_>>()?;
    Ok(DetectorCurve { points })
}

/// Detector error as a function of the search budget.
///
/// Node budgets (strictly ascending) are evaluated with a single search per
/// block at the largest budget; wall-clock budgets rerun every block.
pub fn timing_curve(
    cover: &[Vec<DctBlock>],
    stego: &[Vec<DctBlock>],
    dct: &DctMatrix,
    budgets: &[Budget],
) -> Result<DetectorCurve> {
    match budget_kind(budgets)? {
        BudgetKind::Nodes => {
            let top = *budgets.last().expect("non-empty");
            let cover = classify_all(cover, dct, top)?;
            let stego = classify_all(stego, dct, top)?;
            curve_from_reports(&cover, &stego, budgets)
        }
        BudgetKind::Time => {
            let points = budgets
                .iter()
                .map(|&b| {
                    let score = |images: &[Vec<DctBlock>]| -> Result<Vec<ImageScore>> {
                        classify_all(images, dct, b)?.iter().map(|r| score_image(r)).collect()
                    };
                    curve_point(b, score(cover)?, score(stego)?)
                })
                .collect::<Result<_>>()?;
            Ok(DetectorCurve { points })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::BlockCodec;
    use crate::transform::{BlockShape, QuantTable};

    fn toy(c: [i32; 2]) -> (DctBlock, DctMatrix) {
        let shape = BlockShape::new(1, 2).unwrap();
        let codec = BlockCodec::qf100(shape);
        (
            DctBlock::new(shape, c.to_vec(), QuantTable::qf100(shape)).unwrap(),
            codec.dct().clone(),
        )
    }

    fn statuses(list: &[(BlockStatus, usize)]) -> Vec<BlockStatus> {
        list.iter().flat_map(|&(s, n)| std::iter::repeat(s).take(n)).collect()
    }

    #[test]
    fn toy_blocks() {
        let (c, dct) = toy([16, 78]);
        let r = classify_block(0, &c, &dct, Budget::nodes(100)).unwrap();
        assert_eq!(r.status, BlockStatus::Feasible);
        let (c, dct) = toy([17, 77]);
        let r = classify_block(3, &c, &dct, Budget::nodes(100)).unwrap();
        assert_eq!(r.status, BlockStatus::Incompatible);
        assert_eq!(r.index, 3);
    }

    #[test]
    fn clipped_blocks_are_skipped() {
        // A large DC coefficient decompresses above 255.
        let (c, dct) = toy([200, 0]);
        let r = classify_block(0, &c, &dct, Budget::nodes(100)).unwrap();
        assert_eq!(r.status, BlockStatus::Skipped);
        assert!(r.clipped && r.verdict.is_none());
    }

    #[test]
    fn image_scores() {
        let all = ImageScore::from_statuses(statuses(&[(BlockStatus::Feasible, 5)])).unwrap();
        assert_eq!(all.unsolved_ratio, 0.0);
        assert_eq!(all.label, Label::Cover);

        let mixed = ImageScore::from_statuses(statuses(&[
            (BlockStatus::Feasible, 7),
            (BlockStatus::Unsolved, 3),
            (BlockStatus::Skipped, 2),
            (BlockStatus::Ignored, 1),
        ]))
        .unwrap();
        assert_eq!(mixed.n_blocks, 13);
        assert!((mixed.unsolved_ratio - 0.3).abs() < 1e-15);
        assert_eq!(mixed.label, Label::Unknown);
        assert!(!mixed.stego_proven());

        let proven = ImageScore::from_statuses(statuses(&[
            (BlockStatus::Unsolved, 3),
            (BlockStatus::Incompatible, 1),
        ]))
        .unwrap();
        assert!(proven.stego_proven());
        assert_eq!(proven.label, Label::Stego);
        assert_eq!(proven.detector_score(), f64::INFINITY);

        assert!(ImageScore::from_statuses(Vec::new()).is_err());
        let skipped = ImageScore::from_statuses(statuses(&[(BlockStatus::Skipped, 2)])).unwrap();
        assert_eq!(skipped.unsolved_ratio, 0.0);
    }

    #[test]
    fn pe_examples() {
        assert_eq!(pe_min(&[0.0, 0.1], &[0.5, 0.9]).unwrap().pe, 0.0);
        assert_eq!(pe_min(&[0.2, 0.4, 0.4], &[0.2, 0.4, 0.4]).unwrap().pe, 0.5);
        let r = pe_min(&[0.0, 0.1, 0.2], &[0.15, 0.3, 0.4]).unwrap();
        assert!((r.pe - 1.0 / 6.0).abs() < 1e-15);
        // Both 0.1 and 0.2 reach 1/6; the latter has no false alarm.
        assert_eq!(r.threshold, 0.2);
        assert_eq!(r.p_fa, 0.0);
        assert_eq!(r.sweep.len(), 7);
        assert!(pe_min(&[], &[1.0]).is_err());
        assert!(pe_min(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn miss_probability() {
        assert!((expected_miss(0.4, 10).unwrap() - 0.006_046_617_6).abs() < 1e-9);
        assert_eq!(expected_miss(0.3, 0).unwrap(), 1.0);
        assert_eq!(expected_miss(1.0, 3).unwrap(), 0.0);
        assert!(expected_miss(1.2, 3).is_err());
    }

    #[test]
    fn budgets_must_ascend() {
        let (c, dct) = toy([16, 78]);
        let images = vec![vec![c]];
        let bad = [Budget::nodes(10), Budget::nodes(5)];
        assert!(matches!(
            timing_curve(&images, &images, &dct, &bad),
            Err(Error::UnsortedBudgets)
        ));
        let mixed = [Budget::nodes(10), Budget::time(Duration::from_secs(1))];
        assert!(timing_curve(&images, &images, &dct, &mixed).is_err());
        assert!(timing_curve(&images, &images, &dct, &[]).is_err());
    }

    #[test]
    fn identical_inputs_give_chance() {
        let (c, dct) = toy([16, 78]);
        let images = vec![vec![c.clone()], vec![c]];
        let curve = timing_curve(&images, &images, &dct, &[Budget::nodes(1), Budget::nodes(50)]).unwrap();
        assert_eq!(curve.points.len(), 2);
        for p in &curve.points {
            assert_eq!(p.pe.pe, 0.5);
        }
    }
}
