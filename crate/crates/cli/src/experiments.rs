//! Experiment drivers. Each returns result rows in a fixed order so that a
//! run with a given seed and node budgets is reproducible byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use jpeg_compat::codec::{BlockCodec, DctBlock, PixelBlock};
use jpeg_compat::detect::{
    classify_block, classify_image, curve_from_reports, score_image, timing_curve, BlockReport,
    BlockStatus, DetectorCurve, ImageScore,
};
use jpeg_compat::embedding::{count_nzac, modify_random, EmbeddingParams};
use jpeg_compat::feasibility::{
    all_antecedents, verify_antecedent, ConstraintSystem, Outcome, Solver, Verdict, DEFAULT_EPS,
};
use jpeg_compat::image::GrayImage;
use jpeg_compat::transform::{dct_matrix, BlockShape, QuantTable};
use jpeg_compat::{Budget, DctMatrix};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::pgm::load_pgm;
use crate::results::ResultRow;
use crate::synthetic::gen_synthetic;

/// Where cover images come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Synthetic { size: usize, smoothness: f64 },
    /// Every `*.pgm` file of a directory, in file-name order.
    PgmDir(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub shape: BlockShape,
    pub quant: QuantTable,
    pub seed: u64,
    /// Blocks per point (incompatibility rate).
    pub samples: usize,
    /// Images to draw from the source.
    pub images: usize,
    /// Numbers of +-1 changes (incompatibility rate).
    pub changes: Vec<usize>,
    /// Search limits; timing uses all of them, the others the first.
    pub budgets: Vec<Budget>,
    /// Bits per non-zero AC coefficient.
    pub payload: f64,
    pub source: Source,
}

impl ExperimentConfig {
    /// Defaults: QF 100, 1000 samples, 20 synthetic 256x256 images with
    /// smoothness 1.5, changes 1 to 6, no budget, payload 0.01.
    pub fn new(shape: BlockShape, seed: u64) -> Self {
        Self {
            shape,
            quant: QuantTable::qf100(shape),
            seed,
            samples: 1000,
            images: 20,
            changes: (1..=6).collect(),
            budgets: Vec::new(),
            payload: 0.01,
            source: Source::Synthetic {
                size: 256,
                smoothness: 1.5,
            },
        }
    }

    pub fn codec(&self) -> CliResult<BlockCodec> {
        Ok(BlockCodec::new(dct_matrix(self.shape), self.quant.clone())?)
    }

    /// The first budget, or a node limit too large to be reached.
    fn single_budget(&self) -> Budget {
        self.budgets.first().copied().unwrap_or(Budget::nodes(u64::MAX))
    }

    fn shape_label(&self) -> String {
        self.shape.to_string()
    }
}

/// `count` seeds from the stream `tag` of the master seed.
fn derived_seeds(seed: u64, tag: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    (0..count).map(|_| rng.gen()).collect()
}

const CONTENT_STREAM: u64 = 1;
const EMBED_STREAM: u64 = 2;
const SAMPLE_STREAM: u64 = 3;

fn pgm_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
        {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads or generates `cfg.images` cover images.
pub fn load_images(cfg: &ExperimentConfig) -> CliResult<Vec<GrayImage>> {
    match &cfg.source {
        Source::Synthetic { size, smoothness } => Ok(derived_seeds(cfg.seed, CONTENT_STREAM, cfg.images)
            .into_iter()
            .map(|s| gen_synthetic(s, *size, *size, *smoothness))
            .collect()),
        Source::PgmDir(dir) => {
            let files = pgm_files(dir)?;
            if files.len() < cfg.images {
                return Err(CliError::SourceExhausted {
                    what: "images",
                    needed: cfg.images,
                    available: files.len(),
                });
            }
            files[..cfg.images].iter().map(|p| load_pgm(p)).collect()
        }
    }
}

static FEASIBLE_CHECKS: AtomicU64 = AtomicU64::new(0);

/// Number of feasible verdicts re-verified by the drivers in this process.
pub fn feasible_checks() -> u64 {
    FEASIBLE_CHECKS.load(Ordering::Relaxed)
}

/// Fails unless a feasible verdict's offset really is an antecedent.
fn check_feasible(block: &DctBlock, dct: &DctMatrix, verdict: &Verdict) -> CliResult<()> {
    if let Outcome::Feasible(k) = &verdict.outcome {
        let system = ConstraintSystem::from_block(block, dct, DEFAULT_EPS)?;
        if !verify_antecedent(k, &system)? {
            return Err(CliError::Invariant(
                "a feasible verdict failed recompression".into(),
            ));
        }
        FEASIBLE_CHECKS.fetch_add(1, Ordering::Relaxed);
    }
    Ok(())
}

fn check_reports(blocks: &[DctBlock], dct: &DctMatrix, reports: &[BlockReport]) -> CliResult<()> {
    for r in reports {
        if let Some(v) = &r.verdict {
            check_feasible(&blocks[r.index], dct, v)?;
        }
    }
    Ok(())
}

/// Proportion of +-1-modified blocks proven incompatible, per number of
/// changes.
pub fn incompat_rate(cfg: &ExperimentConfig) -> CliResult<Vec<ResultRow>> {
    let codec = cfg.codec()?;
    let mut pool = Vec::new();
    for image in load_images(cfg)? {
        pool.extend(image.compress(&codec)?);
    }
    if pool.len() < cfg.samples {
        return Err(CliError::SourceExhausted {
            what: "blocks",
            needed: cfg.samples,
            available: pool.len(),
        });
    }
    let budget = cfg.single_budget();
    let solver = Solver::default();
    let shape = cfg.shape_label();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(SAMPLE_STREAM);

    let mut rows = Vec::new();
    for &p in &cfg.changes {
        let blocks = sample(&mut rng, pool.len(), cfg.samples)
            .into_iter()
            .map(|index| Ok(modify_random(&pool[index], p, &mut rng)?.0))
            .collect::<CliResult<Vec<_>>>()?;
        let verdicts = blocks
            .par_iter()
            .map(|block| {
                let system = ConstraintSystem::from_block(block, codec.dct(), DEFAULT_EPS)?;
                let verdict = solver.solve(&system, budget)?;
                check_feasible(block, codec.dct(), &verdict)?;
                Ok(verdict)
            })
            .collect::<CliResult<Vec<_>>>()?;
        let (mut incompatible, mut unsolved, mut nodes) = (0u64, 0u64, 0u64);
        for verdict in verdicts {
            nodes += verdict.nodes;
            match verdict.outcome {
                Outcome::Infeasible => incompatible += 1,
                Outcome::Exhausted => unsolved += 1,
                Outcome::Feasible(_) => {}
                Outcome::Ignored(_) => {
                    return Err(CliError::Invariant("exact search reported ignored".into()))
                }
            }
        }
        let n = cfg.samples as u64;
        let param = ("changes", p as f64);
        rows.push(ResultRow::proportion("incompat-rate", &shape, param, "incompatible", incompatible, n));
        rows.push(ResultRow::proportion("incompat-rate", &shape, param, "unsolved", unsolved, n));
        rows.push(ResultRow::new(
            "incompat-rate",
            &shape,
            param,
            ("mean_nodes", nodes as f64 / n.max(1) as f64),
            n,
        ));
    }
    Ok(rows)
}

/// Per-image outcome of embedding and detection.
struct Embedded {
    changes: usize,
    modified: Vec<usize>,
    cover_reports: Vec<BlockReport>,
    stego_reports: Vec<BlockReport>,
}

/// Compresses, embeds and classifies one image. Unmodified stego blocks are
/// identical to the cover blocks, so their reports are reused.
fn embed_and_classify(
    image: &GrayImage,
    codec: &BlockCodec,
    payload: f64,
    seed: u64,
    budget: Budget,
) -> CliResult<Embedded> {
    let cover = image.compress(codec)?;
    let cover_reports = classify_image(&cover, codec.dct(), budget)?;
    check_reports(&cover, codec.dct(), &cover_reports)?;
    let (stego, changes) = EmbeddingParams { payload, seed }.embed(&cover)?;
    let modified: Vec<usize> = changes.modified_blocks().into_iter().collect();
    let mut stego_reports = cover_reports.clone();
    for &b in &modified {
        let report = classify_block(b, &stego[b], codec.dct(), budget)?;
        if let Some(v) = &report.verdict {
            check_feasible(&stego[b], codec.dct(), v)?;
        }
        stego_reports[b] = report;
    }
    Ok(Embedded {
        changes: changes.len(),
        modified,
        cover_reports,
        stego_reports,
    })
}

/// Incompatible blocks against modified blocks per embedded image, and false
/// alarms on the covers.
pub fn payload_detect(cfg: &ExperimentConfig) -> CliResult<Vec<ResultRow>> {
    let codec = cfg.codec()?;
    let budget = cfg.single_budget();
    let shape = cfg.shape_label();
    let images = load_images(cfg)?;
    let seeds = derived_seeds(cfg.seed, EMBED_STREAM, images.len());
    let mut rows = Vec::new();
    let (mut false_alarms, mut proven) = (0u64, 0u64);
    let param = ("payload", cfg.payload);

    let embedded = images
        .par_iter()
        .zip(&seeds)
        .map(|(image, &seed)| embed_and_classify(image, &codec, cfg.payload, seed, budget))
        .collect::<CliResult<Vec<_>>>()?;
    for (i, (image, e)) in images.iter().zip(embedded).enumerate() {
        let cover = score_image(&e.cover_reports)?;
        let stego = score_image(&e.stego_reports)?;
        let unsolved_modified = e
            .modified
            .iter()
            .filter(|&&b| e.stego_reports[b].status == BlockStatus::Unsolved)
            .count();
        false_alarms += cover.stego_proven() as u64;
        proven += stego.stego_proven() as u64;
        let n = cover.n_blocks as u64;
        let stats = [
            ("nzac", count_nzac(&image.compress(&codec)?) as f64),
            ("changes", e.changes as f64),
            ("modified_blocks", e.modified.len() as f64),
            ("incompatible_blocks", stego.n_incompatible as f64),
            ("unsolved_modified_blocks", unsolved_modified as f64),
            ("cover_incompatible_blocks", cover.n_incompatible as f64),
            ("skipped_blocks", cover.n_skipped as f64),
            ("stego_proven", stego.stego_proven() as u8 as f64),
        ];
        for stat in stats {
            rows.push(ResultRow::new("payload-detect", &shape, param, stat, n).for_item(i));
        }
    }
    let n = images.len() as u64;
    rows.push(ResultRow::proportion("payload-detect", &shape, param, "cover_false_alarm_images", false_alarms, n));
    rows.push(ResultRow::proportion("payload-detect", &shape, param, "stego_proven_images", proven, n));
    Ok(rows)
}

/// The timing attack: unsolved ratios of covers and LSBM stego images, and
/// the detector error, per budget.
pub fn timing(cfg: &ExperimentConfig) -> CliResult<Vec<ResultRow>> {
    if cfg.budgets.is_empty() {
        return Err(CliError::Usage("timing needs at least one budget".into()));
    }
    let codec = cfg.codec()?;
    let images = load_images(cfg)?;
    let seeds = derived_seeds(cfg.seed, EMBED_STREAM, images.len());
    let node_mode = cfg.budgets.iter().all(|b| b.max_time.is_none());

    let curve: DetectorCurve = if node_mode {
        let top = *cfg.budgets.last().expect("non-empty");
        let embedded = images
            .par_iter()
            .zip(&seeds)
            .map(|(image, &seed)| embed_and_classify(image, &codec, cfg.payload, seed, top))
            .collect::<CliResult<Vec<_>>>()?;
        let (cover, stego): (Vec<_>, Vec<_>) = embedded
            .into_iter()
            .map(|e| (e.cover_reports, e.stego_reports))
            .unzip();
        curve_from_reports(&cover, &stego, &cfg.budgets)?
    } else {
        let mut cover = Vec::with_capacity(images.len());
        let mut stego = Vec::with_capacity(images.len());
        for (image, &seed) in images.iter().zip(&seeds) {
            let blocks = image.compress(&codec)?;
            stego.push(EmbeddingParams { payload: cfg.payload, seed }.embed(&blocks)?.0);
            cover.push(blocks);
        }
        timing_curve(&cover, &stego, codec.dct(), &cfg.budgets)?
    };

    let shape = cfg.shape_label();
    let mut rows = Vec::new();
    for point in &curve.points {
        let param = match (point.budget.max_nodes, point.budget.max_time) {
            (Some(n), None) => ("budget_nodes", n as f64),
            (_, Some(t)) => ("budget_seconds", t.as_secs_f64()),
            (None, None) => unreachable!("budgets are validated"),
        };
        for (class, scores) in [("cover", &point.cover), ("stego", &point.stego)] {
            for (i, s) in scores.iter().enumerate() {
                let eligible = (s.n_blocks - s.n_skipped - s.n_ignored) as u64;
                rows.push(
                    ResultRow::new("timing", &shape, param, (&format!("{class}_unsolved_ratio"), s.unsolved_ratio), eligible)
                        .for_item(i),
                );
            }
            let n = scores.len() as u64;
            let at_zero = scores.iter().filter(|s| s.unsolved_ratio == 0.0).count() as u64;
            let proven = scores.iter().filter(|s| s.stego_proven()).count() as u64;
            rows.push(ResultRow::proportion("timing", &shape, param, &format!("{class}_mass_at_zero"), at_zero, n));
            rows.push(ResultRow::proportion("timing", &shape, param, &format!("{class}_stego_proven"), proven, n));
        }
        let n = (point.cover.len() + point.stego.len()) as u64;
        rows.push(ResultRow::new("timing", &shape, param, ("pe", point.pe.pe), n));
        rows.push(ResultRow::new("timing", &shape, param, ("p_fa", point.pe.p_fa), n));
        rows.push(ResultRow::new("timing", &shape, param, ("p_md", point.pe.p_md), n));
    }
    Ok(rows)
}

/// Block given on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockInput {
    Pixels(Vec<i32>),
    Coeffs(Vec<i32>),
}

fn join<T: std::fmt::Display>(values: impl IntoIterator<Item = T>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

/// Compresses (if needed), decompresses and solves one block, returning a
/// human-readable report.
pub fn verify_block(input: &BlockInput, codec: &BlockCodec, budget: Budget) -> CliResult<String> {
    let shape = codec.shape();
    let mut out = String::new();
    let block = match input {
        BlockInput::Pixels(px) => {
            let x = PixelBlock::from_i32(shape, px).map_err(|e| CliError::Usage(e.to_string()))?;
            let (c, err) = codec.compress(&x)?;
            writeln!(out, "pixels:        {}", join(x.values())).ok();
            writeln!(out, "dct error u:   {}", join(err.u.iter().map(|v| format!("{v:.4}")))).ok();
            c
        }
        BlockInput::Coeffs(c) => DctBlock::new(shape, c.clone(), codec.quant().clone())
            .map_err(|e| CliError::Usage(e.to_string()))?,
    };
    let spatial = codec.decompress(&block)?;
    writeln!(out, "shape:         {shape}").ok();
    writeln!(out, "coefficients:  {}", join(block.coeffs())).ok();
    writeln!(out, "decompressed:  {}", join(spatial.y.iter().map(|v| format!("{v:.4}")))).ok();
    writeln!(out, "rounded:       {}", join(&spatial.rounded)).ok();
    writeln!(out, "spatial err e: {}", join(spatial.e.iter().map(|v| format!("{v:.4}")))).ok();
    writeln!(out, "clipped:       {}", if spatial.clipped { "yes" } else { "no" }).ok();

    let system = ConstraintSystem::from_block(&block, codec.dct(), DEFAULT_EPS)?;
    let verdict = Solver::default().solve(&system, budget)?;
    check_feasible(&block, codec.dct(), &verdict)?;
    let label = match &verdict.outcome {
        Outcome::Feasible(_) => "feasible (compatible)",
        Outcome::Infeasible => "infeasible (incompatible: no antecedent exists)",
        Outcome::Exhausted => "unsolved (budget exhausted)",
        Outcome::Ignored(_) => "ignored",
    };
    writeln!(out, "verdict:       {label}").ok();
    if let Outcome::Feasible(k) = &verdict.outcome {
        writeln!(out, "offset k:      {}", join(&k.0)).ok();
        writeln!(out, "antecedent:    {}", join(system.candidate(&k.0)?.values())).ok();
    }
    writeln!(out, "nodes:         {}", verdict.nodes).ok();
    writeln!(out, "elapsed:       {:.3} ms", verdict.elapsed.as_secs_f64() * 1e3).ok();
    if let Ok(all) = all_antecedents(&system, 1_000_000) {
        let listed: Vec<String> = all
            .iter()
            .map(|k| Ok(format!("({})", join(system.candidate(&k.0)?.values()))))
            .collect::<CliResult<_>>()?;
        writeln!(out, "antecedents:   {}", if listed.is_empty() { "none".into() } else { listed.join(" ") }).ok();
    }
    Ok(out)
}

/// Per-image scores under one budget, for callers that want them directly.
pub fn score_images(images: &[GrayImage], codec: &BlockCodec, budget: Budget) -> CliResult<Vec<ImageScore>> {
    images
        .iter()
        .map(|img| {
            let blocks = img.compress(codec)?;
            let reports = classify_image(&blocks, codec.dct(), budget)?;
            check_reports(&blocks, codec.dct(), &reports)?;
            Ok(score_image(&reports)?)
        })
        .collect()
}
