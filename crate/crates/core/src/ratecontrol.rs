//! Gradient-guided mask refinement under a bit budget.
//!
//! Start with every superblock at the largest block size, then repeatedly
//! score superblocks by the metric gradient over their pixels and split the
//! highest-scoring ones to the next smaller block size. Every candidate mask
//! is encoded for real; the first candidate that overshoots the budget is
//! discarded and the previous stream is returned.

use std::fmt;

use thiserror::Error;

use crate::codec::{encode_padded, reconstruct, Encoded};
use crate::error::Error;
use crate::image::{psnr, ImageF, ImageU8};
use crate::metric::MetricPlugin;
use crate::quant::{straight_through_backward, QuantSpec};
use crate::rap::{pad_to_superblocks, BlockSizeSet, MaskGrid};

#[derive(Debug, Error, PartialEq)]
pub enum RateError {
    #[error("budget must be a positive number of bits per pixel, got {0}")]
    Budget(f64),
    #[error("refine fraction must lie in (0, 1], got {0}")]
    RefineFraction(f64),
    #[error("max loops must be at least 1")]
    MaxLoops,
    #[error("every superblock is already at block size 1")]
    NothingRefinable,
    #[error("expected {expected} scores, got {actual}")]
    ScoreCount { expected: usize, actual: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Budget {
    target_bpp: f64,
}

impl Budget {
    pub fn new(target_bpp: f64) -> Result<Self, RateError> {
        if !(target_bpp.is_finite() && target_bpp > 0.0) {
            return Err(RateError::Budget(target_bpp));
        }
        Ok(Budget { target_bpp })
    }

    pub fn target_bpp(&self) -> f64 {
        self.target_bpp
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefineConfig {
    pub max_loops: usize,
    /// Fraction of currently refinable superblocks split per loop; at least
    /// one is always split.
    pub refine_fraction: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            max_loops: 32,
            refine_fraction: 0.05,
        }
    }
}

impl RefineConfig {
    pub fn new(max_loops: usize, refine_fraction: f64) -> Result<Self, RateError> {
        let cfg = RefineConfig {
            max_loops,
            refine_fraction,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RateError> {
        if self.max_loops == 0 {
            return Err(RateError::MaxLoops);
        }
        if !(self.refine_fraction > 0.0 && self.refine_fraction <= 1.0) {
            return Err(RateError::RefineFraction(self.refine_fraction));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    BudgetReached,
    MaxLoops,
    FullyRefined,
    /// The coarsest mask already exceeds the budget; its stream is returned.
    InitialOvershoot,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::BudgetReached => "budget-reached",
            Termination::MaxLoops => "max-loops",
            Termination::FullyRefined => "fully-refined",
            Termination::InitialOvershoot => "initial-overshoot",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One accepted mask in the refinement loop.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub bpp: f64,
    pub loss: f64,
    pub tile_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodeReport {
    pub achieved_bpp: f64,
    pub mask_overhead_fraction: f64,
    pub mask_bytes: usize,
    pub residual_bytes: usize,
    /// Refinement steps attempted, including a reverted final one.
    pub loops_used: usize,
    pub termination: Termination,
    pub psnr: f64,
    pub trace: Vec<TraceEntry>,
}

impl EncodeReport {
    /// Flat `key: value` text block.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("achieved_bpp: {:.6}\n", self.achieved_bpp));
        s.push_str(&format!(
            "mask_overhead: {:.6}\n",
            self.mask_overhead_fraction
        ));
        s.push_str(&format!("mask_bytes: {}\n", self.mask_bytes));
        s.push_str(&format!("residual_bytes: {}\n", self.residual_bytes));
        s.push_str(&format!("psnr: {}\n", format_psnr(self.psnr)));
        s.push_str(&format!("loops: {}\n", self.loops_used));
        s.push_str(&format!("termination: {}\n", self.termination));
        for (i, t) in self.trace.iter().enumerate() {
            s.push_str(&format!(
                "trace[{i}]: bpp={:.6} loss={:.9e} tiles={}\n",
                t.bpp, t.loss, t.tile_count
            ));
        }
        s
    }

    /// `file,bpp,mask_overhead,psnr,loops,termination` row (no newline).
    pub fn csv_row(&self, file: &str) -> String {
        format!(
            "{},{:.6},{:.6},{},{},{}",
            file,
            self.achieved_bpp,
            self.mask_overhead_fraction,
            format_psnr(self.psnr),
            self.loops_used,
            self.termination
        )
    }
}

pub const REPORT_CSV_HEADER: &str = "file,bpp,mask_overhead,psnr,loops,termination";

pub fn format_psnr(p: f64) -> String {
    if p.is_infinite() {
        "inf".to_string()
    } else {
        format!("{p:.4}")
    }
}

/// Every superblock at the largest block size.
pub fn init_mask(
    padded_height: usize,
    padded_width: usize,
    max_block: usize,
) -> Result<MaskGrid, Error> {
    let sizes = BlockSizeSet::new(max_block)?;
    Ok(MaskGrid::for_padded(
        sizes,
        padded_height,
        padded_width,
        max_block,
    )?)
}

/// Per-superblock sums of `|∂loss/∂x_RAP|` at the current reconstruction,
/// plus the loss value itself.
pub fn superblock_scores(
    padded: &ImageF,
    mask: &MaskGrid,
    quant: &QuantSpec,
    metric: &dyn MetricPlugin,
) -> Result<(Vec<f64>, f64), Error> {
    let rec = reconstruct(padded, mask, quant)?;
    let eval = metric.evaluate(&rec.values, padded)?;
    let grad = straight_through_backward(&eval.grad, &rec.mosaic, quant)?;
    let n = mask.max_block();
    let k = padded.channels();
    let mut scores = vec![0.0; mask.rows() * mask.cols()];
    for r in 0..padded.height() {
        let row_base = (r / n) * mask.cols();
        for c in 0..padded.width() {
            let cell = row_base + c / n;
            for ch in 0..k {
                scores[cell] += grad.get(r, c, ch).abs();
            }
        }
    }
    Ok((scores, eval.value))
}

/// Splits the top `⌈fraction × refinable⌉` refinable superblocks by score to
/// their next smaller block size. Ties go to the lower raster index.
pub fn refine_step(
    mask: &MaskGrid,
    scores: &[f64],
    cfg: &RefineConfig,
) -> Result<MaskGrid, RateError> {
    cfg.validate()?;
    let cells = mask.cells();
    if scores.len() != cells.len() {
        return Err(RateError::ScoreCount {
            expected: cells.len(),
            actual: scores.len(),
        });
    }
    let mut candidates: Vec<usize> = (0..cells.len()).filter(|&i| cells[i] > 1).collect();
    if candidates.is_empty() {
        return Err(RateError::NothingRefinable);
    }
    let take = ((cfg.refine_fraction * candidates.len() as f64).ceil() as usize)
        .clamp(1, candidates.len());
    // stable sort keeps raster order among equal scores
    candidates.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut next = mask.clone();
    for &i in &candidates[..take] {
        let smaller = mask.sizes().next_smaller(cells[i]).expect("refinable cell");
        next.set(i / mask.cols(), i % mask.cols(), smaller)
            .expect("allowed size");
    }
    Ok(next)
}

/// Everything `encode_with_budget` needs besides the image.
#[derive(Clone)]
pub struct EncoderSettings<'a> {
    pub budget: Budget,
    pub refine: RefineConfig,
    pub quant: QuantSpec,
    pub max_block: usize,
    pub metric: &'a dyn MetricPlugin,
}

pub fn encode_with_budget(
    img: &ImageU8,
    settings: &EncoderSettings<'_>,
) -> Result<(Encoded, EncodeReport), Error> {
    settings
        .refine
        .validate()
        .map_err(|e| Error::Config(e.to_string()))?;
    let budget = settings.budget.target_bpp();
    let quant = &settings.quant;
    let padded = pad_to_superblocks(img, settings.max_block);
    let mut mask = init_mask(
        padded.image.height(),
        padded.image.width(),
        settings.max_block,
    )?;
    let mut enc = encode_padded(&padded, &mask, quant)?;
    let (mut scores, loss) = superblock_scores(&padded.image, &mask, quant, settings.metric)?;
    let mut trace = vec![TraceEntry {
        bpp: enc.bpp(),
        loss,
        tile_count: mask.tile_count(),
    }];

    let mut loops = 0;
    let termination = if enc.bpp() > budget {
        Termination::InitialOvershoot
    } else {
        loop {
            if mask.is_fully_refined() {
                break Termination::FullyRefined;
            }
            if loops == settings.refine.max_loops {
                break Termination::MaxLoops;
            }
            let candidate = refine_step(&mask, &scores, &settings.refine)
                .map_err(|e| Error::Config(e.to_string()))?;
            loops += 1;
            let cand_enc = encode_padded(&padded, &candidate, quant)?;
            if cand_enc.bpp() > budget {
                break Termination::BudgetReached;
            }
            mask = candidate;
            enc = cand_enc;
            let (s, loss) = superblock_scores(&padded.image, &mask, quant, settings.metric)?;
            scores = s;
            trace.push(TraceEntry {
                bpp: enc.bpp(),
                loss,
                tile_count: mask.tile_count(),
            });
        }
    };

    let report = EncodeReport {
        achieved_bpp: enc.bpp(),
        mask_overhead_fraction: enc.mask_overhead(),
        mask_bytes: enc.container.mask_bytes.len(),
        residual_bytes: enc.container.residual_bytes.len(),
        loops_used: loops,
        termination,
        psnr: psnr(img, &enc.decoded_image())?,
        trace,
    };
    Ok((enc, report))
}
