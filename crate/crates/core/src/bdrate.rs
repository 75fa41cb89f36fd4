//! Bjøntegaard delta rate with bits per pixel as the rate axis and any
//! scalar quality (PSNR, verification accuracy, ...) as the distortion axis.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BdError {
    #[error("a rate-distortion curve needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("rate {0} is not a positive finite number")]
    BadRate(f64),
    #[error("quality {0} is not finite")]
    BadQuality(f64),
    #[error("qualities must be strictly increasing")]
    NonMonotone,
    #[error("duplicate quality value {0}")]
    DuplicateQuality(f64),
    #[error("quality ranges do not overlap")]
    NoOverlap,
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("least-squares fit failed")]
    Fit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RdPoint {
    pub rate: f64,
    pub quality: f64,
}

/// Rate-distortion points ordered by strictly increasing quality.
#[derive(Clone, Debug, PartialEq)]
pub struct RdCurve {
    points: Vec<RdPoint>,
}

impl RdCurve {
    pub fn new(points: Vec<RdPoint>) -> Result<Self, BdError> {
        if points.len() < 4 {
            return Err(BdError::TooFewPoints(points.len()));
        }
        for p in &points {
            if !(p.rate.is_finite() && p.rate > 0.0) {
                return Err(BdError::BadRate(p.rate));
            }
            if !p.quality.is_finite() {
                return Err(BdError::BadQuality(p.quality));
            }
        }
        if points.windows(2).any(|w| w[1].quality <= w[0].quality) {
            return Err(BdError::NonMonotone);
        }
        Ok(RdCurve { points })
    }

    /// Builds a curve from `(rate, quality)` pairs in any order.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self, BdError> {
        let mut points: Vec<RdPoint> = pairs
            .iter()
            .map(|&(rate, quality)| RdPoint { rate, quality })
            .collect();
        sort_and_dedup_check(&mut points)?;
        Self::new(points)
    }

    pub fn points(&self) -> &[RdPoint] {
        &self.points
    }

    pub fn quality_range(&self) -> (f64, f64) {
        (
            self.points[0].quality,
            self.points[self.points.len() - 1].quality,
        )
    }
}

fn sort_and_dedup_check(points: &mut [RdPoint]) -> Result<(), BdError> {
    if let Some(p) = points.iter().find(|p| !p.quality.is_finite()) {
        return Err(BdError::BadQuality(p.quality));
    }
    points.sort_by(|a, b| a.quality.total_cmp(&b.quality));
    if let Some(w) = points.windows(2).find(|w| w[0].quality == w[1].quality) {
        return Err(BdError::DuplicateQuality(w[0].quality));
    }
    Ok(())
}

/// Cubic in a normalized variable `t = (q − center) / scale`.
#[derive(Clone, Copy, Debug)]
pub struct CubicFit {
    center: f64,
    scale: f64,
    coeffs: [f64; 4],
}

impl CubicFit {
    /// Least-squares fit of `log10(rate)` against quality.
    pub fn log_rate(curve: &RdCurve) -> Result<Self, BdError> {
        let pts = curve.points();
        let n = pts.len() as f64;
        let center = pts.iter().map(|p| p.quality).sum::<f64>() / n;
        let (lo, hi) = curve.quality_range();
        let scale = (hi - lo) / 2.0;
        let design = DMatrix::from_fn(pts.len(), 4, |i, j| {
            ((pts[i].quality - center) / scale).powi(j as i32)
        });
        let target = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.rate.log10()));
        let sol = design
            .svd(true, true)
            .solve(&target, 1e-14)
            .map_err(|_| BdError::Fit)?;
        Ok(CubicFit {
            center,
            scale,
            coeffs: [sol[0], sol[1], sol[2], sol[3]],
        })
    }

    pub fn eval(&self, quality: f64) -> f64 {
        let t = (quality - self.center) / self.scale;
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    fn antiderivative_t(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (j, &c)| acc * t + c / (j + 1) as f64)
            * t
    }

    /// Exact `∫ p(q) dq` over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let ta = (a - self.center) / self.scale;
        let tb = (b - self.center) / self.scale;
        self.scale * (self.antiderivative_t(tb) - self.antiderivative_t(ta))
    }
}

/// Overlapping quality interval of two curves.
pub fn overlap(anchor: &RdCurve, test: &RdCurve) -> Result<(f64, f64), BdError> {
    let (a_lo, a_hi) = anchor.quality_range();
    let (t_lo, t_hi) = test.quality_range();
    let lo = a_lo.max(t_lo);
    let hi = a_hi.min(t_hi);
    if hi <= lo {
        return Err(BdError::NoOverlap);
    }
    Ok((lo, hi))
}

/// Average rate difference of `test` against `anchor`, in percent. Negative
/// means `test` needs fewer bits for the same quality.
pub fn bd_rate(anchor: &RdCurve, test: &RdCurve) -> Result<f64, BdError> {
    let (lo, hi) = overlap(anchor, test)?;
    let pa = CubicFit::log_rate(anchor)?;
    let pt = CubicFit::log_rate(test)?;
    let mean_diff = (pt.integral(lo, hi) - pa.integral(lo, hi)) / (hi - lo);
    Ok((10f64.powf(mean_diff) - 1.0) * 100.0)
}

pub fn format_bd_rate(percent: f64) -> String {
    format!("{percent:+.2}%")
}

/// Parses rate-distortion CSV. Without a header every line is
/// `rate,quality`. A non-numeric first line is a header: the rate column is
/// `rate` or `bpp`, the quality column `quality` or `psnr` (so `lfic
/// rd-sweep` output is accepted as is); a two-column header with other names
/// is read positionally. Blank lines are ignored; points are sorted by
/// quality.
pub fn parse_rd_csv(text: &str) -> Result<RdCurve, BdError> {
    let mut points = Vec::new();
    let mut columns: Option<(usize, usize, usize)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let malformed = |reason: String| BdError::Malformed {
            line: idx + 1,
            reason,
        };
        let (width, rate_col, quality_col) = match columns {
            Some(c) => c,
            None => {
                let numeric = fields.iter().all(|f| f.parse::<f64>().is_ok());
                let c = if numeric {
                    (2, 0, 1)
                } else {
                    let find = |names: &[&str]| {
                        fields
                            .iter()
                            .position(|f| names.contains(&f.to_ascii_lowercase().as_str()))
                    };
                    match (find(&["rate", "bpp"]), find(&["quality", "psnr"])) {
                        (Some(r), Some(q)) => (fields.len(), r, q),
                        _ if fields.len() == 2 => (2, 0, 1),
                        _ => {
                            return Err(malformed(format!(
                                "header `{line}` names no rate/quality columns"
                            )))
                        }
                    }
                };
                columns = Some(c);
                if !numeric {
                    continue;
                }
                c
            }
        };
        if fields.len() != width {
            return Err(malformed(format!("expected {width} fields, got `{line}`")));
        }
        let rate = fields[rate_col].parse::<f64>();
        let quality = fields[quality_col].parse::<f64>();
        match (rate, quality) {
            (Ok(rate), Ok(quality)) => points.push(RdPoint { rate, quality }),
            _ => return Err(malformed(format!("non-numeric values in `{line}`"))),
        }
    }
    sort_and_dedup_check(&mut points)?;
    RdCurve::new(points)
}
