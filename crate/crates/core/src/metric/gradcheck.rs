//! Central finite-difference check of the analytic metric gradients.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{con_loss, sem_loss, total_loss, EmbeddingNet, LossEval, LossWeights, MetricError};
use crate::image::{Image, ImageF, Shape};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    Content,
    Semantic,
    Total,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Content => "content",
            LossKind::Semantic => "semantic",
            LossKind::Total => "total",
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    pub probes: usize,
    pub step: f64,
    pub tolerance: f64,
    pub height: usize,
    pub width: usize,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            probes: 10,
            step: 1e-5,
            tolerance: 1e-5,
            height: 24,
            width: 20,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProbeResult {
    pub loss: LossKind,
    pub probe: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub results: Vec<ProbeResult>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&ProbeResult> {
        self.results
            .iter()
            .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }

    pub fn worst_for(&self, kind: LossKind) -> Option<&ProbeResult> {
        self.results
            .iter()
            .filter(|r| r.loss == kind)
            .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }

    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.rel_error <= self.tolerance)
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for kind in [LossKind::Content, LossKind::Semantic, LossKind::Total] {
            let n = self.results.iter().filter(|r| r.loss == kind).count();
            if let Some(w) = self.worst_for(kind) {
                let verdict = if w.rel_error <= self.tolerance {
                    "PASS"
                } else {
                    "FAIL"
                };
                writeln!(
                    f,
                    "{kind}: {n} probes, worst relative error {:.3e} (probe {}) {verdict}",
                    w.rel_error, w.probe
                )?;
            }
        }
        let worst = self.worst().map_or(0.0, |w| w.rel_error);
        writeln!(
            f,
            "{} (worst {:.3e}, tolerance {:.0e})",
            if self.passed() { "PASS" } else { "FAIL" },
            worst,
            self.tolerance
        )
    }
}

/// `|a − b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Analytic directional derivative `⟨∇f(x), d⟩` and its central difference
/// `(f(x + h·d) − f(x − h·d)) / 2h`.
pub fn directional_derivative(
    f: impl Fn(&ImageF) -> Result<LossEval, MetricError>,
    x: &ImageF,
    dir: &ImageF,
    step: f64,
) -> Result<(f64, f64), MetricError> {
    let at = f(x)?;
    let analytic = at
        .grad
        .data()
        .iter()
        .zip(dir.data())
        .map(|(g, d)| g * d)
        .sum();
    let shifted = |sign: f64| {
        let data = x
            .data()
            .iter()
            .zip(dir.data())
            .map(|(v, d)| v + sign * step * d)
            .collect();
        Image::from_vec(x.shape(), data)
    };
    let plus = f(&shifted(1.0)?)?.value;
    let minus = f(&shifted(-1.0)?)?.value;
    Ok((analytic, (plus - minus) / (2.0 * step)))
}

/// Entries uniform in `[-1, 1]`, left unnormalized so each sample moves by
/// about `step`, far above the rounding granularity of 8-bit-scale values.
fn random_direction(rng: &mut ChaCha8Rng, shape: Shape) -> ImageF {
    Image::from_fn(shape, |_, _, _| rng.gen_range(-1.0..1.0))
}

/// Runs `cfg.probes` random probes per loss. Without a network only the
/// content and (pixel-only) total losses are checked.
pub fn run_grad_check(
    net: Option<&EmbeddingNet>,
    weights: &LossWeights,
    seed: u64,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport, MetricError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = net.map_or(3, EmbeddingNet::in_channels);
    let shape = Shape::new(cfg.height, cfg.width, channels);
    let mut kinds = vec![LossKind::Content];
    if net.is_some() {
        kinds.push(LossKind::Semantic);
    }
    kinds.push(LossKind::Total);

    let mut results = Vec::new();
    for kind in kinds {
        for probe in 0..cfg.probes {
            let target = Image::from_fn(shape, |_, _, _| rng.gen_range(0.0..255.0));
            let recon = target.map(|v| v + rng.gen_range(-20.0..20.0));
            let dir = random_direction(&mut rng, shape);
            let (analytic, numeric) = match kind {
                LossKind::Content => {
                    directional_derivative(|r| con_loss(r, &target), &recon, &dir, cfg.step)?
                }
                LossKind::Semantic => directional_derivative(
                    |r| sem_loss(r, &target, net.expect("semantic check needs a network")),
                    &recon,
                    &dir,
                    cfg.step,
                )?,
                LossKind::Total => directional_derivative(
                    |r| total_loss(r, &target, net, weights, None),
                    &recon,
                    &dir,
                    cfg.step,
                )?,
            };
            results.push(ProbeResult {
                loss: kind,
                probe,
                analytic,
                numeric,
                rel_error: relative_error(analytic, numeric),
            });
        }
    }
    Ok(GradCheckReport {
        results,
        tolerance: cfg.tolerance,
    })
}
