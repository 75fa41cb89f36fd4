//! Synthetic images and corpus-level evaluation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::codec::decode;
use crate::error::Error;
use crate::image::{load_pnm, save_pnm, Image, ImageU8, Shape};
use crate::metric::TotalLoss;
use crate::quant::QuantSpec;
use crate::ratecontrol::{
    encode_with_budget, format_psnr, Budget, EncodeReport, EncoderSettings, RefineConfig,
    Termination,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SynthKind {
    Constant {
        value: u8,
    },
    /// Diagonal ramp from 0 at the top-left to 255 at the bottom-right,
    /// channels offset by a third of the range.
    Ramp,
    Checkerboard {
        period: usize,
    },
    GaussianBlobs {
        count: usize,
    },
    /// Black image with a vertical black/white edge through the middle of
    /// one `block × block` superblock.
    EdgeInSuperblock {
        row: usize,
        col: usize,
        block: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub kind: SynthKind,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(kind: SynthKind, height: usize, width: usize, channels: usize, seed: u64) -> Self {
        SyntheticSpec {
            kind,
            height,
            width,
            channels,
            seed,
        }
    }
}

pub fn gen_image(spec: &SyntheticSpec) -> Result<ImageU8, Error> {
    let (h, w, k) = (spec.height, spec.width, spec.channels);
    if h == 0 || w == 0 || h > u16::MAX as usize || w > u16::MAX as usize {
        return Err(Error::Config(format!(
            "invalid synthetic dimensions {h}x{w}"
        )));
    }
    if k != 1 && k != 3 {
        return Err(Error::Config(format!("invalid channel count {k}")));
    }
    let shape = Shape::new(h, w, k);
    let img = match spec.kind {
        SynthKind::Constant { value } => Image::filled(shape, value),
        SynthKind::Ramp => {
            let span = (h + w - 2).max(1) as f64;
            Image::from_fn(shape, |r, c, ch| {
                let t = (r + c) as f64 / span * 255.0 + ch as f64 * 85.0;
                (t % 256.0).round() as u8
            })
        }
        SynthKind::Checkerboard { period } => {
            if period == 0 {
                return Err(Error::Config("checkerboard period must be positive".into()));
            }
            Image::from_fn(shape, |r, c, _| {
                if (r / period + c / period) % 2 == 0 {
                    0
                } else {
                    255
                }
            })
        }
        SynthKind::GaussianBlobs { count } => gaussian_blobs(shape, count, spec.seed),
        SynthKind::EdgeInSuperblock { row, col, block } => {
            if block == 0 || (row + 1) * block > h || (col + 1) * block > w {
                return Err(Error::Config(format!(
                    "superblock ({row}, {col}) outside a {h}x{w} image"
                )));
            }
            let mid = col * block + block / 2;
            Image::from_fn(shape, |r, c, _| {
                let inside = r / block == row && c / block == col;
                if inside && c >= mid {
                    255
                } else {
                    0
                }
            })
        }
    };
    Ok(img)
}

fn gaussian_blobs(shape: Shape, count: usize, seed: u64) -> ImageU8 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (shape.height as f64, shape.width as f64);
    let background: Vec<f64> = (0..shape.channels)
        .map(|_| rng.gen_range(40.0..120.0))
        .collect();
    let blobs: Vec<(f64, f64, f64, Vec<f64>)> = (0..count)
        .map(|_| {
            let cy = rng.gen_range(0.0..h);
            let cx = rng.gen_range(0.0..w);
            let sigma = rng.gen_range(0.04..0.2) * h.min(w);
            let amp = (0..shape.channels)
                .map(|_| rng.gen_range(-90.0..140.0))
                .collect();
            (cy, cx, sigma, amp)
        })
        .collect();
    Image::from_fn(shape, |r, c, ch| {
        let mut v = background[ch];
        for (cy, cx, sigma, amp) in &blobs {
            let d2 = (r as f64 - cy).powi(2) + (c as f64 - cx).powi(2);
            v += amp[ch] * (-d2 / (2.0 * sigma * sigma)).exp();
        }
        v.round().clamp(0.0, 255.0) as u8
    })
}

/// Named synthetic images mixing all kinds and several sizes, including
/// 144×112×3 and sizes that are not multiples of 8.
pub fn synthetic_corpus(count: usize, seed: u64) -> Vec<(String, ImageU8)> {
    let dims = [
        (144, 112, 3),
        (145, 113, 3),
        (64, 48, 1),
        (37, 53, 3),
        (16, 16, 1),
        (72, 96, 3),
        (9, 130, 1),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let (h, w, k) = dims[i % dims.len()];
            let kind = match i % 5 {
                0 => SynthKind::GaussianBlobs {
                    count: rng.gen_range(3..9),
                },
                1 => SynthKind::Ramp,
                2 => SynthKind::Checkerboard {
                    period: [2, 3, 5, 8, 12][rng.gen_range(0..5)],
                },
                3 => SynthKind::Constant { value: rng.gen() },
                _ => SynthKind::EdgeInSuperblock {
                    row: rng.gen_range(0..h / 8),
                    col: rng.gen_range(0..w / 8),
                    block: 8,
                },
            };
            let spec = SyntheticSpec::new(kind, h, w, k, rng.gen());
            (
                format!("synth_{i:03}.{}", if k == 1 { "pgm" } else { "ppm" }),
                gen_image(&spec).expect("valid spec"),
            )
        })
        .collect()
}

/// Face-like test images: smooth blobs at the native 144×112×3 size.
pub fn blob_corpus(count: usize, seed: u64) -> Vec<(String, ImageU8)> {
    (0..count)
        .map(|i| {
            let spec = SyntheticSpec::new(
                SynthKind::GaussianBlobs { count: 6 + i % 5 },
                144,
                112,
                3,
                seed + i as u64,
            );
            (
                format!("blobs_{i:03}.ppm"),
                gen_image(&spec).expect("valid spec"),
            )
        })
        .collect()
}

pub fn write_corpus(dir: &Path, images: &[(String, ImageU8)]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, img) in images {
        fs::write(dir.join(name), save_pnm(img))?;
    }
    Ok(())
}

/// `.pgm`/`.ppm` files of a directory, sorted by file name.
pub fn list_corpus(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some("pgm" | "ppm" | "pnm")
                )
        })
        .collect();
    files.sort();
    Ok(files)
}

#[derive(Clone)]
pub struct SuiteConfig {
    pub budget: Budget,
    pub refine: RefineConfig,
    pub quant: QuantSpec,
    pub max_block: usize,
    pub metric: TotalLoss,
    /// Accepted band for the corpus-mean mask overhead fraction.
    pub overhead_band: (f64, f64),
}

#[derive(Clone, Debug)]
pub struct FileResult {
    pub name: String,
    pub report: EncodeReport,
    pub decode_exact: bool,
}

#[derive(Clone, Debug)]
pub struct SuiteCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub files: Vec<FileResult>,
    pub mean_bpp: f64,
    /// Mean over files with finite PSNR.
    pub mean_psnr: f64,
    pub lossless_files: usize,
    pub mean_overhead: f64,
    pub checks: Vec<SuiteCheck>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "files: {}", self.files.len());
        let _ = writeln!(s, "mean_bpp: {:.6}", self.mean_bpp);
        let _ = writeln!(s, "mean_psnr: {}", format_psnr(self.mean_psnr));
        let _ = writeln!(s, "lossless_files: {}", self.lossless_files);
        let _ = writeln!(s, "mean_mask_overhead: {:.6}", self.mean_overhead);
        let in_target_band = self
            .files
            .iter()
            .filter(|f| (0.05..=0.10).contains(&f.report.mask_overhead_fraction))
            .count();
        let _ = writeln!(s, "files_with_overhead_in_5_10_percent: {in_target_band}");
        for c in &self.checks {
            let _ = writeln!(
                s,
                "[{}] {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        let _ = writeln!(s, "result: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(crate::ratecontrol::REPORT_CSV_HEADER);
        s.push('\n');
        for f in &self.files {
            s.push_str(&f.report.csv_row(&f.name));
            s.push('\n');
        }
        s
    }
}

fn encode_one(name: String, img: &ImageU8, cfg: &SuiteConfig) -> Result<FileResult, Error> {
    let settings = EncoderSettings {
        budget: cfg.budget,
        refine: cfg.refine,
        quant: cfg.quant,
        max_block: cfg.max_block,
        metric: &cfg.metric,
    };
    let (enc, report) = encode_with_budget(img, &settings)?;
    let dec = decode(&enc.bytes)?;
    let decode_exact = dec.indices == enc.indices && dec.image == enc.decoded_image();
    Ok(FileResult {
        name,
        report,
        decode_exact,
    })
}

/// Encodes every image, decodes it back, and evaluates the invariant battery.
pub fn run_images(images: &[(String, ImageU8)], cfg: &SuiteConfig) -> Result<SuiteReport, Error> {
    if images.is_empty() {
        return Err(Error::Config("corpus is empty".into()));
    }
    let mut sorted: Vec<&(String, ImageU8)> = images.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let files = sorted
        .par_iter()
        .map(|(name, img)| encode_one(name.clone(), img, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize(files, cfg))
}

pub fn run_suite(corpus_dir: &Path, cfg: &SuiteConfig) -> Result<SuiteReport, Error> {
    let paths = list_corpus(corpus_dir)
        .map_err(|e| Error::Config(format!("{}: {e}", corpus_dir.display())))?;
    let images = paths
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok((name, load_pnm(&bytes)?))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    run_images(&images, cfg)
}

fn summarize(files: Vec<FileResult>, cfg: &SuiteConfig) -> SuiteReport {
    let n = files.len() as f64;
    let mean_bpp = files.iter().map(|f| f.report.achieved_bpp).sum::<f64>() / n;
    let finite: Vec<f64> = files
        .iter()
        .map(|f| f.report.psnr)
        .filter(|p| p.is_finite())
        .collect();
    let mean_psnr = if finite.is_empty() {
        f64::INFINITY
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    let mean_overhead = files
        .iter()
        .map(|f| f.report.mask_overhead_fraction)
        .sum::<f64>()
        / n;
    let budget = cfg.budget.target_bpp();

    let inexact: Vec<&str> = files
        .iter()
        .filter(|f| !f.decode_exact)
        .map(|f| f.name.as_str())
        .collect();
    let over: Vec<&str> = files
        .iter()
        .filter(|f| {
            f.report.termination != Termination::InitialOvershoot && f.report.achieved_bpp > budget
        })
        .map(|f| f.name.as_str())
        .collect();
    let non_increasing: Vec<&str> = files
        .iter()
        .filter(|f| {
            f.report
                .trace
                .windows(2)
                .any(|w| w[1].tile_count <= w[0].tile_count)
        })
        .map(|f| f.name.as_str())
        .collect();
    let overshoots = files
        .iter()
        .filter(|f| f.report.termination == Termination::InitialOvershoot)
        .count();
    let (lo, hi) = cfg.overhead_band;

    let checks = vec![
        SuiteCheck {
            name: "decode reproduces the encoder mosaic",
            passed: inexact.is_empty(),
            detail: format!(
                "{} of {} exact {:?}",
                files.len() - inexact.len(),
                files.len(),
                inexact
            ),
        },
        SuiteCheck {
            name: "achieved bpp within budget",
            passed: over.is_empty(),
            detail: format!(
                "budget {budget}, {overshoots} initial overshoots, violations {over:?}"
            ),
        },
        SuiteCheck {
            name: "tile count increases every accepted loop",
            passed: non_increasing.is_empty(),
            detail: format!("violations {non_increasing:?}"),
        },
        SuiteCheck {
            name: "mean mask overhead within band",
            passed: (lo..=hi).contains(&mean_overhead),
            detail: format!("{mean_overhead:.4} in [{lo}, {hi}]"),
        },
    ];
    SuiteReport {
        lossless_files: files.len() - finite.len(),
        files,
        mean_bpp,
        mean_psnr,
        mean_overhead,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators() {
        let c = gen_image(&SyntheticSpec::new(
            SynthKind::Constant { value: 100 },
            5,
            7,
            3,
            0,
        ))
        .unwrap();
        assert!(c.data().iter().all(|&v| v == 100));

        let cb = gen_image(&SyntheticSpec::new(
            SynthKind::Checkerboard { period: 8 },
            144,
            112,
            1,
            0,
        ))
        .unwrap();
        assert_eq!(cb.get(0, 0, 0), 0);
        assert_eq!(cb.get(0, 8, 0), 255);
        assert_eq!(cb.get(8, 8, 0), 0);
        assert_eq!(cb.get(7, 7, 0), 0);

        let spec = SyntheticSpec::new(
            SynthKind::EdgeInSuperblock {
                row: 3,
                col: 5,
                block: 8,
            },
            144,
            112,
            3,
            0,
        );
        let e = gen_image(&spec).unwrap();
        for sr in 0..18 {
            for sc in 0..14 {
                let vals: Vec<u8> = (0..64)
                    .map(|i| e.get(sr * 8 + i / 8, sc * 8 + i % 8, 0))
                    .collect();
                let constant = vals.iter().all(|&v| v == vals[0]);
                assert_eq!(constant, (sr, sc) != (3, 5));
            }
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let spec = SyntheticSpec::new(SynthKind::GaussianBlobs { count: 5 }, 40, 30, 3, 17);
        assert_eq!(gen_image(&spec).unwrap(), gen_image(&spec).unwrap());
        assert_eq!(synthetic_corpus(12, 4), synthetic_corpus(12, 4));
    }

    #[test]
    fn invalid_specs() {
        assert!(gen_image(&SyntheticSpec::new(SynthKind::Ramp, 0, 4, 1, 0)).is_err());
        assert!(gen_image(&SyntheticSpec::new(SynthKind::Ramp, 4, 4, 2, 0)).is_err());
        let spec = SyntheticSpec::new(
            SynthKind::EdgeInSuperblock {
                row: 2,
                col: 0,
                block: 8,
            },
            16,
            16,
            1,
            0,
        );
        assert!(gen_image(&spec).is_err());
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let cfg = SuiteConfig {
            budget: Budget::new(1.0).unwrap(),
            refine: RefineConfig::default(),
            quant: QuantSpec::with_levels(8).unwrap(),
            max_block: 8,
            metric: TotalLoss::pixel(1.0),
            overhead_band: (0.0, 1.0),
        };
        assert!(run_images(&[], &cfg).is_err());
    }
}
