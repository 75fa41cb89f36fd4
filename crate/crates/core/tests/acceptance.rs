//! End-to-end acceptance battery. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::time::Instant;

use lfic::bdrate::{bd_rate, RdCurve};
use lfic::codec::{decode, encode_with_mask};
use lfic::harness::{
    blob_corpus, gen_image, synthetic_corpus, write_corpus, SynthKind, SyntheticSpec,
};
use lfic::image::{psnr, Image, ImageU8, Shape};
use lfic::lossless::{ac_decode, ac_encode, predict_forward, predict_inverse};
use lfic::metric::gradcheck::{run_grad_check, GradCheckConfig, LossKind};
use lfic::metric::{EmbeddingNet, LossWeights, TotalLoss};
use lfic::quant::{dequantize, quantize, IndexPlane, QuantSpec};
use lfic::rap::{BlockSizeSet, MaskGrid};
use lfic::ratecontrol::{encode_with_budget, Budget, EncoderSettings, RefineConfig, Termination};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn fixture_net() -> EmbeddingNet {
    EmbeddingNet::from_bytes(&std::fs::read(fixture("embed_k3.lfw")).expect("fixture weights"))
        .expect("valid weights")
}

fn settings(metric: &TotalLoss, budget: f64, refine: RefineConfig) -> EncoderSettings<'_> {
    EncoderSettings {
        budget: Budget::new(budget).unwrap(),
        refine,
        quant: QuantSpec::with_levels(8).unwrap(),
        max_block: 8,
        metric,
    }
}

fn ac1_lossless_exactness() -> Outcome {
    let start = Instant::now();
    let corpus = synthetic_corpus(210, 2024);
    let has_native = corpus
        .iter()
        .any(|(_, img)| img.shape() == Shape::new(144, 112, 3));
    let has_odd = corpus
        .iter()
        .any(|(_, img)| img.height() % 8 != 0 || img.width() % 8 != 0);
    let metric = TotalLoss::pixel(1.0);
    let mismatches: Vec<String> = corpus
        .par_iter()
        .filter_map(|(name, img)| {
            let (enc, _) =
                encode_with_budget(img, &settings(&metric, 0.5, RefineConfig::default())).ok()?;
            let dec = decode(&enc.bytes).ok()?;
            let exact = dec.indices == enc.indices && dec.image == enc.decoded_image();
            (!exact).then(|| name.clone())
        })
        .collect();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatches.is_empty() && has_native && has_odd && secs < 60.0,
        format!("{} images (144x112x3: {has_native}, non-multiple-of-8: {has_odd}), {} mismatches, {secs:.1} s", corpus.len(), mismatches.len()),
    )
}

fn ac2_predictor_round_trip() -> Outcome {
    let start = Instant::now();
    let shape = Shape::new(3, 3, 1);
    // 8^9 planes; the top three samples select the chunk each task enumerates.
    let failures: u64 = (0u32..512)
        .into_par_iter()
        .map(|hi| {
            let mut plane: IndexPlane = Image::filled(shape, 0);
            let mut bad = 0u64;
            for lo in 0u32..(1 << 18) {
                let code = (hi << 18) | lo;
                for (i, v) in plane.data_mut().iter_mut().enumerate() {
                    *v = ((code >> (3 * i)) & 7) as i32;
                }
                if predict_inverse(&predict_forward(&plane)) != plane {
                    bad += 1;
                }
            }
            bad
        })
        .sum();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut random_failures = 0;
    for (h, w, k) in [
        (100, 1000, 1),
        (250, 400, 1),
        (1, 100_000, 1),
        (100_000, 1, 1),
        (100, 333, 3),
    ] {
        let plane: IndexPlane =
            Image::from_fn(Shape::new(h, w, k), |_, _, _| rng.gen_range(0..256));
        if predict_inverse(&predict_forward(&plane)) != plane {
            random_failures += 1;
        }
    }
    outcome(
        failures == 0 && random_failures == 0,
        format!(
            "{} exhaustive 3x3 planes, {failures} failures; 5 random planes of ~1e5 samples, {random_failures} failures; {:.1} s",
            8u64.pow(9),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn ac3_entropy_coder() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut round_trip_failures = 0;
    let mut total_symbols = 0usize;
    for _ in 0..1000 {
        let len = if rng.gen_bool(0.02) {
            0
        } else {
            10f64.powf(rng.gen_range(0.0..5.0)).round() as usize
        };
        let alphabet = rng.gen_range(2..=255);
        let symbols: Vec<usize> = (0..len).map(|_| rng.gen_range(0..alphabet)).collect();
        total_symbols += len;
        let ok = ac_encode(&symbols, alphabet)
            .and_then(|bytes| ac_decode(&bytes, len, alphabet))
            .map(|decoded| decoded == symbols)
            .unwrap_or(false);
        if !ok {
            round_trip_failures += 1;
        }
    }
    let repeat = ac_encode(&[5; 10_000], 16).unwrap().len();
    let uniform: Vec<usize> = (0..4096).map(|_| rng.gen_range(0..16)).collect();
    let uniform_len = ac_encode(&uniform, 16).unwrap().len();
    let uniform_dev = (uniform_len as f64 - 2048.0).abs() / 2048.0;
    outcome(
        round_trip_failures == 0 && repeat <= 64 && uniform_dev <= 0.02,
        format!(
            "1000 sequences ({total_symbols} symbols), {round_trip_failures} failures; 10000 repeats -> {repeat} bytes (<= 64); uniform 4096 -> {uniform_len} bytes ({:.2}% from 2048)",
            uniform_dev * 100.0
        ),
    )
}

fn ac4_gradients() -> Outcome {
    let net = fixture_net();
    let cfg = GradCheckConfig::default();
    match run_grad_check(Some(&net), &LossWeights::default(), 7, &cfg) {
        Ok(report) => {
            let per_loss = [LossKind::Content, LossKind::Semantic, LossKind::Total]
                .map(|k| report.results.iter().filter(|r| r.loss == k).count());
            let worst = report.worst().map_or(0.0, |r| r.rel_error);
            outcome(
                report.passed() && per_loss.iter().all(|&n| n >= 10) && cfg.tolerance <= 1e-5,
                format!("probes per loss (con, sem, total) = {per_loss:?}, worst relative error {worst:.3e} (tolerance {:.0e})", cfg.tolerance),
            )
        }
        Err(e) => outcome(false, format!("error: {e}")),
    }
}

fn ac5_rate_control() -> Outcome {
    let (target_row, target_col) = (3, 5);
    let edge = gen_image(&SyntheticSpec::new(
        SynthKind::EdgeInSuperblock {
            row: target_row,
            col: target_col,
            block: 8,
        },
        144,
        112,
        3,
        0,
    ))
    .unwrap();
    let pixel = TotalLoss::pixel(1.0);

    // One refinement step with a fraction that selects a single cell.
    let single = RefineConfig::new(1, 1e-6).unwrap();
    let (enc, report) = encode_with_budget(&edge, &settings(&pixel, 10.0, single)).unwrap();
    let mask = decode(&enc.bytes).unwrap().mask;
    let refined: Vec<(usize, usize)> = (0..mask.rows())
        .flat_map(|r| (0..mask.cols()).map(move |c| (r, c)))
        .filter(|&(r, c)| mask.get(r, c) != 8)
        .collect();
    let first_ok =
        refined == vec![(target_row, target_col)] && report.termination == Termination::MaxLoops;

    let mut strict_ok = true;
    let mut budget_ok = true;
    let mut monotone_ok = true;
    let mut rows = Vec::new();
    let full = TotalLoss::with_net(LossWeights::default(), fixture_net());
    let mut images = blob_corpus(4, 50);
    images.push(("edge.ppm".into(), edge.clone()));
    let mut runs = 0;
    let mut overshoots = 0;
    let mut prev_mean = f64::NEG_INFINITY;
    for budget in [0.05, 0.1, 0.2, 0.4] {
        let results: Vec<_> = images
            .par_iter()
            .map(|(_, img)| {
                encode_with_budget(img, &settings(&full, budget, RefineConfig::default()))
                    .unwrap()
                    .1
            })
            .collect();
        let edge_single = encode_with_budget(
            &edge,
            &settings(&pixel, budget, RefineConfig::new(32, 1e-6).unwrap()),
        )
        .unwrap()
        .1;
        let mut mean = 0.0;
        for r in results.iter().chain(std::iter::once(&edge_single)) {
            runs += 1;
            if r.termination == Termination::InitialOvershoot {
                overshoots += 1;
            } else if r.achieved_bpp > budget {
                budget_ok = false;
            }
            if r.trace
                .windows(2)
                .any(|w| w[1].tile_count <= w[0].tile_count)
            {
                strict_ok = false;
            }
        }
        for r in &results {
            mean += r.achieved_bpp / results.len() as f64;
        }
        if mean < prev_mean {
            monotone_ok = false;
        }
        prev_mean = mean;
        rows.push(format!("{budget}:{mean:.4}"));
    }
    outcome(
        first_ok && strict_ok && budget_ok && monotone_ok,
        format!(
            "first refinement {refined:?} (target ({target_row}, {target_col})); tile count strictly increasing: {strict_ok}; \
             bpp <= budget on {} non-overshoot runs: {budget_ok} ({overshoots} initial overshoots); mean bpp per budget [{}] non-decreasing: {monotone_ok}",
            runs - overshoots,
            rows.join(", ")
        ),
    )
}

fn ac6_mask_overhead() -> Outcome {
    let metric = TotalLoss::with_net(LossWeights::default(), fixture_net());
    let corpus = blob_corpus(20, 1);
    let overheads: Vec<f64> = corpus
        .par_iter()
        .map(|(_, img)| {
            encode_with_budget(img, &settings(&metric, 0.2, RefineConfig::default()))
                .unwrap()
                .1
                .mask_overhead_fraction
        })
        .collect();
    let min = overheads.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = overheads.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = overheads.iter().sum::<f64>() / overheads.len() as f64;
    let in_band = overheads
        .iter()
        .filter(|&&o| (0.02..=0.20).contains(&o))
        .count();
    let target_band = overheads
        .iter()
        .filter(|&&o| (0.05..=0.10).contains(&o))
        .count();
    outcome(
        in_band == overheads.len(),
        format!(
            "{} images at 0.2 bpp: overhead min {min:.4} mean {mean:.4} max {max:.4}, {in_band} in [0.02, 0.20]; informational: {target_band} in [0.05, 0.10]",
            overheads.len()
        ),
    )
}

fn ac7_rap_identity() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (h, w, k, seed) in [(144, 112, 3, 1), (37, 53, 3, 2), (9, 130, 1, 3)] {
        let img = gen_image(&SyntheticSpec::new(
            SynthKind::GaussianBlobs { count: 5 },
            h,
            w,
            k,
            seed,
        ))
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noisy = ImageU8::from_vec(
            img.shape(),
            img.data()
                .iter()
                .map(|&v| v ^ rng.gen_range(0..4u8))
                .collect(),
        )
        .unwrap();
        let ph = h.div_ceil(8) * 8;
        let pw = w.div_ceil(8) * 8;
        let mask = MaskGrid::for_padded(BlockSizeSet::new(8).unwrap(), ph, pw, 1).unwrap();

        let passthrough = QuantSpec::with_levels(256).unwrap();
        let enc = encode_with_mask(&noisy, &mask, &passthrough).unwrap();
        let p = psnr(&noisy, &decode(&enc.bytes).unwrap().image).unwrap();
        ok &= p == f64::INFINITY;

        let l8 = QuantSpec::with_levels(8).unwrap();
        let enc = encode_with_mask(&noisy, &mask, &l8).unwrap();
        let expected = dequantize(&quantize(&noisy.to_f64(), &l8), &l8)
            .unwrap()
            .to_u8();
        let same = decode(&enc.bytes).unwrap().image == expected;
        ok &= same;
        notes.push(format!(
            "{h}x{w}x{k}: L=256 psnr {p}, L=8 per-pixel quantized match {same}"
        ));
    }
    outcome(ok, notes.join("; "))
}

/// Least-squares cubic in raw quality via normal equations, independent of
/// the library's centered SVD fit.
#[allow(clippy::needless_range_loop)]
fn naive_cubic(points: &[(f64, f64)]) -> [f64; 4] {
    let mut a = [[0.0; 5]; 4];
    for &(rate, q) in points {
        let y = rate.log10();
        for i in 0..4 {
            for j in 0..4 {
                a[i][j] += q.powi((i + j) as i32);
            }
            a[i][4] += q.powi(i as i32) * y;
        }
    }
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for row in 0..4 {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..5 {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    [
        a[0][4] / a[0][0],
        a[1][4] / a[1][1],
        a[2][4] / a[2][2],
        a[3][4] / a[3][3],
    ]
}

fn trapezoid_bd(anchor: &[(f64, f64)], test: &[(f64, f64)]) -> f64 {
    let (pa, pt) = (naive_cubic(anchor), naive_cubic(test));
    let eval = |c: &[f64; 4], q: f64| c[0] + c[1] * q + c[2] * q * q + c[3] * q * q * q;
    let lo = anchor[0].1.max(test[0].1);
    let hi = anchor[anchor.len() - 1].1.min(test[test.len() - 1].1);
    let n = 10_000;
    let h = (hi - lo) / n as f64;
    let mut sum = 0.0;
    for i in 0..=n {
        let q = lo + i as f64 * h;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        sum += w * (eval(&pt, q) - eval(&pa, q));
    }
    (10f64.powf(sum * h / (hi - lo)) - 1.0) * 100.0
}

fn ac8_bdrate() -> Outcome {
    let anchor_pts = [(0.1, 80.0), (0.2, 88.0), (0.4, 93.0), (0.8, 96.0)];
    let test_pts = [(0.05, 80.0), (0.1, 88.0), (0.2, 93.0), (0.4, 96.0)];
    let curve = |p: &[(f64, f64)]| RdCurve::from_pairs(p).unwrap();
    let map = |p: &[(f64, f64)], f: &dyn Fn(f64, f64) -> (f64, f64)| {
        p.iter().map(|&(r, q)| f(r, q)).collect::<Vec<_>>()
    };
    let anchor = curve(&anchor_pts);

    let identical = bd_rate(&anchor, &anchor).unwrap();
    let doubled = bd_rate(&anchor, &curve(&map(&anchor_pts, &|r, q| (2.0 * r, q)))).unwrap();
    let half = bd_rate(&anchor, &curve(&test_pts)).unwrap();
    let oracle = trapezoid_bd(&anchor_pts, &test_pts);

    let other = [
        (0.07, 78.0),
        (0.15, 86.5),
        (0.33, 92.0),
        (0.7, 95.5),
        (1.2, 97.0),
    ];
    let ab = bd_rate(&anchor, &curve(&other)).unwrap();
    let ba = bd_rate(&curve(&other), &anchor).unwrap();
    let antisym = ((1.0 + ab / 100.0) * (1.0 + ba / 100.0) - 1.0).abs();
    let scaled = bd_rate(
        &curve(&map(&anchor_pts, &|r, q| (3.7 * r, q))),
        &curve(&map(&other, &|r, q| (3.7 * r, q))),
    )
    .unwrap();
    let shifted = bd_rate(
        &curve(&map(&anchor_pts, &|r, q| (r, q - 12.5))),
        &curve(&map(&other, &|r, q| (r, q - 12.5))),
    )
    .unwrap();
    let oracle_other = trapezoid_bd(&anchor_pts, &other);

    let passed = identical.abs() < 1e-9
        && (doubled - 100.0).abs() <= 0.1
        && (half - oracle).abs() <= 0.5
        && (half + 50.0).abs() <= 0.5
        && antisym <= 1e-6
        && (scaled - ab).abs() <= 1e-9
        && (shifted - ab).abs() <= 1e-9
        && (ab - oracle_other).abs() <= 0.5;
    outcome(
        passed,
        format!(
            "identical {identical:.2e}; doubled {doubled:.6}%; constructed {half:.4}% vs trapezoid oracle {oracle:.4}%; \
             general {ab:.4}% vs oracle {oracle_other:.4}%; antisymmetry residual {antisym:.1e}; scale diff {:.1e}; shift diff {:.1e}",
            (scaled - ab).abs(),
            (shifted - ab).abs()
        ),
    )
}

fn ac9_determinism() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let corpus = dir.path().join("corpus");
    let mut images = blob_corpus(3, 9);
    images.extend(
        synthetic_corpus(5, 9)
            .into_iter()
            .filter(|(_, img)| img.channels() == 3),
    );
    write_corpus(&corpus, &images).unwrap();
    let weights = fixture("embed_k3.lfw");
    let sweep = |tag: &str| {
        let csv = dir.path().join(format!("{tag}.csv"));
        let bins = dir.path().join(tag);
        let cli = <lfic::cli::Cli as clap::Parser>::try_parse_from([
            "lfic",
            "rd-sweep",
            corpus.to_str().unwrap(),
            "--budgets",
            "0.05,0.1,0.2,0.4",
            "--weights",
            weights.to_str().unwrap(),
            "-o",
            csv.to_str().unwrap(),
            "--containers",
            bins.to_str().unwrap(),
        ])
        .unwrap();
        let code = lfic::cli::execute(&cli.command).map_or_else(|e| e.code, |(code, _)| code);
        (code, csv, bins)
    };
    let (code_a, csv_a, bins_a) = sweep("a");
    let (code_b, csv_b, bins_b) = sweep("b");
    let read = |p: &Path| std::fs::read(p).unwrap_or_default();
    let csv_same = code_a == 0 && code_b == 0 && read(&csv_a) == read(&csv_b);
    let mut names: Vec<_> = std::fs::read_dir(&bins_a)
        .map(|d| d.map(|e| e.unwrap().file_name()).collect())
        .unwrap_or_default();
    names.sort();
    let bins_same = !names.is_empty()
        && names
            .iter()
            .all(|n| read(&bins_a.join(n)) == read(&bins_b.join(n)));
    let text = String::from_utf8(read(&csv_a)).unwrap_or_default();
    let bpps: Vec<f64> = text
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(1)?.parse().ok())
        .collect();
    let non_decreasing = bpps.len() == 4 && bpps.windows(2).all(|w| w[1] >= w[0]);
    outcome(
        csv_same && bins_same && non_decreasing,
        format!(
            "{} images x 4 budgets: CSV identical {csv_same}, {} containers identical {bins_same}; 4 rows with non-decreasing bpp {bpps:?}",
            images.len(),
            names.len()
        ),
    )
}

type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("AC1", "lossless-stage exactness", ac1_lossless_exactness),
        ("AC2", "predictor round-trip", ac2_predictor_round_trip),
        ("AC3", "entropy coder", ac3_entropy_coder),
        ("AC4", "gradient correctness", ac4_gradients),
        ("AC5", "rate control", ac5_rate_control),
        ("AC6", "mask overhead", ac6_mask_overhead),
        ("AC7", "RAP identity", ac7_rap_identity),
        ("AC8", "BD-rate", ac8_bdrate),
        ("AC9", "determinism", ac9_determinism),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let start = Instant::now();
        let o = check();
        if !o.passed {
            failed += 1;
        }
        println!(
            "{id} {} {name}: {} [{:.1} s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/9 passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
