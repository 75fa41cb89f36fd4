// The lossless stage on its own: quantize, DPCM-predict, and range-code a
// plane, then invert every step.

use lfic::harness::{gen_image, SynthKind, SyntheticSpec};
use lfic::lossless::{ac_decode, ac_encode, predict_forward, predict_inverse};
use lfic::quant::{quantize, QuantSpec};

fn main() {
    let img = gen_image(&SyntheticSpec::new(
        SynthKind::GaussianBlobs { count: 4 },
        64,
        48,
        1,
        2,
    ))
    .unwrap();
    let spec = QuantSpec::with_levels(8).unwrap();
    let q = quantize(&img.to_f64(), &spec);
    let e = predict_forward(&q);

    let offset = spec.max_index();
    let alphabet = 2 * spec.levels() as usize - 1;
    let symbols: Vec<usize> = e.data().iter().map(|&r| (r + offset) as usize).collect();
    let bytes = ac_encode(&symbols, alphabet).unwrap();
    println!(
        "{} residuals over {alphabet} symbols -> {} bytes ({:.3} bits/sample)",
        symbols.len(),
        bytes.len(),
        bytes.len() as f64 * 8.0 / symbols.len() as f64
    );

    let decoded = ac_decode(&bytes, symbols.len(), alphabet).unwrap();
    assert_eq!(decoded, symbols);
    assert_eq!(predict_inverse(&e), q);
    println!("decode and inverse prediction exact");
}
