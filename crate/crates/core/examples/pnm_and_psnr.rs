// Round-trips a synthetic image through the binary PNM format and measures
// PSNR against a perturbed copy.

use lfic::harness::{gen_image, SynthKind, SyntheticSpec};
use lfic::image::{load_pnm, psnr, save_pnm, ImageU8};

fn main() {
    let img = gen_image(&SyntheticSpec::new(SynthKind::Ramp, 37, 53, 3, 0)).expect("valid spec");
    let bytes = save_pnm(&img);
    let back = load_pnm(&bytes).expect("own output parses");
    assert_eq!(back, img);
    println!(
        "{}x{}x{} image -> {} PPM bytes, round trip exact",
        img.height(),
        img.width(),
        img.channels(),
        bytes.len()
    );

    let noisy = ImageU8::from_vec(
        img.shape(),
        img.data().iter().map(|&v| v.saturating_add(3)).collect(),
    )
    .unwrap();
    println!("PSNR(self) = {}", psnr(&img, &back).unwrap());
    println!("PSNR(+3 offset) = {:.3} dB", psnr(&img, &noisy).unwrap());
}
