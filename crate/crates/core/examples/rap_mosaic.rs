// Regionally adaptive pooling: a mask picks a block size per superblock and
// every tile is replaced by its mean.

use lfic::harness::{gen_image, SynthKind, SyntheticSpec};
use lfic::image::psnr;
use lfic::rap::{pad_to_superblocks, pool_tile_means, rap_mosaic, BlockSizeSet, MaskGrid};

fn main() {
    let img = gen_image(&SyntheticSpec::new(
        SynthKind::GaussianBlobs { count: 5 },
        45,
        61,
        3,
        1,
    ))
    .unwrap();
    let padded = pad_to_superblocks(&img, 8);
    let sizes = BlockSizeSet::new(8).unwrap();
    println!("allowed block sizes: {:?}", sizes.allowed());

    let rows = padded.image.height() / 8;
    let cols = padded.image.width() / 8;
    // Coarse on the left, fine on the right.
    let cells = (0..rows * cols)
        .map(|i| sizes.allowed()[(i % cols) * sizes.allowed().len() / cols])
        .collect();
    let mask = MaskGrid::from_cells(sizes.clone(), rows, cols, cells).unwrap();

    for m in [
        MaskGrid::uniform(sizes.clone(), rows, cols, 8).unwrap(),
        mask,
        MaskGrid::uniform(sizes, rows, cols, 1).unwrap(),
    ] {
        let tiles = pool_tile_means(&padded.image, &m).unwrap();
        let mosaic = rap_mosaic(&padded.image, &m)
            .unwrap()
            .crop(img.height(), img.width())
            .to_u8();
        println!(
            "{:>5} tiles -> PSNR {:.2} dB",
            tiles.len(),
            psnr(&img, &mosaic).unwrap()
        );
    }
}
