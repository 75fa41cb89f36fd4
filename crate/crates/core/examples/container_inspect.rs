// Builds a container with a hand-made mask, prints its summary, and shows
// that corruption is caught by the checksum.

use lfic::bitstream::{inspect, read_container, ContainerError};
use lfic::codec::{decode, encode_with_mask};
use lfic::harness::{gen_image, SynthKind, SyntheticSpec};
use lfic::quant::QuantSpec;
use lfic::rap::{BlockSizeSet, MaskGrid};
use lfic::Error;

fn main() {
    let img = gen_image(&SyntheticSpec::new(
        SynthKind::Checkerboard { period: 5 },
        20,
        30,
        1,
        5,
    ))
    .unwrap();
    let mut mask = MaskGrid::for_padded(BlockSizeSet::new(4).unwrap(), 20, 32, 4).unwrap();
    mask.set(1, 2, 1).unwrap();
    mask.set(3, 5, 2).unwrap();
    let enc = encode_with_mask(&img, &mask, &QuantSpec::with_levels(4).unwrap()).unwrap();
    print!("{}", inspect(&enc.bytes).unwrap());

    let container = read_container(&enc.bytes).unwrap();
    assert_eq!(container.decode_mask().unwrap(), mask);

    let mut corrupt = enc.bytes.clone();
    corrupt[25] ^= 0x10;
    match decode(&corrupt) {
        Err(Error::Container(e @ ContainerError::ChecksumMismatch { .. })) => {
            println!("corrupted copy rejected: {e}")
        }
        other => panic!("unexpected result {:?}", other.map(|d| d.image.shape())),
    }
}
