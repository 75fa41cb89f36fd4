// The perceptual metric: embedding network, content/semantic/total losses,
// and a finite-difference check of their gradients.

use lfic::harness::{gen_image, SynthKind, SyntheticSpec};
use lfic::metric::gradcheck::{run_grad_check, GradCheckConfig};
use lfic::metric::{con_loss, sem_loss, total_loss, EmbeddingNet, LossWeights};
use lfic::rap::{pad_to_superblocks, rap_mosaic, BlockSizeSet, MaskGrid};

fn main() {
    let net = EmbeddingNet::seeded(3, 7);
    let img = gen_image(&SyntheticSpec::new(
        SynthKind::GaussianBlobs { count: 6 },
        48,
        40,
        3,
        3,
    ))
    .unwrap();
    let target = pad_to_superblocks(&img, 8).image;
    let emb = net.forward(&target).unwrap();
    println!("embedding[0..4] = {:?}", &emb[..4]);

    let sizes = BlockSizeSet::new(8).unwrap();
    for block in [8, 2] {
        let mask =
            MaskGrid::for_padded(sizes.clone(), target.height(), target.width(), block).unwrap();
        let recon = rap_mosaic(&target, &mask).unwrap();
        let con = con_loss(&recon, &target).unwrap().value;
        let sem = sem_loss(&recon, &target, &net).unwrap().value;
        let total = total_loss(&recon, &target, Some(&net), &LossWeights::default(), None)
            .unwrap()
            .value;
        println!("block {block}: con {con:.4}  sem {sem:.3e}  total {total:.4}");
    }

    let report = run_grad_check(
        Some(&net),
        &LossWeights::default(),
        7,
        &GradCheckConfig::default(),
    )
    .unwrap();
    print!("{report}");
}
