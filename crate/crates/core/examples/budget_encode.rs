// Gradient-guided rate control: refine the pooling mask where the metric is
// most sensitive until the bit budget is reached.

use lfic::codec::decode;
use lfic::harness::{gen_image, SynthKind, SyntheticSpec};
use lfic::image::psnr;
use lfic::metric::{EmbeddingNet, LossWeights, TotalLoss};
use lfic::quant::QuantSpec;
use lfic::ratecontrol::{encode_with_budget, Budget, EncoderSettings, RefineConfig};

fn main() {
    let img = gen_image(&SyntheticSpec::new(
        SynthKind::GaussianBlobs { count: 8 },
        144,
        112,
        3,
        4,
    ))
    .unwrap();
    let metric = TotalLoss::with_net(LossWeights::default(), EmbeddingNet::seeded(3, 7));
    for budget in [0.1, 0.2, 0.4] {
        let settings = EncoderSettings {
            budget: Budget::new(budget).unwrap(),
            refine: RefineConfig::default(),
            quant: QuantSpec::with_levels(8).unwrap(),
            max_block: 8,
            metric: &metric,
        };
        let (enc, report) = encode_with_budget(&img, &settings).unwrap();
        let out = decode(&enc.bytes).unwrap().image;
        println!(
            "budget {budget:.2}: {} bytes, {:.4} bpp, mask overhead {:.3}, {} loops ({}), PSNR {:.2} dB",
            enc.bytes.len(),
            report.achieved_bpp,
            report.mask_overhead_fraction,
            report.loops_used,
            report.termination,
            psnr(&img, &out).unwrap()
        );
    }
}
