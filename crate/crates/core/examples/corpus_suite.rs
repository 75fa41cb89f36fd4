// Corpus-level evaluation: encode a directory of images at one budget and
// check the codec's invariants across all of them.

use lfic::harness::{blob_corpus, run_suite, write_corpus, SuiteConfig};
use lfic::metric::{EmbeddingNet, LossWeights, TotalLoss};
use lfic::quant::QuantSpec;
use lfic::ratecontrol::{Budget, RefineConfig};

fn main() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), &blob_corpus(4, 11)).unwrap();
    let cfg = SuiteConfig {
        budget: Budget::new(0.2).unwrap(),
        refine: RefineConfig::default(),
        quant: QuantSpec::with_levels(8).unwrap(),
        max_block: 8,
        metric: TotalLoss::with_net(LossWeights::default(), EmbeddingNet::seeded(3, 7)),
        overhead_band: (0.02, 0.20),
    };
    let report = run_suite(dir.path(), &cfg).unwrap();
    print!("{}", report.to_text());
    print!("{}", report.to_csv());
}
