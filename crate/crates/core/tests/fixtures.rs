//! Golden files under `fixtures/`. Set `LFIC_BLESS=1` to rewrite them.

use std::path::PathBuf;

use lfic::bitstream::{read_container, summary};
use lfic::codec::decode;
use lfic::harness::{gen_image, SynthKind, SyntheticSpec};
use lfic::image::{Image, ImageF, Shape};
use lfic::metric::{EmbeddingNet, LossWeights, TotalLoss};
use lfic::quant::QuantSpec;
use lfic::ratecontrol::{encode_with_budget, Budget, EncoderSettings, RefineConfig};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn check_golden(name: &str, actual: &[u8]) {
    let path = fixture(name);
    if std::env::var_os("LFIC_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(
        expected == actual,
        "{name} differs from the regenerated bytes"
    );
}

fn golden_container() -> Vec<u8> {
    let img = gen_image(&SyntheticSpec::new(
        SynthKind::GaussianBlobs { count: 4 },
        40,
        48,
        3,
        5,
    ))
    .unwrap();
    let metric = TotalLoss::with_net(LossWeights::default(), EmbeddingNet::seeded(3, 7));
    let settings = EncoderSettings {
        budget: Budget::new(0.5).unwrap(),
        refine: RefineConfig::default(),
        quant: QuantSpec::with_levels(8).unwrap(),
        max_block: 8,
        metric: &metric,
    };
    encode_with_budget(&img, &settings).unwrap().0.bytes
}

#[test]
fn weight_fixtures_match_seeded_nets() {
    check_golden("embed_k3.lfw", &EmbeddingNet::seeded(3, 7).to_bytes());
    check_golden("embed_k1.lfw", &EmbeddingNet::seeded(1, 7).to_bytes());
    let loaded =
        EmbeddingNet::from_bytes(&std::fs::read(fixture("embed_k3.lfw")).unwrap()).unwrap();
    assert_eq!(loaded, EmbeddingNet::seeded(3, 7));
}

#[test]
fn container_fixture_is_reproduced_and_decodes() {
    let bytes = golden_container();
    check_golden("blobs_40x48.lfic", &bytes);
    let dec = decode(&bytes).unwrap();
    assert_eq!(dec.image.shape(), Shape::new(40, 48, 3));
    check_golden(
        "blobs_40x48.info.txt",
        summary(&read_container(&bytes).unwrap()).as_bytes(),
    );
}

/// Probe image shared with `fixtures/embed_reference.py`.
pub fn probe_image() -> ImageF {
    Image::from_fn(Shape::new(20, 24, 3), |r, c, k| {
        ((r * 37 + c * 11 + k * 71) % 256) as f64
    })
}

#[test]
fn embedding_matches_independent_reference() {
    let text = std::fs::read_to_string(fixture("embed_k3_probe.txt")).unwrap();
    let expected: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse().unwrap())
        .collect();
    let net = EmbeddingNet::from_bytes(&std::fs::read(fixture("embed_k3.lfw")).unwrap()).unwrap();
    let got = net.forward(&probe_image()).unwrap();
    assert_eq!(got.len(), expected.len());
    for (g, e) in got.iter().zip(&expected) {
        assert!((g - e).abs() <= 1e-12, "{g} vs {e}");
    }
}
