//! Differentiable distortion metrics.
//!
//! Every metric reports a loss value and its gradient with respect to the
//! reconstruction. The rate controller only needs that gradient, so any
//! [`MetricPlugin`] can steer bit allocation.

pub mod gradcheck;
mod net;

use std::sync::Arc;

use thiserror::Error;

use crate::image::{Image, ImageError, ImageF};

pub use net::{ConvStage, EmbeddingNet, EMBEDDING_DIM, STAGE_WIDTHS, WEIGHTS_MAGIC};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("weights file does not start with LFW1")]
    BadWeightsMagic,
    #[error("weights file is truncated")]
    TruncatedWeights,
    #[error("weights file has {0} trailing bytes")]
    TrailingWeightBytes(usize),
    #[error("weights do not match the embedding topology: {0}")]
    Topology(String),
    #[error("non-finite value in weights or input")]
    NonFinite,
    #[error("image has {image} channels but the network expects {net}")]
    ChannelMismatch { image: usize, net: usize },
    #[error("embedding gradient has length {0}, expected 32")]
    EmbeddingLength(usize),
    #[error("reconstruction and reference shapes differ")]
    ShapeMismatch,
    #[error("invalid loss weight {0}")]
    Weight(f64),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Loss value with its gradient with respect to the reconstruction.
#[derive(Clone, Debug, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub grad: ImageF,
}

pub trait MetricPlugin: Send + Sync {
    fn evaluate(&self, recon: &ImageF, target: &ImageF) -> Result<LossEval, MetricError>;

    fn loss(&self, recon: &ImageF, target: &ImageF) -> Result<f64, MetricError> {
        Ok(self.evaluate(recon, target)?.value)
    }

    fn grad(&self, recon: &ImageF, target: &ImageF) -> Result<ImageF, MetricError> {
        Ok(self.evaluate(recon, target)?.grad)
    }
}

fn same_shape(a: &ImageF, b: &ImageF) -> Result<(), MetricError> {
    if a.shape() != b.shape() {
        return Err(MetricError::ShapeMismatch);
    }
    Ok(())
}

pub fn embed_forward(img: &ImageF, net: &EmbeddingNet) -> Result<Vec<f64>, MetricError> {
    net.forward(img)
}

pub fn embed_backward(
    img: &ImageF,
    net: &EmbeddingNet,
    grad_emb: &[f64],
) -> Result<ImageF, MetricError> {
    net.backward(img, grad_emb)
}

/// Mean absolute difference; gradient `sign(recon − target) / n`.
pub fn con_loss(recon: &ImageF, target: &ImageF) -> Result<LossEval, MetricError> {
    same_shape(recon, target)?;
    let n = recon.data().len() as f64;
    let mut value = 0.0;
    let grad = Image::from_vec(
        recon.shape(),
        recon
            .data()
            .iter()
            .zip(target.data())
            .map(|(&a, &b)| {
                let d = a - b;
                value += d.abs();
                if d > 0.0 {
                    1.0 / n
                } else if d < 0.0 {
                    -1.0 / n
                } else {
                    0.0
                }
            })
            .collect(),
    )?;
    Ok(LossEval {
        value: value / n,
        grad,
    })
}

/// Squared embedding distance `‖H(recon) − H(target)‖²`.
pub fn sem_loss(
    recon: &ImageF,
    target: &ImageF,
    net: &EmbeddingNet,
) -> Result<LossEval, MetricError> {
    same_shape(recon, target)?;
    let a = net.forward(recon)?;
    let b = net.forward(target)?;
    let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let value = diff.iter().map(|d| d * d).sum();
    let grad_emb: Vec<f64> = diff.iter().map(|d| 2.0 * d).collect();
    let grad = net.backward(recon, &grad_emb)?;
    Ok(LossEval { value, grad })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub content: f64,
    pub semantic: f64,
    pub adversarial: f64,
}

impl LossWeights {
    /// Adversarial weight used when a discriminator plug-in is supplied.
    pub const PLUGIN_ADVERSARIAL: f64 = 0.1;

    pub fn new(content: f64, semantic: f64, adversarial: f64) -> Result<Self, MetricError> {
        for w in [content, semantic, adversarial] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(MetricError::Weight(w));
            }
        }
        Ok(LossWeights {
            content,
            semantic,
            adversarial,
        })
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            content: 0.01,
            semantic: 10.0,
            adversarial: 0.0,
        }
    }
}

/// `λ_con·l_con + λ_sem·l_sem + λ_adv·l_adv`. The semantic term needs a
/// network and the adversarial term a plug-in; absent members contribute
/// nothing.
pub fn total_loss(
    recon: &ImageF,
    target: &ImageF,
    net: Option<&EmbeddingNet>,
    weights: &LossWeights,
    adversarial: Option<&dyn MetricPlugin>,
) -> Result<LossEval, MetricError> {
    same_shape(recon, target)?;
    let mut value = 0.0;
    let mut grad = Image::filled(recon.shape(), 0.0);
    let mut add = |w: f64, eval: LossEval| {
        value += w * eval.value;
        for (g, e) in grad.data_mut().iter_mut().zip(eval.grad.data()) {
            *g += w * e;
        }
    };
    if weights.content != 0.0 {
        add(weights.content, con_loss(recon, target)?);
    }
    if let Some(net) = net.filter(|_| weights.semantic != 0.0) {
        add(weights.semantic, sem_loss(recon, target, net)?);
    }
    if let Some(adv) = adversarial.filter(|_| weights.adversarial != 0.0) {
        add(weights.adversarial, adv.evaluate(recon, target)?);
    }
    Ok(LossEval { value, grad })
}

pub struct ContentLoss;

impl MetricPlugin for ContentLoss {
    fn evaluate(&self, recon: &ImageF, target: &ImageF) -> Result<LossEval, MetricError> {
        con_loss(recon, target)
    }
}

pub struct SemanticLoss {
    pub net: Arc<EmbeddingNet>,
}

impl MetricPlugin for SemanticLoss {
    fn evaluate(&self, recon: &ImageF, target: &ImageF) -> Result<LossEval, MetricError> {
        sem_loss(recon, target, &self.net)
    }
}

/// The weighted composite metric used by the rate controller.
#[derive(Clone)]
pub struct TotalLoss {
    pub weights: LossWeights,
    pub net: Option<Arc<EmbeddingNet>>,
    pub adversarial: Option<Arc<dyn MetricPlugin>>,
}

impl TotalLoss {
    /// Content loss only.
    pub fn pixel(weight: f64) -> Self {
        TotalLoss {
            weights: LossWeights {
                content: weight,
                semantic: 0.0,
                adversarial: 0.0,
            },
            net: None,
            adversarial: None,
        }
    }

    pub fn with_net(weights: LossWeights, net: EmbeddingNet) -> Self {
        TotalLoss {
            weights,
            net: Some(Arc::new(net)),
            adversarial: None,
        }
    }

    /// True when the metric is purely pixel-local.
    pub fn is_pixel_only(&self) -> bool {
        (self.net.is_none() || self.weights.semantic == 0.0)
            && (self.adversarial.is_none() || self.weights.adversarial == 0.0)
    }
}

impl MetricPlugin for TotalLoss {
    fn evaluate(&self, recon: &ImageF, target: &ImageF) -> Result<LossEval, MetricError> {
        total_loss(
            recon,
            target,
            self.net.as_deref(),
            &self.weights,
            self.adversarial.as_deref(),
        )
    }
}
