//! Fixed three-stage convolutional embedding used as the semantic metric.
//!
//! Each stage is a 3×3 convolution, stride 2, zero padding 1, followed by
//! ReLU. Widths are 8, 16 and 32. The last feature map is averaged over
//! space to give a 32-dimensional embedding. Inputs are scaled from sample
//! units to `[0, 1]` before the first stage.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MetricError;
use crate::image::{Image, ImageF, Shape};

pub const STAGE_WIDTHS: [usize; 3] = [8, 16, 32];
pub const EMBEDDING_DIM: usize = 32;
pub const KERNEL: usize = 3;
const INPUT_SCALE: f64 = 1.0 / 255.0;

pub const WEIGHTS_MAGIC: &[u8; 4] = b"LFW1";

#[derive(Clone, Debug, PartialEq)]
pub struct ConvStage {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `[out][in][ky][kx]`
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvStage {
    fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * KERNEL * KERNEL
    }

    #[inline]
    fn w(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.weights[((o * self.in_channels + i) * KERNEL + ky) * KERNEL + kx]
    }
}

/// Feature map in height × width × channel order.
#[derive(Clone, Debug)]
struct Tensor {
    h: usize,
    w: usize,
    c: usize,
    data: Vec<f64>,
}

impl Tensor {
    fn zeros(h: usize, w: usize, c: usize) -> Self {
        Tensor {
            h,
            w,
            c,
            data: vec![0.0; h * w * c],
        }
    }

    #[inline]
    fn at(&self, y: usize, x: usize, ch: usize) -> usize {
        (y * self.w + x) * self.c + ch
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingNet {
    stages: Vec<ConvStage>,
}

impl EmbeddingNet {
    pub fn from_stages(stages: Vec<ConvStage>) -> Result<Self, MetricError> {
        if stages.len() != STAGE_WIDTHS.len() {
            return Err(MetricError::Topology(format!(
                "expected 3 stages, found {}",
                stages.len()
            )));
        }
        let first_in = stages[0].in_channels;
        if first_in != 1 && first_in != 3 {
            return Err(MetricError::Topology(format!(
                "input channels {first_in} (expected 1 or 3)"
            )));
        }
        let mut expected_in = first_in;
        for (i, (s, &width)) in stages.iter().zip(&STAGE_WIDTHS).enumerate() {
            if s.in_channels != expected_in || s.out_channels != width {
                return Err(MetricError::Topology(format!(
                    "stage {i} is {}→{}, expected {expected_in}→{width}",
                    s.in_channels, s.out_channels
                )));
            }
            if s.weights.len() != s.weight_len() || s.bias.len() != s.out_channels {
                return Err(MetricError::Topology(format!(
                    "stage {i} parameter count mismatch"
                )));
            }
            if s.weights.iter().chain(&s.bias).any(|v| !v.is_finite()) {
                return Err(MetricError::NonFinite);
            }
            expected_in = width;
        }
        Ok(EmbeddingNet { stages })
    }

    /// All weights and biases zero.
    pub fn zeros(in_channels: usize) -> Self {
        Self::build(in_channels, |_, _| 0.0)
    }

    /// Deterministic pseudo-random weights: He-uniform kernels, small biases.
    pub fn seeded(in_channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(in_channels, |fan_in, is_bias| {
            if is_bias {
                rng.gen_range(-0.05..0.05)
            } else {
                let a = (6.0 / fan_in as f64).sqrt();
                rng.gen_range(-a..a)
            }
        })
    }

    fn build(in_channels: usize, mut init: impl FnMut(usize, bool) -> f64) -> Self {
        let mut stages = Vec::new();
        let mut cin = in_channels;
        for &cout in &STAGE_WIDTHS {
            let fan_in = cin * KERNEL * KERNEL;
            let weights = (0..cout * fan_in).map(|_| init(fan_in, false)).collect();
            let bias = (0..cout).map(|_| init(fan_in, true)).collect();
            stages.push(ConvStage {
                in_channels: cin,
                out_channels: cout,
                weights,
                bias,
            });
            cin = cout;
        }
        Self::from_stages(stages).expect("built topology is valid")
    }

    pub fn stages(&self) -> &[ConvStage] {
        &self.stages
    }

    pub fn in_channels(&self) -> usize {
        self.stages[0].in_channels
    }

    /// Multiplies every weight and bias by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut net = self.clone();
        for s in &mut net.stages {
            s.weights
                .iter_mut()
                .chain(s.bias.iter_mut())
                .for_each(|v| *v *= factor);
        }
        net
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(WEIGHTS_MAGIC);
        out.extend_from_slice(&(self.stages.len() as u32).to_le_bytes());
        for s in &self.stages {
            out.extend_from_slice(&(s.in_channels as u32).to_le_bytes());
            out.extend_from_slice(&(s.out_channels as u32).to_le_bytes());
        }
        for s in &self.stages {
            for v in s.weights.iter().chain(&s.bias) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MetricError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != WEIGHTS_MAGIC {
            return Err(MetricError::BadWeightsMagic);
        }
        let count = r.u32()? as usize;
        if count != STAGE_WIDTHS.len() {
            return Err(MetricError::Topology(format!(
                "expected 3 stages, found {count}"
            )));
        }
        let mut dims = Vec::with_capacity(count);
        for _ in 0..count {
            dims.push((r.u32()? as usize, r.u32()? as usize));
        }
        // validate shapes before sizing any allocation from file contents
        let mut expected_in = dims[0].0;
        for (i, (&(cin, cout), &width)) in dims.iter().zip(&STAGE_WIDTHS).enumerate() {
            if (i == 0 && cin != 1 && cin != 3) || cin != expected_in || cout != width {
                return Err(MetricError::Topology(format!(
                    "stage {i} declared {cin}→{cout}"
                )));
            }
            expected_in = cout;
        }
        let mut stages = Vec::with_capacity(count);
        for (cin, cout) in dims {
            let weights = (0..cout * cin * KERNEL * KERNEL)
                .map(|_| r.f64())
                .collect::<Result<Vec<_>, _>>()?;
            let bias = (0..cout).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
            stages.push(ConvStage {
                in_channels: cin,
                out_channels: cout,
                weights,
                bias,
            });
        }
        if r.pos != bytes.len() {
            return Err(MetricError::TrailingWeightBytes(bytes.len() - r.pos));
        }
        Self::from_stages(stages)
    }

    fn check_input(&self, img: &ImageF) -> Result<(), MetricError> {
        if img.channels() != self.in_channels() {
            return Err(MetricError::ChannelMismatch {
                image: img.channels(),
                net: self.in_channels(),
            });
        }
        if img.data().iter().any(|v| !v.is_finite()) {
            return Err(MetricError::NonFinite);
        }
        Ok(())
    }

    /// Runs all stages, keeping every pre-activation map for the backward pass.
    fn forward_cached(&self, img: &ImageF) -> Vec<Tensor> {
        let mut input = Tensor {
            h: img.height(),
            w: img.width(),
            c: img.channels(),
            data: img.data().iter().map(|v| v * INPUT_SCALE).collect(),
        };
        let mut pre_acts = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            let pre = conv_forward(stage, &input);
            input = Tensor {
                data: pre.data.iter().map(|&v| v.max(0.0)).collect(),
                ..pre.clone()
            };
            pre_acts.push(pre);
        }
        pre_acts
    }

    pub fn forward(&self, img: &ImageF) -> Result<Vec<f64>, MetricError> {
        self.check_input(img)?;
        let pre_acts = self.forward_cached(img);
        Ok(global_mean_relu(pre_acts.last().expect("three stages")))
    }

    /// Reverse-mode gradient of `⟨grad_emb, forward(img)⟩` with respect to
    /// the image, in sample units.
    pub fn backward(&self, img: &ImageF, grad_emb: &[f64]) -> Result<ImageF, MetricError> {
        self.check_input(img)?;
        if grad_emb.len() != EMBEDDING_DIM {
            return Err(MetricError::EmbeddingLength(grad_emb.len()));
        }
        let pre_acts = self.forward_cached(img);
        let last = pre_acts.last().expect("three stages");
        let area = (last.h * last.w) as f64;
        let mut grad = Tensor::zeros(last.h, last.w, last.c);
        for pixel in grad.data.chunks_mut(last.c) {
            for (g, &e) in pixel.iter_mut().zip(grad_emb) {
                *g = e / area;
            }
        }
        for s in (0..self.stages.len()).rev() {
            // through ReLU
            for (g, &p) in grad.data.iter_mut().zip(&pre_acts[s].data) {
                if p <= 0.0 {
                    *g = 0.0;
                }
            }
            let (ih, iw) = if s == 0 {
                (img.height(), img.width())
            } else {
                (pre_acts[s - 1].h, pre_acts[s - 1].w)
            };
            grad = conv_backward_input(&self.stages[s], &grad, ih, iw);
        }
        let shape = img.shape();
        let data = grad.data.into_iter().map(|g| g * INPUT_SCALE).collect();
        Ok(Image::from_vec(
            Shape::new(shape.height, shape.width, shape.channels),
            data,
        )?)
    }
}

fn out_dim(n: usize) -> usize {
    // (n + 2·pad − kernel) / stride + 1
    (n + 2 - KERNEL) / 2 + 1
}

fn conv_forward(stage: &ConvStage, input: &Tensor) -> Tensor {
    let (oh, ow) = (out_dim(input.h), out_dim(input.w));
    let mut out = Tensor::zeros(oh, ow, stage.out_channels);
    for oy in 0..oh {
        for ox in 0..ow {
            for o in 0..stage.out_channels {
                let mut acc = stage.bias[o];
                for ky in 0..KERNEL {
                    let iy = (2 * oy + ky) as isize - 1;
                    if iy < 0 || iy >= input.h as isize {
                        continue;
                    }
                    for kx in 0..KERNEL {
                        let ix = (2 * ox + kx) as isize - 1;
                        if ix < 0 || ix >= input.w as isize {
                            continue;
                        }
                        let base = input.at(iy as usize, ix as usize, 0);
                        for i in 0..stage.in_channels {
                            acc += stage.w(o, i, ky, kx) * input.data[base + i];
                        }
                    }
                }
                let idx = out.at(oy, ox, o);
                out.data[idx] = acc;
            }
        }
    }
    out
}

fn conv_backward_input(stage: &ConvStage, grad_out: &Tensor, ih: usize, iw: usize) -> Tensor {
    let mut grad_in = Tensor::zeros(ih, iw, stage.in_channels);
    for oy in 0..grad_out.h {
        for ox in 0..grad_out.w {
            for o in 0..stage.out_channels {
                let g = grad_out.data[grad_out.at(oy, ox, o)];
                if g == 0.0 {
                    continue;
                }
                for ky in 0..KERNEL {
                    let iy = (2 * oy + ky) as isize - 1;
                    if iy < 0 || iy >= ih as isize {
                        continue;
                    }
                    for kx in 0..KERNEL {
                        let ix = (2 * ox + kx) as isize - 1;
                        if ix < 0 || ix >= iw as isize {
                            continue;
                        }
                        let base = grad_in.at(iy as usize, ix as usize, 0);
                        for i in 0..stage.in_channels {
                            grad_in.data[base + i] += stage.w(o, i, ky, kx) * g;
                        }
                    }
                }
            }
        }
    }
    grad_in
}

fn global_mean_relu(pre: &Tensor) -> Vec<f64> {
    let mut emb = vec![0.0; pre.c];
    for (i, &v) in pre.data.iter().enumerate() {
        emb[i % pre.c] += v.max(0.0);
    }
    let area = (pre.h * pre.w) as f64;
    emb.iter_mut().for_each(|v| *v /= area);
    emb
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MetricError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(MetricError::TruncatedWeights);
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, MetricError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64(&mut self) -> Result<f64, MetricError> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }
}
