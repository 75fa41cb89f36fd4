//! Uniform scalar quantizer with straight-through backward pass.

use thiserror::Error;

use crate::image::{Image, ImageF};

#[derive(Debug, Error, PartialEq)]
pub enum QuantError {
    #[error("level count {0} outside [2, 256]")]
    Levels(u32),
    #[error("invalid range [{lo}, {hi}]")]
    Range { lo: f64, hi: f64 },
    #[error("index {index} outside [0, {max}]")]
    IndexOutOfRange { index: i32, max: i32 },
    #[error("gradient and input shapes differ")]
    ShapeMismatch,
}

/// Integer plane of quantizer indices (or prediction residuals).
pub type IndexPlane = Image<i32>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantSpec {
    levels: u32,
    lo: f64,
    hi: f64,
}

impl QuantSpec {
    pub const MAX_LEVELS: u32 = 256;

    pub fn new(levels: u32, lo: f64, hi: f64) -> Result<Self, QuantError> {
        if !(2..=Self::MAX_LEVELS).contains(&levels) {
            return Err(QuantError::Levels(levels));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(QuantError::Range { lo, hi });
        }
        Ok(QuantSpec { levels, lo, hi })
    }

    /// `levels` reconstruction points spread over the 8-bit range.
    pub fn with_levels(levels: u32) -> Result<Self, QuantError> {
        Self::new(levels, 0.0, 255.0)
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / f64::from(self.levels - 1)
    }

    pub fn max_index(&self) -> i32 {
        self.levels as i32 - 1
    }

    #[inline]
    pub fn index_of(&self, x: f64) -> i32 {
        let clamped = x.clamp(self.lo, self.hi);
        // f64::round ties away from zero; the argument is never negative here
        ((clamped - self.lo) * f64::from(self.levels - 1) / (self.hi - self.lo)).round() as i32
    }

    #[inline]
    pub fn value_of(&self, q: i32) -> f64 {
        self.lo + f64::from(q) * (self.hi - self.lo) / f64::from(self.levels - 1)
    }

    pub fn in_range(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

pub fn quantize(x: &ImageF, spec: &QuantSpec) -> IndexPlane {
    x.map(|v| spec.index_of(v))
}

pub fn dequantize(q: &IndexPlane, spec: &QuantSpec) -> Result<ImageF, QuantError> {
    let max = spec.max_index();
    if let Some(&index) = q.data().iter().find(|&&i| i < 0 || i > max) {
        return Err(QuantError::IndexOutOfRange { index, max });
    }
    Ok(q.map(|i| spec.value_of(i)))
}

/// Backward pass through `dequantize ∘ quantize`: identity Jacobian for
/// in-range inputs, zero where the forward pass clamped.
pub fn straight_through_backward(
    grad_out: &ImageF,
    input: &ImageF,
    spec: &QuantSpec,
) -> Result<ImageF, QuantError> {
    if grad_out.shape() != input.shape() {
        return Err(QuantError::ShapeMismatch);
    }
    let mut grad = grad_out.clone();
    for (g, &x) in grad.data_mut().iter_mut().zip(input.data()) {
        if !spec.in_range(x) {
            *g = 0.0;
        }
    }
    Ok(grad)
}
