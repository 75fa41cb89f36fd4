//! Learned-metric facial image codec built on regionally adaptive pooling.

pub mod bdrate;
pub mod bitstream;
pub mod cli;
pub mod codec;
mod error;
pub mod harness;
pub mod image;
pub mod lossless;
pub mod metric;
pub mod quant;
pub mod rap;
pub mod ratecontrol;

pub use error::Error;
