use thiserror::Error;

use crate::bitstream::ContainerError;
use crate::image::{ImageError, PnmError};
use crate::lossless::LosslessError;
use crate::metric::MetricError;
use crate::quant::QuantError;
use crate::rap::RapError;

/// Any failure in the encode/decode pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Pnm(#[from] PnmError),
    #[error(transparent)]
    Rap(#[from] RapError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Lossless(#[from] LosslessError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{0}")]
    Config(String),
}
