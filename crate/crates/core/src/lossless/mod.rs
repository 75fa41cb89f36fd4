//! Lossless back end: DPCM prediction, adaptive range coding, and the
//! mask-aware residual layer that ties them together.

mod model;
mod predict;
mod range_coder;
mod residual;

use thiserror::Error;

pub use model::{AdaptiveModel, MAX_TOTAL};
pub use predict::{predict_forward, predict_inverse};
pub use range_coder::{ac_decode, ac_encode, RangeDecoder, RangeEncoder};
pub use residual::{
    code_residuals, coded_symbol_count, decode_residuals, residual_alphabet, residual_symbols,
};

use crate::rap::MaskGrid;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LosslessError {
    #[error("symbol {symbol} outside alphabet of size {alphabet}")]
    SymbolOutOfAlphabet { symbol: usize, alphabet: usize },
    #[error("arithmetic-coded stream is truncated")]
    Truncated,
    #[error("decoder consumed {consumed} of {len} bytes")]
    TrailingBytes { consumed: usize, len: usize },
    #[error("index plane does not match the mask dimensions")]
    ShapeMismatch,
    #[error("index {index} outside [0, {levels})")]
    IndexOutOfRange { index: i32, levels: u32 },
    #[error("sample at ({row}, {col}) differs from its tile anchor")]
    MosaicInconsistent { row: usize, col: usize },
    #[error("mask symbol {0} is not a valid block size index")]
    BadMaskSymbol(usize),
}

/// Arithmetic-codes the superblock sizes as indices into the block-size set,
/// raster order, fresh order-0 model.
pub fn code_mask(mask: &MaskGrid) -> Vec<u8> {
    let sizes = mask.sizes();
    let symbols: Vec<usize> = mask
        .cells()
        .iter()
        .map(|&n| sizes.symbol_of(n).expect("mask cell in set"))
        .collect();
    ac_encode(&symbols, sizes.allowed().len()).expect("mask symbols within alphabet")
}

pub fn decode_mask(
    bytes: &[u8],
    sizes: crate::rap::BlockSizeSet,
    rows: usize,
    cols: usize,
) -> Result<MaskGrid, LosslessError> {
    let symbols = ac_decode(bytes, rows * cols, sizes.allowed().len())?;
    let cells = symbols
        .into_iter()
        .map(|s| sizes.size_of(s).ok_or(LosslessError::BadMaskSymbol(s)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MaskGrid::from_cells(sizes, rows, cols, cells).expect("decoded cells valid"))
}
