//! Mask-aware residual coding of the quantized mosaic.
//!
//! Inside a tile every sample equals the tile's top-left sample, so only the
//! DPCM residual at each tile anchor carries information. All other
//! positions are reconstructed from the mask alone and cost no bits. The
//! coded symbol count is therefore `K × tile_count`.

use super::predict::{predict_forward, predictor};
use super::range_coder::{RangeDecoder, RangeEncoder};
use super::{AdaptiveModel, LosslessError};
use crate::image::{Image, Shape};
use crate::quant::{IndexPlane, QuantSpec};
use crate::rap::MaskGrid;

/// Residual alphabet for `L` levels: offsets `−(L−1)..=(L−1)` shifted by `L−1`.
pub fn residual_alphabet(spec: &QuantSpec) -> usize {
    2 * spec.levels() as usize - 1
}

/// Number of symbols `code_residuals` emits for this mask and channel count.
pub fn coded_symbol_count(mask: &MaskGrid, channels: usize) -> usize {
    mask.tile_count() * channels
}

fn check_shape(q: Shape, mask: &MaskGrid) -> Result<(), LosslessError> {
    if q.height != mask.padded_height() || q.width != mask.padded_width() {
        return Err(LosslessError::ShapeMismatch);
    }
    Ok(())
}

/// Anchor residual symbols in coding order: pixel raster order, channels
/// innermost, skipping every non-anchor position.
pub fn residual_symbols(
    q: &IndexPlane,
    mask: &MaskGrid,
    spec: &QuantSpec,
) -> Result<Vec<usize>, LosslessError> {
    check_shape(q.shape(), mask)?;
    let offset = spec.max_index();
    let k = q.channels();
    let e = predict_forward(q);
    let mut symbols = Vec::with_capacity(coded_symbol_count(mask, k));
    for r in 0..q.height() {
        for c in 0..q.width() {
            let b = mask.block_at(r, c);
            let (ar, ac) = (r - r % b, c - c % b);
            for ch in 0..k {
                let v = q.get(r, c, ch);
                if v < 0 || v > offset {
                    return Err(LosslessError::IndexOutOfRange {
                        index: v,
                        levels: spec.levels(),
                    });
                }
                if (ar, ac) == (r, c) {
                    symbols.push((e.get(r, c, ch) + offset) as usize);
                } else if v != q.get(ar, ac, ch) {
                    return Err(LosslessError::MosaicInconsistent { row: r, col: c });
                }
            }
        }
    }
    Ok(symbols)
}

pub fn code_residuals(
    q: &IndexPlane,
    mask: &MaskGrid,
    spec: &QuantSpec,
) -> Result<Vec<u8>, LosslessError> {
    let symbols = residual_symbols(q, mask, spec)?;
    let mut model = AdaptiveModel::new(residual_alphabet(spec));
    let mut enc = RangeEncoder::new();
    for s in symbols {
        enc.encode_symbol(&mut model, s);
    }
    Ok(enc.finish())
}

pub fn decode_residuals(
    bytes: &[u8],
    mask: &MaskGrid,
    spec: &QuantSpec,
    channels: usize,
) -> Result<IndexPlane, LosslessError> {
    let shape = Shape::new(mask.padded_height(), mask.padded_width(), channels);
    let mut q: IndexPlane = Image::filled(shape, 0);
    let offset = spec.max_index();
    let mut model = AdaptiveModel::new(residual_alphabet(spec));
    let mut dec = RangeDecoder::new(bytes)?;
    for r in 0..shape.height {
        for c in 0..shape.width {
            let b = mask.block_at(r, c);
            let (ar, ac) = (r - r % b, c - c % b);
            for ch in 0..channels {
                let v = if (ar, ac) == (r, c) {
                    let e = dec.decode_symbol(&mut model)? as i32 - offset;
                    let v = predictor(&q, r, c, ch) + e;
                    if v < 0 || v > offset {
                        return Err(LosslessError::IndexOutOfRange {
                            index: v,
                            levels: spec.levels(),
                        });
                    }
                    v
                } else {
                    q.get(ar, ac, ch)
                };
                q.set(r, c, ch, v);
            }
        }
    }
    if dec.position() != bytes.len() {
        return Err(LosslessError::TrailingBytes {
            consumed: dec.position(),
            len: bytes.len(),
        });
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rap::BlockSizeSet;

    fn count_by_enumeration(mask: &MaskGrid, k: usize) -> usize {
        // brute force: a pixel is coded iff no other pixel of its tile
        // precedes it in raster order
        let (h, w) = (mask.padded_height(), mask.padded_width());
        let mut seen = std::collections::HashSet::new();
        let mut coded = 0;
        for r in 0..h {
            for c in 0..w {
                let b = mask.block_at(r, c);
                if seen.insert((r / b, c / b, b, r / mask.max_block(), c / mask.max_block())) {
                    coded += k;
                }
            }
        }
        coded
    }

    #[test]
    fn mixed_mask_symbol_count() {
        let sizes = BlockSizeSet::new(8).unwrap();
        let mask = MaskGrid::from_cells(sizes, 2, 2, vec![8, 4, 4, 4]).unwrap();
        assert_eq!(count_by_enumeration(&mask, 1), 13);
        let q = Image::filled(Shape::new(16, 16, 1), 3);
        let spec = QuantSpec::with_levels(8).unwrap();
        assert_eq!(residual_symbols(&q, &mask, &spec).unwrap().len(), 13);
        assert_eq!(coded_symbol_count(&mask, 1), 13);
    }

    #[test]
    fn coarse_and_fine_masks() {
        let spec = QuantSpec::with_levels(8).unwrap();
        let sizes = BlockSizeSet::new(8).unwrap();
        let coarse = MaskGrid::uniform(sizes.clone(), 3, 2, 8).unwrap();
        let q = Image::from_fn(Shape::new(24, 16, 3), |r, c, k| {
            ((r / 8 + c / 8 + k) % 8) as i32
        });
        assert_eq!(residual_symbols(&q, &coarse, &spec).unwrap().len(), 6 * 3);
        let fine = MaskGrid::uniform(sizes, 3, 2, 1).unwrap();
        assert_eq!(
            residual_symbols(&q, &fine, &spec).unwrap().len(),
            24 * 16 * 3
        );
        for mask in [&coarse, &fine] {
            let bytes = code_residuals(&q, mask, &spec).unwrap();
            assert_eq!(decode_residuals(&bytes, mask, &spec, 3).unwrap(), q);
        }
    }

    #[test]
    fn inconsistent_mosaic_rejected() {
        let spec = QuantSpec::with_levels(8).unwrap();
        let mask = MaskGrid::uniform(BlockSizeSet::new(4).unwrap(), 1, 1, 4).unwrap();
        let mut q = Image::filled(Shape::new(4, 4, 1), 2);
        q.set(2, 3, 0, 5);
        assert_eq!(
            residual_symbols(&q, &mask, &spec),
            Err(LosslessError::MosaicInconsistent { row: 2, col: 3 })
        );
    }

    #[test]
    fn shape_and_range_checks() {
        let spec = QuantSpec::with_levels(4).unwrap();
        let mask = MaskGrid::uniform(BlockSizeSet::new(4).unwrap(), 1, 1, 1).unwrap();
        let q = Image::filled(Shape::new(8, 4, 1), 0);
        assert_eq!(
            code_residuals(&q, &mask, &spec),
            Err(LosslessError::ShapeMismatch)
        );
        let q = Image::filled(Shape::new(4, 4, 1), 4);
        assert!(matches!(
            code_residuals(&q, &mask, &spec),
            Err(LosslessError::IndexOutOfRange { .. })
        ));
    }
}
