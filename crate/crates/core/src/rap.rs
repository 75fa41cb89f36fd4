//! Regionally adaptive pooling.
//!
//! The image is divided into `N × N` superblocks. Each superblock carries one
//! block size `n` (a divisor of `N`) and is split into `(N/n)²` tiles of
//! `n × n` pixels. Every tile is replaced by its per-channel mean, giving a
//! piecewise-constant "mosaic" at full resolution.

use thiserror::Error;

use crate::image::{Image, ImageF, ImageU8, Shape};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RapError {
    #[error("maximum block size must be at least 1")]
    ZeroBlockSize,
    #[error("block size {size} is not a divisor of {max}")]
    NotADivisor { size: usize, max: usize },
    #[error(
        "image {height}x{width} does not match a {rows}x{cols} mask of {max}-pixel superblocks"
    )]
    DimensionMismatch {
        height: usize,
        width: usize,
        rows: usize,
        cols: usize,
        max: usize,
    },
    #[error("tile list holds {actual} values, mask requires {expected}")]
    LengthMismatch { expected: usize, actual: usize },
}

/// The block sizes available under a maximum size `N`: all divisors of `N`
/// in ascending order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BlockSizeSet {
    max: usize,
    allowed: Vec<usize>,
}

impl BlockSizeSet {
    pub fn new(max: usize) -> Result<Self, RapError> {
        if max == 0 {
            return Err(RapError::ZeroBlockSize);
        }
        let allowed = (1..=max).filter(|n| max.is_multiple_of(*n)).collect();
        Ok(BlockSizeSet { max, allowed })
    }

    pub fn max(&self) -> usize {
        self.max
    }

    pub fn allowed(&self) -> &[usize] {
        &self.allowed
    }

    /// Position of `size` in the ascending list, used as the mask symbol.
    pub fn symbol_of(&self, size: usize) -> Option<usize> {
        self.allowed.iter().position(|&n| n == size)
    }

    pub fn size_of(&self, symbol: usize) -> Option<usize> {
        self.allowed.get(symbol).copied()
    }

    /// Next smaller allowed size, or `None` at 1.
    pub fn next_smaller(&self, size: usize) -> Option<usize> {
        let idx = self.symbol_of(size)?;
        idx.checked_sub(1).map(|i| self.allowed[i])
    }
}

/// One block size per superblock, raster order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MaskGrid {
    sizes: BlockSizeSet,
    rows: usize,
    cols: usize,
    cells: Vec<usize>,
}

impl MaskGrid {
    /// A grid with every cell set to `fill`.
    pub fn uniform(
        sizes: BlockSizeSet,
        rows: usize,
        cols: usize,
        fill: usize,
    ) -> Result<Self, RapError> {
        if sizes.symbol_of(fill).is_none() {
            return Err(RapError::NotADivisor {
                size: fill,
                max: sizes.max(),
            });
        }
        Ok(MaskGrid {
            sizes,
            rows,
            cols,
            cells: vec![fill; rows * cols],
        })
    }

    pub fn from_cells(
        sizes: BlockSizeSet,
        rows: usize,
        cols: usize,
        cells: Vec<usize>,
    ) -> Result<Self, RapError> {
        if cells.len() != rows * cols {
            return Err(RapError::LengthMismatch {
                expected: rows * cols,
                actual: cells.len(),
            });
        }
        if let Some(&bad) = cells.iter().find(|&&n| sizes.symbol_of(n).is_none()) {
            return Err(RapError::NotADivisor {
                size: bad,
                max: sizes.max(),
            });
        }
        Ok(MaskGrid {
            sizes,
            rows,
            cols,
            cells,
        })
    }

    /// Grid covering a padded image of the given height and width.
    pub fn for_padded(
        sizes: BlockSizeSet,
        height: usize,
        width: usize,
        fill: usize,
    ) -> Result<Self, RapError> {
        let n = sizes.max();
        if !height.is_multiple_of(n) || !width.is_multiple_of(n) {
            return Err(RapError::DimensionMismatch {
                height,
                width,
                rows: height / n,
                cols: width / n,
                max: n,
            });
        }
        Self::uniform(sizes, height / n, width / n, fill)
    }

    pub fn sizes(&self) -> &BlockSizeSet {
        &self.sizes
    }

    pub fn max_block(&self) -> usize {
        self.sizes.max()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> usize {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, size: usize) -> Result<(), RapError> {
        if self.sizes.symbol_of(size).is_none() {
            return Err(RapError::NotADivisor {
                size,
                max: self.sizes.max(),
            });
        }
        self.cells[row * self.cols + col] = size;
        Ok(())
    }

    pub fn padded_height(&self) -> usize {
        self.rows * self.sizes.max()
    }

    pub fn padded_width(&self) -> usize {
        self.cols * self.sizes.max()
    }

    /// Σ (N/n)² over all superblocks.
    pub fn tile_count(&self) -> usize {
        let n = self.sizes.max();
        self.cells.iter().map(|&s| (n / s) * (n / s)).sum()
    }

    /// Cells that can still move to a smaller block size.
    pub fn refinable_count(&self) -> usize {
        self.cells.iter().filter(|&&s| s > 1).count()
    }

    pub fn is_fully_refined(&self) -> bool {
        self.refinable_count() == 0
    }

    /// Block size covering padded pixel `(row, col)`.
    #[inline]
    pub fn block_at(&self, row: usize, col: usize) -> usize {
        let n = self.sizes.max();
        self.cells[(row / n) * self.cols + col / n]
    }

    /// True when `(row, col)` is the top-left pixel of its tile.
    #[inline]
    pub fn is_tile_anchor(&self, row: usize, col: usize) -> bool {
        let b = self.block_at(row, col);
        row.is_multiple_of(b) && col.is_multiple_of(b)
    }

    fn check_image(&self, shape: Shape) -> Result<(), RapError> {
        if shape.height != self.padded_height() || shape.width != self.padded_width() {
            return Err(RapError::DimensionMismatch {
                height: shape.height,
                width: shape.width,
                rows: self.rows,
                cols: self.cols,
                max: self.sizes.max(),
            });
        }
        Ok(())
    }

    /// Visits every tile in canonical scan order as `(top, left, size)`.
    pub fn for_each_tile(&self, mut f: impl FnMut(usize, usize, usize)) {
        let n = self.sizes.max();
        for sr in 0..self.rows {
            for sc in 0..self.cols {
                let b = self.cells[sr * self.cols + sc];
                for tr in 0..n / b {
                    for tc in 0..n / b {
                        f(sr * n + tr * b, sc * n + tc * b, b);
                    }
                }
            }
        }
    }
}

/// Per-tile, per-channel pooled values in canonical scan order: superblocks
/// in raster order, tiles in raster order within a superblock, channels
/// innermost.
#[derive(Clone, Debug, PartialEq)]
pub struct TileValueList(pub Vec<f64>);

impl TileValueList {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

pub fn pool_tile_means(img: &ImageF, mask: &MaskGrid) -> Result<TileValueList, RapError> {
    mask.check_image(img.shape())?;
    let k = img.channels();
    let mut out = Vec::with_capacity(mask.tile_count() * k);
    mask.for_each_tile(|top, left, b| {
        let base = out.len();
        out.resize(base + k, 0.0);
        for r in top..top + b {
            for c in left..left + b {
                for ch in 0..k {
                    out[base + ch] += img.get(r, c, ch);
                }
            }
        }
        let area = (b * b) as f64;
        for v in &mut out[base..] {
            *v /= area;
        }
    });
    Ok(TileValueList(out))
}

/// Nearest-neighbour replication of tile values back to full resolution.
pub fn assemble_rap(
    tiles: &TileValueList,
    mask: &MaskGrid,
    shape: Shape,
) -> Result<ImageF, RapError> {
    mask.check_image(shape)?;
    let k = shape.channels;
    let expected = mask.tile_count() * k;
    if tiles.len() != expected {
        return Err(RapError::LengthMismatch {
            expected,
            actual: tiles.len(),
        });
    }
    let mut img = Image::filled(shape, 0.0);
    let mut next = 0;
    mask.for_each_tile(|top, left, b| {
        let vals = &tiles.0[next..next + k];
        next += k;
        for r in top..top + b {
            for c in left..left + b {
                for (ch, &v) in vals.iter().enumerate() {
                    img.set(r, c, ch, v);
                }
            }
        }
    });
    Ok(img)
}

/// Pools and replicates in one pass: the RAP mosaic of `img` under `mask`.
pub fn rap_mosaic(img: &ImageF, mask: &MaskGrid) -> Result<ImageF, RapError> {
    let tiles = pool_tile_means(img, mask)?;
    assemble_rap(&tiles, mask, img.shape())
}

/// An image padded up to whole superblocks, with its original size kept
/// for cropping after decode.
#[derive(Clone, Debug, PartialEq)]
pub struct Padded {
    pub image: ImageF,
    pub original: Shape,
}

/// Edge-replicating pad to the next multiples of `max_block`.
pub fn pad_to_superblocks(img: &ImageU8, max_block: usize) -> Padded {
    let original = img.shape();
    let ph = original.height.div_ceil(max_block) * max_block;
    let pw = original.width.div_ceil(max_block) * max_block;
    let shape = Shape::new(ph, pw, original.channels);
    let image = Image::from_fn(shape, |r, c, k| {
        f64::from(img.get(r.min(original.height - 1), c.min(original.width - 1), k))
    });
    Padded { image, original }
}
