//! The `LFIC` container.
//!
//! ```text
//! offset size field
//!      0    4 magic "LFIC"
//!      4    1 version (1)
//!      5    2 original height      (LE)
//!      7    2 original width       (LE)
//!      9    1 channels K           (1 or 3)
//!     10    1 max block size N     (4 or 8)
//!     11    1 quantizer levels L   (2..=255, or 0 with FLAG_PASSTHROUGH)
//!     12    1 flags
//!     13    4 mask segment length  (LE)
//!     17    4 residual segment length (LE)
//!     21    - mask segment
//!      -    - residual segment
//!      -    4 CRC-32 of every preceding byte (LE)
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use crate::lossless::{self, LosslessError};
use crate::quant::QuantSpec;
use crate::rap::{BlockSizeSet, MaskGrid};

pub const MAGIC: &[u8; 4] = b"LFIC";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 21;
pub const CHECKSUM_LEN: usize = 4;

/// Per-channel masks; reserved, must be clear.
pub const FLAG_PER_CHANNEL_MASK: u8 = 0x01;
/// Quantizer bypassed: 256 levels, one per 8-bit value. The levels byte is 0.
pub const FLAG_PASSTHROUGH: u8 = 0x02;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContainerError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u8),
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("container truncated: need {needed} bytes, have {actual}")]
    Truncated { needed: usize, actual: usize },
    #[error("container has {0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("invalid header field: {0}")]
    InvalidField(&'static str),
    #[error(transparent)]
    Segment(#[from] LosslessError),
}

/// Header values that describe how to rebuild the image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContainerParams {
    pub orig_height: usize,
    pub orig_width: usize,
    pub channels: usize,
    pub max_block: usize,
    pub quant: QuantSpec,
}

impl ContainerParams {
    pub fn validate(&self) -> Result<(), ContainerError> {
        if self.orig_height == 0 || self.orig_height > u16::MAX as usize {
            return Err(ContainerError::InvalidField("height"));
        }
        if self.orig_width == 0 || self.orig_width > u16::MAX as usize {
            return Err(ContainerError::InvalidField("width"));
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(ContainerError::InvalidField("channels"));
        }
        if self.max_block != 4 && self.max_block != 8 {
            return Err(ContainerError::InvalidField("max block"));
        }
        if self.quant.lo() != 0.0 || self.quant.hi() != 255.0 {
            return Err(ContainerError::InvalidField("quantizer range"));
        }
        Ok(())
    }

    pub fn superblock_rows(&self) -> usize {
        self.orig_height.div_ceil(self.max_block)
    }

    pub fn superblock_cols(&self) -> usize {
        self.orig_width.div_ceil(self.max_block)
    }

    pub fn block_sizes(&self) -> BlockSizeSet {
        BlockSizeSet::new(self.max_block).expect("validated max block")
    }

    fn levels_and_flags(&self) -> (u8, u8) {
        match self.quant.levels() {
            256 => (0, FLAG_PASSTHROUGH),
            l => (l as u8, 0),
        }
    }
}

/// A parsed container: header values and the two coded segments.
#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub params: ContainerParams,
    pub mask_bytes: Vec<u8>,
    pub residual_bytes: Vec<u8>,
}

impl Container {
    pub fn total_len(&self) -> usize {
        HEADER_LEN + self.mask_bytes.len() + self.residual_bytes.len() + CHECKSUM_LEN
    }

    /// Bits per original (unpadded) pixel, counting every container byte.
    pub fn bpp(&self) -> f64 {
        bpp(
            self.total_len(),
            self.params.orig_height,
            self.params.orig_width,
        )
    }

    pub fn mask_overhead(&self) -> f64 {
        mask_overhead(self.mask_bytes.len(), self.residual_bytes.len())
    }

    pub fn decode_mask(&self) -> Result<MaskGrid, ContainerError> {
        Ok(lossless::decode_mask(
            &self.mask_bytes,
            self.params.block_sizes(),
            self.params.superblock_rows(),
            self.params.superblock_cols(),
        )?)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, ContainerError> {
        self.params.validate()?;
        let mask_len = u32::try_from(self.mask_bytes.len())
            .map_err(|_| ContainerError::InvalidField("mask length"))?;
        let res_len = u32::try_from(self.residual_bytes.len())
            .map_err(|_| ContainerError::InvalidField("residual length"))?;
        let (levels, flags) = self.params.levels_and_flags();
        let mut out = Vec::with_capacity(self.total_len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(self.params.orig_height as u16).to_le_bytes());
        out.extend_from_slice(&(self.params.orig_width as u16).to_le_bytes());
        out.push(self.params.channels as u8);
        out.push(self.params.max_block as u8);
        out.push(levels);
        out.push(flags);
        out.extend_from_slice(&mask_len.to_le_bytes());
        out.extend_from_slice(&res_len.to_le_bytes());
        out.extend_from_slice(&self.mask_bytes);
        out.extend_from_slice(&self.residual_bytes);
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }
}

pub fn bpp(total_bytes: usize, height: usize, width: usize) -> f64 {
    8.0 * total_bytes as f64 / (height * width) as f64
}

pub fn mask_overhead(mask_bytes: usize, residual_bytes: usize) -> f64 {
    let total = mask_bytes + residual_bytes;
    if total == 0 {
        0.0
    } else {
        mask_bytes as f64 / total as f64
    }
}

/// Arithmetic-codes `mask` and serializes it with an already-coded residual
/// segment.
pub fn write_container(
    mask: &MaskGrid,
    residual_bytes: &[u8],
    params: &ContainerParams,
) -> Result<Vec<u8>, ContainerError> {
    params.validate()?;
    if mask.max_block() != params.max_block
        || mask.rows() != params.superblock_rows()
        || mask.cols() != params.superblock_cols()
    {
        return Err(ContainerError::InvalidField("mask dimensions"));
    }
    Container {
        params: *params,
        mask_bytes: lossless::code_mask(mask),
        residual_bytes: residual_bytes.to_vec(),
    }
    .to_bytes()
}

fn le_u16(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

pub fn read_container(bytes: &[u8]) -> Result<Container, ContainerError> {
    if bytes.len() < MAGIC.len() {
        return Err(ContainerError::Truncated {
            needed: HEADER_LEN + CHECKSUM_LEN,
            actual: bytes.len(),
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(ContainerError::BadMagic([
            bytes[0], bytes[1], bytes[2], bytes[3],
        ]));
    }
    if bytes.len() > 4 && bytes[4] != VERSION {
        return Err(ContainerError::UnsupportedVersion(bytes[4]));
    }
    if bytes.len() < HEADER_LEN + CHECKSUM_LEN {
        return Err(ContainerError::Truncated {
            needed: HEADER_LEN + CHECKSUM_LEN,
            actual: bytes.len(),
        });
    }
    let mask_len = le_u32(&bytes[13..17]) as usize;
    let res_len = le_u32(&bytes[17..21]) as usize;
    let needed = HEADER_LEN + mask_len + res_len + CHECKSUM_LEN;
    if bytes.len() < needed {
        return Err(ContainerError::Truncated {
            needed,
            actual: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(ContainerError::TrailingBytes(bytes.len() - needed));
    }
    let body = &bytes[..needed - CHECKSUM_LEN];
    let stored = le_u32(&bytes[needed - CHECKSUM_LEN..]);
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(ContainerError::ChecksumMismatch { stored, computed });
    }

    let flags = bytes[12];
    if flags & FLAG_PER_CHANNEL_MASK != 0 {
        return Err(ContainerError::InvalidField("per-channel mask flag set"));
    }
    if flags & !(FLAG_PER_CHANNEL_MASK | FLAG_PASSTHROUGH) != 0 {
        return Err(ContainerError::InvalidField("unknown flags"));
    }
    let levels = match (bytes[11], flags & FLAG_PASSTHROUGH != 0) {
        (0, true) => 256,
        (l @ 2..=255, false) => u32::from(l),
        _ => return Err(ContainerError::InvalidField("levels")),
    };
    let params = ContainerParams {
        orig_height: le_u16(&bytes[5..7]) as usize,
        orig_width: le_u16(&bytes[7..9]) as usize,
        channels: bytes[9] as usize,
        max_block: bytes[10] as usize,
        quant: QuantSpec::with_levels(levels).expect("levels in range"),
    };
    params.validate()?;
    Ok(Container {
        params,
        mask_bytes: body[HEADER_LEN..HEADER_LEN + mask_len].to_vec(),
        residual_bytes: body[HEADER_LEN + mask_len..].to_vec(),
    })
}

/// Human-readable summary of a container.
pub fn inspect(bytes: &[u8]) -> Result<String, ContainerError> {
    let c = read_container(bytes)?;
    Ok(summary(&c))
}

pub fn summary(c: &Container) -> String {
    let p = &c.params;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "dimensions: {}x{}x{}",
        p.orig_height, p.orig_width, p.channels
    );
    let _ = writeln!(s, "max block: {}", p.max_block);
    let _ = writeln!(s, "levels: {}", p.quant.levels());
    let _ = writeln!(s, "mask bytes: {}", c.mask_bytes.len());
    let _ = writeln!(s, "residual bytes: {}", c.residual_bytes.len());
    let _ = writeln!(s, "total bytes: {}", c.total_len());
    let _ = writeln!(s, "bpp: {:.6}", c.bpp());
    let _ = writeln!(s, "mask overhead: {:.4}", c.mask_overhead());
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(h: usize, w: usize, k: usize, n: usize, l: u32) -> ContainerParams {
        ContainerParams {
            orig_height: h,
            orig_width: w,
            channels: k,
            max_block: n,
            quant: QuantSpec::with_levels(l).unwrap(),
        }
    }

    fn sample() -> Vec<u8> {
        let p = params(16, 8, 3, 8, 8);
        let mask = MaskGrid::from_cells(p.block_sizes(), 2, 1, vec![8, 2]).unwrap();
        write_container(&mask, &[1, 2, 3, 4, 5], &p).unwrap()
    }

    #[test]
    fn round_trip() {
        let bytes = sample();
        let c = read_container(&bytes).unwrap();
        assert_eq!(c.params, params(16, 8, 3, 8, 8));
        assert_eq!(c.residual_bytes, vec![1, 2, 3, 4, 5]);
        assert_eq!(c.decode_mask().unwrap().cells(), &[8, 2]);
        assert_eq!(c.to_bytes().unwrap(), bytes);
        assert_eq!(c.total_len(), bytes.len());
    }

    #[test]
    fn layout_is_little_endian() {
        let bytes = sample();
        assert_eq!(&bytes[..4], b"LFIC");
        assert_eq!(bytes[4], 1);
        assert_eq!(&bytes[5..9], &[16, 0, 8, 0]);
        assert_eq!(&bytes[9..13], &[3, 8, 8, 0]);
        let mask_len = le_u32(&bytes[13..17]) as usize;
        assert_eq!(le_u32(&bytes[17..21]), 5);
        assert_eq!(bytes.len(), HEADER_LEN + mask_len + 5 + CHECKSUM_LEN);
        let crc = crc32fast::hash(&bytes[..bytes.len() - 4]);
        assert_eq!(&bytes[bytes.len() - 4..], &crc.to_le_bytes());
    }

    #[test]
    fn crc_is_the_reflected_edb88320_polynomial() {
        assert_eq!(crc32fast::hash(b"123456789"), 0xCBF4_3926);
    }

    #[test]
    fn error_kinds() {
        let bytes = sample();
        let mut bad = bytes.clone();
        *bad.last_mut().unwrap() ^= 0x01;
        assert!(matches!(
            read_container(&bad),
            Err(ContainerError::ChecksumMismatch { .. })
        ));

        let mut jfif = bytes.clone();
        jfif[..4].copy_from_slice(b"JFIF");
        assert!(matches!(
            read_container(&jfif),
            Err(ContainerError::BadMagic(_))
        ));

        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert_eq!(
            read_container(&v2),
            Err(ContainerError::UnsupportedVersion(2))
        );

        assert!(matches!(
            read_container(&bytes[..bytes.len() - 7]),
            Err(ContainerError::Truncated { .. })
        ));
        assert!(matches!(
            read_container(&bytes[..10]),
            Err(ContainerError::Truncated { .. })
        ));
    }

    #[test]
    fn passthrough_levels() {
        let p = params(8, 8, 1, 8, 256);
        let mask = MaskGrid::uniform(p.block_sizes(), 1, 1, 1).unwrap();
        let bytes = write_container(&mask, &[0; 4], &p).unwrap();
        assert_eq!((bytes[11], bytes[12]), (0, FLAG_PASSTHROUGH));
        assert_eq!(read_container(&bytes).unwrap().params.quant.levels(), 256);
    }

    #[test]
    fn invalid_params() {
        let mask = MaskGrid::uniform(BlockSizeSet::new(2).unwrap(), 1, 1, 2).unwrap();
        assert_eq!(
            write_container(&mask, &[], &params(2, 2, 1, 2, 8)),
            Err(ContainerError::InvalidField("max block"))
        );
        let mask = MaskGrid::uniform(BlockSizeSet::new(8).unwrap(), 1, 1, 8).unwrap();
        assert_eq!(
            write_container(&mask, &[], &params(16, 8, 1, 8, 8)),
            Err(ContainerError::InvalidField("mask dimensions"))
        );
    }

    #[test]
    fn accounting() {
        assert_eq!(bpp(1008, 144, 112), 0.5);
        assert!((mask_overhead(50, 450) - 0.10).abs() < 1e-15);
    }
}
