//! End-to-end encode and decode for a fixed mask.
//!
//! Encode: pad → pool/replicate (RAP) → quantize → DPCM → range code.
//! Decode runs the same chain backwards and crops the padding.

use crate::bitstream::{read_container, Container, ContainerParams};
use crate::error::Error;
use crate::image::{ImageF, ImageU8};
use crate::lossless::{code_mask, code_residuals, decode_residuals};
use crate::quant::{dequantize, quantize, IndexPlane, QuantSpec};
use crate::rap::{pad_to_superblocks, rap_mosaic, MaskGrid, Padded};

/// Quantized mosaic of a padded image under `mask`, as indices and as
/// reconstructed sample values. Also returns the pre-quantization mosaic.
pub struct Reconstruction {
    pub mosaic: ImageF,
    pub indices: IndexPlane,
    pub values: ImageF,
}

pub fn reconstruct(
    padded: &ImageF,
    mask: &MaskGrid,
    quant: &QuantSpec,
) -> Result<Reconstruction, Error> {
    let mosaic = rap_mosaic(padded, mask)?;
    let indices = quantize(&mosaic, quant);
    let values = dequantize(&indices, quant)?;
    Ok(Reconstruction {
        mosaic,
        indices,
        values,
    })
}

#[derive(Clone, Debug)]
pub struct Encoded {
    pub container: Container,
    pub bytes: Vec<u8>,
    /// Quantized mosaic over the padded grid, exactly what a decoder recovers.
    pub indices: IndexPlane,
}

impl Encoded {
    pub fn bpp(&self) -> f64 {
        self.container.bpp()
    }

    pub fn mask_overhead(&self) -> f64 {
        self.container.mask_overhead()
    }

    /// The 8-bit image a decoder produces from this stream.
    pub fn decoded_image(&self) -> ImageU8 {
        let p = &self.container.params;
        indices_to_image(&self.indices, &p.quant, p.orig_height, p.orig_width)
    }
}

pub fn encode_padded(
    padded: &Padded,
    mask: &MaskGrid,
    quant: &QuantSpec,
) -> Result<Encoded, Error> {
    let params = ContainerParams {
        orig_height: padded.original.height,
        orig_width: padded.original.width,
        channels: padded.original.channels,
        max_block: mask.max_block(),
        quant: *quant,
    };
    params.validate()?;
    let rec = reconstruct(&padded.image, mask, quant)?;
    let residual_bytes = code_residuals(&rec.indices, mask, quant)?;
    let container = Container {
        params,
        mask_bytes: code_mask(mask),
        residual_bytes,
    };
    let bytes = container.to_bytes()?;
    Ok(Encoded {
        container,
        bytes,
        indices: rec.indices,
    })
}

/// Encodes `img` under an explicit mask covering its padded extent.
pub fn encode_with_mask(
    img: &ImageU8,
    mask: &MaskGrid,
    quant: &QuantSpec,
) -> Result<Encoded, Error> {
    let padded = pad_to_superblocks(img, mask.max_block());
    encode_padded(&padded, mask, quant)
}

pub struct Decoded {
    pub image: ImageU8,
    pub indices: IndexPlane,
    pub mask: MaskGrid,
    pub container: Container,
}

pub fn decode(bytes: &[u8]) -> Result<Decoded, Error> {
    let container = read_container(bytes)?;
    let mask = container.decode_mask()?;
    let p = container.params;
    let indices = decode_residuals(&container.residual_bytes, &mask, &p.quant, p.channels)?;
    let image = indices_to_image(&indices, &p.quant, p.orig_height, p.orig_width);
    Ok(Decoded {
        image,
        indices,
        mask,
        container,
    })
}

/// Dequantize, crop the padding, round to 8 bits.
pub fn indices_to_image(
    indices: &IndexPlane,
    quant: &QuantSpec,
    height: usize,
    width: usize,
) -> ImageU8 {
    let values = dequantize(indices, quant).expect("indices within quantizer range");
    values.crop(height, width).to_u8()
}
