//! Raster images, binary PNM IO and PSNR.
//!
//! Samples are stored row-major with channels interleaved, so the sample at
//! `(row, col, ch)` lives at `(row * width + col) * channels + ch`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ImageError {
    #[error("sample buffer holds {actual} values, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    Channels(usize),
    #[error("image shapes differ: {0:?} vs {1:?}")]
    ShapeMismatch(Shape, Shape),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PnmError {
    #[error("unsupported PNM format {0:?} (only binary P5 and P6 are accepted)")]
    UnsupportedFormat(String),
    #[error("malformed PNM header: {0}")]
    MalformedHeader(&'static str),
    #[error("unsupported maxval {0} (only 255 is accepted)")]
    Maxval(u32),
    #[error("truncated PNM payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
}

/// Height, width and channel count of an image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Shape {
            height,
            width,
            channels,
        }
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    shape: Shape,
    data: Vec<T>,
}

/// 8-bit image as read from and written to PNM files.
pub type ImageU8 = Image<u8>;
/// Double-precision working image.
pub type ImageF = Image<f64>;

impl<T: Copy> Image<T> {
    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self, ImageError> {
        if shape.channels != 1 && shape.channels != 3 {
            return Err(ImageError::Channels(shape.channels));
        }
        if data.len() != shape.len() {
            return Err(ImageError::BufferSize {
                expected: shape.len(),
                actual: data.len(),
            });
        }
        Ok(Image { shape, data })
    }

    pub fn filled(shape: Shape, value: T) -> Self {
        assert!(
            shape.channels == 1 || shape.channels == 3,
            "channel count must be 1 or 3"
        );
        Image {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        assert!(
            shape.channels == 1 || shape.channels == 3,
            "channel count must be 1 or 3"
        );
        let mut data = Vec::with_capacity(shape.len());
        for r in 0..shape.height {
            for c in 0..shape.width {
                for k in 0..shape.channels {
                    data.push(f(r, c, k));
                }
            }
        }
        Image { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, ch: usize) -> usize {
        (row * self.shape.width + col) * self.shape.channels + ch
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> T {
        self.data[self.index(row, col, ch)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, ch: usize, value: T) {
        let i = self.index(row, col, ch);
        self.data[i] = value;
    }

    pub fn map<U: Copy>(&self, f: impl FnMut(T) -> U) -> Image<U> {
        Image {
            shape: self.shape,
            data: self.data.iter().copied().map(f).collect(),
        }
    }

    /// Top-left `height × width` window.
    pub fn crop(&self, height: usize, width: usize) -> Self {
        assert!(height <= self.shape.height && width <= self.shape.width);
        let shape = Shape::new(height, width, self.shape.channels);
        let row_len = width * shape.channels;
        let mut data = Vec::with_capacity(shape.len());
        for r in 0..height {
            let start = self.index(r, 0, 0);
            data.extend_from_slice(&self.data[start..start + row_len]);
        }
        Image { shape, data }
    }
}

impl ImageU8 {
    pub fn to_f64(&self) -> ImageF {
        self.map(f64::from)
    }
}

impl ImageF {
    /// Rounds to nearest and clamps into `[0, 255]`.
    pub fn to_u8(&self) -> ImageU8 {
        self.map(|v| v.round().clamp(0.0, 255.0) as u8)
    }
}

fn skip_ws_and_comments(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() {
        match bytes[*pos] {
            b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => *pos += 1,
            b'#' => {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            _ => break,
        }
    }
}

fn read_header_uint(bytes: &[u8], pos: &mut usize, what: &'static str) -> Result<u32, PnmError> {
    skip_ws_and_comments(bytes, pos);
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if start == *pos {
        return Err(PnmError::MalformedHeader(what));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or(PnmError::MalformedHeader(what))
}

/// Decodes a binary PGM (P5) or PPM (P6) file with maxval 255.
pub fn load_pnm(bytes: &[u8]) -> Result<ImageU8, PnmError> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(PnmError::MalformedHeader("missing magic number"));
    }
    let channels = match bytes[1] {
        b'5' => 1,
        b'6' => 3,
        other => {
            return Err(PnmError::UnsupportedFormat(format!("P{}", other as char)));
        }
    };
    let mut pos = 2;
    let width = read_header_uint(bytes, &mut pos, "width")? as usize;
    let height = read_header_uint(bytes, &mut pos, "height")? as usize;
    let maxval = read_header_uint(bytes, &mut pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(PnmError::MalformedHeader("zero dimension"));
    }
    if maxval != 255 {
        return Err(PnmError::Maxval(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(PnmError::MalformedHeader("missing whitespace after maxval")),
    }
    let shape = Shape::new(height, width, channels);
    let payload = &bytes[pos..];
    if payload.len() < shape.len() {
        return Err(PnmError::Truncated {
            expected: shape.len(),
            actual: payload.len(),
        });
    }
    Ok(Image {
        shape,
        data: payload[..shape.len()].to_vec(),
    })
}

pub fn save_pnm(img: &ImageU8) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let header = format!("{}\n{} {}\n255\n", magic, img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.data.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&img.data);
    out
}

fn mse(a: &ImageU8, b: &ImageU8) -> Result<f64, ImageError> {
    if a.shape != b.shape {
        return Err(ImageError::ShapeMismatch(a.shape, b.shape));
    }
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum();
    Ok(sum / a.data.len() as f64)
}

/// PSNR in dB over all samples and channels. Identical images give
/// `f64::INFINITY`.
pub fn psnr(a: &ImageU8, b: &ImageU8) -> Result<f64, ImageError> {
    let mse = mse(a, b)?;
    Ok(psnr_from_mse(mse))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / mse).log10()
    }
}

/// Mean squared error between two 8-bit images of the same shape.
pub fn mean_squared_error(a: &ImageU8, b: &ImageU8) -> Result<f64, ImageError> {
    mse(a, b)
}
