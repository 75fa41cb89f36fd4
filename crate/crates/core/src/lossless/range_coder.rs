//! 32-bit multi-symbol range coder with carry propagation.
//!
//! The encoder keeps `low` in a 64-bit register so a carry out of bit 32 can
//! be pushed into the pending `cache` byte and any run of `0xFF` bytes behind
//! it. The leading byte of the classic scheme is always zero and is not
//! written; the decoder primes itself from the first four bytes instead.
//! `finish` flushes the four bytes of `low`, so a stream of `s` renormalising
//! shifts is exactly `s + 4` bytes long and the decoder consumes every byte.

use super::model::AdaptiveModel;
use super::LosslessError;

const TOP: u32 = 1 << 24;

pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    pending: u64,
    first: bool,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        RangeEncoder {
            low: 0,
            range: u32::MAX,
            cache: 0,
            pending: 1,
            first: true,
            out: Vec::new(),
        }
    }

    fn emit(&mut self, byte: u8) {
        if self.first {
            debug_assert_eq!(byte, 0);
            self.first = false;
        } else {
            self.out.push(byte);
        }
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || (self.low >> 32) != 0 {
            let carry = (self.low >> 32) as u8;
            let mut byte = self.cache;
            loop {
                self.emit(byte.wrapping_add(carry));
                byte = 0xFF;
                self.pending -= 1;
                if self.pending == 0 {
                    break;
                }
            }
            self.cache = ((self.low >> 24) & 0xFF) as u8;
        }
        self.pending += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    /// Narrows the interval to `[cum, cum + freq)` out of `total`.
    pub fn encode(&mut self, cum: u32, freq: u32, total: u32) {
        debug_assert!(freq > 0 && cum + freq <= total && total < TOP);
        let r = self.range / total;
        self.low += u64::from(r) * u64::from(cum);
        self.range = r * freq;
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    pub fn encode_symbol(&mut self, model: &mut AdaptiveModel, symbol: usize) {
        let cum = model.cumulative(symbol);
        self.encode(cum, model.count(symbol), model.total());
        model.update(symbol);
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

pub struct RangeDecoder<'a> {
    input: &'a [u8],
    pos: usize,
    range: u32,
    code: u32,
    scale: u32,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(input: &'a [u8]) -> Result<Self, LosslessError> {
        if input.len() < 4 {
            return Err(LosslessError::Truncated);
        }
        let code = u32::from_be_bytes([input[0], input[1], input[2], input[3]]);
        Ok(RangeDecoder {
            input,
            pos: 4,
            range: u32::MAX,
            code,
            scale: 1,
        })
    }

    /// Target frequency in `[0, total)` for the next symbol.
    pub fn decode_target(&mut self, total: u32) -> u32 {
        self.scale = self.range / total;
        (self.code / self.scale).min(total - 1)
    }

    /// Consumes the symbol occupying `[cum, cum + freq)`.
    pub fn consume(&mut self, cum: u32, freq: u32) -> Result<(), LosslessError> {
        self.code = self.code.wrapping_sub(self.scale * cum);
        self.range = self.scale * freq;
        while self.range < TOP {
            let byte = *self.input.get(self.pos).ok_or(LosslessError::Truncated)?;
            self.pos += 1;
            self.code = (self.code << 8) | u32::from(byte);
            self.range <<= 8;
        }
        Ok(())
    }

    pub fn decode_symbol(&mut self, model: &mut AdaptiveModel) -> Result<usize, LosslessError> {
        let target = self.decode_target(model.total());
        let (symbol, cum, freq) = model.find(target);
        self.consume(cum, freq)?;
        model.update(symbol);
        Ok(symbol)
    }

    /// Bytes read so far.
    pub fn position(&self) -> usize {
        self.pos
    }
}

/// Codes `symbols` with a fresh adaptive model over `alphabet` symbols.
pub fn ac_encode(symbols: &[usize], alphabet: usize) -> Result<Vec<u8>, LosslessError> {
    let mut model = AdaptiveModel::new(alphabet);
    let mut enc = RangeEncoder::new();
    for &s in symbols {
        if s >= alphabet {
            return Err(LosslessError::SymbolOutOfAlphabet {
                symbol: s,
                alphabet,
            });
        }
        enc.encode_symbol(&mut model, s);
    }
    Ok(enc.finish())
}

/// Decodes exactly `count` symbols. The stream must be consumed completely.
pub fn ac_decode(bytes: &[u8], count: usize, alphabet: usize) -> Result<Vec<usize>, LosslessError> {
    let mut model = AdaptiveModel::new(alphabet);
    let mut dec = RangeDecoder::new(bytes)?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(dec.decode_symbol(&mut model)?);
    }
    if dec.position() != bytes.len() {
        return Err(LosslessError::TrailingBytes {
            consumed: dec.position(),
            len: bytes.len(),
        });
    }
    Ok(out)
}
