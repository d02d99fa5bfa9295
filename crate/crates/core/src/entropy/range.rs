//! Carry-propagating range coder with a 64-bit low register, a 32-bit range
//! and byte-wise renormalization.

use crate::error::{Error, Result};

use super::cdf::{CdfTable, FREQ_BITS, FREQ_TOTAL};

const TOP: u32 = 1 << 24;

#[derive(Clone, Debug)]
pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    pending: u64,
    started: bool,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        Self {
            low: 0,
            range: u32::MAX,
            cache: 0,
            pending: 1,
            started: false,
            out: Vec::new(),
        }
    }

    pub fn encode(&mut self, table: &CdfTable, symbol: usize) {
        let r = self.range >> FREQ_BITS;
        self.low += u64::from(r) * u64::from(table.cum(symbol));
        self.range = r * table.freq(symbol);
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xff00_0000 || self.low >> 32 != 0 {
            let carry = (self.low >> 32) as u8;
            let mut byte = self.cache;
            loop {
                // The very first cached byte is always zero and never
                // receives a carry, so it is not emitted.
                if self.started {
                    self.out.push(byte.wrapping_add(carry));
                }
                self.started = true;
                byte = 0xff;
                self.pending -= 1;
                if self.pending == 0 {
                    break;
                }
            }
            self.cache = (self.low >> 24) as u8;
        }
        self.pending += 1;
        self.low = (self.low & 0x00ff_ffff) << 8;
    }

    /// Bytes emitted so far (excluding the unflushed tail).
    pub fn len(&self) -> usize {
        self.out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_empty()
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

#[derive(Clone, Debug)]
pub struct RangeDecoder<'a> {
    code: u32,
    range: u32,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(bytes: &'a [u8]) -> Result<Self> {
        let mut d = Self {
            code: 0,
            range: u32::MAX,
            bytes,
            pos: 0,
        };
        for _ in 0..4 {
            d.code = d.code << 8 | u32::from(d.next_byte()?);
        }
        Ok(d)
    }

    #[inline]
    fn next_byte(&mut self) -> Result<u8> {
        let b = *self.bytes.get(self.pos).ok_or(Error::UnexpectedEof)?;
        self.pos += 1;
        Ok(b)
    }

    pub fn decode(&mut self, table: &CdfTable) -> Result<usize> {
        let r = self.range >> FREQ_BITS;
        let target = self.code / r;
        if target >= FREQ_TOTAL {
            return Err(Error::CorruptStream(
                "range decoder state out of bounds".into(),
            ));
        }
        let s = table.find(target);
        self.code -= r * table.cum(s);
        self.range = r * table.freq(s);
        while self.range < TOP {
            self.range <<= 8;
            self.code = self.code << 8 | u32::from(self.next_byte()?);
        }
        Ok(s)
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }

    /// True once every payload byte has been read, as for a well-formed
    /// stream after its last symbol.
    pub fn is_exhausted(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

fn check_symbols(symbols: &[usize], tables: &[CdfTable]) -> Result<()> {
    if symbols.len() != tables.len() {
        return Err(Error::Shape(format!(
            "{} symbols for {} tables",
            symbols.len(),
            tables.len()
        )));
    }
    if let Some((s, t)) = symbols.iter().zip(tables).find(|(s, t)| **s >= t.symbols()) {
        return Err(Error::IndexError {
            index: *s,
            len: t.symbols(),
        });
    }
    Ok(())
}

/// Codes `symbols[i]` with `tables[i]`.
pub fn range_encode(symbols: &[usize], tables: &[CdfTable]) -> Result<Vec<u8>> {
    check_symbols(symbols, tables)?;
    let mut enc = RangeEncoder::new();
    for (&s, t) in symbols.iter().zip(tables) {
        enc.encode(t, s);
    }
    Ok(enc.finish())
}

/// Decodes one symbol per table; the stream must be consumed exactly.
pub fn range_decode(bytes: &[u8], tables: &[CdfTable]) -> Result<Vec<usize>> {
    let mut dec = RangeDecoder::new(bytes)?;
    let symbols = tables
        .iter()
        .map(|t| dec.decode(t))
        .collect::<Result<Vec<_>>>()?;
    if !dec.is_exhausted() {
        return Err(Error::CorruptStream(format!(
            "{} unread payload bytes",
            bytes.len() - dec.consumed()
        )));
    }
    Ok(symbols)
}
