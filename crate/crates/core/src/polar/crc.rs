//! Bit-serial CRCs over arbitrary-length bit sequences.

use crate::error::{invalid, Result};

/// CRC parameters. `polynomial` omits the leading `x^width` term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CrcSpec {
    pub width: u32,
    pub polynomial: u64,
    pub init: u64,
}

impl CrcSpec {
    pub fn new(width: u32, polynomial: u64, init: u64) -> Result<Self> {
        if width == 0 || width > 63 {
            return invalid(format!("crc width {width} outside 1..=63"));
        }
        let mask = (1u64 << width) - 1;
        if polynomial & !mask != 0 || init & !mask != 0 {
            return invalid("crc polynomial or init wider than the crc");
        }
        if polynomial & 1 == 0 {
            return invalid("crc polynomial must have a constant term");
        }
        Ok(Self { width, polynomial, init })
    }

    /// x^4 + x + 1, init 0.
    pub const CRC4: CrcSpec = CrcSpec { width: 4, polynomial: 0x3, init: 0 };
    /// CRC-16-CCITT, x^16 + x^12 + x^5 + 1, init 0.
    pub const CRC16_CCITT: CrcSpec = CrcSpec { width: 16, polynomial: 0x1021, init: 0 };

    /// Default polynomial for a CRC width used by scheme configs.
    pub fn for_width(width: usize) -> Result<Option<CrcSpec>> {
        match width {
            0 => Ok(None),
            4 => Ok(Some(Self::CRC4)),
            6 => Ok(Some(CrcSpec { width: 6, polynomial: 0x21, init: 0 })),
            11 => Ok(Some(CrcSpec { width: 11, polynomial: 0x621, init: 0 })),
            16 => Ok(Some(Self::CRC16_CCITT)),
            24 => Ok(Some(CrcSpec { width: 24, polynomial: 0x864CFB, init: 0 })),
            w => invalid(format!("no default crc polynomial for width {w}")),
        }
    }

    fn mask(&self) -> u64 {
        (1u64 << self.width) - 1
    }

    /// Remainder of the MSB-first division of `bits` (followed by `width` zeros).
    pub fn remainder(&self, bits: &[u8]) -> u64 {
        let top = 1u64 << (self.width - 1);
        let mut reg = self.init;
        for &b in bits {
            let fb = ((reg & top) != 0) as u64 ^ (b as u64 & 1);
            reg = (reg << 1) & self.mask();
            if fb != 0 {
                reg ^= self.polynomial;
            }
        }
        reg
    }
}

/// Append `width` CRC bits (remainder, MSB first) to `payload`.
pub fn crc_attach(payload: &[u8], crc: &CrcSpec) -> Result<Vec<u8>> {
    if payload.is_empty() {
        return invalid("crc payload must be non-empty");
    }
    let r = crc.remainder(payload);
    let mut out = Vec::with_capacity(payload.len() + crc.width as usize);
    out.extend_from_slice(payload);
    out.extend((0..crc.width).rev().map(|i| ((r >> i) & 1) as u8));
    Ok(out)
}

/// Check a word produced by [`crc_attach`].
pub fn crc_check(word: &[u8], crc: &CrcSpec) -> Result<bool> {
    let w = crc.width as usize;
    if word.len() < w {
        return invalid(format!("word of length {} shorter than crc width {w}", word.len()));
    }
    Ok(crc_matches(word, crc))
}

/// Infallible check used in decoder hot loops; words shorter than the CRC fail.
pub fn crc_matches(word: &[u8], crc: &CrcSpec) -> bool {
    let w = crc.width as usize;
    if word.len() < w {
        return false;
    }
    let (payload, tail) = word.split_at(word.len() - w);
    let r = crc.remainder(payload);
    tail.iter().enumerate().all(|(i, &b)| ((r >> (w - 1 - i)) & 1) as u8 == (b & 1))
}
