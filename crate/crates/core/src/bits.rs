//! Length-tagged bit strings.
//!
//! Every protocol message, key, counter and index is a [`BitString`]. Bits are
//! stored most-significant first; unused trailing bits of the last byte are
//! always zero so that equality and hashing are well defined.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct BitString {
    bytes: Vec<u8>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            bytes: vec![0; len.div_ceil(8)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut s = Self {
            bytes: vec![0xff; len.div_ceil(8)],
            len,
        };
        s.clear_tail();
        s
    }

    pub fn from_bytes(bytes: impl Into<Vec<u8>>) -> Self {
        let bytes = bytes.into();
        let len = bytes.len() * 8;
        Self { bytes, len }
    }

    /// Builds a string of `len` bits from packed bytes. Bits past `len` must be zero.
    pub fn from_bytes_with_len(bytes: impl Into<Vec<u8>>, len: usize) -> Result<Self> {
        let bytes = bytes.into();
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Malformed(format!(
                "{} bytes cannot hold exactly {len} bits",
                bytes.len()
            )));
        }
        let s = Self { bytes, len };
        let mut check = s.clone();
        check.clear_tail();
        if check != s {
            return Err(Error::Malformed("non-zero padding bits".into()));
        }
        Ok(s)
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                s.bytes[i / 8] |= 0x80 >> (i % 8);
            }
        }
        s
    }

    /// Big-endian encoding of `value` in `len` bits; high bits that do not fit are dropped.
    pub fn from_u64(value: u64, len: usize) -> Self {
        let mut s = Self::zeros(len);
        for i in 0..len.min(64) {
            if value >> i & 1 == 1 {
                s.set_bit(len - 1 - i, true);
            }
        }
        s
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_byte_aligned(&self) -> bool {
        self.len % 8 == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        self.bytes[i / 8] & (0x80 >> (i % 8)) != 0
    }

    pub fn set_bit(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 0x80 >> (i % 8);
        if value {
            self.bytes[i / 8] |= mask;
        } else {
            self.bytes[i / 8] &= !mask;
        }
    }

    pub fn flip_bit(&mut self, i: usize) {
        let b = self.bit(i);
        self.set_bit(i, !b);
    }

    pub fn with_flipped_bit(&self, i: usize) -> Self {
        let mut s = self.clone();
        s.flip_bit(i);
        s
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(|i| self.bit(i))
    }

    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                param: "xor operand",
                expected: self.len,
                actual: other.len,
            });
        }
        let bytes = self
            .bytes
            .iter()
            .zip(&other.bytes)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(Self {
            bytes,
            len: self.len,
        })
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        if self.is_byte_aligned() {
            let mut bytes = self.bytes.clone();
            bytes.extend_from_slice(&other.bytes);
            return Self {
                bytes,
                len: self.len + other.len,
            };
        }
        let mut out = Self::zeros(self.len + other.len);
        for (i, b) in self.bits().chain(other.bits()).enumerate() {
            if b {
                out.set_bit(i, true);
            }
        }
        out
    }

    pub fn concat_all<'a>(parts: impl IntoIterator<Item = &'a BitString>) -> BitString {
        parts
            .into_iter()
            .fold(BitString::new(), |acc, p| acc.concat(p))
    }

    /// Bits `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Result<BitString> {
        if start + len > self.len {
            return Err(Error::LengthMismatch {
                param: "slice",
                expected: start + len,
                actual: self.len,
            });
        }
        if start % 8 == 0 {
            let mut s = Self {
                bytes: self.bytes[start / 8..(start + len).div_ceil(8)].to_vec(),
                len,
            };
            s.clear_tail();
            return Ok(s);
        }
        let mut out = Self::zeros(len);
        for i in 0..len {
            if self.bit(start + i) {
                out.set_bit(i, true);
            }
        }
        Ok(out)
    }

    /// Splits into consecutive pieces of the given bit lengths, which must sum to `len()`.
    pub fn split(&self, lengths: &[usize]) -> Result<Vec<BitString>> {
        let total: usize = lengths.iter().sum();
        if total != self.len {
            return Err(Error::LengthMismatch {
                param: "split",
                expected: total,
                actual: self.len,
            });
        }
        let mut at = 0;
        lengths
            .iter()
            .map(|&l| {
                let piece = self.slice(at, l);
                at += l;
                piece
            })
            .collect()
    }

    /// Zero-extends on the right to `len` bits (no-op if already at least that long).
    pub fn zero_extend(&self, len: usize) -> BitString {
        if self.len >= len {
            return self.clone();
        }
        self.concat(&BitString::zeros(len - self.len))
    }

    pub fn hamming_weight(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Interprets the string as an unsigned big-endian integer and adds one.
    pub fn increment(&self) -> Result<BitString> {
        let mut out = self.clone();
        for i in (0..self.len).rev() {
            if out.bit(i) {
                out.set_bit(i, false);
            } else {
                out.set_bit(i, true);
                return Ok(out);
            }
        }
        Err(Error::CounterOverflow)
    }

    /// True iff the string is `0…01…1` with at least one trailing one.
    pub fn is_low_ones_mask(&self) -> bool {
        let leading_zeros = self.bits().take_while(|b| !b).count();
        leading_zeros < self.len && self.bits().skip(leading_zeros).all(|b| b)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.bytes)
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 8;
        if rem != 0 {
            if let Some(last) = self.bytes.last_mut() {
                *last &= 0xffu8 << (8 - rem);
            }
        }
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({}b:{})", self.len, self.to_hex())
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl From<&[u8]> for BitString {
    fn from(b: &[u8]) -> Self {
        Self::from_bytes(b.to_vec())
    }
}

impl<const N: usize> From<[u8; N]> for BitString {
    fn from(b: [u8; N]) -> Self {
        Self::from_bytes(b.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xor_requires_equal_length() {
        let a = BitString::zeros(8);
        let b = BitString::zeros(9);
        assert!(matches!(a.xor(&b), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn xor_is_an_involution_on_all_short_strings() {
        for len in 0..=6usize {
            for x in 0u64..(1 << len) {
                for y in 0u64..(1 << len) {
                    let a = BitString::from_u64(x, len);
                    let b = BitString::from_u64(y, len);
                    assert_eq!(a.xor(&b).unwrap().xor(&b).unwrap(), a);
                }
            }
        }
    }

    #[test]
    fn concat_length_is_additive_for_unaligned() {
        let a = BitString::from_bits(&[true, false, true]);
        let b = BitString::from_bits(&[true, true]);
        let c = a.concat(&b);
        assert_eq!(c.len(), 5);
        assert_eq!(c, BitString::from_bits(&[true, false, true, true, true]));
        assert_eq!(c.slice(3, 2).unwrap(), b);
    }

    #[test]
    fn increment_is_big_endian() {
        let c = BitString::from_u64(1, 16);
        assert_eq!(c.increment().unwrap(), BitString::from_u64(2, 16));
        let c = BitString::from_u64(0x00ff, 16);
        assert_eq!(c.increment().unwrap().as_bytes(), &[0x01, 0x00]);
        assert!(matches!(
            BitString::ones(12).increment(),
            Err(Error::CounterOverflow)
        ));
    }

    #[test]
    fn low_ones_mask() {
        // ctr xor (ctr + 1) always has this shape
        for ctr in 1u64..200 {
            let x = BitString::from_u64(ctr, 32)
                .xor(&BitString::from_u64(ctr + 1, 32))
                .unwrap();
            assert!(x.is_low_ones_mask(), "ctr={ctr}");
        }
        assert_eq!(
            BitString::from_u64(1, 8).xor(&BitString::from_u64(2, 8)).unwrap(),
            BitString::from_u64(3, 8)
        );
        assert!(!BitString::zeros(8).is_low_ones_mask());
        assert!(!BitString::from_u64(0b0110, 8).is_low_ones_mask());
        assert!(BitString::ones(8).is_low_ones_mask());
    }

    #[test]
    fn padding_bits_must_be_zero() {
        assert!(BitString::from_bytes_with_len(vec![0xff], 4).is_err());
        assert!(BitString::from_bytes_with_len(vec![0xf0], 4).is_ok());
        assert!(BitString::from_bytes_with_len(vec![0xf0, 0], 4).is_err());
    }

    #[test]
    fn split_round_trips() {
        let s = BitString::from_bytes(vec![1, 2, 3, 4, 5]);
        let parts = s.split(&[8, 12, 20]).unwrap();
        assert_eq!(BitString::concat_all(&parts), s);
        assert!(s.split(&[8, 8]).is_err());
    }
}
