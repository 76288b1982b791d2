//! Length-prefixed field encoding shared by credentials, wire frames and
//! the reader database file: each field is a 2-byte big-endian length
//! followed by that many bytes.

use crate::bits::BitString;
use crate::error::{Error, Result};

pub const MAX_FIELD: usize = u16::MAX as usize;

#[derive(Debug, Default, Clone)]
pub struct FieldWriter {
    buf: Vec<u8>,
}

impl FieldWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn raw(&mut self, bytes: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn field(&mut self, bytes: &[u8]) -> &mut Self {
        assert!(bytes.len() <= MAX_FIELD, "field of {} bytes", bytes.len());
        self.buf.extend_from_slice(&(bytes.len() as u16).to_be_bytes());
        self.buf.extend_from_slice(bytes);
        self
    }

    /// Byte-aligned bit strings only.
    pub fn bits(&mut self, b: &BitString) -> &mut Self {
        assert!(b.is_byte_aligned(), "unaligned bit string in field encoding");
        self.field(b.as_bytes())
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.field(&[v])
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.field(&v.to_be_bytes())
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.field(&v.to_be_bytes())
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.field(s.as_bytes())
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug, Clone)]
pub struct FieldReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> FieldReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn raw(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Malformed(format!(
                "need {n} bytes at offset {}, have {}",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn field(&mut self) -> Result<&'a [u8]> {
        let len = u16::from_be_bytes(self.raw(2)?.try_into().expect("2 bytes")) as usize;
        self.raw(len)
    }

    pub fn bits(&mut self) -> Result<BitString> {
        Ok(BitString::from_bytes(self.field()?.to_vec()))
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        self.field()?
            .try_into()
            .map_err(|_| Error::Malformed(format!("expected a {N}-byte field")))
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.array()?))
    }

    pub fn str(&mut self) -> Result<String> {
        String::from_utf8(self.field()?.to_vec())
            .map_err(|_| Error::Malformed("field is not utf-8".into()))
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.remaining() == 0
    }

    pub fn expect_end(&self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(Error::Malformed(format!("{} trailing bytes", self.remaining())))
        }
    }
}

/// Types with a canonical field encoding.
pub trait Codec: Sized {
    fn encode(&self, w: &mut FieldWriter);
    fn decode(r: &mut FieldReader<'_>) -> Result<Self>;

    fn encoded(&self) -> Vec<u8> {
        let mut w = FieldWriter::new();
        self.encode(&mut w);
        w.finish()
    }

    fn decode_exact(bytes: &[u8]) -> Result<Self> {
        let mut r = FieldReader::new(bytes);
        let v = Self::decode(&mut r)?;
        r.expect_end()?;
        Ok(v)
    }
}

impl Codec for BitString {
    fn encode(&self, w: &mut FieldWriter) {
        w.bits(self);
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        r.bits()
    }
}

impl<T: Codec> Codec for Option<T> {
    fn encode(&self, w: &mut FieldWriter) {
        match self {
            None => {
                w.u8(0);
            }
            Some(v) => {
                w.u8(1);
                v.encode(w);
            }
        }
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        match r.u8()? {
            0 => Ok(None),
            1 => Ok(Some(T::decode(r)?)),
            t => Err(Error::Malformed(format!("bad option tag {t}"))),
        }
    }
}

impl<T: Codec> Codec for Vec<T> {
    fn encode(&self, w: &mut FieldWriter) {
        w.u32(self.len() as u32);
        for v in self {
            v.encode(w);
        }
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        let n = r.u32()? as usize;
        // every element takes at least one 2-byte prefix
        if n > r.remaining() / 2 + 1 {
            return Err(Error::Malformed(format!("implausible element count {n}")));
        }
        (0..n).map(|_| T::decode(r)).collect()
    }
}

impl Codec for u64 {
    fn encode(&self, w: &mut FieldWriter) {
        w.u64(*self);
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        r.u64()
    }
}

impl Codec for usize {
    fn encode(&self, w: &mut FieldWriter) {
        w.u64(*self as u64);
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        usize::try_from(r.u64()?).map_err(|_| Error::Malformed("usize overflow".into()))
    }
}

impl Codec for bool {
    fn encode(&self, w: &mut FieldWriter) {
        w.u8(u8::from(*self));
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        match r.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(Error::Malformed(format!("bad bool {v}"))),
        }
    }
}

impl<A: Codec, B: Codec> Codec for (A, B) {
    fn encode(&self, w: &mut FieldWriter) {
        self.0.encode(w);
        self.1.encode(w);
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        Ok((A::decode(r)?, B::decode(r)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_field_is_malformed() {
        let mut w = FieldWriter::new();
        w.field(&[1, 2, 3]);
        let bytes = w.finish();
        assert_eq!(bytes, vec![0, 3, 1, 2, 3]);
        assert!(FieldReader::new(&bytes[..4]).field().is_err());
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = BitString::from_bytes(vec![9]).encoded();
        assert!(BitString::decode_exact(&bytes).is_ok());
        bytes.push(0);
        assert!(BitString::decode_exact(&bytes).is_err());
    }
}
