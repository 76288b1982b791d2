//! PRF families and the hash function, instantiated with BLAKE3.

use serde::{Deserialize, Serialize};

use super::ops::{self, Op};
use crate::bits::BitString;
use crate::error::{Error, Result};

/// Default digest length of [`hash`], in bits.
pub const DIGEST_BITS: usize = 256;

/// Length contract of a PRF family `{0,1}^key × {0,1}^in → {0,1}^out`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrfDescriptor {
    pub key_bits: usize,
    pub in_bits: usize,
    pub out_bits: usize,
}

impl PrfDescriptor {
    pub fn new(key_bits: usize, in_bits: usize, out_bits: usize) -> Result<Self> {
        if key_bits == 0 || in_bits == 0 || out_bits == 0 {
            return Err(Error::InvalidParams(format!(
                "PRF lengths must be positive (key={key_bits}, in={in_bits}, out={out_bits})"
            )));
        }
        Ok(Self {
            key_bits,
            in_bits,
            out_bits,
        })
    }

    pub fn check(&self, key: &BitString, input: &BitString) -> Result<()> {
        if key.len() != self.key_bits {
            return Err(Error::LengthMismatch {
                param: "prf key",
                expected: self.key_bits,
                actual: key.len(),
            });
        }
        if input.len() != self.in_bits {
            return Err(Error::LengthMismatch {
                param: "prf input",
                expected: self.in_bits,
                actual: input.len(),
            });
        }
        Ok(())
    }
}

/// A keyed function family behind a length contract.
pub trait Prf {
    fn descriptor(&self) -> PrfDescriptor;
    fn eval(&self, key: &BitString, input: &BitString) -> Result<BitString>;
}

/// BLAKE3 in keyed-hash mode with extendable output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyedHashPrf(pub PrfDescriptor);

impl Prf for KeyedHashPrf {
    fn descriptor(&self) -> PrfDescriptor {
        self.0
    }

    fn eval(&self, key: &BitString, input: &BitString) -> Result<BitString> {
        prf_eval(&self.0, key, input)
    }
}

/// Evaluates the reference keyed-hash instantiation.
pub fn prf_eval(desc: &PrfDescriptor, key: &BitString, input: &BitString) -> Result<BitString> {
    desc.check(key, input)?;
    let key_bytes: [u8; 32] = if key.len() == 256 {
        key.as_bytes().try_into().expect("256-bit key")
    } else {
        let mut h = blake3::Hasher::new_derive_key("rfpop prf key expansion v1");
        h.update(key.as_bytes());
        h.update(&(key.len() as u64).to_be_bytes());
        *h.finalize().as_bytes()
    };
    ops::record(Op::Hash);
    let mut h = blake3::Hasher::new_keyed(&key_bytes);
    // Inputs have fixed length per descriptor, so packed bytes are unambiguous.
    h.update(input.as_bytes());
    Ok(xof_bits(h, desc.out_bits))
}

/// `H: {0,1}* → {0,1}^256`.
pub fn hash(input: &BitString) -> BitString {
    hash_to(input, DIGEST_BITS)
}

/// Hash with an explicit output length.
pub fn hash_to(input: &BitString, out_bits: usize) -> BitString {
    ops::record(Op::Hash);
    let h = if input.is_byte_aligned() {
        let mut h = blake3::Hasher::new();
        h.update(input.as_bytes());
        h
    } else {
        let mut h = blake3::Hasher::new_derive_key("rfpop unaligned bitstring hash v1");
        h.update(input.as_bytes());
        h.update(&(input.len() as u64).to_be_bytes());
        h
    };
    xof_bits(h, out_bits)
}

fn xof_bits(h: blake3::Hasher, out_bits: usize) -> BitString {
    let mut out = vec![0u8; out_bits.div_ceil(8)];
    h.finalize_xof().fill(&mut out);
    let rem = out_bits % 8;
    if rem != 0 {
        if let Some(last) = out.last_mut() {
            *last &= 0xffu8 << (8 - rem);
        }
    }
    BitString::from_bytes_with_len(out, out_bits).expect("tail cleared")
}
