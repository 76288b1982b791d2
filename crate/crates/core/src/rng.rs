//! Seeded randomness. Every random draw in the library goes through [`Rng`]
//! so that sessions and experiments replay exactly from a seed.

use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::bits::BitString;

#[derive(Clone, Debug)]
pub struct Rng(ChaCha20Rng);

impl Rng {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        Self(ChaCha20Rng::from_seed(seed))
    }

    pub fn from_u64(seed: u64) -> Self {
        let mut bytes = [0u8; 32];
        bytes[..8].copy_from_slice(&seed.to_be_bytes());
        Self::from_seed(blake3::derive_key("rfpop rng seed v1", &bytes))
    }

    /// Derives an independent child stream. Consumes 32 bytes of this stream.
    pub fn fork(&mut self, label: &str) -> Rng {
        let mut parent = [0u8; 32];
        self.0.fill_bytes(&mut parent);
        let mut h = blake3::Hasher::new_derive_key("rfpop rng fork v1");
        h.update(&parent);
        h.update(label.as_bytes());
        Self::from_seed(*h.finalize().as_bytes())
    }

    /// Uniform string of `len` bits.
    pub fn bits(&mut self, len: usize) -> BitString {
        let mut bytes = vec![0u8; len.div_ceil(8)];
        self.0.fill_bytes(&mut bytes);
        let rem = len % 8;
        if rem != 0 {
            if let Some(last) = bytes.last_mut() {
                *last &= 0xffu8 << (8 - rem);
            }
        }
        BitString::from_bytes_with_len(bytes, len).expect("tail cleared")
    }

    pub fn array<const N: usize>(&mut self) -> [u8; N] {
        let mut out = [0u8; N];
        self.0.fill_bytes(&mut out);
        out
    }

    pub fn coin(&mut self) -> bool {
        self.0.next_u32() & 1 == 1
    }

    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        rand::Rng::gen_range(&mut self.0, 0..n)
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

impl CryptoRng for Rng {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::from_u64(7);
        let mut b = Rng::from_u64(7);
        assert_eq!(a.bits(300), b.bits(300));
        assert_eq!(a.fork("x").bits(64), b.fork("x").bits(64));
    }

    #[test]
    fn forks_differ_by_label() {
        let mut a = Rng::from_u64(7);
        let mut b = Rng::from_u64(7);
        assert_ne!(a.fork("x").bits(128), b.fork("y").bits(128));
    }

    #[test]
    fn unaligned_draws_have_clean_tail() {
        let mut r = Rng::from_u64(1);
        for len in 0..40 {
            assert_eq!(r.bits(len).len(), len);
        }
    }
}
