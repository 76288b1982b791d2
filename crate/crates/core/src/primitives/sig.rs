//! Signature schemes over the Ristretto group.
//!
//! * [`SchemeKind::FullTime`]: deterministic Schnorr, 32-byte keys and
//!   64-byte signatures `R ‖ s`. Signing costs one point multiplication.
//! * [`SchemeKind::Precomputed`]: the same scheme where the signer draws
//!   `(r, rB)` pairs from a pool generated at key generation, so signing is
//!   one hash and one scalar multiplication. The pool is finite.
//! * [`SchemeKind::KTime`]: a K-time scheme with 32-byte signatures. The
//!   public key commits to `K` nonce points `R_j = r_j·B`; a signature is the
//!   scalar `s = r_j + H(m)·y` and verification looks up `s·B − H(m)·Y`
//!   among the commitments. Signing needs no curve operation.
//!
//! Operation counts are recorded through [`super::ops`].

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use serde::{Deserialize, Serialize};

use super::ops::{self, Op};
use crate::bits::BitString;
use crate::codec::{Codec, FieldReader, FieldWriter};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const FULL_SIG_BITS: usize = 512;
pub const KTIME_SIG_BITS: usize = 256;
pub const PK_BYTES: usize = 32;
pub const SK_BYTES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SchemeKind {
    FullTime,
    Precomputed { pool: u32 },
    KTime { k: u32 },
}

impl SchemeKind {
    pub fn sig_len_bits(&self) -> usize {
        match self {
            SchemeKind::FullTime | SchemeKind::Precomputed { .. } => FULL_SIG_BITS,
            SchemeKind::KTime { .. } => KTIME_SIG_BITS,
        }
    }

    /// Bytes the size tables charge for a public key. For the
    /// K-time scheme this is `64 + 64K + |K|` with a 3-byte `|K|`.
    pub fn nominal_pk_bytes(&self) -> u64 {
        match self {
            SchemeKind::FullTime | SchemeKind::Precomputed { .. } => PK_BYTES as u64,
            SchemeKind::KTime { k } => 64 + 64 * u64::from(*k) + 3,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Signature(BitString);

impl Signature {
    pub fn from_bits(bits: BitString) -> Self {
        Self(bits)
    }

    pub fn bits(&self) -> &BitString {
        &self.0
    }

    pub fn into_bits(self) -> BitString {
        self.0
    }

    pub fn len_bits(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", self.0.to_hex())
    }
}

#[derive(Clone)]
pub struct SigningKey {
    seed: [u8; 32],
    inner: SignerState,
}

#[derive(Clone)]
enum SignerState {
    FullTime {
        x: Scalar,
        nonce_key: [u8; 32],
        pk: [u8; 32],
    },
    Precomputed {
        x: Scalar,
        pk: [u8; 32],
        capacity: u32,
        pool: VecDeque<(Scalar, [u8; 32])>,
    },
    KTime {
        k: u32,
        next: u32,
    },
}

#[derive(Clone, PartialEq, Eq)]
pub enum VerifyingKey {
    Schnorr([u8; 32]),
    KTime(Arc<KTimePublic>),
}

pub struct KTimePublic {
    y: [u8; 32],
    commitments: Vec<[u8; 32]>,
    lookup: HashMap<[u8; 32], u32>,
}

impl PartialEq for KTimePublic {
    fn eq(&self, other: &Self) -> bool {
        self.y == other.y && self.commitments == other.commitments
    }
}

impl Eq for KTimePublic {}

impl KTimePublic {
    fn new(y: [u8; 32], commitments: Vec<[u8; 32]>) -> Self {
        let lookup = commitments
            .iter()
            .enumerate()
            .map(|(j, c)| (*c, j as u32))
            .collect();
        Self {
            y,
            commitments,
            lookup,
        }
    }

    pub fn k(&self) -> usize {
        self.commitments.len()
    }
}

impl fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SigningKey")
            .field("kind", &self.kind())
            .field("remaining", &self.remaining())
            .finish_non_exhaustive()
    }
}

impl fmt::Debug for VerifyingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerifyingKey::Schnorr(pk) => write!(f, "VerifyingKey::Schnorr({})", hex::encode(pk)),
            VerifyingKey::KTime(p) => write!(
                f,
                "VerifyingKey::KTime(y={}, k={})",
                hex::encode(p.y),
                p.k()
            ),
        }
    }
}

fn wide_hash(context: &str, parts: &[&[u8]]) -> Scalar {
    ops::record(Op::Hash);
    let mut h = blake3::Hasher::new_derive_key(context);
    for p in parts {
        h.update(&(p.len() as u64).to_be_bytes());
        h.update(p);
    }
    let mut wide = [0u8; 64];
    h.finalize_xof().fill(&mut wide);
    Scalar::from_bytes_mod_order_wide(&wide)
}

fn msg_bytes(msg: &BitString) -> Vec<u8> {
    let mut v = (msg.len() as u64).to_be_bytes().to_vec();
    v.extend_from_slice(msg.as_bytes());
    v
}

fn mul_base(s: &Scalar) -> RistrettoPoint {
    ops::record(Op::EMul);
    RistrettoPoint::mul_base(s)
}

fn expand_schnorr(seed: &[u8; 32]) -> (Scalar, [u8; 32]) {
    let mut h = blake3::Hasher::new_derive_key("rfpop schnorr key expansion v1");
    h.update(seed);
    let mut out = [0u8; 96];
    h.finalize_xof().fill(&mut out);
    let x = Scalar::from_bytes_mod_order_wide(out[..64].try_into().expect("64 bytes"));
    let nonce_key = out[64..].try_into().expect("32 bytes");
    (x, nonce_key)
}

fn ktime_y(seed: &[u8; 32]) -> Scalar {
    wide_hash("rfpop ktime secret v1", &[seed])
}

fn ktime_nonce(seed: &[u8; 32], j: u32) -> Scalar {
    wide_hash("rfpop ktime nonce v1", &[seed, &j.to_be_bytes()])
}

fn ktime_challenge(msg: &BitString) -> Scalar {
    wide_hash("rfpop ktime challenge v1", &[&msg_bytes(msg)])
}

fn schnorr_challenge(r: &[u8; 32], pk: &[u8; 32], msg: &BitString) -> Scalar {
    wide_hash("rfpop schnorr challenge v1", &[r, pk, &msg_bytes(msg)])
}

/// Generates a keypair.
pub fn sig_keygen(kind: SchemeKind, rng: &mut Rng) -> Result<(VerifyingKey, SigningKey)> {
    let seed = rng.array::<32>();
    let sk = SigningKey::from_seed(kind, seed, rng)?;
    let pk = sk.verifying_key();
    Ok((pk, sk))
}

impl SigningKey {
    /// Rebuilds a key from its 32-byte seed. For the precomputed kind a
    /// fresh pool is drawn from `rng`.
    pub fn from_seed(kind: SchemeKind, seed: [u8; 32], rng: &mut Rng) -> Result<Self> {
        let inner = match kind {
            SchemeKind::FullTime => {
                let (x, nonce_key) = expand_schnorr(&seed);
                let pk = mul_base(&x).compress().to_bytes();
                SignerState::FullTime { x, nonce_key, pk }
            }
            SchemeKind::Precomputed { pool } => {
                let (x, _) = expand_schnorr(&seed);
                let pk = mul_base(&x).compress().to_bytes();
                let pool = (0..pool)
                    .map(|_| {
                        let r = Scalar::from_bytes_mod_order_wide(&rng.array::<64>());
                        (r, mul_base(&r).compress().to_bytes())
                    })
                    .collect();
                SignerState::Precomputed {
                    x,
                    pk,
                    capacity: kind_pool(kind),
                    pool,
                }
            }
            SchemeKind::KTime { k } => {
                if k == 0 {
                    return Err(Error::InvalidParams("K-time scheme needs K >= 1".into()));
                }
                SignerState::KTime { k, next: 0 }
            }
        };
        Ok(Self { seed, inner })
    }

    pub fn kind(&self) -> SchemeKind {
        match &self.inner {
            SignerState::FullTime { .. } => SchemeKind::FullTime,
            SignerState::Precomputed { capacity, .. } => SchemeKind::Precomputed { pool: *capacity },
            SignerState::KTime { k, .. } => SchemeKind::KTime { k: *k },
        }
    }

    pub fn seed(&self) -> &[u8; 32] {
        &self.seed
    }

    /// Signatures left before the key is spent; `None` for unlimited keys.
    pub fn remaining(&self) -> Option<u64> {
        match &self.inner {
            SignerState::FullTime { .. } => None,
            SignerState::Precomputed { pool, .. } => Some(pool.len() as u64),
            SignerState::KTime { k, next } => Some(u64::from(k - next)),
        }
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        match &self.inner {
            SignerState::FullTime { pk, .. } | SignerState::Precomputed { pk, .. } => {
                VerifyingKey::Schnorr(*pk)
            }
            SignerState::KTime { k, .. } => {
                let y = mul_base(&ktime_y(&self.seed)).compress().to_bytes();
                let commitments = (0..*k)
                    .map(|j| mul_base(&ktime_nonce(&self.seed, j)).compress().to_bytes())
                    .collect();
                VerifyingKey::KTime(Arc::new(KTimePublic::new(y, commitments)))
            }
        }
    }

    pub fn sig_len_bits(&self) -> usize {
        self.kind().sig_len_bits()
    }

    pub fn sign(&mut self, msg: &BitString) -> Result<Signature> {
        let bytes = match &mut self.inner {
            SignerState::FullTime { x, nonce_key, pk } => {
                let r = wide_hash("rfpop schnorr nonce v1", &[nonce_key, &msg_bytes(msg)]);
                let big_r = mul_base(&r).compress().to_bytes();
                let e = schnorr_challenge(&big_r, pk, msg);
                ops::record(Op::MMul);
                let s = r + e * *x;
                [big_r.as_slice(), s.as_bytes()].concat()
            }
            SignerState::Precomputed { x, pk, pool, .. } => {
                let (r, big_r) = pool.pop_front().ok_or(Error::PoolExhausted)?;
                let e = schnorr_challenge(&big_r, pk, msg);
                ops::record(Op::MMul);
                let s = r + e * *x;
                [big_r.as_slice(), s.as_bytes()].concat()
            }
            SignerState::KTime { k, next } => {
                if *next >= *k {
                    return Err(Error::KTimeExhausted);
                }
                let y = ktime_y(&self.seed);
                let r = ktime_nonce(&self.seed, *next);
                let e = ktime_challenge(msg);
                ops::record(Op::MMul);
                let s = r + e * y;
                *next += 1;
                s.as_bytes().to_vec()
            }
        };
        Ok(Signature(BitString::from_bytes(bytes)))
    }
}

fn kind_pool(kind: SchemeKind) -> u32 {
    match kind {
        SchemeKind::Precomputed { pool } => pool,
        _ => 0,
    }
}

fn canonical_scalar(bytes: &[u8]) -> Option<Scalar> {
    let arr: [u8; 32] = bytes.try_into().ok()?;
    Option::from(Scalar::from_canonical_bytes(arr))
}

impl VerifyingKey {
    pub fn sig_len_bits(&self) -> usize {
        match self {
            VerifyingKey::Schnorr(_) => FULL_SIG_BITS,
            VerifyingKey::KTime(_) => KTIME_SIG_BITS,
        }
    }

    /// Size charged by the usual accounting: 32 bytes for Schnorr keys and
    /// `64 + 64K + |K|` for a K-time key.
    pub fn nominal_len(&self) -> usize {
        match self {
            VerifyingKey::Schnorr(_) => PK_BYTES,
            VerifyingKey::KTime(p) => 64 + 64 * p.k() + 3,
        }
    }

    /// Encoded size in bytes as stored by this implementation.
    pub fn encoded_len(&self) -> usize {
        match self {
            VerifyingKey::Schnorr(_) => PK_BYTES,
            VerifyingKey::KTime(p) => 32 + 32 * p.k() + 3,
        }
    }

    pub fn verify(&self, msg: &BitString, sig: &Signature) -> bool {
        let sig = sig.bits();
        if sig.len() != self.sig_len_bits() {
            return false;
        }
        match self {
            VerifyingKey::Schnorr(pk) => {
                let bytes = sig.as_bytes();
                let big_r: [u8; 32] = bytes[..32].try_into().expect("32 bytes");
                let Some(s) = canonical_scalar(&bytes[32..]) else {
                    return false;
                };
                let Some(pk_point) = CompressedRistretto(*pk).decompress() else {
                    return false;
                };
                let e = schnorr_challenge(&big_r, pk, msg);
                ops::record_n(Op::EMul, 2);
                ops::record(Op::EAdd);
                let check = RistrettoPoint::vartime_double_scalar_mul_basepoint(&-e, &pk_point, &s);
                check.compress().to_bytes() == big_r
            }
            VerifyingKey::KTime(p) => {
                let Some(s) = canonical_scalar(sig.as_bytes()) else {
                    return false;
                };
                let Some(y) = CompressedRistretto(p.y).decompress() else {
                    return false;
                };
                let e = ktime_challenge(msg);
                ops::record_n(Op::EMul, 2);
                ops::record(Op::EAdd);
                let candidate = RistrettoPoint::vartime_double_scalar_mul_basepoint(&-e, &y, &s);
                p.lookup.contains_key(&candidate.compress().to_bytes())
            }
        }
    }
}

pub fn sig_sign(sk: &mut SigningKey, msg: &BitString) -> Result<Signature> {
    sk.sign(msg)
}

pub fn sig_verify(pk: &VerifyingKey, msg: &BitString, sig: &Signature) -> bool {
    pk.verify(msg, sig)
}

impl Codec for SchemeKind {
    fn encode(&self, w: &mut FieldWriter) {
        match self {
            SchemeKind::FullTime => {
                w.u8(1);
            }
            SchemeKind::Precomputed { pool } => {
                w.u8(2).u32(*pool);
            }
            SchemeKind::KTime { k } => {
                w.u8(3).u32(*k);
            }
        }
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        match r.u8()? {
            1 => Ok(SchemeKind::FullTime),
            2 => Ok(SchemeKind::Precomputed { pool: r.u32()? }),
            3 => Ok(SchemeKind::KTime { k: r.u32()? }),
            t => Err(Error::Malformed(format!("unknown signature scheme {t}"))),
        }
    }
}

impl Codec for VerifyingKey {
    fn encode(&self, w: &mut FieldWriter) {
        match self {
            VerifyingKey::Schnorr(pk) => {
                w.u8(1).field(pk);
            }
            VerifyingKey::KTime(p) => {
                w.u8(3).field(&p.y).u32(p.k() as u32);
                for c in &p.commitments {
                    w.field(c);
                }
            }
        }
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        match r.u8()? {
            1 => Ok(VerifyingKey::Schnorr(r.array()?)),
            3 => {
                let y = r.array()?;
                let k = r.u32()?;
                let commitments = (0..k).map(|_| r.array()).collect::<Result<Vec<_>>>()?;
                Ok(VerifyingKey::KTime(Arc::new(KTimePublic::new(y, commitments))))
            }
            t => Err(Error::Malformed(format!("unknown public key type {t}"))),
        }
    }
}

/// Encodes seed and usage state. The pool of a precomputed key is stored
/// pair by pair (64 bytes each).
impl Codec for SigningKey {
    fn encode(&self, w: &mut FieldWriter) {
        self.kind().encode(w);
        w.field(&self.seed);
        match &self.inner {
            SignerState::FullTime { .. } => {}
            SignerState::Precomputed { pool, .. } => {
                w.u32(pool.len() as u32);
                for (r, big_r) in pool {
                    w.field(&[r.as_bytes().as_slice(), big_r.as_slice()].concat());
                }
            }
            SignerState::KTime { next, .. } => {
                w.u32(*next);
            }
        }
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        let kind = SchemeKind::decode(r)?;
        let seed: [u8; 32] = r.array()?;
        match kind {
            SchemeKind::FullTime => {
                let (x, nonce_key) = expand_schnorr(&seed);
                let pk = RistrettoPoint::mul_base(&x).compress().to_bytes();
                Ok(Self {
                    seed,
                    inner: SignerState::FullTime { x, nonce_key, pk },
                })
            }
            SchemeKind::Precomputed { pool: capacity } => {
                let (x, _) = expand_schnorr(&seed);
                let pk = RistrettoPoint::mul_base(&x).compress().to_bytes();
                let n = r.u32()?;
                let mut pool = VecDeque::with_capacity(n as usize);
                for _ in 0..n {
                    let pair: [u8; 64] = r.array()?;
                    let s = canonical_scalar(&pair[..32])
                        .ok_or_else(|| Error::Malformed("non-canonical pool scalar".into()))?;
                    pool.push_back((s, pair[32..].try_into().expect("32 bytes")));
                }
                Ok(Self {
                    seed,
                    inner: SignerState::Precomputed {
                        x,
                        pk,
                        capacity,
                        pool,
                    },
                })
            }
            SchemeKind::KTime { k } => {
                let next = r.u32()?;
                if k == 0 || next > k {
                    return Err(Error::Malformed("bad k-time counter".into()));
                }
                Ok(Self {
                    seed,
                    inner: SignerState::KTime { k, next },
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds() -> [SchemeKind; 3] {
        [
            SchemeKind::FullTime,
            SchemeKind::Precomputed { pool: 4 },
            SchemeKind::KTime { k: 4 },
        ]
    }

    #[test]
    fn round_trip_all_kinds() {
        let mut rng = Rng::from_u64(1);
        for kind in kinds() {
            let (pk, mut sk) = sig_keygen(kind, &mut rng).unwrap();
            let m = rng.bits(256);
            let s = sk.sign(&m).unwrap();
            assert_eq!(s.len_bits(), kind.sig_len_bits());
            assert!(pk.verify(&m, &s), "{kind:?}");
        }
    }

    #[test]
    fn signature_sizes() {
        assert_eq!(SchemeKind::FullTime.sig_len_bits(), 512);
        assert_eq!(SchemeKind::KTime { k: 1 }.sig_len_bits(), 256);
    }

    #[test]
    fn distinct_seeds_give_distinct_keys() {
        let (a, _) = sig_keygen(SchemeKind::FullTime, &mut Rng::from_u64(1)).unwrap();
        let (b, _) = sig_keygen(SchemeKind::FullTime, &mut Rng::from_u64(2)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn flipped_message_bit_rejected() {
        let mut rng = Rng::from_u64(2);
        for kind in kinds() {
            let (pk, mut sk) = sig_keygen(kind, &mut rng).unwrap();
            let m = rng.bits(256);
            let s = sk.sign(&m).unwrap();
            assert!(!pk.verify(&m.with_flipped_bit(17), &s));
            assert!(!pk.verify(&m, &Signature(s.bits().with_flipped_bit(3))));
        }
    }

    #[test]
    fn wrong_length_signature_rejected() {
        let mut rng = Rng::from_u64(3);
        let (pk, mut sk) = sig_keygen(SchemeKind::FullTime, &mut rng).unwrap();
        let m = rng.bits(64);
        let s = sk.sign(&m).unwrap();
        let short = Signature(s.bits().slice(0, 256).unwrap());
        assert!(!pk.verify(&m, &short));
        assert!(!pk.verify(&m, &Signature(BitString::new())));
    }

    #[test]
    fn ktime_counter_contract() {
        let mut rng = Rng::from_u64(4);
        assert!(matches!(
            sig_keygen(SchemeKind::KTime { k: 0 }, &mut rng),
            Err(Error::InvalidParams(_))
        ));
        let (_, sk) = sig_keygen(SchemeKind::KTime { k: 1 }, &mut rng).unwrap();
        assert_eq!(sk.remaining(), Some(1));
        let (pk, mut sk) = sig_keygen(SchemeKind::KTime { k: 2 }, &mut rng).unwrap();
        let m = rng.bits(32);
        assert!(pk.verify(&m, &sk.sign(&m).unwrap()));
        assert!(pk.verify(&m, &sk.sign(&m).unwrap()));
        assert!(matches!(sk.sign(&m), Err(Error::KTimeExhausted)));
        assert!(matches!(sk.sign(&m), Err(Error::KTimeExhausted)));
    }

    #[test]
    fn pool_exhaustion() {
        let mut rng = Rng::from_u64(5);
        let (_, mut sk) = sig_keygen(SchemeKind::Precomputed { pool: 1 }, &mut rng).unwrap();
        let m = rng.bits(32);
        sk.sign(&m).unwrap();
        assert!(matches!(sk.sign(&m), Err(Error::PoolExhausted)));
    }

    #[test]
    fn full_time_signing_is_deterministic() {
        let mut rng = Rng::from_u64(6);
        let (_, mut sk) = sig_keygen(SchemeKind::FullTime, &mut rng).unwrap();
        let m = rng.bits(256);
        let mut clone = SigningKey::decode_exact(&sk.encoded()).unwrap();
        assert_eq!(sk.sign(&m).unwrap(), clone.sign(&m).unwrap());
    }

    #[test]
    fn signing_costs() {
        let mut rng = Rng::from_u64(7);
        let m = rng.bits(256);
        let (_, mut full) = sig_keygen(SchemeKind::FullTime, &mut rng).unwrap();
        let (_, c) = ops::measure(|| full.sign(&m).unwrap());
        assert_eq!((c.emul, c.mmul, c.hash), (1, 1, 2));
        let (_, mut pre) = sig_keygen(SchemeKind::Precomputed { pool: 2 }, &mut rng).unwrap();
        let (_, c) = ops::measure(|| pre.sign(&m).unwrap());
        assert_eq!((c.emul, c.mmul, c.hash), (0, 1, 1));
        let (pk, mut kt) = sig_keygen(SchemeKind::KTime { k: 2 }, &mut rng).unwrap();
        let (s, c) = ops::measure(|| kt.sign(&m).unwrap());
        assert_eq!((c.emul, c.mmul, c.hash), (0, 1, 3));
        let (ok, c) = ops::measure(|| pk.verify(&m, &s));
        assert!(ok);
        assert_eq!(c.emul, 2);
    }

    #[test]
    fn key_codecs_round_trip() {
        let mut rng = Rng::from_u64(8);
        for kind in kinds() {
            let (pk, sk) = sig_keygen(kind, &mut rng).unwrap();
            let pk2 = VerifyingKey::decode_exact(&pk.encoded()).unwrap();
            assert_eq!(pk, pk2);
            let sk2 = SigningKey::decode_exact(&sk.encoded()).unwrap();
            assert_eq!(sk2.encoded(), sk.encoded());
            assert_eq!(sk2.verifying_key(), pk);
        }
    }
}
