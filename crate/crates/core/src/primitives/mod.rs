//! Cryptographic building blocks: PRF families, hashing, signatures and the
//! PRF distinguishing game.

pub mod ops;
pub mod prf;
pub mod ptpt;
pub mod sig;

pub use ops::{measure, Op, OpCounts};
pub use prf::{hash, hash_to, prf_eval, KeyedHashPrf, Prf, PrfDescriptor, DIGEST_BITS};
pub use ptpt::{ptpt_experiment, Distinguisher, PtptReport};
pub use sig::{
    sig_keygen, sig_sign, sig_verify, SchemeKind, Signature, SigningKey, VerifyingKey,
};
