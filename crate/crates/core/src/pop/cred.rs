//! PoP credentials, the public key directory and `CredVeri`.

use crate::bits::BitString;
use crate::codec::{Codec, FieldReader, FieldWriter};
use crate::error::{Error, Result};
use crate::primitives::prf::hash;
use crate::primitives::sig::{Signature, VerifyingKey};

pub const CREDENTIAL_VERSION: u8 = 0x01;

/// `{R, T_i, cred_1, cred_2, cred_3}`.
///
/// Encoded as the version byte followed by the five fields in that order,
/// each with a 2-byte big-endian length prefix.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Credential {
    pub reader_id: BitString,
    pub tag_id: BitString,
    /// `r'`
    pub cred1: BitString,
    /// `S_skR(r')`
    pub cred2: Signature,
    /// `S_skT(H(cred_2))`
    pub cred3: Signature,
}

impl Credential {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.encoded()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::decode_exact(bytes)
    }
}

impl Codec for Credential {
    fn encode(&self, w: &mut FieldWriter) {
        w.raw(&[CREDENTIAL_VERSION])
            .bits(&self.reader_id)
            .bits(&self.tag_id)
            .bits(&self.cred1)
            .bits(self.cred2.bits())
            .bits(self.cred3.bits());
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        let v = r.raw(1)?[0];
        if v != CREDENTIAL_VERSION {
            return Err(Error::Malformed(format!("credential version {v:#04x}")));
        }
        Ok(Self {
            reader_id: r.bits()?,
            tag_id: r.bits()?,
            cred1: r.bits()?,
            cred2: Signature::from_bits(r.bits()?),
            cred3: Signature::from_bits(r.bits()?),
        })
    }
}

/// Public keys from `para*`, plus issuer keys registered by an adversary
/// (`para_A`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyDirectory {
    pub reader_id: BitString,
    pub reader_pk: VerifyingKey,
    pub tags: Vec<(BitString, VerifyingKey)>,
    pub adversaries: Vec<(BitString, VerifyingKey)>,
}

impl KeyDirectory {
    pub fn new(reader_id: BitString, reader_pk: VerifyingKey) -> Self {
        Self {
            reader_id,
            reader_pk,
            tags: Vec::new(),
            adversaries: Vec::new(),
        }
    }

    pub fn add_tag(&mut self, id: BitString, pk: VerifyingKey) {
        self.tags.push((id, pk));
    }

    /// Adds an issuer key to `para_A`. IDs already in use are refused.
    pub fn register_adversary(&mut self, id: BitString, pk: VerifyingKey) -> Result<()> {
        if id == self.reader_id
            || self.tags.iter().any(|(t, _)| *t == id)
            || self.adversaries.iter().any(|(a, _)| *a == id)
        {
            return Err(Error::InvalidParams(format!("identity {} already registered", id.to_hex())));
        }
        self.adversaries.push((id, pk));
        Ok(())
    }

    pub fn is_adversary(&self, id: &BitString) -> bool {
        self.adversaries.iter().any(|(a, _)| a == id)
    }

    /// Issuer key: the reader's or an adversary's.
    pub fn issuer_key(&self, id: &BitString) -> Option<&VerifyingKey> {
        if *id == self.reader_id {
            return Some(&self.reader_pk);
        }
        self.adversaries.iter().find(|(a, _)| a == id).map(|(_, k)| k)
    }

    pub fn tag_key(&self, id: &BitString) -> Option<&VerifyingKey> {
        self.tags.iter().find(|(t, _)| t == id).map(|(_, k)| k)
    }

    pub fn tag_position(&self, id: &BitString) -> Option<usize> {
        self.tags.iter().position(|(t, _)| t == id)
    }

    /// Digest of the public parameters, for display.
    pub fn digest(&self) -> String {
        hash(&BitString::from_bytes(self.encoded())).to_hex()
    }
}

impl Codec for KeyDirectory {
    fn encode(&self, w: &mut FieldWriter) {
        w.bits(&self.reader_id);
        self.reader_pk.encode(w);
        for list in [&self.tags, &self.adversaries] {
            w.u32(list.len() as u32);
            for (id, pk) in list {
                w.bits(id);
                pk.encode(w);
            }
        }
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        let reader_id = r.bits()?;
        let reader_pk = VerifyingKey::decode(r)?;
        let mut lists = Vec::with_capacity(2);
        for _ in 0..2 {
            let n = r.u32()?;
            let mut list = Vec::new();
            for _ in 0..n {
                list.push((r.bits()?, VerifyingKey::decode(r)?));
            }
            lists.push(list);
        }
        let adversaries = lists.pop().expect("two lists");
        let tags = lists.pop().expect("two lists");
        Ok(Self {
            reader_id,
            reader_pk,
            tags,
            adversaries,
        })
    }
}

/// `CredVeri`: `V_PKR(cred_1, cred_2) ∧ V_PKT(H(cred_2), cred_3)`. Unknown
/// identities verify as 0.
pub fn cred_veri(dir: &KeyDirectory, cred: &Credential) -> bool {
    let (Some(pk_r), Some(pk_t)) = (dir.issuer_key(&cred.reader_id), dir.tag_key(&cred.tag_id)) else {
        return false;
    };
    pk_r.verify(&cred.cred1, &cred.cred2) && pk_t.verify(&hash(cred.cred2.bits()), &cred.cred3)
}
