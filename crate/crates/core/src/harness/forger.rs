//! Built-in credential forgers for the unforgeability experiment.

use super::hub::OracleHub;
use super::scenario::relay;
use super::GameProtocol;
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::model::Msg;
use crate::pop::Credential;
use crate::primitives::sig::{sig_keygen, SchemeKind, Signature};
use crate::rng::Rng;

pub trait Forger<P: GameProtocol>: Send + Sync {
    fn name(&self) -> &str;
    /// The credential submitted at the end of the experiment, if any.
    fn forge(&self, o: &mut OracleHub<P>, rng: &mut Rng) -> Result<Option<Credential>>;
}

pub const FORGER_NAMES: [&str; 4] = ["replay", "splice", "random", "mitm-resign"];

pub fn forger<P: GameProtocol>(name: &str) -> Result<Box<dyn Forger<P>>> {
    Ok(match name {
        "replay" => Box::new(ReplayForger),
        "splice" | "splicer" => Box::new(SpliceForger),
        "random" => Box::new(RandomForger),
        "mitm-resign" => Box::new(MitmResign),
        _ => return Err(Error::UnknownAdversary(name.into())),
    })
}

fn deliver(m: &Msg) -> Option<Msg> {
    Some(m.clone())
}

/// Runs an honest session with tag `i` and fetches its credential.
fn honest_credential<P: GameProtocol>(
    o: &mut OracleHub<P>,
    i: usize,
) -> Result<Option<Credential>> {
    let s = relay(o, i, &mut deliver)?;
    match s.sid {
        Some(sid) if s.o_r == Some(true) => o.o5_get_cred(sid),
        _ => Ok(None),
    }
}

/// Returns a credential obtained legitimately through `O5'`.
pub struct ReplayForger;

impl<P: GameProtocol> Forger<P> for ReplayForger {
    fn name(&self) -> &str {
        "replay"
    }

    fn forge(&self, o: &mut OracleHub<P>, rng: &mut Rng) -> Result<Option<Credential>> {
        let i = rng.below(o.tag_count());
        honest_credential(o, i)
    }
}

/// Mixes the parts of two legitimate credentials.
pub struct SpliceForger;

impl<P: GameProtocol> Forger<P> for SpliceForger {
    fn name(&self) -> &str {
        "splice"
    }

    fn forge(&self, o: &mut OracleHub<P>, rng: &mut Rng) -> Result<Option<Credential>> {
        let i = rng.below(o.tag_count());
        let j = rng.below(o.tag_count());
        let (Some(a), Some(b)) = (honest_credential(o, i)?, honest_credential(o, j)?) else {
            return Ok(None);
        };
        Ok(Some(match rng.below(4) {
            0 => Credential { cred3: b.cred3, ..a },
            1 => Credential { cred2: b.cred2, ..a },
            2 => Credential { cred1: b.cred1, ..a },
            _ => Credential {
                cred2: b.cred2,
                cred3: b.cred3,
                ..a
            },
        }))
    }
}

/// Uniform strings of the right lengths for the reader and a random tag.
pub struct RandomForger;

impl<P: GameProtocol> Forger<P> for RandomForger {
    fn name(&self) -> &str {
        "random"
    }

    fn forge(&self, o: &mut OracleHub<P>, rng: &mut Rng) -> Result<Option<Credential>> {
        let dir = o
            .directory()
            .ok_or(Error::OracleUnavailable("key directory"))?
            .clone();
        let (tag_id, pk_t) = dir.tags[rng.below(dir.tags.len())].clone();
        Ok(Some(Credential {
            reader_id: dir.reader_id.clone(),
            tag_id,
            cred1: rng.bits(256),
            cred2: Signature::from_bits(rng.bits(dir.reader_pk.sig_len_bits())),
            cred3: Signature::from_bits(rng.bits(pk_t.sig_len_bits())),
        }))
    }
}

/// Registers its own issuer key, obtains an honest credential and claims
/// it as its own by re-signing `cred_1`.
pub struct MitmResign;

impl MitmResign {
    pub const ISSUER_ID: u64 = u64::MAX;
}

impl<P: GameProtocol> Forger<P> for MitmResign {
    fn name(&self) -> &str {
        "mitm-resign"
    }

    fn forge(&self, o: &mut OracleHub<P>, rng: &mut Rng) -> Result<Option<Credential>> {
        let (pk, mut sk) = sig_keygen(SchemeKind::FullTime, rng)?;
        let id = BitString::from_u64(Self::ISSUER_ID, 256);
        o.register_issuer(id.clone(), pk)?;
        let i = rng.below(o.tag_count());
        let Some(cred) = honest_credential(o, i)? else {
            return Ok(None);
        };
        let cred2 = sk.sign(&cred.cred1)?;
        // cred3 still signs H of the reader's cred2, not of ours
        Ok(Some(Credential {
            reader_id: id,
            cred2,
            ..cred
        }))
    }
}
