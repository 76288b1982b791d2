//! MAPoP: the transform applied to the MA protocol, with the three
//! signature instantiations.

use serde::{Deserialize, Serialize};

use super::{KeyDirectory, Pop, PopMode, PopParams, PopReaderSecret, PopRecord, PopTag};
use crate::bits::BitString;
use crate::error::Result;
use crate::ma::{Ma, MaParams};
use crate::model::{RoundProtocol, System};
use crate::primitives::sig::SchemeKind;
use crate::rng::Rng;

pub type MaPop = Pop<Ma>;

/// The reader's identity: 256 zero bits. Tag IDs start at 1.
pub const READER_ID: u64 = 0;

/// Tag-side signature instantiation; the reader always signs with the
/// full-time scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "impl", rename_all = "lowercase")]
pub enum Impl {
    /// Full-time Schnorr on the tag.
    Imp1,
    /// Schnorr with a pool of precomputed nonce pairs.
    Imp2 { pool: u32 },
    /// K-time signatures.
    Imp3 { k: u32 },
}

impl Impl {
    pub fn tag_scheme(&self) -> SchemeKind {
        match *self {
            Impl::Imp1 => SchemeKind::FullTime,
            Impl::Imp2 { pool } => SchemeKind::Precomputed { pool },
            Impl::Imp3 { k } => SchemeKind::KTime { k },
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Impl::Imp1 => "imp1",
            Impl::Imp2 { .. } => "imp2",
            Impl::Imp3 { .. } => "imp3",
        }
    }
}

/// Output of [`Pop::setup`].
pub struct PopSetup<B: RoundProtocol> {
    pub records: Vec<PopRecord<B::Record>>,
    pub tags: Vec<PopTag<B::Tag>>,
    pub secret: PopReaderSecret<B::ReaderSecret>,
    pub directory: KeyDirectory,
}

/// A MAPoP system of `l` tags together with its public key directory.
pub fn mapop_system(
    params: MaParams,
    imp: Impl,
    mode: PopMode,
    l: usize,
    rng: &mut Rng,
) -> Result<(System<MaPop>, KeyDirectory)> {
    let ma = Ma::new(params)?;
    let (records, tags) = ma.setup(l, rng)?;
    let pop = Pop::new(
        ma,
        PopParams {
            mode,
            ..PopParams::new(imp.tag_scheme())
        },
    )?;
    let setup = pop.setup(records, tags, (), BitString::from_u64(READER_ID, 256), rng)?;
    let dir = setup.directory.clone();
    Ok((System::new(pop, setup.secret, setup.records, setup.tags, rng), dir))
}
