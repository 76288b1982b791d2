//! Deployment directories: what `setup` writes and the other commands read.
//!
//! A directory holds `reader.db` (a [`DbFile`]), `reader.key`, `para.bin`
//! (the public key directory, PoP mode only) and one `tag-<i>.key` per tag.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rfpop::codec::{Codec, FieldReader, FieldWriter};
use rfpop::error::{Error, Result};
use rfpop::harness::GameProtocol;
use rfpop::ma::Ma;
use rfpop::model::{Reader, System, TagMachine};
use rfpop::pop::{mapop_system, KeyDirectory, MaPop, Pop, PopMode, PopParams, PopReaderSecret};
use rfpop::primitives::prf::hash;
use rfpop::primitives::sig::SigningKey;
use rfpop::rng::Rng;
use rfpop::bits::BitString;

use crate::config::{Config, Mode};
use crate::store::{write_new, DbFile};

pub const DB_FILE: &str = "reader.db";
pub const READER_KEY: &str = "reader.key";
pub const PARA_FILE: &str = "para.bin";

pub fn tag_file(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("tag-{i}.key"))
}

/// A protocol the demo can deploy from a [`Config`].
pub trait Deployable: GameProtocol {
    const MODE: Mode;

    fn protocol(cfg: &Config) -> Result<Self>;

    /// A fresh system of `l` tags and, for PoP, its key directory.
    fn system(cfg: &Config, l: usize, rng: &mut Rng) -> Result<(System<Self>, Option<KeyDirectory>)>;

    fn encode_secret(s: &Self::ReaderSecret, w: &mut FieldWriter);

    fn decode_secret(r: &mut FieldReader<'_>) -> Result<Self::ReaderSecret>;
}

impl Deployable for Ma {
    const MODE: Mode = Mode::Ma;

    fn protocol(cfg: &Config) -> Result<Self> {
        Ma::new(cfg.ma_params())
    }

    fn system(cfg: &Config, l: usize, rng: &mut Rng) -> Result<(System<Self>, Option<KeyDirectory>)> {
        let ma = Self::protocol(cfg)?;
        let (records, tags) = ma.setup(l, rng)?;
        Ok((System::new(ma, (), records, tags, rng), None))
    }

    fn encode_secret(_: &(), _: &mut FieldWriter) {}

    fn decode_secret(_: &mut FieldReader<'_>) -> Result<()> {
        Ok(())
    }
}

impl Deployable for MaPop {
    const MODE: Mode = Mode::Mapop;

    fn protocol(cfg: &Config) -> Result<Self> {
        Pop::new(
            Ma::new(cfg.ma_params())?,
            PopParams {
                mode: PopMode::Full,
                ..PopParams::new(cfg.tag_impl().tag_scheme())
            },
        )
    }

    fn system(cfg: &Config, l: usize, rng: &mut Rng) -> Result<(System<Self>, Option<KeyDirectory>)> {
        let (sys, dir) = mapop_system(cfg.ma_params(), cfg.tag_impl(), PopMode::Full, l, rng)?;
        Ok((sys, Some(dir)))
    }

    fn encode_secret(s: &PopReaderSecret<()>, w: &mut FieldWriter) {
        w.bits(&s.id);
        s.sk.encode(w);
        s.payload.encode(w);
    }

    fn decode_secret(r: &mut FieldReader<'_>) -> Result<PopReaderSecret<()>> {
        Ok(PopReaderSecret {
            base: (),
            id: r.bits()?,
            sk: SigningKey::decode(r)?,
            payload: Option::<BitString>::decode(r)?,
        })
    }
}

/// What `setup` reports.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetupSummary {
    pub tags: usize,
    /// Hex digest of `para*` in PoP mode, of the initial DB file otherwise.
    pub digest: String,
}

/// Writes a fresh deployment of `l` tags into `dir`, deterministically from
/// the config seed. Existing files are never overwritten.
pub fn setup<P: Deployable>(cfg: &Config, l: usize, dir: &Path) -> Result<SetupSummary> {
    cfg.validate()?;
    if l == 0 {
        return Err(Error::Config("at least one tag is required".into()));
    }
    let mut rng = Rng::from_u64(cfg.seed);
    let (sys, para) = P::system(cfg, l, &mut rng)?;
    std::fs::create_dir_all(dir)?;
    let db = DbFile::<P>::of_reader(cfg.clone(), &sys.reader).encode();
    write_new(&dir.join(DB_FILE), &db)?;
    let mut w = FieldWriter::new();
    P::encode_secret(sys.reader.secret(), &mut w);
    write_new(&dir.join(READER_KEY), &w.finish())?;
    for (i, t) in sys.tags.iter().enumerate() {
        write_new(&tag_file(dir, i), &encode_tag(t))?;
    }
    let digest = match &para {
        Some(d) => {
            write_new(&dir.join(PARA_FILE), &d.encoded())?;
            d.digest()
        }
        None => hash(&BitString::from_bytes(db)).to_hex(),
    };
    Ok(SetupSummary { tags: l, digest })
}

fn encode_tag<P: Deployable>(t: &TagMachine<P>) -> Vec<u8> {
    let mut w = FieldWriter::new();
    w.u64(t.version());
    t.state().encode(&mut w);
    w.finish()
}

/// The config stored with a deployment.
pub fn deployment_config(dir: &Path) -> Result<Config> {
    // the params block sits right after the magic
    let bytes = std::fs::read(dir.join(DB_FILE))?;
    let mut r = FieldReader::new(&bytes);
    r.raw(crate::store::MAGIC.len())?;
    Config::from_toml(&r.str()?)
}

/// The reader of a deployment, resumed after its last journaled session.
/// `rng` feeds the reader's future coins.
pub fn load_reader<P: Deployable>(dir: &Path, rng: Rng) -> Result<(Config, Reader<P>)> {
    let db = DbFile::<P>::load(&dir.join(DB_FILE))?;
    check_mode::<P>(&db.config)?;
    let proto = Arc::new(P::protocol(&db.config)?);
    let key = std::fs::read(dir.join(READER_KEY))?;
    let mut r = FieldReader::new(&key);
    let secret = P::decode_secret(&mut r)?;
    r.expect_end()?;
    let reader = db.reader(proto, secret, rng);
    Ok((db.config, reader))
}

/// Tag `i` of a deployment at its stored key version.
pub fn load_tag<P: Deployable>(dir: &Path, i: usize, rng: Rng) -> Result<TagMachine<P>> {
    let cfg = deployment_config(dir)?;
    check_mode::<P>(&cfg)?;
    let bytes = std::fs::read(tag_file(dir, i)).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::UnknownTag(i),
        _ => e.into(),
    })?;
    let mut r = FieldReader::new(&bytes);
    let version = r.u64()?;
    let state = P::Tag::decode(&mut r)?;
    r.expect_end()?;
    Ok(TagMachine::new(Arc::new(P::protocol(&cfg)?), state, rng)
        .with_lifetime(cfg.s)
        .with_version(version))
}

/// Persists the tag's key material after a session.
pub fn store_tag<P: Deployable>(dir: &Path, i: usize, tag: &TagMachine<P>) -> Result<()> {
    let path = tag_file(dir, i);
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, encode_tag(tag))?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

pub fn load_para(dir: &Path) -> Result<KeyDirectory> {
    load_para_file(&dir.join(PARA_FILE))
}

pub fn load_para_file(path: &Path) -> Result<KeyDirectory> {
    KeyDirectory::decode_exact(&std::fs::read(path)?)
}

fn check_mode<P: Deployable>(cfg: &Config) -> Result<()> {
    if cfg.mode != P::MODE {
        return Err(Error::Config(format!(
            "deployment is in {:?} mode, expected {:?}",
            cfg.mode,
            P::MODE
        )));
    }
    Ok(())
}

/// Coins of a reader resumed after `sessions` sessions. Runs resumed at
/// different points draw from different streams.
pub fn reader_rng(cfg: &Config, sessions: usize) -> Rng {
    Rng::from_u64(cfg.seed).fork(&format!("reader after {sessions}"))
}

/// Coins of tag `i` at key version `version`.
pub fn tag_rng(cfg: &Config, i: usize, version: u64) -> Rng {
    Rng::from_u64(cfg.seed).fork(&format!("tag {i} at {version}"))
}

/// [`load_reader`] with coins from [`reader_rng`].
pub fn resume_reader<P: Deployable>(dir: &Path) -> Result<(Config, Reader<P>)> {
    let cfg = deployment_config(dir)?;
    let sessions = DbFile::<P>::load(&dir.join(DB_FILE))?.journal.len();
    load_reader(dir, reader_rng(&cfg, sessions))
}

/// [`load_tag`] with coins from [`tag_rng`].
pub fn resume_tag<P: Deployable>(dir: &Path, i: usize) -> Result<TagMachine<P>> {
    let cfg = deployment_config(dir)?;
    let version = load_tag::<P>(dir, i, Rng::from_u64(0))?.version();
    load_tag(dir, i, tag_rng(&cfg, i, version))
}
