//! The reader database file.
//!
//! Layout: `"RFPOP1"`, the params block (one field holding the config as
//! TOML), the record count (one `u32` field), every initial record in its
//! field encoding, then the journal. Each journal entry is a 4-byte
//! big-endian length followed by one encoded session record, and entry `j`
//! carries the delta that turns `DB^{j-1}` into `DB^j`. Entries are only
//! ever appended.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rfpop::codec::{Codec, FieldReader, FieldWriter};
use rfpop::error::{Error, Result};
use rfpop::model::{Database, Reader, RoundProtocol, SessionRecord};
use rfpop::rng::Rng;

use crate::config::Config;

pub const MAGIC: &[u8; 6] = b"RFPOP1";

pub struct DbFile<P: RoundProtocol> {
    pub config: Config,
    pub records: Vec<P::Record>,
    pub journal: Vec<SessionRecord<P>>,
}

impl<P: RoundProtocol> DbFile<P> {
    pub fn new(config: Config, records: Vec<P::Record>) -> Self {
        Self {
            config,
            records,
            journal: Vec::new(),
        }
    }

    /// The file of a reader: its initial DB and every terminated session.
    pub fn of_reader(config: Config, reader: &Reader<P>) -> Self {
        Self {
            config,
            records: reader.initial_db().records().to_vec(),
            journal: reader.history().to_vec(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = FieldWriter::new();
        w.raw(MAGIC).str(&self.config.to_toml());
        w.u32(self.records.len() as u32);
        for r in &self.records {
            r.encode(&mut w);
        }
        let mut out = w.finish();
        for rec in &self.journal {
            out.extend_from_slice(&journal_entry(rec));
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = FieldReader::new(bytes);
        if r.raw(MAGIC.len()).ok() != Some(&MAGIC[..]) {
            return Err(Error::Malformed("not an RFPOP1 database file".into()));
        }
        let config = Config::from_toml(&r.str()?)?;
        let n = r.u32()? as usize;
        if n > r.remaining() / 2 {
            return Err(Error::Malformed(format!("implausible record count {n}")));
        }
        let records = (0..n).map(|_| P::Record::decode(&mut r)).collect::<Result<Vec<_>>>()?;
        let mut journal = Vec::new();
        while !r.is_empty() {
            let len = u32::from_be_bytes(r.raw(4)?.try_into().expect("4 bytes")) as usize;
            journal.push(SessionRecord::decode_exact(r.raw(len)?)?);
        }
        Ok(Self {
            config,
            records,
            journal,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.encode())?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }

    /// Appends one session to the journal of the file at `path`.
    pub fn append(path: &Path, rec: &SessionRecord<P>) -> Result<()> {
        let mut f = OpenOptions::new().append(true).open(path)?;
        f.write_all(&journal_entry(rec))?;
        f.sync_data()?;
        Ok(())
    }

    /// `DB^j`; `DB^0` is the initial database.
    pub fn snapshot(&self, j: usize) -> Result<Database<P::Record>> {
        if j > self.journal.len() {
            return Err(Error::UnknownSnapshot(j));
        }
        let mut db = Database::new(self.records.clone());
        for rec in &self.journal[..j] {
            db.apply(&rec.delta);
        }
        Ok(db)
    }

    /// A reader resuming after the last journaled session.
    pub fn reader(&self, proto: Arc<P>, secret: P::ReaderSecret, rng: Rng) -> Reader<P> {
        Reader::restore(proto, secret, self.records.clone(), self.journal.clone(), rng)
    }
}

fn journal_entry<P: RoundProtocol>(rec: &SessionRecord<P>) -> Vec<u8> {
    let body = rec.encoded();
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

/// `DB^j` as stored in the file at `path`.
pub fn db_snapshot_load<P: RoundProtocol>(path: &Path, j: usize) -> Result<Database<P::Record>> {
    DbFile::<P>::load(path)?.snapshot(j)
}

/// Writes `bytes` to a new file, refusing to overwrite.
pub fn write_new(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = File::create_new(path)?;
    f.write_all(bytes)?;
    Ok(())
}
