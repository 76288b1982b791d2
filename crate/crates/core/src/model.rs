//! The generic RFID system model: reader and tag case machines, transcripts,
//! the versioned reader database and the round-based protocol interface.
//!
//! A concrete protocol implements [`RoundProtocol`] and only decides message
//! validity and replies. Session sequencing, sid routing, outputs, key
//! updates and snapshot bookkeeping live here.
//!
//! Messages carry their position in the session (`round`): `c_μ` is round
//! `2μ − 1` and `α_μ` is round `2μ`. Two message spaces of equal bit length
//! (such as `c_1` and `c_2` of the MA protocol) are therefore still disjoint.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::bits::BitString;
use crate::codec::{Codec, FieldReader, FieldWriter};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const SID_BYTES: usize = 16;
pub const SID_BITS: usize = SID_BYTES * 8;
/// Default tag lifetime in sessions.
pub const DEFAULT_LIFETIME: u64 = 1 << 17;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Sid(pub [u8; SID_BYTES]);

impl Sid {
    pub fn random(rng: &mut Rng) -> Self {
        Sid(rng.array())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Sid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sid({})", self.to_hex())
    }
}

impl fmt::Display for Sid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Msg {
    pub round: u8,
    pub body: BitString,
}

impl Msg {
    /// Reader message `c_μ`.
    pub fn c(mu: usize, body: BitString) -> Self {
        Self {
            round: (2 * mu - 1) as u8,
            body,
        }
    }

    /// Tag message `α_μ`.
    pub fn alpha(mu: usize, body: BitString) -> Self {
        Self {
            round: (2 * mu) as u8,
            body,
        }
    }

    pub fn from_reader(&self) -> bool {
        self.round % 2 == 1
    }

    /// The `μ` of `c_μ` or `α_μ`.
    pub fn mu(&self) -> usize {
        (self.round as usize).div_ceil(2)
    }
}

/// Bit lengths of every message space of a protocol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub gamma: usize,
    /// Accepted lengths of `c_μ`, indexed by `μ − 1`, for `μ ∈ [1, γ+1]`.
    pub c_spaces: Vec<Vec<usize>>,
    /// Accepted lengths of `α_μ`, indexed by `μ − 1`.
    pub alpha_spaces: Vec<Vec<usize>>,
    /// Length of `c_μ` as the reader emits it in its configured mode.
    pub reader_c: Vec<usize>,
    /// Length of `α_μ` as the tag emits it in the reader's configured mode.
    pub tag_alpha: Vec<usize>,
    /// The reader's output waits for a final tag message `α_{γ+1}`.
    pub deferred: bool,
}

impl Layout {
    pub fn in_c_space(&self, mu: usize, len: usize) -> bool {
        mu >= 1 && self.c_spaces.get(mu - 1).is_some_and(|s| s.contains(&len))
    }

    pub fn in_alpha_space(&self, mu: usize, len: usize) -> bool {
        mu >= 1 && self.alpha_spaces.get(mu - 1).is_some_and(|s| s.contains(&len))
    }

    /// Number of protocol messages in a complete session.
    pub fn message_count(&self) -> usize {
        2 * self.gamma + 1 + usize::from(self.deferred)
    }

    /// Round number of the last message the tag sends.
    pub fn final_tag_round(&self) -> u8 {
        if self.deferred {
            (2 * self.gamma + 2) as u8
        } else {
            (2 * self.gamma) as u8
        }
    }
}

/// `trs^{sid}`: the messages of one session in round order plus outputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transcript {
    pub sid: Sid,
    pub messages: Vec<Msg>,
    pub o_r: Option<bool>,
    pub o_t: Option<bool>,
}

impl Transcript {
    pub fn new(sid: Sid) -> Self {
        Self {
            sid,
            messages: Vec::new(),
            o_r: None,
            o_t: None,
        }
    }

    pub fn is_frozen(&self) -> bool {
        self.o_r.is_some() || self.o_t.is_some()
    }

    pub fn push(&mut self, msg: Msg) -> Result<()> {
        if self.is_frozen() {
            return Err(Error::Malformed("transcript already carries an output".into()));
        }
        let expected = self.messages.len() + 1;
        if msg.round as usize != expected {
            return Err(Error::Malformed(format!(
                "round {} out of order, expected {expected}",
                msg.round
            )));
        }
        self.messages.push(msg);
        Ok(())
    }

    /// Concatenation of all message bodies.
    pub fn concat(&self) -> BitString {
        BitString::concat_all(self.messages.iter().map(|m| &m.body))
    }

    pub fn get(&self, round: u8) -> Option<&BitString> {
        self.messages.get(round as usize - 1).map(|m| &m.body)
    }
}

/// Result of feeding one message to a party.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Reply { sid: Sid, msg: Msg },
    ReplyWithOutput { sid: Sid, msg: Msg, output: bool },
    Output { sid: Sid, output: bool },
    /// Tag case 1(2): the open session `aborted` ends with `o_T = 0` and a
    /// new session `sid` starts with reply `msg`.
    Restart { aborted: Sid, sid: Sid, msg: Msg },
    Ignore,
}

impl StepOutcome {
    pub fn reply(&self) -> Option<(Sid, &Msg)> {
        match self {
            StepOutcome::Reply { sid, msg }
            | StepOutcome::ReplyWithOutput { sid, msg, .. }
            | StepOutcome::Restart { sid, msg, .. } => Some((*sid, msg)),
            _ => None,
        }
    }

    /// Output for the session the message belonged to.
    pub fn output(&self) -> Option<bool> {
        match self {
            StepOutcome::ReplyWithOutput { output, .. } | StepOutcome::Output { output, .. } => {
                Some(*output)
            }
            _ => None,
        }
    }
}

/// A reader database record.
pub trait Record: Clone + fmt::Debug + PartialEq + Send + Sync + Codec {
    fn id(&self) -> &BitString;

    /// Key under which the record is found in constant time, if any.
    fn index_key(&self) -> Option<&BitString> {
        None
    }

    /// Stored fields and their byte sizes.
    fn storage_fields(&self) -> Vec<(&'static str, usize)>;

    fn storage_bytes(&self) -> usize {
        self.storage_fields().iter().map(|(_, n)| n).sum()
    }
}

/// Records in ascending ID order plus an index map.
#[derive(Clone, Debug, PartialEq)]
pub struct Database<R: Record> {
    records: Vec<R>,
    index: HashMap<BitString, usize>,
}

impl<R: Record> Database<R> {
    pub fn new(records: Vec<R>) -> Self {
        let mut db = Self {
            records: Vec::new(),
            index: HashMap::new(),
        };
        for r in records {
            let i = db.records.len();
            if let Some(k) = r.index_key() {
                db.index.entry(k.clone()).or_insert(i);
            }
            db.records.push(r);
        }
        db
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&R> {
        self.records.get(i)
    }

    pub fn records(&self) -> &[R] {
        &self.records
    }

    pub fn lookup(&self, key: &BitString) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn position_of_id(&self, id: &BitString) -> Option<usize> {
        self.records.iter().position(|r| r.id() == id)
    }

    pub fn set(&mut self, i: usize, rec: R) {
        if let Some(old) = self.records[i].index_key() {
            if self.index.get(old) == Some(&i) {
                self.index.remove(old);
            }
        }
        if let Some(k) = rec.index_key() {
            // ties keep the lower position, i.e. the smaller ID
            let slot = self.index.entry(k.clone()).or_insert(i);
            if *slot > i {
                *slot = i;
            }
        }
        self.records[i] = rec;
    }

    pub fn apply(&mut self, delta: &[(usize, R)]) {
        for (i, r) in delta {
            self.set(*i, r.clone());
        }
    }
}

/// What the reader-side protocol logic decided for an incoming `α_μ`.
pub enum ReaderAction<P: RoundProtocol + ?Sized> {
    Reply {
        msg: BitString,
        session: P::ReaderSession,
    },
    Accept {
        msg: Option<BitString>,
        identified: usize,
        delta: Vec<(usize, P::Record)>,
        session: P::ReaderSession,
    },
    Reject {
        msg: Option<BitString>,
        session: P::ReaderSession,
    },
}

/// What the tag-side protocol logic decided for an incoming `c_μ`, `μ ≥ 2`.
pub enum TagAction<S> {
    Reply { msg: BitString, session: S },
    Finish {
        msg: Option<BitString>,
        accept: bool,
        note: Option<String>,
    },
    Ignore { session: S },
}

/// A `(2γ+1)`- or `(2γ+2)`-round protocol.
///
/// The machines only call `reader_receive`/`tag_receive` with messages of
/// the expected round whose length lies in the layout's space.
pub trait RoundProtocol: Send + Sync + 'static {
    type Record: Record;
    type Tag: Clone + fmt::Debug + Send + Sync + Codec;
    type TagSession: Clone + fmt::Debug + Send + Sync;
    type ReaderSecret: Clone + Send + Sync;
    type ReaderSession: Clone + fmt::Debug + PartialEq + Send + Sync + Codec;

    fn name(&self) -> String;
    fn layout(&self) -> &Layout;

    fn reader_open(
        &self,
        secret: &mut Self::ReaderSecret,
        rng: &mut Rng,
    ) -> Result<(BitString, Self::ReaderSession)>;

    fn reader_receive(
        &self,
        secret: &mut Self::ReaderSecret,
        db: &Database<Self::Record>,
        session: Self::ReaderSession,
        mu: usize,
        alpha: &BitString,
        rng: &mut Rng,
    ) -> Result<ReaderAction<Self>>;

    fn tag_open(
        &self,
        tag: &mut Self::Tag,
        c1: &BitString,
        rng: &mut Rng,
    ) -> Result<(BitString, Self::TagSession)>;

    fn tag_receive(
        &self,
        tag: &mut Self::Tag,
        session: Self::TagSession,
        mu: usize,
        c: &BitString,
        rng: &mut Rng,
    ) -> Result<TagAction<Self::TagSession>>;

    /// Moves the tag key from version `v` to `v + 1` after a terminal output.
    fn tag_key_update(&self, _tag: &mut Self::Tag) {}

    /// Everything stored on the tag, as released by corruption.
    fn expose(
        &self,
        tag: &Self::Tag,
        session: Option<&Self::TagSession>,
    ) -> Vec<(String, BitString)>;

    /// Persistent tag fields and their byte sizes.
    fn tag_storage(&self, tag: &Self::Tag) -> Vec<(&'static str, usize)>;
}

/// A record that carries a base protocol's record `R`.
pub trait Embeds<R>: Record {
    fn inner(&self) -> &R;
    fn with_inner(&self, inner: R) -> Self;
}

/// A protocol whose reader search also runs over extended records, so a
/// wrapper can keep its own per-tag fields next to the base record.
pub trait Wrappable: RoundProtocol {
    fn reader_receive_in<E: Embeds<Self::Record>>(
        &self,
        secret: &mut Self::ReaderSecret,
        db: &Database<E>,
        session: Self::ReaderSession,
        mu: usize,
        alpha: &BitString,
        rng: &mut Rng,
    ) -> Result<ReaderAction<Self>>;
}

/// One terminated reader session `j` together with what changed in the DB.
#[derive(Debug)]
pub struct SessionRecord<P: RoundProtocol> {
    pub sid: Sid,
    pub transcript: Transcript,
    /// Reader scratch at termination (coins and partial results).
    pub state: Option<P::ReaderSession>,
    pub identified: Option<usize>,
    pub delta: Vec<(usize, P::Record)>,
    pub output: bool,
    pub timed_out: bool,
}

impl<P: RoundProtocol> Clone for SessionRecord<P> {
    fn clone(&self) -> Self {
        Self {
            sid: self.sid,
            transcript: self.transcript.clone(),
            state: self.state.clone(),
            identified: self.identified,
            delta: self.delta.clone(),
            output: self.output,
            timed_out: self.timed_out,
        }
    }
}

#[derive(Debug)]
struct OpenReader<P: RoundProtocol> {
    transcript: Transcript,
    session: P::ReaderSession,
    received: usize,
}

impl<P: RoundProtocol> Clone for OpenReader<P> {
    fn clone(&self) -> Self {
        Self {
            transcript: self.transcript.clone(),
            session: self.session.clone(),
            received: self.received,
        }
    }
}

/// The reader party with its database history `DB^0, DB^1, …`.
pub struct Reader<P: RoundProtocol> {
    proto: Arc<P>,
    secret: P::ReaderSecret,
    initial: Database<P::Record>,
    db: Database<P::Record>,
    open: Option<OpenReader<P>>,
    history: Vec<SessionRecord<P>>,
    sids: HashMap<Sid, usize>,
    rng: Rng,
}

impl<P: RoundProtocol> Clone for Reader<P> {
    fn clone(&self) -> Self {
        Self {
            proto: self.proto.clone(),
            secret: self.secret.clone(),
            initial: self.initial.clone(),
            db: self.db.clone(),
            open: self.open.clone(),
            history: self.history.clone(),
            sids: self.sids.clone(),
            rng: self.rng.clone(),
        }
    }
}

impl<P: RoundProtocol> Reader<P> {
    pub fn new(proto: Arc<P>, secret: P::ReaderSecret, records: Vec<P::Record>, rng: Rng) -> Self {
        let db = Database::new(records);
        Self {
            proto,
            secret,
            initial: db.clone(),
            db,
            open: None,
            history: Vec::new(),
            sids: HashMap::new(),
            rng,
        }
    }

    /// Rebuilds a reader from a stored initial DB and session history.
    pub fn restore(
        proto: Arc<P>,
        secret: P::ReaderSecret,
        initial: Vec<P::Record>,
        history: Vec<SessionRecord<P>>,
        rng: Rng,
    ) -> Self {
        let mut r = Self::new(proto, secret, initial, rng);
        for rec in history {
            r.db.apply(&rec.delta);
            r.sids.insert(rec.sid, r.history.len() + 1);
            r.history.push(rec);
        }
        r
    }

    pub fn protocol(&self) -> &Arc<P> {
        &self.proto
    }

    pub fn secret(&self) -> &P::ReaderSecret {
        &self.secret
    }

    pub fn secret_mut(&mut self) -> &mut P::ReaderSecret {
        &mut self.secret
    }

    pub fn db(&self) -> &Database<P::Record> {
        &self.db
    }

    pub fn history(&self) -> &[SessionRecord<P>] {
        &self.history
    }

    pub fn is_idle(&self) -> bool {
        self.open.is_none()
    }

    pub fn open_sid(&self) -> Option<Sid> {
        self.open.as_ref().map(|o| o.transcript.sid)
    }

    /// Number of terminated sessions.
    pub fn sessions(&self) -> usize {
        self.history.len()
    }

    /// Session number `j ≥ 1` of a terminated session.
    pub fn session_of(&self, sid: &Sid) -> Option<usize> {
        self.sids.get(sid).copied()
    }

    /// Record `j`, 1-based.
    pub fn session(&self, j: usize) -> Result<&SessionRecord<P>> {
        j.checked_sub(1)
            .and_then(|i| self.history.get(i))
            .ok_or(Error::UnknownSnapshot(j))
    }

    /// `DB^j`: the database after `j` terminated sessions; `DB^0` is the
    /// initial one.
    pub fn db_at(&self, j: usize) -> Result<Database<P::Record>> {
        if j > self.history.len() {
            return Err(Error::UnknownSnapshot(j));
        }
        let mut db = self.initial.clone();
        for rec in &self.history[..j] {
            db.apply(&rec.delta);
        }
        Ok(db)
    }

    /// Record `i` of `DB^j`, without materializing the whole snapshot.
    pub fn record_at(&self, j: usize, i: usize) -> Result<P::Record> {
        if j > self.history.len() {
            return Err(Error::UnknownSnapshot(j));
        }
        for rec in self.history[..j].iter().rev() {
            if let Some((_, r)) = rec.delta.iter().rev().find(|(k, _)| *k == i) {
                return Ok(r.clone());
            }
        }
        self.initial.get(i).cloned().ok_or(Error::UnknownTag(i))
    }

    pub fn initial_db(&self) -> &Database<P::Record> {
        &self.initial
    }

    /// Case 1: starts session `j + 1`.
    pub fn start(&mut self) -> Result<(Sid, Msg)> {
        if self.open.is_some() {
            return Err(Error::SessionOpen);
        }
        let mut sid = Sid::random(&mut self.rng);
        while self.sids.contains_key(&sid) {
            sid = Sid::random(&mut self.rng);
        }
        let (c1, session) = self.proto.reader_open(&mut self.secret, &mut self.rng)?;
        let msg = Msg::c(1, c1);
        let mut transcript = Transcript::new(sid);
        transcript.push(msg.clone())?;
        self.open = Some(OpenReader {
            transcript,
            session,
            received: 0,
        });
        Ok((sid, msg))
    }

    /// Case 2: handles `(sid', α)`.
    pub fn step(&mut self, sid: Sid, msg: &Msg) -> Result<StepOutcome> {
        let open = self.open.as_ref().ok_or(Error::NoOpenSession)?;
        if open.transcript.sid != sid {
            return Ok(StepOutcome::Ignore);
        }
        let mut open = self.open.take().expect("checked above");
        let mu = open.received + 1;
        let layout = self.proto.layout();
        if msg.round as usize != 2 * mu || !layout.in_alpha_space(mu, msg.body.len()) {
            let session = open.session.clone();
            self.terminate(open, Some(session), None, Vec::new(), false, false);
            return Ok(StepOutcome::Output { sid, output: false });
        }
        open.transcript.push(msg.clone())?;
        let action = self.proto.reader_receive(
            &mut self.secret,
            &self.db,
            open.session.clone(),
            mu,
            &msg.body,
            &mut self.rng,
        );
        let action = match action {
            Ok(a) => a,
            Err(e) => {
                self.open = Some(open);
                return Err(e);
            }
        };
        match action {
            ReaderAction::Reply { msg: c, session } => {
                let reply = Msg::c(mu + 1, c);
                open.transcript.push(reply.clone())?;
                open.session = session;
                open.received = mu;
                self.open = Some(open);
                Ok(StepOutcome::Reply { sid, msg: reply })
            }
            ReaderAction::Accept {
                msg: c,
                identified,
                delta,
                session,
            } => {
                let reply = c.map(|c| Msg::c(mu + 1, c));
                if let Some(r) = &reply {
                    open.transcript.push(r.clone())?;
                }
                self.terminate(open, Some(session), Some(identified), delta, true, false);
                Ok(match reply {
                    Some(msg) => StepOutcome::ReplyWithOutput {
                        sid,
                        msg,
                        output: true,
                    },
                    None => StepOutcome::Output { sid, output: true },
                })
            }
            ReaderAction::Reject { msg: c, session } => {
                let reply = c.map(|c| Msg::c(mu + 1, c));
                if let Some(r) = &reply {
                    open.transcript.push(r.clone())?;
                }
                self.terminate(open, Some(session), None, Vec::new(), false, false);
                Ok(match reply {
                    Some(msg) => StepOutcome::ReplyWithOutput {
                        sid,
                        msg,
                        output: false,
                    },
                    None => StepOutcome::Output { sid, output: false },
                })
            }
        }
    }

    /// Case 3: the open session received nothing in time.
    pub fn timeout(&mut self) -> Result<StepOutcome> {
        let open = self.open.take().ok_or(Error::NoOpenSession)?;
        let sid = open.transcript.sid;
        let session = open.session.clone();
        self.terminate(open, Some(session), None, Vec::new(), false, true);
        Ok(StepOutcome::Output { sid, output: false })
    }

    fn terminate(
        &mut self,
        mut open: OpenReader<P>,
        state: Option<P::ReaderSession>,
        identified: Option<usize>,
        delta: Vec<(usize, P::Record)>,
        output: bool,
        timed_out: bool,
    ) {
        open.transcript.o_r = Some(output);
        self.db.apply(&delta);
        let sid = open.transcript.sid;
        self.history.push(SessionRecord {
            sid,
            transcript: open.transcript,
            state,
            identified,
            delta,
            output,
            timed_out,
        });
        self.sids.insert(sid, self.history.len());
    }
}

#[derive(Debug)]
struct OpenTag<P: RoundProtocol> {
    transcript: Transcript,
    session: P::TagSession,
    received: usize,
}

impl<P: RoundProtocol> Clone for OpenTag<P> {
    fn clone(&self) -> Self {
        Self {
            transcript: self.transcript.clone(),
            session: self.session.clone(),
            received: self.received,
        }
    }
}

/// A tag party: key material at version `v` plus at most one open session.
pub struct TagMachine<P: RoundProtocol> {
    proto: Arc<P>,
    state: P::Tag,
    open: Option<OpenTag<P>>,
    version: u64,
    lifetime: u64,
    rng: Rng,
    last_note: Option<String>,
}

impl<P: RoundProtocol> Clone for TagMachine<P> {
    fn clone(&self) -> Self {
        Self {
            proto: self.proto.clone(),
            state: self.state.clone(),
            open: self.open.clone(),
            version: self.version,
            lifetime: self.lifetime,
            rng: self.rng.clone(),
            last_note: self.last_note.clone(),
        }
    }
}

impl<P: RoundProtocol> TagMachine<P> {
    pub fn new(proto: Arc<P>, state: P::Tag, rng: Rng) -> Self {
        Self {
            proto,
            state,
            open: None,
            version: 1,
            lifetime: DEFAULT_LIFETIME,
            rng,
            last_note: None,
        }
    }

    /// Resumes a stored tag at key version `v`.
    pub fn with_version(mut self, v: u64) -> Self {
        self.version = v;
        self
    }

    pub fn with_lifetime(mut self, s: u64) -> Self {
        self.lifetime = s;
        self
    }

    pub fn state(&self) -> &P::Tag {
        &self.state
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn lifetime(&self) -> u64 {
        self.lifetime
    }

    pub fn is_idle(&self) -> bool {
        self.open.is_none()
    }

    pub fn open_sid(&self) -> Option<Sid> {
        self.open.as_ref().map(|o| o.transcript.sid)
    }

    pub fn open_transcript(&self) -> Option<&Transcript> {
        self.open.as_ref().map(|o| &o.transcript)
    }

    /// Diagnostic attached to the most recent rejecting output, if any.
    pub fn last_note(&self) -> Option<&str> {
        self.last_note.as_deref()
    }

    pub fn expose(&self) -> Vec<(String, BitString)> {
        let mut out = self
            .proto
            .expose(&self.state, self.open.as_ref().map(|o| &o.session));
        out.push(("version".into(), BitString::from_u64(self.version, 64)));
        out
    }

    pub fn storage(&self) -> Vec<(&'static str, usize)> {
        self.proto.tag_storage(&self.state)
    }

    fn key_update(&mut self) {
        self.proto.tag_key_update(&mut self.state);
        self.version += 1;
        self.open = None;
    }

    pub fn step(&mut self, sid: Sid, msg: &Msg) -> Result<StepOutcome> {
        let layout = self.proto.layout();
        if msg.round == 1 && layout.in_c_space(1, msg.body.len()) {
            return self.start_session(sid, msg);
        }
        let Some(open) = self.open.as_ref() else {
            return Ok(StepOutcome::Ignore);
        };
        let mu = open.received + 1;
        if open.transcript.sid != sid
            || msg.round as usize != 2 * mu - 1
            || !layout.in_c_space(mu, msg.body.len())
        {
            return Ok(StepOutcome::Ignore);
        }
        let mut open = self.open.take().expect("checked above");
        let action = match self.proto.tag_receive(
            &mut self.state,
            open.session.clone(),
            mu,
            &msg.body,
            &mut self.rng,
        ) {
            Ok(a) => a,
            Err(e) => {
                self.open = Some(open);
                return Err(e);
            }
        };
        match action {
            TagAction::Ignore { session } => {
                open.session = session;
                self.open = Some(open);
                Ok(StepOutcome::Ignore)
            }
            TagAction::Reply { msg: a, session } => {
                open.transcript.push(msg.clone())?;
                let reply = Msg::alpha(mu, a);
                open.transcript.push(reply.clone())?;
                open.session = session;
                open.received = mu;
                self.open = Some(open);
                Ok(StepOutcome::Reply { sid, msg: reply })
            }
            TagAction::Finish {
                msg: a,
                accept,
                note,
            } => {
                self.last_note = note;
                self.key_update();
                Ok(match a {
                    Some(a) => StepOutcome::ReplyWithOutput {
                        sid,
                        msg: Msg::alpha(mu, a),
                        output: accept,
                    },
                    None => StepOutcome::Output {
                        sid,
                        output: accept,
                    },
                })
            }
        }
    }

    fn start_session(&mut self, sid: Sid, msg: &Msg) -> Result<StepOutcome> {
        let aborted = self.open.as_ref().map(|o| o.transcript.sid);
        if aborted.is_some() {
            self.last_note = None;
            self.key_update();
        }
        if self.version > self.lifetime {
            return Err(Error::LifetimeExceeded(self.lifetime));
        }
        let (a, session) = self.proto.tag_open(&mut self.state, &msg.body, &mut self.rng)?;
        let reply = Msg::alpha(1, a);
        let mut transcript = Transcript::new(sid);
        transcript.push(msg.clone())?;
        transcript.push(reply.clone())?;
        self.open = Some(OpenTag {
            transcript,
            session,
            received: 1,
        });
        Ok(match aborted {
            Some(aborted) => StepOutcome::Restart {
                aborted,
                sid,
                msg: reply,
            },
            None => StepOutcome::Reply { sid, msg: reply },
        })
    }
}

/// A reader and its tags.
pub struct System<P: RoundProtocol> {
    pub proto: Arc<P>,
    pub reader: Reader<P>,
    pub tags: Vec<TagMachine<P>>,
}

impl<P: RoundProtocol> Clone for System<P> {
    fn clone(&self) -> Self {
        Self {
            proto: self.proto.clone(),
            reader: self.reader.clone(),
            tags: self.tags.clone(),
        }
    }
}

impl<P: RoundProtocol> System<P> {
    /// Party randomness is forked from `rng`: `"reader"` for the reader and
    /// `"tag <i>"` for tag `i`.
    pub fn new(
        proto: P,
        secret: P::ReaderSecret,
        records: Vec<P::Record>,
        tags: Vec<P::Tag>,
        rng: &mut Rng,
    ) -> Self {
        let proto = Arc::new(proto);
        let reader = Reader::new(proto.clone(), secret, records, rng.fork("reader"));
        let tags = tags
            .into_iter()
            .enumerate()
            .map(|(i, t)| TagMachine::new(proto.clone(), t, rng.fork(&format!("tag {i}"))))
            .collect();
        Self {
            proto,
            reader,
            tags,
        }
    }

    pub fn tag(&mut self, i: usize) -> Result<&mut TagMachine<P>> {
        self.tags.get_mut(i).ok_or(Error::UnknownTag(i))
    }
}

impl Codec for Sid {
    fn encode(&self, w: &mut FieldWriter) {
        w.field(&self.0);
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        Ok(Sid(r.array()?))
    }
}

impl Codec for Msg {
    fn encode(&self, w: &mut FieldWriter) {
        w.u8(self.round).bits(&self.body);
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        Ok(Msg {
            round: r.u8()?,
            body: r.bits()?,
        })
    }
}

impl Codec for Transcript {
    fn encode(&self, w: &mut FieldWriter) {
        self.sid.encode(w);
        self.messages.encode(w);
        self.o_r.encode(w);
        self.o_t.encode(w);
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        Ok(Transcript {
            sid: Sid::decode(r)?,
            messages: Vec::decode(r)?,
            o_r: Option::decode(r)?,
            o_t: Option::decode(r)?,
        })
    }
}

impl<P: RoundProtocol> Codec for SessionRecord<P> {
    fn encode(&self, w: &mut FieldWriter) {
        self.sid.encode(w);
        self.transcript.encode(w);
        self.state.encode(w);
        self.identified.encode(w);
        self.delta.encode(w);
        self.output.encode(w);
        self.timed_out.encode(w);
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        Ok(SessionRecord {
            sid: Sid::decode(r)?,
            transcript: Transcript::decode(r)?,
            state: Option::decode(r)?,
            identified: Option::decode(r)?,
            delta: Vec::decode(r)?,
            output: bool::decode(r)?,
            timed_out: bool::decode(r)?,
        })
    }
}

impl<P: RoundProtocol> PartialEq for SessionRecord<P> {
    fn eq(&self, other: &Self) -> bool {
        self.sid == other.sid
            && self.transcript == other.transcript
            && self.state == other.state
            && self.identified == other.identified
            && self.delta == other.delta
            && self.output == other.output
            && self.timed_out == other.timed_out
    }
}

/// Which message of an otherwise honest session gets lost.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relay {
    Honest,
    /// The tag's last message never reaches the reader, which times out.
    DropFinalTagMessage,
}

/// Relays one session between the reader and tag `i` and returns the
/// combined transcript with both outputs.
pub fn run_honest_session<P: RoundProtocol>(sys: &mut System<P>, i: usize) -> Result<Transcript> {
    run_session(sys, i, Relay::Honest)
}

pub fn run_session<P: RoundProtocol>(
    sys: &mut System<P>,
    i: usize,
    relay: Relay,
) -> Result<Transcript> {
    if i >= sys.tags.len() {
        return Err(Error::UnknownTag(i));
    }
    let final_round = sys.proto.layout().final_tag_round();
    let (sid, c1) = sys.reader.start()?;
    let mut trs = Transcript::new(sid);
    trs.messages.push(c1.clone());
    let mut to_tag = Some(c1);
    while let Some(c) = to_tag.take() {
        let out = sys.tags[i].step(sid, &c)?;
        if let Some(o) = out.output() {
            trs.o_t = Some(o);
        }
        let Some((_, a)) = out.reply() else { break };
        let a = a.clone();
        trs.messages.push(a.clone());
        if relay == Relay::DropFinalTagMessage && a.round == final_round {
            sys.reader.timeout()?;
            trs.o_r = Some(false);
            break;
        }
        let out = sys.reader.step(sid, &a)?;
        if let Some(o) = out.output() {
            trs.o_r = Some(o);
        }
        if let Some((_, c)) = out.reply() {
            trs.messages.push(c.clone());
            to_tag = Some(c.clone());
        }
    }
    if trs.o_r.is_none() && !sys.reader.is_idle() && sys.reader.open_sid() == Some(sid) {
        sys.reader.timeout()?;
        trs.o_r = Some(false);
    }
    Ok(trs)
}
