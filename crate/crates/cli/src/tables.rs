//! Size and operation-count tables, measured from live sessions.
//!
//! Every protocol message is wrapped in a [`Frame`], encoded, decoded and
//! only then handed to the peer, so the byte columns are what actually
//! crossed the wire minus framing. Operation counts come from the
//! primitives' per-thread counters around each party's steps.

use std::fmt;
use std::str::FromStr;

use rfpop::error::{Error, Result};
use rfpop::ma::Ma;
use rfpop::model::{Msg, Record, RoundProtocol, Sid, StepOutcome, System};
use rfpop::pop::{mapop_system, Impl, PopMode};
use rfpop::primitives::ops::{self, OpCounts};
use rfpop::rng::Rng;
use serde::Serialize;

use crate::config::Config;
use crate::wire::Frame;

/// Column of the tables: a tag signature instantiation, or plain MA.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Column {
    Imp1,
    Imp2,
    Imp3,
    Ma,
}

impl FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "imp1" | "impl1" => Ok(Self::Imp1),
            "2" | "imp2" | "impl2" => Ok(Self::Imp2),
            "3" | "imp3" | "impl3" => Ok(Self::Imp3),
            "ma" => Ok(Self::Ma),
            _ => Err(Error::Config(format!("unknown implementation {s:?}, expected 1, 2, 3 or ma"))),
        }
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Column::Imp1 => "IMP1",
            Column::Imp2 => "IMP2",
            Column::Imp3 => "IMP3",
            Column::Ma => "MA",
        })
    }
}

impl Column {
    pub const ALL: [Column; 4] = [Column::Imp1, Column::Imp2, Column::Imp3, Column::Ma];

    fn tag_impl(self, cfg: &Config) -> Option<Impl> {
        match self {
            Column::Imp1 => Some(Impl::Imp1),
            Column::Imp2 => Some(Impl::Imp2 { pool: cfg.pool }),
            Column::Imp3 => Some(Impl::Imp3 { k: cfg.k }),
            Column::Ma => None,
        }
    }
}

/// One relayed session: the frames in order and what each party spent.
pub struct Relayed {
    pub frames: Vec<Frame>,
    pub tag_ops: OpCounts,
    pub reader_ops: OpCounts,
    pub o_r: Option<bool>,
    pub o_t: Option<bool>,
}

/// Relays one session between the reader and tag `i` through encoded
/// frames. With `drop_final` the tag's last message is lost and the reader
/// times out.
pub fn relay<P: RoundProtocol>(sys: &mut System<P>, i: usize, drop_final: bool) -> Result<Relayed> {
    if i >= sys.tags.len() {
        return Err(Error::UnknownTag(i));
    }
    let final_round = sys.proto.layout().final_tag_round();
    let mut out = Relayed {
        frames: Vec::new(),
        tag_ops: OpCounts::default(),
        reader_ops: OpCounts::default(),
        o_r: None,
        o_t: None,
    };
    let (start, cost) = ops::measure(|| sys.reader.start());
    out.reader_ops += cost;
    let (sid, c1) = start?;
    let mut to_tag = Some(wire(&mut out.frames, sid, &c1)?);
    while let Some(c) = to_tag.take() {
        let (step, cost) = ops::measure(|| sys.tags[i].step(sid, &c));
        out.tag_ops += cost;
        let step = step?;
        out.o_t = step.output().or(out.o_t);
        let Some((_, a)) = step.reply() else { break };
        let a = wire(&mut out.frames, sid, a)?;
        if drop_final && a.round == final_round {
            sys.reader.timeout()?;
            out.o_r = Some(false);
            break;
        }
        let (step, cost) = ops::measure(|| sys.reader.step(sid, &a));
        out.reader_ops += cost;
        let step: StepOutcome = step?;
        out.o_r = step.output().or(out.o_r);
        if let Some((_, c)) = step.reply() {
            to_tag = Some(wire(&mut out.frames, sid, c)?);
        }
    }
    if out.o_r.is_none() && sys.reader.open_sid() == Some(sid) {
        sys.reader.timeout()?;
        out.o_r = Some(false);
    }
    Ok(out)
}

/// Pushes the frame of `msg` and returns the message decoded back from it.
fn wire(frames: &mut Vec<Frame>, sid: Sid, msg: &Msg) -> Result<Msg> {
    let f = Frame::decode(&Frame::message(sid, msg)?.encode())?;
    let back = f.to_msg()?;
    frames.push(f);
    Ok(back)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SizeTable {
    pub column: Column,
    /// Payload bytes of each round in order.
    pub rounds: Vec<usize>,
    pub reader_record: Vec<(String, usize)>,
    pub tag: Vec<(String, usize)>,
}

impl SizeTable {
    pub fn reader_bytes(&self) -> usize {
        self.reader_record.iter().map(|f| f.1).sum()
    }

    pub fn tag_bytes(&self) -> usize {
        self.tag.iter().map(|f| f.1).sum()
    }

    /// Tag storage without the precomputed nonce pool.
    pub fn tag_key_bytes(&self) -> usize {
        self.tag.iter().filter(|f| f.0 != "pairs").map(|f| f.1).sum()
    }
}

impl fmt::Display for SizeTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "storage and communication ({}), bytes", self.column)?;
        for (j, n) in self.rounds.iter().enumerate() {
            writeln!(f, "  round {}        {n:>5}", j + 1)?;
        }
        writeln!(f, "  reader record  {:>5}  ({})", self.reader_bytes(), fields(&self.reader_record))?;
        write!(f, "  tag            {:>5}  ({})", self.tag_bytes(), fields(&self.tag))
    }
}

fn fields(v: &[(String, usize)]) -> String {
    v.iter().map(|(k, n)| format!("{k} {n}")).collect::<Vec<_>>().join(", ")
}

fn owned(v: Vec<(&'static str, usize)>) -> Vec<(String, usize)> {
    v.into_iter().map(|(k, n)| (k.to_string(), n)).collect()
}

fn sizes_of<P: RoundProtocol>(column: Column, mut sys: System<P>) -> Result<SizeTable> {
    let reader_record = owned(sys.reader.db().records()[0].storage_fields());
    let tag = owned(sys.tags[0].storage());
    let run = relay(&mut sys, 0, false)?;
    if run.o_r != Some(true) {
        return Err(Error::Malformed("measurement session did not accept".into()));
    }
    let rounds = run.frames.iter().map(Frame::content_bytes).collect::<Result<_>>()?;
    Ok(SizeTable {
        column,
        rounds,
        reader_record,
        tag,
    })
}

/// Measures one honest session of a one-tag system under `cfg`'s lengths.
pub fn report_sizes(column: Column, cfg: &Config) -> Result<SizeTable> {
    let mut rng = Rng::from_u64(cfg.seed).fork("report-sizes");
    match column.tag_impl(cfg) {
        Some(imp) => {
            let (sys, _) = mapop_system(cfg.ma_params(), imp, PopMode::Full, 1, &mut rng)?;
            sizes_of(column, sys)
        }
        None => sizes_of(column, ma_system(cfg, 1, &mut rng)?),
    }
}

fn ma_system(cfg: &Config, l: usize, rng: &mut Rng) -> Result<System<Ma>> {
    let ma = Ma::new(cfg.ma_params())?;
    let (records, tags) = ma.setup(l, rng)?;
    Ok(System::new(ma, (), records, tags, rng))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OpsTable {
    pub column: Column,
    pub tags: usize,
    pub tag_sync: OpCounts,
    pub reader_sync: OpCounts,
    /// Reader cost of the first session after the tag ran ahead.
    pub reader_desync: OpCounts,
}

impl fmt::Display for OpsTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "computational overheads ({}, l = {})", self.column, self.tags)?;
        for (name, c) in [
            ("tag", &self.tag_sync),
            ("reader sync", &self.reader_sync),
            ("reader desync", &self.reader_desync),
        ] {
            writeln!(f, "  {name:<14} {:<12} {c}", c.dominant())?;
        }
        Ok(())
    }
}

fn ops_of<P: RoundProtocol>(column: Column, mut sys: System<P>) -> Result<OpsTable> {
    let l = sys.tags.len();
    let sync = relay(&mut sys, 0, false)?;
    if sync.o_r != Some(true) || sync.o_t != Some(true) {
        return Err(Error::Malformed("sync session did not accept".into()));
    }
    // the last tag runs ahead so the reader's fallback search is worst case
    relay(&mut sys, l - 1, true)?;
    let desync = relay(&mut sys, l - 1, false)?;
    if desync.o_r != Some(true) {
        return Err(Error::Malformed("desync session did not recover".into()));
    }
    Ok(OpsTable {
        column,
        tags: l,
        tag_sync: sync.tag_ops,
        reader_sync: sync.reader_ops,
        reader_desync: desync.reader_ops,
    })
}

/// Measures a sync session and a desync recovery in a system of `l` tags.
pub fn report_ops(column: Column, cfg: &Config, l: usize) -> Result<OpsTable> {
    if l == 0 {
        return Err(Error::Config("at least one tag is required".into()));
    }
    let mut rng = Rng::from_u64(cfg.seed).fork("report-ops");
    match column.tag_impl(cfg) {
        Some(imp) => {
            let (sys, _) = mapop_system(cfg.ma_params(), imp, PopMode::Full, l, &mut rng)?;
            ops_of(column, sys)
        }
        None => ops_of(column, ma_system(cfg, l, &mut rng)?),
    }
}
