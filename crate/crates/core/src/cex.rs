//! The stateful counterexample protocol used to separate privacy notions.
//!
//! ```text
//! R → T  c
//! T → R  (r_1, r_2)   r_1 = F_k(c ‖ pad) ⊕ ctr      if st = 0
//!                     r_1 = F_k(c ‖ r_2) ⊕ ctr      if st = 1
//!        then ctr ← ctr + 1, st ← 1
//! R → T  f = F_k(c ‖ ctr ‖ r_2) on a match (post-increment ctr), random otherwise
//! T      st ← 0 iff f verifies
//! ```
//!
//! `c ‖ r_2` is shorter than the PRF domain and is zero-extended to `l_d`.
//! On the pad path `r_2` is never checked, which is what the traceability
//! attack exploits.

use crate::bits::BitString;
use crate::codec::{Codec, FieldReader, FieldWriter};
use crate::error::{Error, Result};
use crate::model::{Database, Embeds, Layout, ReaderAction, Record, RoundProtocol, TagAction, Wrappable};
use crate::primitives::prf::{prf_eval, PrfDescriptor};
use crate::rng::Rng;

/// Lengths: `l_k = l_c = l_r = 256`, `l_pad = 512`, `l_d = 768`.
pub const CEX_BITS: usize = 256;
const PAD_BITS: usize = 512;
const DOMAIN_BITS: usize = 768;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CexTag {
    pub id: BitString,
    pub k: BitString,
    pub ctr: BitString,
    pub st: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CexTagSession {
    pub c: BitString,
    pub r2: BitString,
}

/// `(k, ctr, ID)`; no index, the reader always scans.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CexRecord {
    pub k: BitString,
    pub ctr: BitString,
    pub id: BitString,
}

impl Record for CexRecord {
    fn id(&self) -> &BitString {
        &self.id
    }

    fn storage_fields(&self) -> Vec<(&'static str, usize)> {
        vec![
            ("k", self.k.as_bytes().len()),
            ("ctr", self.ctr.as_bytes().len()),
            ("ID", self.id.as_bytes().len()),
        ]
    }
}

impl Codec for CexRecord {
    fn encode(&self, w: &mut FieldWriter) {
        w.bits(&self.k).bits(&self.ctr).bits(&self.id);
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        Ok(Self {
            k: r.bits()?,
            ctr: r.bits()?,
            id: r.bits()?,
        })
    }
}

impl Embeds<CexRecord> for CexRecord {
    fn inner(&self) -> &CexRecord {
        self
    }

    fn with_inner(&self, inner: CexRecord) -> Self {
        inner
    }
}

impl Codec for CexTag {
    fn encode(&self, w: &mut FieldWriter) {
        w.bits(&self.id).bits(&self.k).bits(&self.ctr).u8(u8::from(self.st));
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        Ok(Self {
            id: r.bits()?,
            k: r.bits()?,
            ctr: r.bits()?,
            st: r.u8()? != 0,
        })
    }
}

/// Which reader branch matched.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CexPath {
    Pad,
    R2,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CexReaderSession {
    pub c: BitString,
    pub path: Option<CexPath>,
}

impl Codec for CexReaderSession {
    fn encode(&self, w: &mut FieldWriter) {
        w.bits(&self.c);
        w.u8(match self.path {
            None => 0,
            Some(CexPath::Pad) => 1,
            Some(CexPath::R2) => 2,
        });
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        let c = r.bits()?;
        let path = match r.u8()? {
            0 => None,
            1 => Some(CexPath::Pad),
            2 => Some(CexPath::R2),
            t => return Err(Error::Malformed(format!("bad cex path {t}"))),
        };
        Ok(Self { c, path })
    }
}

#[derive(Clone, Debug)]
pub struct Cex {
    f: PrfDescriptor,
    layout: Layout,
}

impl Default for Cex {
    fn default() -> Self {
        Self::new()
    }
}

impl Cex {
    pub fn new() -> Self {
        Self {
            f: PrfDescriptor {
                key_bits: CEX_BITS,
                in_bits: DOMAIN_BITS,
                out_bits: CEX_BITS,
            },
            layout: Layout {
                gamma: 1,
                c_spaces: vec![vec![CEX_BITS], vec![CEX_BITS]],
                alpha_spaces: vec![vec![2 * CEX_BITS]],
                reader_c: vec![CEX_BITS, CEX_BITS],
                tag_alpha: vec![2 * CEX_BITS],
                deferred: false,
            },
        }
    }

    pub fn f(&self) -> PrfDescriptor {
        self.f
    }

    /// `F_k(x)` with `x` zero-extended to the domain length.
    pub fn f_eval(&self, k: &BitString, parts: &[&BitString]) -> Result<BitString> {
        let x = BitString::concat_all(parts.iter().copied());
        if x.len() > DOMAIN_BITS {
            return Err(Error::LengthMismatch {
                param: "prf input",
                expected: DOMAIN_BITS,
                actual: x.len(),
            });
        }
        prf_eval(&self.f, k, &x.zero_extend(DOMAIN_BITS))
    }

    fn pad() -> BitString {
        BitString::zeros(PAD_BITS)
    }

    pub fn setup(&self, l: usize, rng: &mut Rng) -> Result<(Vec<CexRecord>, Vec<CexTag>)> {
        if l == 0 {
            return Err(Error::InvalidParams("at least one tag is required".into()));
        }
        let mut records = Vec::with_capacity(l);
        let mut tags = Vec::with_capacity(l);
        for i in 0..l {
            let id = BitString::from_u64(i as u64 + 1, CEX_BITS);
            let k = rng.bits(CEX_BITS);
            let ctr = BitString::from_u64(1, CEX_BITS);
            records.push(CexRecord {
                k: k.clone(),
                ctr: ctr.clone(),
                id: id.clone(),
            });
            tags.push(CexTag { id, k, ctr, st: false });
        }
        Ok((records, tags))
    }

    pub fn tag_respond(&self, tag: &mut CexTag, c: &BitString, rng: &mut Rng) -> Result<(BitString, CexTagSession)> {
        let r2 = rng.bits(CEX_BITS);
        let mask = if tag.st {
            self.f_eval(&tag.k, &[c, &r2])?
        } else {
            self.f_eval(&tag.k, &[c, &Self::pad()])?
        };
        let r1 = mask.xor(&tag.ctr)?;
        tag.ctr = tag.ctr.increment()?;
        tag.st = true;
        Ok((r1.concat(&r2), CexTagSession { c: c.clone(), r2 }))
    }

    /// Reader search; returns the matched position, updated record, `f` and
    /// the branch taken.
    pub fn reader_respond(
        &self,
        db: &Database<impl Embeds<CexRecord>>,
        c: &BitString,
        alpha: &BitString,
    ) -> Result<Option<(usize, CexRecord, BitString, CexPath)>> {
        let parts = alpha.split(&[CEX_BITS, CEX_BITS])?;
        let (r1, r2) = (&parts[0], &parts[1]);
        let pad = Self::pad();
        for (path, tail) in [(CexPath::Pad, &pad), (CexPath::R2, r2)] {
            for (i, rec) in db.records().iter().map(Embeds::inner).enumerate() {
                let ctr = self.f_eval(&rec.k, &[c, tail])?.xor(r1)?;
                if ctr != rec.ctr {
                    continue;
                }
                let Ok(next) = ctr.increment() else { continue };
                let f = self.f_eval(&rec.k, &[c, &next, r2])?;
                let updated = CexRecord {
                    k: rec.k.clone(),
                    ctr: next,
                    id: rec.id.clone(),
                };
                return Ok(Some((i, updated, f, path)));
            }
        }
        Ok(None)
    }

    pub fn tag_finish(&self, tag: &mut CexTag, session: &CexTagSession, f: &BitString) -> Result<bool> {
        let ok = &self.f_eval(&tag.k, &[&session.c, &tag.ctr, &session.r2])? == f;
        if ok {
            tag.st = false;
        }
        Ok(ok)
    }
}

impl Wrappable for Cex {
    fn reader_receive_in<E: Embeds<CexRecord>>(
        &self,
        _: &mut (),
        db: &Database<E>,
        mut session: CexReaderSession,
        _mu: usize,
        alpha: &BitString,
        rng: &mut Rng,
    ) -> Result<ReaderAction<Self>> {
        match self.reader_respond(db, &session.c, alpha)? {
            Some((i, rec, f, path)) => {
                session.path = Some(path);
                Ok(ReaderAction::Accept {
                    msg: Some(f),
                    identified: i,
                    delta: vec![(i, rec)],
                    session,
                })
            }
            None => Ok(ReaderAction::Reject {
                msg: Some(rng.bits(CEX_BITS)),
                session,
            }),
        }
    }
}

impl RoundProtocol for Cex {
    type Record = CexRecord;
    type Tag = CexTag;
    type TagSession = CexTagSession;
    type ReaderSecret = ();
    type ReaderSession = CexReaderSession;

    fn name(&self) -> String {
        "cex".into()
    }

    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn reader_open(&self, _: &mut (), rng: &mut Rng) -> Result<(BitString, CexReaderSession)> {
        let c = rng.bits(CEX_BITS);
        Ok((c.clone(), CexReaderSession { c, path: None }))
    }

    fn reader_receive(
        &self,
        secret: &mut (),
        db: &Database<CexRecord>,
        session: CexReaderSession,
        mu: usize,
        alpha: &BitString,
        rng: &mut Rng,
    ) -> Result<ReaderAction<Self>> {
        self.reader_receive_in(secret, db, session, mu, alpha, rng)
    }

    fn tag_open(&self, tag: &mut CexTag, c: &BitString, rng: &mut Rng) -> Result<(BitString, CexTagSession)> {
        self.tag_respond(tag, c, rng)
    }

    fn tag_receive(
        &self,
        tag: &mut CexTag,
        session: CexTagSession,
        _mu: usize,
        f: &BitString,
        _rng: &mut Rng,
    ) -> Result<TagAction<CexTagSession>> {
        Ok(TagAction::Finish {
            msg: None,
            accept: self.tag_finish(tag, &session, f)?,
            note: None,
        })
    }

    fn expose(&self, tag: &CexTag, session: Option<&CexTagSession>) -> Vec<(String, BitString)> {
        let mut out = vec![
            ("id".into(), tag.id.clone()),
            ("k".into(), tag.k.clone()),
            ("ctr".into(), tag.ctr.clone()),
            ("st".into(), BitString::from_bits(&[tag.st])),
        ];
        if let Some(s) = session {
            out.push(("c".into(), s.c.clone()));
            out.push(("r2".into(), s.r2.clone()));
        }
        out
    }

    fn tag_storage(&self, tag: &CexTag) -> Vec<(&'static str, usize)> {
        vec![("k", tag.k.as_bytes().len()), ("ctr", tag.ctr.as_bytes().len()), ("st", 1)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{run_honest_session, Msg, System};

    fn system(l: usize, seed: u64) -> System<Cex> {
        let mut rng = Rng::from_u64(seed);
        let cex = Cex::new();
        let (records, tags) = cex.setup(l, &mut rng).unwrap();
        System::new(cex, (), records, tags, &mut rng)
    }

    #[test]
    fn pad_path_unmasks_counter() {
        let cex = Cex::new();
        let mut rng = Rng::from_u64(1);
        let (_, mut tags) = cex.setup(1, &mut rng).unwrap();
        let c = rng.bits(256);
        let (a, _) = cex.tag_respond(&mut tags[0], &c, &mut rng).unwrap();
        let r1 = a.slice(0, 256).unwrap();
        let oracle = prf_eval(&cex.f, &tags[0].k, &c.concat(&BitString::zeros(512))).unwrap();
        assert_eq!(r1.xor(&oracle).unwrap(), BitString::from_u64(1, 256));
        assert!(tags[0].st);
    }

    #[test]
    fn state_one_path_mixes_in_r2() {
        let cex = Cex::new();
        let mut rng = Rng::from_u64(2);
        let (_, mut tags) = cex.setup(1, &mut rng).unwrap();
        let c = rng.bits(256);
        cex.tag_respond(&mut tags[0], &c, &mut rng).unwrap();
        let (a, s) = cex.tag_respond(&mut tags[0], &c, &mut rng).unwrap();
        let r1 = a.slice(0, 256).unwrap();
        let input = c.concat(&s.r2).zero_extend(768);
        let oracle = prf_eval(&cex.f, &tags[0].k, &input).unwrap();
        assert_eq!(r1.xor(&oracle).unwrap(), BitString::from_u64(2, 256));
    }

    #[test]
    fn honest_sessions_reset_state() {
        let mut sys = system(3, 3);
        for _ in 0..5 {
            let t = run_honest_session(&mut sys, 2).unwrap();
            assert_eq!((t.o_r, t.o_t), (Some(true), Some(true)));
            assert!(!sys.tags[2].state().st);
        }
    }

    #[test]
    fn wrong_or_stale_f_keeps_state_one() {
        let mut sys = system(1, 4);
        let old = run_honest_session(&mut sys, 0).unwrap();
        let (sid, c) = sys.reader.start().unwrap();
        sys.tags[0].step(sid, &c).unwrap();
        let out = sys.tags[0].step(sid, &old.messages[2]).unwrap();
        assert_eq!(out.output(), Some(false));
        assert!(sys.tags[0].state().st);
    }

    #[test]
    fn tampered_r2_accepted_only_in_state_zero() {
        let mut rng = Rng::from_u64(50);
        for trial in 0..40 {
            let mut sys = system(2, 100 + trial);
            if rng.coin() {
                // reader accepts but f never reaches the tag: st stays 1, counters agree
                let (sid, c) = sys.reader.start().unwrap();
                let a = sys.tags[0].step(sid, &c).unwrap().reply().unwrap().1.clone();
                assert_eq!(sys.reader.step(sid, &a).unwrap().output(), Some(true));
            }
            let st = sys.tags[0].state().st;
            let (sid, c) = sys.reader.start().unwrap();
            let a = sys.tags[0].step(sid, &c).unwrap().reply().unwrap().1.clone();
            let bad = Msg::alpha(1, a.body.with_flipped_bit(256 + rng.below(256)));
            let out = sys.reader.step(sid, &bad).unwrap();
            assert_eq!(out.output(), Some(!st), "trial {trial}");
        }
    }

    #[test]
    fn reject_sends_random_f() {
        let mut sys = system(1, 6);
        let (sid, _) = sys.reader.start().unwrap();
        let out = sys.reader.step(sid, &Msg::alpha(1, BitString::zeros(512))).unwrap();
        assert_eq!(out.output(), Some(false));
        assert_eq!(out.reply().unwrap().1.body.len(), 256);
    }
}
