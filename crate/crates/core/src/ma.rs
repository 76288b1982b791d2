//! The three-round mutual authentication protocol (`γ = 1`).
//!
//! ```text
//! R → T  c_1 = r_R
//! T → R  α_1 = (α_11, α_12, α_13)
//!        α_11 = F_k(ctr ‖ pad), α_12 = r_T, α_13 = F_k(c_1 ‖ α_11 ‖ α_12) ⊕ ctr
//!        then ctr ← ctr + 1
//! R → T  c_2 = F_k(r_R ‖ ctr ‖ α_12)      with the reader's updated ctr
//! ```
//!
//! The reader first looks `α_11` up in its index (synchronized tags) and
//! falls back to a linear scan that recomputes the index from the counter
//! recovered out of `α_13` (tags that ran ahead after lost messages).

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::codec::{Codec, FieldReader, FieldWriter};
use crate::error::{Error, Result};
use crate::model::{Database, Embeds, Layout, ReaderAction, Record, RoundProtocol, TagAction, Wrappable};
use crate::primitives::prf::{prf_eval, PrfDescriptor};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaParams {
    pub l_k: usize,
    pub l_d: usize,
    pub l_p: usize,
    pub l_v: usize,
    pub l_r: usize,
    pub l_u: usize,
    /// `l_p` zero bits unless configured otherwise.
    #[serde(skip)]
    pub pad: Option<BitString>,
}

impl Default for MaParams {
    fn default() -> Self {
        Self {
            l_k: 256,
            l_d: 768,
            l_p: 512,
            l_v: 256,
            l_r: 256,
            l_u: 256,
            pad: None,
        }
        .with_zero_pad()
    }
}

impl MaParams {
    pub fn with_zero_pad(mut self) -> Self {
        self.pad = Some(BitString::zeros(self.l_p));
        self
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.l_k, self.l_d, self.l_p, self.l_v, self.l_r, self.l_u];
        if all.iter().any(|&l| l == 0 || l % 8 != 0) {
            return Err(Error::InvalidParams(
                "MA lengths must be positive multiples of 8".into(),
            ));
        }
        if self.l_r + self.l_p != self.l_d {
            return Err(Error::InvalidParams(format!(
                "l_r + l_p = {} but l_d = {}",
                self.l_r + self.l_p,
                self.l_d
            )));
        }
        if self.l_u + self.l_r + self.l_v != self.l_d {
            return Err(Error::InvalidParams(format!(
                "l_u + l_r + l_v = {} but l_d = {}",
                self.l_u + self.l_r + self.l_v,
                self.l_d
            )));
        }
        match &self.pad {
            Some(p) if p.len() != self.l_p => Err(Error::LengthMismatch {
                param: "pad",
                expected: self.l_p,
                actual: p.len(),
            }),
            _ => Ok(()),
        }
    }

    pub fn pad(&self) -> BitString {
        self.pad.clone().unwrap_or_else(|| BitString::zeros(self.l_p))
    }

    pub fn f(&self) -> PrfDescriptor {
        PrfDescriptor {
            key_bits: self.l_k,
            in_bits: self.l_d,
            out_bits: self.l_r,
        }
    }

    pub fn alpha_bits(&self) -> usize {
        self.l_r + self.l_v + self.l_r
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaTag {
    pub id: BitString,
    pub k: BitString,
    pub ctr: BitString,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaTagSession {
    pub c1: BitString,
    pub r_t: BitString,
}

/// `rcd_i = (I_i, k_i, ctr_i, ID_i)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaRecord {
    pub index: BitString,
    pub k: BitString,
    pub ctr: BitString,
    pub id: BitString,
}

impl Record for MaRecord {
    fn id(&self) -> &BitString {
        &self.id
    }

    fn index_key(&self) -> Option<&BitString> {
        Some(&self.index)
    }

    fn storage_fields(&self) -> Vec<(&'static str, usize)> {
        vec![
            ("I", self.index.as_bytes().len()),
            ("k", self.k.as_bytes().len()),
            ("ctr", self.ctr.as_bytes().len()),
            ("ID", self.id.as_bytes().len()),
        ]
    }
}

impl Codec for MaRecord {
    fn encode(&self, w: &mut FieldWriter) {
        w.bits(&self.index).bits(&self.k).bits(&self.ctr).bits(&self.id);
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        Ok(Self {
            index: r.bits()?,
            k: r.bits()?,
            ctr: r.bits()?,
            id: r.bits()?,
        })
    }
}

impl Codec for MaTag {
    fn encode(&self, w: &mut FieldWriter) {
        w.bits(&self.id).bits(&self.k).bits(&self.ctr);
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        Ok(Self {
            id: r.bits()?,
            k: r.bits()?,
            ctr: r.bits()?,
        })
    }
}

/// Which search step identified the tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuthStep {
    Sync,
    Desync,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaReaderSession {
    pub r_r: BitString,
    pub step: Option<AuthStep>,
}

/// Outcome of the reader's search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaAccept {
    pub index: usize,
    pub record: MaRecord,
    pub c2: BitString,
    pub step: AuthStep,
}

#[derive(Clone, Debug)]
pub struct Ma {
    params: MaParams,
    f: PrfDescriptor,
    layout: Layout,
}

impl Ma {
    pub fn new(params: MaParams) -> Result<Self> {
        params.validate()?;
        let f = params.f();
        let layout = Layout {
            gamma: 1,
            c_spaces: vec![vec![params.l_u], vec![params.l_r]],
            alpha_spaces: vec![vec![params.alpha_bits()]],
            reader_c: vec![params.l_u, params.l_r],
            tag_alpha: vec![params.alpha_bits()],
            deferred: false,
        };
        Ok(Self { params, f, layout })
    }

    pub fn params(&self) -> &MaParams {
        &self.params
    }

    fn f_eval(&self, k: &BitString, parts: &[&BitString]) -> Result<BitString> {
        prf_eval(&self.f, k, &BitString::concat_all(parts.iter().copied()))
    }

    pub fn index_for(&self, k: &BitString, ctr: &BitString) -> Result<BitString> {
        self.f_eval(k, &[ctr, &self.params.pad()])
    }

    /// Initial tags and records; tag `i` gets `ID = i + 1` as an `l_r`-bit
    /// big-endian value, so ascending position is ascending ID.
    pub fn setup(&self, l: usize, rng: &mut Rng) -> Result<(Vec<MaRecord>, Vec<MaTag>)> {
        if l == 0 {
            return Err(Error::InvalidParams("at least one tag is required".into()));
        }
        let mut records = Vec::with_capacity(l);
        let mut tags = Vec::with_capacity(l);
        for i in 0..l {
            let id = BitString::from_u64(i as u64 + 1, 256);
            let k = rng.bits(self.params.l_k);
            let ctr = BitString::from_u64(1, self.params.l_r);
            let index = self.index_for(&k, &ctr)?;
            records.push(MaRecord {
                index,
                k: k.clone(),
                ctr: ctr.clone(),
                id: id.clone(),
            });
            tags.push(MaTag { id, k, ctr });
        }
        Ok((records, tags))
    }

    /// Tag reply to `c_1`; advances the tag counter.
    pub fn tag_respond(&self, tag: &mut MaTag, c1: &BitString, rng: &mut Rng) -> Result<(BitString, MaTagSession)> {
        if c1.len() != self.params.l_u {
            return Err(Error::LengthMismatch {
                param: "c_1",
                expected: self.params.l_u,
                actual: c1.len(),
            });
        }
        let next = tag.ctr.increment()?;
        let r_t = rng.bits(self.params.l_v);
        let a11 = self.index_for(&tag.k, &tag.ctr)?;
        let a13 = self.f_eval(&tag.k, &[c1, &a11, &r_t])?.xor(&tag.ctr)?;
        tag.ctr = next;
        let alpha = BitString::concat_all([&a11, &r_t, &a13]);
        Ok((
            alpha,
            MaTagSession {
                c1: c1.clone(),
                r_t,
            },
        ))
    }

    /// Tag check of `c_2` against its post-increment counter.
    pub fn tag_verify(&self, tag: &MaTag, session: &MaTagSession, c2: &BitString) -> Result<bool> {
        let expect = self.f_eval(&tag.k, &[&session.c1, &tag.ctr, &session.r_t])?;
        Ok(&expect == c2)
    }

    /// Reader search over `db` for `α_1` answering `c_1`.
    pub fn reader_auth(
        &self,
        db: &Database<impl Embeds<MaRecord>>,
        c1: &BitString,
        alpha: &BitString,
    ) -> Result<Option<MaAccept>> {
        let p = &self.params;
        if alpha.len() != p.alpha_bits() || c1.len() != p.l_u {
            return Ok(None);
        }
        let parts = alpha.split(&[p.l_r, p.l_v, p.l_r])?;
        let (a11, a12, a13) = (&parts[0], &parts[1], &parts[2]);

        // Step 1: synchronized tag, found through the index.
        if let Some(i) = db.lookup(a11) {
            let rec = db.get(i).expect("index points at a record").inner();
            let ctr = self.f_eval(&rec.k, &[c1, a11, a12])?.xor(a13)?;
            if ctr == rec.ctr {
                if let Ok(next) = ctr.increment() {
                    return self.accept(i, rec, next, c1, a12, AuthStep::Sync).map(Some);
                }
            }
        }

        // Step 2: linear scan in ascending ID order.
        for (i, r) in db.records().iter().enumerate() {
            let rec = r.inner();
            let ctr = self.f_eval(&rec.k, &[c1, a11, a12])?.xor(a13)?;
            if &self.index_for(&rec.k, &ctr)? == a11 {
                if let Ok(next) = ctr.increment() {
                    return self.accept(i, rec, next, c1, a12, AuthStep::Desync).map(Some);
                }
            }
        }
        Ok(None)
    }

    fn accept(
        &self,
        i: usize,
        rec: &MaRecord,
        ctr: BitString,
        c1: &BitString,
        a12: &BitString,
        step: AuthStep,
    ) -> Result<MaAccept> {
        let index = self.index_for(&rec.k, &ctr)?;
        // Step 3
        let c2 = self.f_eval(&rec.k, &[c1, &ctr, a12])?;
        Ok(MaAccept {
            index: i,
            record: MaRecord {
                index,
                k: rec.k.clone(),
                ctr,
                id: rec.id.clone(),
            },
            c2,
            step,
        })
    }
}

impl Embeds<MaRecord> for MaRecord {
    fn inner(&self) -> &MaRecord {
        self
    }

    fn with_inner(&self, inner: MaRecord) -> Self {
        inner
    }
}

impl Codec for MaReaderSession {
    fn encode(&self, w: &mut FieldWriter) {
        w.bits(&self.r_r);
        w.u8(match self.step {
            None => 0,
            Some(AuthStep::Sync) => 1,
            Some(AuthStep::Desync) => 2,
        });
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        let r_r = r.bits()?;
        let step = match r.u8()? {
            0 => None,
            1 => Some(AuthStep::Sync),
            2 => Some(AuthStep::Desync),
            t => return Err(Error::Malformed(format!("bad auth step {t}"))),
        };
        Ok(Self { r_r, step })
    }
}

impl Wrappable for Ma {
    fn reader_receive_in<E: Embeds<MaRecord>>(
        &self,
        _: &mut (),
        db: &Database<E>,
        mut session: MaReaderSession,
        _mu: usize,
        alpha: &BitString,
        _rng: &mut Rng,
    ) -> Result<ReaderAction<Self>> {
        match self.reader_auth(db, &session.r_r, alpha)? {
            Some(acc) => {
                session.step = Some(acc.step);
                Ok(ReaderAction::Accept {
                    msg: Some(acc.c2),
                    identified: acc.index,
                    delta: vec![(acc.index, acc.record)],
                    session,
                })
            }
            None => Ok(ReaderAction::Reject { msg: None, session }),
        }
    }
}

impl RoundProtocol for Ma {
    type Record = MaRecord;
    type Tag = MaTag;
    type TagSession = MaTagSession;
    type ReaderSecret = ();
    type ReaderSession = MaReaderSession;

    fn name(&self) -> String {
        "ma".into()
    }

    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn reader_open(&self, _: &mut (), rng: &mut Rng) -> Result<(BitString, MaReaderSession)> {
        let r_r = rng.bits(self.params.l_u);
        Ok((r_r.clone(), MaReaderSession { r_r, step: None }))
    }

    fn reader_receive(
        &self,
        secret: &mut (),
        db: &Database<MaRecord>,
        session: MaReaderSession,
        mu: usize,
        alpha: &BitString,
        rng: &mut Rng,
    ) -> Result<ReaderAction<Self>> {
        self.reader_receive_in(secret, db, session, mu, alpha, rng)
    }

    fn tag_open(&self, tag: &mut MaTag, c1: &BitString, rng: &mut Rng) -> Result<(BitString, MaTagSession)> {
        self.tag_respond(tag, c1, rng)
    }

    fn tag_receive(
        &self,
        tag: &mut MaTag,
        session: MaTagSession,
        _mu: usize,
        c: &BitString,
        _rng: &mut Rng,
    ) -> Result<TagAction<MaTagSession>> {
        Ok(TagAction::Finish {
            msg: None,
            accept: self.tag_verify(tag, &session, c)?,
            note: None,
        })
    }

    fn expose(&self, tag: &MaTag, session: Option<&MaTagSession>) -> Vec<(String, BitString)> {
        let mut out = vec![
            ("id".into(), tag.id.clone()),
            ("k".into(), tag.k.clone()),
            ("ctr".into(), tag.ctr.clone()),
        ];
        if let Some(s) = session {
            out.push(("c1".into(), s.c1.clone()));
            out.push(("r_t".into(), s.r_t.clone()));
        }
        out
    }

    fn tag_storage(&self, tag: &MaTag) -> Vec<(&'static str, usize)> {
        vec![("k", tag.k.as_bytes().len()), ("ctr", tag.ctr.as_bytes().len())]
    }
}
