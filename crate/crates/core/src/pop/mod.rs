//! The proof-of-possession transform `π → π*`.
//!
//! The first `2γ` messages are the base protocol's. Where the base reader
//! would send `c_{γ+1}` and stop, the wrapped reader sends
//!
//! ```text
//! c* = c_{γ+1} ‖ c' ‖ c''     c'  = H(S_skR(r))
//!                             c'' = G_{k'}(H(c_1 ‖ α_1 ‖ … ‖ c_{γ+1}) ‖ c')
//! ```
//!
//! and holds its output and database update back until the tag answers
//!
//! ```text
//! α* = α' ‖ α''               α'  = G_{k'}(c'') ⊕ S_skT(c')
//!                             α'' = G_{k'}(S_skT(c'))
//! ```
//!
//! `G` appears with three different length contracts: binding
//! (`2l_g → l_g`), masking (`l_g → |σ|`) and tagging (`|σ| → l_g`).
//!
//! In [`PopMode::Plain`] the reader sends the bare `c_{γ+1}`; tags accept
//! either shape and tell them apart by length.

mod cred;
mod mapop;
mod piprime;

pub use cred::{cred_veri, Credential, KeyDirectory, CREDENTIAL_VERSION};
pub use mapop::{mapop_system, Impl, MaPop, PopSetup, READER_ID};
pub use piprime::{piprime_run, PiPrimeReader, PiPrimeRun, PiPrimeTag};

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::codec::{Codec, FieldReader, FieldWriter};
use crate::error::{Error, Result};
use crate::model::{
    Database, Embeds, Layout, ReaderAction, Reader, Record, RoundProtocol, TagAction, Wrappable,
};
use crate::primitives::prf::{hash, prf_eval, PrfDescriptor};
use crate::primitives::sig::{SchemeKind, Signature, SigningKey, VerifyingKey};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PopMode {
    /// Base protocol only; no credential.
    Plain,
    /// Full `π*` with the deferred fourth message.
    Full,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopParams {
    pub l_k: usize,
    pub l_g: usize,
    pub reader_scheme: SchemeKind,
    pub tag_scheme: SchemeKind,
    pub mode: PopMode,
}

impl PopParams {
    pub fn new(tag_scheme: SchemeKind) -> Self {
        Self {
            l_k: 256,
            l_g: 256,
            reader_scheme: SchemeKind::FullTime,
            tag_scheme,
            mode: PopMode::Full,
        }
    }
}

/// The three length contracts of `G`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GFamily {
    pub bind: PrfDescriptor,
    pub mask: PrfDescriptor,
    pub tag: PrfDescriptor,
}

impl GFamily {
    pub fn new(l_k: usize, l_g: usize, sig_bits: usize) -> Result<Self> {
        Ok(Self {
            bind: PrfDescriptor::new(l_k, 2 * l_g, l_g)?,
            mask: PrfDescriptor::new(l_k, l_g, sig_bits)?,
            tag: PrfDescriptor::new(l_k, sig_bits, l_g)?,
        })
    }

    /// `G_{k'}(H(trs) ‖ c')`.
    pub fn bind(&self, k: &BitString, trs: &BitString, c_prime: &BitString) -> Result<BitString> {
        prf_eval(&self.bind, k, &hash(trs).concat(c_prime))
    }

    pub fn mask(&self, k: &BitString, c_dprime: &BitString) -> Result<BitString> {
        prf_eval(&self.mask, k, c_dprime)
    }

    pub fn tag(&self, k: &BitString, sigma: &BitString) -> Result<BitString> {
        prf_eval(&self.tag, k, sigma)
    }
}

/// `rcd* = (rcd, k', PK_T)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PopRecord<R> {
    pub base: R,
    pub k2: BitString,
    pub pk: VerifyingKey,
}

impl<R: Record> Record for PopRecord<R> {
    fn id(&self) -> &BitString {
        self.base.id()
    }

    fn index_key(&self) -> Option<&BitString> {
        self.base.index_key()
    }

    fn storage_fields(&self) -> Vec<(&'static str, usize)> {
        let mut v = self.base.storage_fields();
        v.push(("k'", self.k2.as_bytes().len()));
        v.push(("PK", self.pk.nominal_len()));
        v
    }
}

impl<R: Record> Embeds<R> for PopRecord<R> {
    fn inner(&self) -> &R {
        &self.base
    }

    fn with_inner(&self, inner: R) -> Self {
        Self {
            base: inner,
            k2: self.k2.clone(),
            pk: self.pk.clone(),
        }
    }
}

impl<R: Codec> Codec for PopRecord<R> {
    fn encode(&self, w: &mut FieldWriter) {
        self.base.encode(w);
        w.bits(&self.k2);
        self.pk.encode(w);
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        Ok(Self {
            base: R::decode(r)?,
            k2: r.bits()?,
            pk: VerifyingKey::decode(r)?,
        })
    }
}

/// `k* = (k, k', sk_T)` plus the tag's ID.
#[derive(Clone, Debug)]
pub struct PopTag<T> {
    pub base: T,
    pub id: BitString,
    pub k2: BitString,
    pub sk: SigningKey,
}

impl<T: Codec> Codec for PopTag<T> {
    fn encode(&self, w: &mut FieldWriter) {
        self.base.encode(w);
        w.bits(&self.id).bits(&self.k2);
        self.sk.encode(w);
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        Ok(Self {
            base: T::decode(r)?,
            id: r.bits()?,
            k2: r.bits()?,
            sk: SigningKey::decode(r)?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct PopTagSession<S> {
    pub base: S,
    /// Messages of the session so far, in round order.
    pub trs: Vec<BitString>,
}

/// `k*_R = (k_R, sk_R)` plus the reader's ID and an optional fixed `r`.
#[derive(Clone, Debug)]
pub struct PopReaderSecret<S> {
    pub base: S,
    pub id: BitString,
    pub sk: SigningKey,
    /// Signed in place of a fresh random `r` when set.
    pub payload: Option<BitString>,
}

/// Reader work held back until `α*` arrives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Staged<R> {
    pub identified: usize,
    pub delta: Vec<(usize, R)>,
    pub r: BitString,
    pub c_prime: BitString,
    pub c_dprime: BitString,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PopReaderSession<S, R> {
    pub base: S,
    pub trs: Vec<BitString>,
    pub staged: Option<Staged<R>>,
}

impl<S: Codec, R: Codec> Codec for PopReaderSession<S, R> {
    fn encode(&self, w: &mut FieldWriter) {
        self.base.encode(w);
        self.trs.encode(w);
        match &self.staged {
            None => {
                w.u8(0);
            }
            Some(st) => {
                w.u8(1);
                st.identified.encode(w);
                st.delta.encode(w);
                w.bits(&st.r).bits(&st.c_prime).bits(&st.c_dprime);
            }
        }
    }

    fn decode(r: &mut FieldReader<'_>) -> Result<Self> {
        let base = S::decode(r)?;
        let trs = Vec::decode(r)?;
        let staged = match r.u8()? {
            0 => None,
            1 => Some(Staged {
                identified: usize::decode(r)?,
                delta: Vec::decode(r)?,
                r: r.bits()?,
                c_prime: r.bits()?,
                c_dprime: r.bits()?,
            }),
            t => return Err(Error::Malformed(format!("bad staged tag {t}"))),
        };
        Ok(Self { base, trs, staged })
    }
}

#[derive(Clone, Debug)]
pub struct Pop<B> {
    base: B,
    params: PopParams,
    g: GFamily,
    layout: Layout,
    /// Length of the base protocol's `c_{γ+1}`.
    base_final: usize,
}

type RecordOf<B> = PopRecord<<B as RoundProtocol>::Record>;

impl<B: Wrappable> Pop<B> {
    pub fn new(base: B, params: PopParams) -> Result<Self> {
        if params.reader_scheme != SchemeKind::FullTime {
            // CredGen re-signs r, which needs a deterministic signer
            return Err(Error::InvalidParams(
                "the reader must use the full-time signature scheme".into(),
            ));
        }
        if params.l_g == 0 || params.l_g % 8 != 0 || params.l_k == 0 {
            return Err(Error::InvalidParams("l_g and l_k must be positive multiples of 8".into()));
        }
        let sig_bits = params.tag_scheme.sig_len_bits();
        let g = GFamily::new(params.l_k, params.l_g, sig_bits)?;
        let bl = base.layout().clone();
        let gamma = bl.gamma;
        if bl.deferred || bl.c_spaces.len() != gamma + 1 || bl.reader_c.len() != gamma + 1 {
            return Err(Error::InvalidParams(
                "the base protocol must end with a reader message c_{γ+1}".into(),
            ));
        }
        let base_final = bl.reader_c[gamma];
        let full = base_final + 2 * params.l_g;
        let mut layout = bl;
        layout.c_spaces[gamma] = vec![base_final, full];
        if params.mode == PopMode::Full {
            layout.reader_c[gamma] = full;
            layout.alpha_spaces.push(vec![sig_bits + params.l_g]);
            layout.tag_alpha.push(sig_bits + params.l_g);
            layout.deferred = true;
        }
        Ok(Self {
            base,
            params,
            g,
            layout,
            base_final,
        })
    }

    pub fn base(&self) -> &B {
        &self.base
    }

    pub fn params(&self) -> &PopParams {
        &self.params
    }

    pub fn g(&self) -> &GFamily {
        &self.g
    }

    /// Same keys and base protocol, other mode.
    pub fn with_mode(&self, mode: PopMode) -> Result<Self>
    where
        B: Clone,
    {
        Self::new(
            self.base.clone(),
            PopParams {
                mode,
                ..self.params.clone()
            },
        )
    }

    fn gamma(&self) -> usize {
        self.layout.gamma
    }

    /// Extends base setup output with `k'` and signing keys. Records and
    /// tags must be in the same order.
    pub fn setup(
        &self,
        records: Vec<B::Record>,
        tags: Vec<B::Tag>,
        base_secret: B::ReaderSecret,
        reader_id: BitString,
        rng: &mut Rng,
    ) -> Result<PopSetup<B>> {
        if records.len() != tags.len() {
            return Err(Error::InvalidParams("records and tags differ in number".into()));
        }
        let (pk_r, sk_r) = crate::primitives::sig::sig_keygen(self.params.reader_scheme, rng)?;
        let mut directory = KeyDirectory::new(reader_id.clone(), pk_r);
        let mut pop_records = Vec::with_capacity(records.len());
        let mut pop_tags = Vec::with_capacity(tags.len());
        for (rec, tag) in records.into_iter().zip(tags) {
            let k2 = rng.bits(self.params.l_k);
            let (pk, sk) = crate::primitives::sig::sig_keygen(self.params.tag_scheme, rng)?;
            let id = rec.id().clone();
            directory.add_tag(id.clone(), pk.clone());
            pop_records.push(PopRecord {
                base: rec,
                k2: k2.clone(),
                pk,
            });
            pop_tags.push(PopTag {
                base: tag,
                id,
                k2,
                sk,
            });
        }
        Ok(PopSetup {
            records: pop_records,
            tags: pop_tags,
            secret: PopReaderSecret {
                base: base_secret,
                id: reader_id,
                sk: sk_r,
                payload: None,
            },
            directory,
        })
    }

    fn stage(
        &self,
        secret: &mut PopReaderSecret<B::ReaderSecret>,
        rec: &RecordOf<B>,
        trs: &[BitString],
        c: &BitString,
        rng: &mut Rng,
    ) -> Result<(BitString, BitString, BitString)> {
        let r = match &secret.payload {
            Some(p) => p.clone(),
            None => rng.bits(self.params.l_g),
        };
        let sig_r = secret.sk.sign(&r)?;
        let c_prime = hash(sig_r.bits());
        let transcript = BitString::concat_all(trs.iter().chain(std::iter::once(c)));
        let c_dprime = self.g.bind(&rec.k2, &transcript, &c_prime)?;
        Ok((r, c_prime, c_dprime))
    }

    fn finish_reader(
        &self,
        db: &Database<RecordOf<B>>,
        session: PopReaderSession<B::ReaderSession, RecordOf<B>>,
        alpha: &BitString,
    ) -> Result<ReaderAction<Self>> {
        let Some(st) = session.staged.clone() else {
            return Ok(ReaderAction::Reject { msg: None, session });
        };
        let rec = db.get(st.identified).ok_or(Error::UnknownTag(st.identified))?;
        let sig_bits = rec.pk.sig_len_bits();
        if alpha.len() != sig_bits + self.params.l_g {
            return Ok(ReaderAction::Reject { msg: None, session });
        }
        let parts = alpha.split(&[sig_bits, self.params.l_g])?;
        let sigma = parts[0].xor(&self.g.mask(&rec.k2, &st.c_dprime)?)?;
        let ok = rec
            .pk
            .verify(&st.c_prime, &Signature::from_bits(sigma.clone()))
            && self.g.tag(&rec.k2, &sigma)? == parts[1];
        Ok(if ok {
            ReaderAction::Accept {
                msg: None,
                identified: st.identified,
                delta: st.delta,
                session,
            }
        } else {
            ReaderAction::Reject { msg: None, session }
        })
    }

    /// `CredGen` over session `j ≥ 1` of `reader`: `⊥` (`None`) unless that
    /// session ran in full mode and ended with `o_R = 1`.
    pub fn cred_gen(&self, reader: &Reader<Self>, j: usize) -> Result<Option<Credential>> {
        let rec = reader.session(j)?;
        if !rec.output {
            return Ok(None);
        }
        let (Some(i), Some(state)) = (rec.identified, rec.state.as_ref()) else {
            return Ok(None);
        };
        let Some(st) = &state.staged else {
            return Ok(None);
        };
        let Some(alpha) = rec.transcript.get(self.layout.final_tag_round()) else {
            return Ok(None);
        };
        // the session ran against DB^{j-1}
        let tag_rec = reader.record_at(j - 1, i)?;
        let sig_bits = tag_rec.pk.sig_len_bits();
        let alpha1 = alpha.slice(0, sig_bits)?;
        let cred3 = alpha1.xor(&self.g.mask(&tag_rec.k2, &st.c_dprime)?)?;
        let mut sk_r = reader.secret().sk.clone();
        let cred2 = sk_r.sign(&st.r)?;
        Ok(Some(Credential {
            reader_id: reader.secret().id.clone(),
            tag_id: tag_rec.id().clone(),
            cred1: st.r.clone(),
            cred2,
            cred3: Signature::from_bits(cred3),
        }))
    }
}

impl<B: Wrappable> RoundProtocol for Pop<B> {
    type Record = RecordOf<B>;
    type Tag = PopTag<B::Tag>;
    type TagSession = PopTagSession<B::TagSession>;
    type ReaderSecret = PopReaderSecret<B::ReaderSecret>;
    type ReaderSession = PopReaderSession<B::ReaderSession, RecordOf<B>>;

    fn name(&self) -> String {
        format!("{}pop", self.base.name())
    }

    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn reader_open(
        &self,
        secret: &mut Self::ReaderSecret,
        rng: &mut Rng,
    ) -> Result<(BitString, Self::ReaderSession)> {
        let (c1, base) = self.base.reader_open(&mut secret.base, rng)?;
        Ok((
            c1.clone(),
            PopReaderSession {
                base,
                trs: vec![c1],
                staged: None,
            },
        ))
    }

    fn reader_receive(
        &self,
        secret: &mut Self::ReaderSecret,
        db: &Database<Self::Record>,
        mut session: Self::ReaderSession,
        mu: usize,
        alpha: &BitString,
        rng: &mut Rng,
    ) -> Result<ReaderAction<Self>> {
        if mu > self.gamma() {
            return self.finish_reader(db, session, alpha);
        }
        session.trs.push(alpha.clone());
        let action =
            self.base
                .reader_receive_in(&mut secret.base, db, session.base.clone(), mu, alpha, rng)?;
        match action {
            ReaderAction::Reply { msg, session: b } => {
                session.base = b;
                session.trs.push(msg.clone());
                Ok(ReaderAction::Reply { msg, session })
            }
            ReaderAction::Reject { msg, session: b } => {
                session.base = b;
                Ok(ReaderAction::Reject { msg, session })
            }
            ReaderAction::Accept {
                msg,
                identified,
                delta,
                session: b,
            } => {
                session.base = b;
                let rec = db.get(identified).ok_or(Error::UnknownTag(identified))?;
                let delta: Vec<_> = delta
                    .into_iter()
                    .map(|(i, r)| {
                        let outer = db.get(i).ok_or(Error::UnknownTag(i))?;
                        Ok((i, outer.with_inner(r)))
                    })
                    .collect::<Result<_>>()?;
                let c = msg.unwrap_or_default();
                if self.params.mode == PopMode::Plain {
                    return Ok(ReaderAction::Accept {
                        msg: Some(c),
                        identified,
                        delta,
                        session,
                    });
                }
                let (r, c_prime, c_dprime) = self.stage(secret, rec, &session.trs, &c, rng)?;
                let c_star = BitString::concat_all([&c, &c_prime, &c_dprime]);
                session.trs.push(c_star.clone());
                session.staged = Some(Staged {
                    identified,
                    delta,
                    r,
                    c_prime,
                    c_dprime,
                });
                Ok(ReaderAction::Reply {
                    msg: c_star,
                    session,
                })
            }
        }
    }

    fn tag_open(
        &self,
        tag: &mut Self::Tag,
        c1: &BitString,
        rng: &mut Rng,
    ) -> Result<(BitString, Self::TagSession)> {
        let (a, base) = self.base.tag_open(&mut tag.base, c1, rng)?;
        Ok((
            a.clone(),
            PopTagSession {
                base,
                trs: vec![c1.clone(), a],
            },
        ))
    }

    fn tag_receive(
        &self,
        tag: &mut Self::Tag,
        mut session: Self::TagSession,
        mu: usize,
        c: &BitString,
        rng: &mut Rng,
    ) -> Result<TagAction<Self::TagSession>> {
        let full_len = self.base_final + 2 * self.params.l_g;
        if mu <= self.gamma() || c.len() != full_len {
            // rounds before c_{γ+1}, or a plain-mode c_{γ+1}
            let action = self
                .base
                .tag_receive(&mut tag.base, session.base.clone(), mu, c, rng)?;
            return Ok(match action {
                TagAction::Reply { msg, session: b } => {
                    session.trs.push(c.clone());
                    session.trs.push(msg.clone());
                    session.base = b;
                    TagAction::Reply { msg, session }
                }
                TagAction::Ignore { session: b } => {
                    session.base = b;
                    TagAction::Ignore { session }
                }
                TagAction::Finish { msg, accept, note } => TagAction::Finish { msg, accept, note },
            });
        }
        let parts = c.split(&[self.base_final, self.params.l_g, self.params.l_g])?;
        let (c_base, c_prime, c_dprime) = (&parts[0], &parts[1], &parts[2]);
        let base_ok = match self
            .base
            .tag_receive(&mut tag.base, session.base.clone(), mu, c_base, rng)?
        {
            TagAction::Finish { accept, .. } => accept,
            _ => false,
        };
        let transcript = BitString::concat_all(session.trs.iter().chain(std::iter::once(c_base)));
        if !base_ok || &self.g.bind(&tag.k2, &transcript, c_prime)? != c_dprime {
            return Ok(TagAction::Finish {
                msg: None,
                accept: false,
                note: None,
            });
        }
        let sigma = match tag.sk.sign(c_prime) {
            Ok(s) => s.into_bits(),
            Err(e) => {
                return Ok(TagAction::Finish {
                    msg: None,
                    accept: false,
                    note: Some(e.to_string()),
                })
            }
        };
        let a1 = self.g.mask(&tag.k2, c_dprime)?.xor(&sigma)?;
        let a2 = self.g.tag(&tag.k2, &sigma)?;
        Ok(TagAction::Finish {
            msg: Some(a1.concat(&a2)),
            accept: true,
            note: None,
        })
    }

    fn tag_key_update(&self, tag: &mut Self::Tag) {
        self.base.tag_key_update(&mut tag.base);
    }

    fn expose(
        &self,
        tag: &Self::Tag,
        session: Option<&Self::TagSession>,
    ) -> Vec<(String, BitString)> {
        let mut out = self.base.expose(&tag.base, session.map(|s| &s.base));
        out.push(("k'".into(), tag.k2.clone()));
        out.push(("sk".into(), BitString::from_bytes(*tag.sk.seed())));
        if let Some(s) = session {
            out.push(("trs".into(), BitString::concat_all(&s.trs)));
        }
        out
    }

    fn tag_storage(&self, tag: &Self::Tag) -> Vec<(&'static str, usize)> {
        let mut v = self.base.tag_storage(&tag.base);
        v.push(("k'", tag.k2.as_bytes().len()));
        v.push(("sk", tag.sk.seed().len()));
        if let SchemeKind::Precomputed { pool } = tag.sk.kind() {
            // (r, rP) pairs
            v.push(("pairs", 64 * pool as usize));
        }
        v
    }
}
