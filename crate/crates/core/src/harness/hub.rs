//! The oracle layer `O1'…O5'` over a live system, with the blinded worlds
//! used in the guess stage when `b = 0`.

use std::collections::{BTreeSet, HashMap};

use super::budget::{AdversaryBudget, BudgetMeter};
use super::GameProtocol;
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::model::{Layout, Msg, Sid, StepOutcome, System};
use crate::pop::{Credential, KeyDirectory};
use crate::primitives::sig::VerifyingKey;
use crate::rng::Rng;

/// Which world answers `O1'`–`O3'`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum World {
    /// Queries reach the reader and tags.
    Real,
    /// The unp# simulation: uniform messages under the session rules of
    /// the blinded experiment, including execution results.
    BlindedSharp,
    /// The unp* simulation: uniform messages, no bookkeeping, no results.
    BlindedStar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Learn,
    /// Only `O1'`–`O3'` remain, and `O2'` addresses the challenge tag.
    Guess { challenge: usize },
}

/// Reply message and execution result of one oracle query. Both empty
/// means the query was ignored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OracleReply {
    pub msg: Option<(Sid, Msg)>,
    pub output: Option<bool>,
}

impl OracleReply {
    fn ignored() -> Self {
        Self::default()
    }

    fn message(sid: Sid, msg: Msg) -> Self {
        Self {
            msg: Some((sid, msg)),
            output: None,
        }
    }

    fn output(o: bool) -> Self {
        Self {
            msg: None,
            output: Some(o),
        }
    }

    pub fn is_ignored(&self) -> bool {
        self.msg.is_none() && self.output.is_none()
    }

    pub fn body(&self) -> Option<&BitString> {
        self.msg.as_ref().map(|(_, m)| &m.body)
    }
}

/// `trs^{sid}` or `trsAdv^{sid}` in the blinded world.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ledger {
    pub messages: Vec<BitString>,
    pub o_r: Option<bool>,
    pub o_t: Option<bool>,
    /// `o_R = 0` was set in advance after a modified first message.
    pub preset: bool,
}

pub struct OracleHub<P: GameProtocol> {
    sys: System<P>,
    world: World,
    stage: Stage,
    hide_outputs: bool,
    meter: BudgetMeter,
    trs: HashMap<Sid, Ledger>,
    trs_adv: HashMap<Sid, Ledger>,
    corrupted: BTreeSet<usize>,
    directory: Option<KeyDirectory>,
    blind: Rng,
}

impl<P: GameProtocol> OracleHub<P> {
    /// `blind` feeds the blinded worlds only; system randomness lives in
    /// the parties.
    pub fn new(sys: System<P>, budget: AdversaryBudget, blind: Rng) -> Self {
        Self {
            sys,
            world: World::Real,
            stage: Stage::Learn,
            hide_outputs: false,
            meter: BudgetMeter::new(budget),
            trs: HashMap::new(),
            trs_adv: HashMap::new(),
            corrupted: BTreeSet::new(),
            directory: None,
            blind,
        }
    }

    pub fn with_directory(mut self, dir: KeyDirectory) -> Self {
        self.directory = Some(dir);
        self
    }

    /// Withholds `o_R`/`o_T` from every reply, as in the unp* oracles.
    pub fn hide_outputs(mut self, hide: bool) -> Self {
        self.hide_outputs = hide;
        self
    }

    /// Switches to the guess stage.
    pub fn enter_guess(&mut self, challenge: usize, world: World) -> Result<()> {
        if challenge >= self.sys.tags.len() || self.corrupted.contains(&challenge) {
            return Err(Error::InvalidChallenge(challenge));
        }
        self.stage = Stage::Guess { challenge };
        self.world = world;
        Ok(())
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn world(&self) -> World {
        self.world
    }

    pub fn layout(&self) -> &Layout {
        self.sys.proto.layout()
    }

    pub fn tag_count(&self) -> usize {
        self.sys.tags.len()
    }

    /// The system behind the oracles, for the experiment's own checks.
    pub fn system(&self) -> &System<P> {
        &self.sys
    }

    pub fn meter(&self) -> &BudgetMeter {
        &self.meter
    }

    pub fn directory(&self) -> Option<&KeyDirectory> {
        self.directory.as_ref()
    }

    pub fn is_corrupted(&self, i: usize) -> bool {
        self.corrupted.contains(&i)
    }

    pub fn ledger(&self, sid: &Sid) -> Option<&Ledger> {
        self.trs.get(sid)
    }

    pub fn adv_ledger(&self, sid: &Sid) -> Option<&Ledger> {
        self.trs_adv.get(sid)
    }

    fn mask(&self, mut r: OracleReply) -> OracleReply {
        if self.hide_outputs {
            r.output = None;
        }
        r
    }

    /// `O1'`: the reader starts a session. An open reader session is
    /// timed out first.
    pub fn o1_init_reader(&mut self) -> Result<(Sid, Msg)> {
        self.meter.charge(1)?;
        match self.world {
            World::Real => {
                if !self.sys.reader.is_idle() {
                    self.sys.reader.timeout()?;
                }
                self.sys.reader.start()
            }
            World::BlindedSharp | World::BlindedStar => {
                let mut sid = Sid::random(&mut self.blind);
                while self.trs.contains_key(&sid) || self.trs_adv.contains_key(&sid) {
                    sid = Sid::random(&mut self.blind);
                }
                let c1 = self.blind.bits(self.layout().reader_c[0]);
                if self.world == World::BlindedSharp {
                    self.trs.insert(
                        sid,
                        Ledger {
                            messages: vec![c1.clone()],
                            ..Ledger::default()
                        },
                    );
                }
                Ok((sid, Msg::c(1, c1)))
            }
        }
    }

    /// `O2'`: sends `(sid, c)` to tag `i`.
    pub fn o2_send_tag(&mut self, i: usize, sid: Sid, msg: &Msg) -> Result<OracleReply> {
        if let Stage::Guess { challenge } = self.stage {
            if i != challenge {
                return Err(Error::OracleUnavailable("O2 on a non-challenge tag"));
            }
        }
        if i >= self.sys.tags.len() {
            return Err(Error::UnknownTag(i));
        }
        self.meter.charge(2)?;
        let r = match self.world {
            World::Real => reply_of(self.sys.tag(i)?.step(sid, msg)?),
            World::BlindedSharp => self.sharp_o2(sid, msg),
            World::BlindedStar => self.star_o2(sid, msg),
        };
        Ok(self.mask(r))
    }

    /// `O3'`: sends `(sid, α)` to the reader.
    pub fn o3_send_reader(&mut self, sid: Sid, msg: &Msg) -> Result<OracleReply> {
        self.meter.charge(3)?;
        let r = match self.world {
            World::Real => {
                if self.sys.reader.is_idle() {
                    OracleReply::ignored()
                } else {
                    reply_of(self.sys.reader.step(sid, msg)?)
                }
            }
            World::BlindedSharp => self.sharp_o3(sid, msg),
            World::BlindedStar => self.star_o3(sid, msg),
        };
        Ok(self.mask(r))
    }

    /// `O4'`: everything stored on tag `i`. The tag stays flagged.
    pub fn o4_corrupt(&mut self, i: usize) -> Result<Vec<(String, BitString)>> {
        if self.stage != Stage::Learn {
            return Err(Error::OracleUnavailable("O4"));
        }
        if i >= self.sys.tags.len() {
            return Err(Error::UnknownTag(i));
        }
        self.meter.charge(4)?;
        self.corrupted.insert(i);
        Ok(self.sys.tags[i].expose())
    }

    /// `O5'`: `CredGen` on the reader session that ran as `sid`.
    pub fn o5_get_cred(&mut self, sid: Sid) -> Result<Option<Credential>> {
        if self.stage != Stage::Learn {
            return Err(Error::OracleUnavailable("O5"));
        }
        self.meter.charge(5)?;
        match self.sys.reader.session_of(&sid) {
            Some(j) => self.sys.proto.get_cred(&self.sys.reader, j),
            None => Ok(None),
        }
    }

    /// Adds an issuer key to `para_A`.
    pub fn register_issuer(&mut self, id: BitString, pk: VerifyingKey) -> Result<()> {
        self.directory
            .as_mut()
            .ok_or(Error::OracleUnavailable("issuer registration without a key directory"))?
            .register_adversary(id, pk)
    }

    fn in_p_c1(&self, msg: &Msg) -> bool {
        msg.round == 1 && self.layout().in_c_space(1, msg.body.len())
    }

    fn sharp_o2(&mut self, sid: Sid, msg: &Msg) -> OracleReply {
        let layout = self.layout().clone();
        let gamma = layout.gamma;
        let c = &msg.body;
        if !self.trs.contains_key(&sid) && !self.trs_adv.contains_key(&sid) && self.in_p_c1(msg) {
            let a = self.blind.bits(layout.tag_alpha[0]);
            self.trs_adv.insert(
                sid,
                Ledger {
                    messages: vec![c.clone(), a.clone()],
                    ..Ledger::default()
                },
            );
            return OracleReply::message(sid, Msg::alpha(1, a));
        }
        let fresh_c1 = self.in_p_c1(msg);
        if let Some(l) = self.trs.get_mut(&sid) {
            if l.o_t.is_some() || l.preset || l.messages.len() % 2 == 0 {
                return OracleReply::ignored();
            }
            let mu = l.messages.len().div_ceil(2);
            let matches = l.messages.last() == Some(c) && msg.round as usize == 2 * mu - 1;
            if mu <= gamma {
                if matches {
                    let a = self.blind.bits(layout.tag_alpha[mu - 1]);
                    l.messages.push(a.clone());
                    return OracleReply::message(sid, Msg::alpha(mu, a));
                }
                if mu == 1 && fresh_c1 {
                    // the reader will reject the reply, so o_R is fixed now
                    let a = self.blind.bits(layout.tag_alpha[0]);
                    l.messages.push(a.clone());
                    l.o_r = Some(false);
                    l.preset = true;
                    return OracleReply::message(sid, Msg::alpha(1, a));
                }
                l.o_t = Some(false);
                return OracleReply::output(false);
            }
            // μ = γ+1: c_{γ+1} came with o_R = 1, or awaits α_{γ+1}
            l.o_t = Some(matches);
            if matches && layout.deferred {
                let a = self.blind.bits(layout.tag_alpha[gamma]);
                l.messages.push(a.clone());
                return OracleReply {
                    msg: Some((sid, Msg::alpha(gamma + 1, a))),
                    output: Some(true),
                };
            }
            return OracleReply::output(matches);
        }
        if let Some(l) = self.trs_adv.get_mut(&sid) {
            if l.o_t.is_none() {
                l.messages.push(c.clone());
                l.o_t = Some(false);
                return OracleReply::output(false);
            }
        }
        OracleReply::ignored()
    }

    fn sharp_o3(&mut self, sid: Sid, msg: &Msg) -> OracleReply {
        let layout = self.layout().clone();
        let gamma = layout.gamma;
        let Some(l) = self.trs.get_mut(&sid) else {
            return OracleReply::ignored();
        };
        if l.preset {
            return OracleReply::output(false);
        }
        if l.o_r.is_some() || l.messages.len() % 2 == 1 {
            return OracleReply::ignored();
        }
        let mu = l.messages.len() / 2;
        let matches = l.messages.last() == Some(&msg.body) && msg.round as usize == 2 * mu;
        if !matches {
            l.o_r = Some(false);
            return OracleReply::output(false);
        }
        if mu > gamma {
            l.o_r = Some(true);
            return OracleReply::output(true);
        }
        let c = self.blind.bits(layout.reader_c[mu]);
        l.messages.push(c.clone());
        let reply = Msg::c(mu + 1, c);
        if mu < gamma || layout.deferred {
            return OracleReply::message(sid, reply);
        }
        l.o_r = Some(true);
        OracleReply {
            msg: Some((sid, reply)),
            output: Some(true),
        }
    }

    fn star_o2(&mut self, sid: Sid, msg: &Msg) -> OracleReply {
        let mu = msg.mu();
        match self.layout().tag_alpha.get(mu.wrapping_sub(1)).copied() {
            Some(len) if msg.from_reader() => {
                OracleReply::message(sid, Msg::alpha(mu, self.blind.bits(len)))
            }
            _ => OracleReply::ignored(),
        }
    }

    fn star_o3(&mut self, sid: Sid, msg: &Msg) -> OracleReply {
        let mu = msg.mu();
        match self.layout().reader_c.get(mu).copied() {
            Some(len) if !msg.from_reader() => {
                OracleReply::message(sid, Msg::c(mu + 1, self.blind.bits(len)))
            }
            _ => OracleReply::ignored(),
        }
    }
}

fn reply_of(out: StepOutcome) -> OracleReply {
    match out {
        StepOutcome::Reply { sid, msg } | StepOutcome::Restart { sid, msg, .. } => {
            OracleReply::message(sid, msg)
        }
        StepOutcome::ReplyWithOutput { sid, msg, output } => OracleReply {
            msg: Some((sid, msg)),
            output: Some(output),
        },
        StepOutcome::Output { output, .. } => OracleReply::output(output),
        StepOutcome::Ignore => OracleReply::ignored(),
    }
}

/// The guess-stage view: `O1'`–`O3'` with `O2'` bound to the challenge.
pub struct GuessOracles<'a, P: GameProtocol> {
    hub: &'a mut OracleHub<P>,
    challenge: usize,
}

impl<'a, P: GameProtocol> GuessOracles<'a, P> {
    pub fn new(hub: &'a mut OracleHub<P>) -> Result<Self> {
        match hub.stage() {
            Stage::Guess { challenge } => Ok(Self { hub, challenge }),
            Stage::Learn => Err(Error::OracleUnavailable("guess oracles in the learning stage")),
        }
    }

    pub fn layout(&self) -> &Layout {
        self.hub.layout()
    }

    pub fn o1_init_reader(&mut self) -> Result<(Sid, Msg)> {
        self.hub.o1_init_reader()
    }

    pub fn o2_send_tag(&mut self, sid: Sid, msg: &Msg) -> Result<OracleReply> {
        self.hub.o2_send_tag(self.challenge, sid, msg)
    }

    pub fn o3_send_reader(&mut self, sid: Sid, msg: &Msg) -> Result<OracleReply> {
        self.hub.o3_send_reader(sid, msg)
    }
}
