//! Fixed attack programs over the oracle interface.
//!
//! Each scenario drives whole sessions through `O1'`–`O3'` against one tag
//! and reports what both parties output.

use super::budget::AdversaryBudget;
use super::hub::OracleHub;
use super::GameProtocol;
use crate::error::{Error, Result};
use crate::model::{Msg, Sid};

/// Outputs of one relayed session. `None` means that party never reached
/// a result while the session was being relayed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SessionOutcome {
    pub sid: Option<Sid>,
    pub messages: Vec<Msg>,
    pub o_r: Option<bool>,
    pub o_t: Option<bool>,
}

impl SessionOutcome {
    pub fn accepted(&self) -> bool {
        self.o_r == Some(true) && self.o_t == Some(true)
    }
}

/// Relays one session between the reader and tag `i`. `edit` sees every
/// message in flight and returns what gets delivered; `None` drops it and
/// ends the relay.
pub fn relay<P: GameProtocol>(
    hub: &mut OracleHub<P>,
    i: usize,
    edit: &mut dyn FnMut(&Msg) -> Option<Msg>,
) -> Result<SessionOutcome> {
    let (sid, c1) = hub.o1_init_reader()?;
    let mut out = SessionOutcome {
        sid: Some(sid),
        messages: vec![c1.clone()],
        ..SessionOutcome::default()
    };
    let mut to_tag = edit(&c1);
    while let Some(c) = to_tag.take() {
        let r = hub.o2_send_tag(i, sid, &c)?;
        if r.output.is_some() {
            out.o_t = r.output;
        }
        let Some((_, a)) = r.msg else { break };
        out.messages.push(a.clone());
        let Some(a) = edit(&a) else { break };
        let r = hub.o3_send_reader(sid, &a)?;
        if r.output.is_some() {
            out.o_r = r.output;
        }
        if let Some((_, c)) = r.msg {
            out.messages.push(c.clone());
            to_tag = edit(&c);
        }
    }
    Ok(out)
}

fn deliver(m: &Msg) -> Option<Msg> {
    Some(m.clone())
}

pub trait Scenario<P: GameProtocol>: Send + Sync {
    fn name(&self) -> String;
    /// Queries the program needs.
    fn budget(&self) -> AdversaryBudget;
    fn run(&self, hub: &mut OracleHub<P>, tag: usize) -> Result<Vec<SessionOutcome>>;
}

fn session_budget(sessions: u64) -> AdversaryBudget {
    // O1 per session plus one timeout-forcing O1, two O2 and O3 per round
    let n = 4 * sessions + 1;
    AdversaryBudget::new(3 * n, [n, n, n, 0, 0])
}

/// Relays `sessions` sessions unmodified.
pub struct HonestRunner {
    pub sessions: u64,
}

impl<P: GameProtocol> Scenario<P> for HonestRunner {
    fn name(&self) -> String {
        format!("honest-runner({})", self.sessions)
    }

    fn budget(&self) -> AdversaryBudget {
        session_budget(self.sessions)
    }

    fn run(&self, hub: &mut OracleHub<P>, tag: usize) -> Result<Vec<SessionOutcome>> {
        (0..self.sessions)
            .map(|_| relay(hub, tag, &mut deliver))
            .collect()
    }
}

/// Flips bit `bit` (modulo the message length) of the message with round
/// number `round` in one session.
pub struct BitFlipper {
    pub round: u8,
    pub bit: usize,
}

impl<P: GameProtocol> Scenario<P> for BitFlipper {
    fn name(&self) -> String {
        format!("bit-flipper({}, {})", self.round, self.bit)
    }

    fn budget(&self) -> AdversaryBudget {
        session_budget(1)
    }

    fn run(&self, hub: &mut OracleHub<P>, tag: usize) -> Result<Vec<SessionOutcome>> {
        let (round, bit) = (self.round, self.bit);
        let mut edit = |m: &Msg| {
            let mut m = m.clone();
            if m.round == round {
                m.body = m.body.with_flipped_bit(bit % m.body.len());
            }
            Some(m)
        };
        Ok(vec![relay(hub, tag, &mut edit)?])
    }
}

/// Records one honest session, then replays its message of round `round`
/// in a second session.
pub struct Replayer {
    pub round: u8,
}

impl<P: GameProtocol> Scenario<P> for Replayer {
    fn name(&self) -> String {
        format!("replayer({})", self.round)
    }

    fn budget(&self) -> AdversaryBudget {
        session_budget(2)
    }

    fn run(&self, hub: &mut OracleHub<P>, tag: usize) -> Result<Vec<SessionOutcome>> {
        let first = relay(hub, tag, &mut deliver)?;
        let old = first
            .messages
            .iter()
            .find(|m| m.round == self.round)
            .cloned()
            .ok_or_else(|| Error::InvalidParams(format!("no message in round {}", self.round)))?;
        let mut edit = |m: &Msg| Some(if m.round == old.round { old.clone() } else { m.clone() });
        let second = relay(hub, tag, &mut edit)?;
        Ok(vec![first, second])
    }
}

/// Drops the tag's final message `drops` times, then relays one honest
/// session and one more.
pub struct DesyncAttacker {
    pub drops: u64,
}

impl<P: GameProtocol> Scenario<P> for DesyncAttacker {
    fn name(&self) -> String {
        format!("desync-attacker({})", self.drops)
    }

    fn budget(&self) -> AdversaryBudget {
        session_budget(self.drops + 2)
    }

    fn run(&self, hub: &mut OracleHub<P>, tag: usize) -> Result<Vec<SessionOutcome>> {
        let last = hub.layout().final_tag_round();
        let mut out = Vec::new();
        for _ in 0..self.drops {
            let mut edit = |m: &Msg| (m.round != last).then(|| m.clone());
            out.push(relay(hub, tag, &mut edit)?);
        }
        for _ in 0..2 {
            out.push(relay(hub, tag, &mut deliver)?);
        }
        Ok(out)
    }
}

/// Answers one reader challenge with a first tag message spliced from two
/// tags: the leading `split` bits from `tag`, the rest from `other`.
pub struct DbSplicer {
    pub other: usize,
    pub split: usize,
}

impl<P: GameProtocol> Scenario<P> for DbSplicer {
    fn name(&self) -> String {
        format!("db-splicer({}, {})", self.other, self.split)
    }

    fn budget(&self) -> AdversaryBudget {
        AdversaryBudget::new(8, [2, 2, 2, 0, 0])
    }

    fn run(&self, hub: &mut OracleHub<P>, tag: usize) -> Result<Vec<SessionOutcome>> {
        let (sid, c1) = hub.o1_init_reader()?;
        let a = hub.o2_send_tag(tag, sid, &c1)?;
        let b = hub.o2_send_tag(self.other, sid, &c1)?;
        let (Some(a), Some(b)) = (a.body(), b.body()) else {
            return Err(Error::InvalidParams("tags did not answer the challenge".into()));
        };
        let split = self.split.min(a.len());
        let spliced = a.slice(0, split)?.concat(&b.slice(split, b.len() - split)?);
        let msg = Msg::alpha(1, spliced);
        let r = hub.o3_send_reader(sid, &msg)?;
        Ok(vec![SessionOutcome {
            sid: Some(sid),
            messages: vec![c1, msg],
            o_r: r.output,
            o_t: None,
        }])
    }
}
