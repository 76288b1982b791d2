//! Built-in two-stage adversaries for the privacy experiments.

use super::hub::{GuessOracles, OracleHub};
use super::scenario::relay;
use super::GameProtocol;
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::model::{Msg, Sid};
use crate::rng::Rng;

/// Output of the learning stage: the challenge tag and the state handed to
/// the guess stage.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Challenge {
    pub tag: usize,
    pub state: Vec<BitString>,
}

pub trait Adversary<P: GameProtocol>: Send + Sync {
    fn name(&self) -> &str;
    fn learn(&self, o: &mut OracleHub<P>, rng: &mut Rng) -> Result<Challenge>;
    /// Returns `b'`.
    fn guess(&self, o: &mut GuessOracles<'_, P>, st: &Challenge, rng: &mut Rng) -> Result<bool>;
}

pub const ADVERSARY_NAMES: [&str; 5] = [
    "coin-flipper",
    "transcript-statistics",
    "repeated-query",
    "cex-distinguisher",
    "abort-probe",
];

pub fn privacy_adversary<P: GameProtocol>(name: &str) -> Result<Box<dyn Adversary<P>>> {
    Ok(match name {
        "coin-flipper" => Box::new(CoinFlipper),
        "transcript-statistics" => Box::new(TranscriptStatistics { sessions: 3 }),
        "repeated-query" => Box::new(RepeatedQuery { queries: 4 }),
        "cex-distinguisher" => Box::new(CexDistinguisher),
        "abort-probe" => Box::new(AbortProbe),
        _ => return Err(Error::UnknownAdversary(name.into())),
    })
}

fn deliver(m: &Msg) -> Option<Msg> {
    Some(m.clone())
}

/// Guesses uniformly without querying anything.
pub struct CoinFlipper;

impl<P: GameProtocol> Adversary<P> for CoinFlipper {
    fn name(&self) -> &str {
        "coin-flipper"
    }

    fn learn(&self, o: &mut OracleHub<P>, rng: &mut Rng) -> Result<Challenge> {
        Ok(Challenge {
            tag: rng.below(o.tag_count()),
            state: Vec::new(),
        })
    }

    fn guess(&self, _: &mut GuessOracles<'_, P>, _: &Challenge, rng: &mut Rng) -> Result<bool> {
        Ok(rng.coin())
    }
}

/// Watches honest sessions of the challenge tag in both stages and tests
/// the guess-stage tag messages for bias and for closeness to anything
/// seen while learning.
pub struct TranscriptStatistics {
    pub sessions: u64,
}

impl TranscriptStatistics {
    /// Relative Hamming distance below which two strings count as related.
    const CLOSE: f64 = 0.35;
}

fn distance(a: &BitString, b: &BitString) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 1.0;
    }
    let diff = (0..n).filter(|&i| a.bit(i) != b.bit(i)).count();
    diff as f64 / n as f64
}

impl<P: GameProtocol> Adversary<P> for TranscriptStatistics {
    fn name(&self) -> &str {
        "transcript-statistics"
    }

    fn learn(&self, o: &mut OracleHub<P>, rng: &mut Rng) -> Result<Challenge> {
        let tag = rng.below(o.tag_count());
        let mut state = Vec::new();
        for _ in 0..self.sessions {
            let s = relay(o, tag, &mut deliver)?;
            state.extend(s.messages.into_iter().filter(|m| !m.from_reader()).map(|m| m.body));
        }
        Ok(Challenge { tag, state })
    }

    fn guess(&self, o: &mut GuessOracles<'_, P>, st: &Challenge, rng: &mut Rng) -> Result<bool> {
        let mut seen = Vec::new();
        let mut completed = true;
        for _ in 0..self.sessions {
            let (sid, c1) = o.o1_init_reader()?;
            let mut to_tag = Some(c1);
            let mut finished = false;
            while let Some(c) = to_tag.take() {
                let r = o.o2_send_tag(sid, &c)?;
                let Some((_, a)) = r.msg else {
                    finished = r.output == Some(true);
                    break;
                };
                seen.push(a.body.clone());
                let r = o.o3_send_reader(sid, &a)?;
                if r.output.is_some() {
                    finished = r.output == Some(true);
                }
                to_tag = r.msg.map(|(_, c)| c);
            }
            completed &= finished;
        }
        if !completed {
            // honest relays complete in both worlds
            return Ok(rng.coin());
        }
        let related = seen
            .iter()
            .any(|a| st.state.iter().any(|b| a.len() == b.len() && distance(a, b) < Self::CLOSE));
        if related {
            return Ok(true);
        }
        let (ones, total) = seen
            .iter()
            .fold((0, 0), |(o, t), a| (o + a.hamming_weight(), t + a.len()));
        Ok(2 * ones > total || (2 * ones == total && rng.coin()))
    }
}

/// Sends one fixed challenge to the tag under several fresh session IDs
/// and looks for related answers.
pub struct RepeatedQuery {
    pub queries: usize,
}

impl<P: GameProtocol> Adversary<P> for RepeatedQuery {
    fn name(&self) -> &str {
        "repeated-query"
    }

    fn learn(&self, o: &mut OracleHub<P>, rng: &mut Rng) -> Result<Challenge> {
        Ok(Challenge {
            tag: rng.below(o.tag_count()),
            state: Vec::new(),
        })
    }

    fn guess(&self, o: &mut GuessOracles<'_, P>, _: &Challenge, rng: &mut Rng) -> Result<bool> {
        let c = Msg::c(1, rng.bits(o.layout().reader_c[0]));
        let mut answers = Vec::new();
        for _ in 0..self.queries {
            let r = o.o2_send_tag(Sid::random(rng), &c)?;
            if let Some(a) = r.body() {
                answers.push(a.clone());
            }
        }
        let related = answers.iter().enumerate().any(|(i, a)| {
            answers[i + 1..]
                .iter()
                .any(|b| distance(a, b) < TranscriptStatistics::CLOSE)
        });
        Ok(related)
    }
}

/// Learns `r_1 = F_k(c‖pad) ⊕ ctr` from one complete honest session, then
/// replays `c` under a new session ID and checks whether the new first
/// field differs from `r_1` by `ctr ⊕ (ctr+1)`, i.e. a string of the form
/// `0…01…1`.
pub struct CexDistinguisher;

impl CexDistinguisher {
    const FIELD: usize = 256;
}

impl<P: GameProtocol> Adversary<P> for CexDistinguisher {
    fn name(&self) -> &str {
        "cex-distinguisher"
    }

    fn learn(&self, o: &mut OracleHub<P>, rng: &mut Rng) -> Result<Challenge> {
        let tag = rng.below(o.tag_count());
        // the final message reaches the tag, so it ends in state 0
        let s = relay(o, tag, &mut deliver)?;
        let (c, r) = match (s.messages.first(), s.messages.get(1)) {
            (Some(c), Some(r)) if r.body.len() >= Self::FIELD => {
                (c.body.clone(), r.body.slice(0, Self::FIELD)?)
            }
            _ => return Err(Error::InvalidParams("learning session did not reach the tag".into())),
        };
        Ok(Challenge {
            tag,
            state: vec![c, r],
        })
    }

    fn guess(&self, o: &mut GuessOracles<'_, P>, st: &Challenge, rng: &mut Rng) -> Result<bool> {
        let [c, r1] = st.state.as_slice() else {
            return Err(Error::InvalidParams("missing learned state".into()));
        };
        let reply = o.o2_send_tag(Sid::random(rng), &Msg::c(1, c.clone()))?;
        let Some(a) = reply.body().filter(|a| a.len() >= Self::FIELD) else {
            return Ok(false);
        };
        Ok(a.slice(0, Self::FIELD)?.xor(r1)?.is_low_ones_mask())
    }
}

/// Modifies the reader's first message on its way to the tag and relays
/// the answer back; the reader must reject in either world.
pub struct AbortProbe;

impl<P: GameProtocol> Adversary<P> for AbortProbe {
    fn name(&self) -> &str {
        "abort-probe"
    }

    fn learn(&self, o: &mut OracleHub<P>, rng: &mut Rng) -> Result<Challenge> {
        Ok(Challenge {
            tag: rng.below(o.tag_count()),
            state: Vec::new(),
        })
    }

    fn guess(&self, o: &mut GuessOracles<'_, P>, _: &Challenge, rng: &mut Rng) -> Result<bool> {
        let (sid, c1) = o.o1_init_reader()?;
        let bad = Msg::c(1, c1.body.with_flipped_bit(rng.below(c1.body.len())));
        let r = o.o2_send_tag(sid, &bad)?;
        let Some((_, a)) = r.msg else {
            return Ok(rng.coin());
        };
        let r = o.o3_send_reader(sid, &a)?;
        // an accepting reader would give the real world away
        Ok(r.output == Some(true))
    }
}
