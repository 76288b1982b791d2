//! Security games over live systems: the oracle layer `O1'…O5'`, the
//! unp#, unp*, credential-unforgeability and PTPT experiments, and the
//! built-in adversaries.
//!
//! A trial draws its system, its blinded-world randomness, the adversary's
//! coins and the challenge bit from separate forks of one trial seed, so a
//! report replays exactly from `(seed, adversary)`.

mod adversary;
mod budget;
mod experiment;
mod forger;
mod hub;
mod scenario;

pub use adversary::{
    privacy_adversary, AbortProbe, Adversary, CexDistinguisher, Challenge, CoinFlipper,
    RepeatedQuery, TranscriptStatistics, ADVERSARY_NAMES,
};
pub use budget::{AdversaryBudget, BudgetMeter, ORACLE_NAMES};
pub use experiment::{
    cred_events, exp_cred_unforge, exp_ptpt, exp_unp_sharp, exp_unp_star, BudgetPolicy,
    ExperimentConfig, ExperimentReport, GameSetup,
};
pub use forger::{forger, Forger, MitmResign, RandomForger, ReplayForger, SpliceForger, FORGER_NAMES};
pub use hub::{GuessOracles, Ledger, OracleHub, OracleReply, Stage, World};
pub use scenario::{
    relay, BitFlipper, DbSplicer, DesyncAttacker, HonestRunner, Replayer, Scenario, SessionOutcome,
};

use crate::cex::Cex;
use crate::error::Result;
use crate::ma::Ma;
use crate::model::{Reader, RoundProtocol};
use crate::pop::{Credential, Pop};

/// A protocol the harness can run games against. `get_cred` backs `O5'`
/// and defaults to `⊥` for protocols without credentials.
pub trait GameProtocol: RoundProtocol + Sized {
    fn get_cred(&self, _reader: &Reader<Self>, _j: usize) -> Result<Option<Credential>> {
        Ok(None)
    }
}

impl GameProtocol for Ma {}

impl GameProtocol for Cex {}

impl<B: crate::model::Wrappable> GameProtocol for Pop<B> {
    fn get_cred(&self, reader: &Reader<Self>, j: usize) -> Result<Option<Credential>> {
        self.cred_gen(reader, j)
    }
}

#[cfg(test)]
mod tests;
