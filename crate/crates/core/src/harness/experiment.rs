//! The experiments and their reports.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::adversary::Adversary;
use super::budget::AdversaryBudget;
use super::forger::Forger;
use super::hub::{GuessOracles, OracleHub, World};
use super::GameProtocol;
use crate::error::{Error, Result};
use crate::model::System;
use crate::pop::{cred_veri, Credential, KeyDirectory};
use crate::primitives::prf::Prf;
use crate::primitives::ptpt::{ptpt_experiment, Distinguisher};
use crate::rng::Rng;
use crate::stats::{run_trials, Estimate};

/// What a budget overrun costs the adversary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetPolicy {
    /// The trial counts as a wrong guess.
    #[default]
    CountAsFailure,
    /// The trial is dropped from the estimate.
    AbortTrial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub trials: u64,
    pub seed: u64,
    pub budget: AdversaryBudget,
    pub policy: BudgetPolicy,
}

impl ExperimentConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            budget: AdversaryBudget::default(),
            policy: BudgetPolicy::default(),
        }
    }
}

/// A freshly set-up system and, for PoP systems, its public parameters.
pub struct GameSetup<P: GameProtocol> {
    pub system: System<P>,
    pub directory: Option<KeyDirectory>,
}

impl<P: GameProtocol> From<System<P>> for GameSetup<P> {
    fn from(system: System<P>) -> Self {
        Self {
            system,
            directory: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub protocol: String,
    pub adversary: String,
    pub trials: u64,
    /// Trials that entered the estimate.
    pub counted: u64,
    /// Correct guesses, or trials where an event fired.
    pub successes: u64,
    pub advantage: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    /// Trials whose challenge tag was corrupted.
    pub invalid: u64,
    /// Trials dropped under [`BudgetPolicy::AbortTrial`].
    pub aborted: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub e1: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub e2: Option<u64>,
    pub trial_seeds: Vec<u64>,
}

impl ExperimentReport {
    pub fn estimate(&self) -> Estimate {
        Estimate {
            trials: self.counted,
            successes: self.successes,
            rate: if self.counted == 0 {
                0.0
            } else {
                self.successes as f64 / self.counted as f64
            },
            advantage: self.advantage,
            ci_low: self.ci_low,
            ci_high: self.ci_high,
        }
    }

    pub fn interval_contains_zero(&self) -> bool {
        self.ci_low <= 0.0 && 0.0 <= self.ci_high
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Malformed(e.to_string()))
    }

    fn with_estimate(mut self, est: Estimate) -> Self {
        self.counted = est.trials;
        self.successes = est.successes;
        self.advantage = est.advantage;
        self.ci_low = est.ci_low;
        self.ci_high = est.ci_high;
        self
    }

    fn skeleton(experiment: &str, protocol: String, adversary: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            experiment: experiment.into(),
            protocol,
            adversary: adversary.into(),
            trials: cfg.trials,
            counted: 0,
            successes: 0,
            advantage: 0.0,
            ci_low: 0.0,
            ci_high: 0.0,
            seed: cfg.seed,
            invalid: 0,
            aborted: 0,
            e1: None,
            e2: None,
            trial_seeds: Vec::new(),
        }
    }
}

/// One `key: value` line per field; trial seeds are summarized by count
/// and digest.
impl fmt::Display for ExperimentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "experiment: {}", self.experiment)?;
        writeln!(f, "protocol: {}", self.protocol)?;
        writeln!(f, "adversary: {}", self.adversary)?;
        writeln!(f, "trials: {}", self.trials)?;
        writeln!(f, "counted: {}", self.counted)?;
        writeln!(f, "successes: {}", self.successes)?;
        writeln!(f, "advantage: {:.6}", self.advantage)?;
        writeln!(f, "ci_low: {:.6}", self.ci_low)?;
        writeln!(f, "ci_high: {:.6}", self.ci_high)?;
        writeln!(f, "seed: {}", self.seed)?;
        writeln!(f, "invalid: {}", self.invalid)?;
        writeln!(f, "aborted: {}", self.aborted)?;
        if let Some(e1) = self.e1 {
            writeln!(f, "e1: {e1}")?;
        }
        if let Some(e2) = self.e2 {
            writeln!(f, "e2: {e2}")?;
        }
        let mut h = blake3::Hasher::new();
        for s in &self.trial_seeds {
            h.update(&s.to_be_bytes());
        }
        writeln!(
            f,
            "trial_seeds: {} (blake3 {})",
            self.trial_seeds.len(),
            &h.finalize().to_hex()[..16]
        )
    }
}

enum Trial {
    Guess(bool),
    Invalid,
    Aborted,
}

fn setup_hub<P: GameProtocol>(
    factory: &(dyn Fn(&mut Rng) -> Result<GameSetup<P>> + Sync),
    cfg: &ExperimentConfig,
    rng: &mut Rng,
) -> Result<OracleHub<P>> {
    let setup = factory(&mut rng.fork("setup"))?;
    let hub = OracleHub::new(setup.system, cfg.budget, rng.fork("blind"));
    Ok(match setup.directory {
        Some(d) => hub.with_directory(d),
        None => hub,
    })
}

fn privacy_trial<P: GameProtocol>(
    factory: &(dyn Fn(&mut Rng) -> Result<GameSetup<P>> + Sync),
    adversary: &dyn Adversary<P>,
    cfg: &ExperimentConfig,
    blinded: World,
    rng: &mut Rng,
) -> Result<Trial> {
    let mut hub = setup_hub(factory, cfg, rng)?.hide_outputs(blinded == World::BlindedStar);
    let mut adv_rng = rng.fork("adversary");
    let b = rng.fork("coin").coin();
    let overrun = |wrong: bool| match cfg.policy {
        BudgetPolicy::CountAsFailure => Trial::Guess(wrong),
        BudgetPolicy::AbortTrial => Trial::Aborted,
    };
    let challenge = match adversary.learn(&mut hub, &mut adv_rng) {
        Ok(c) => c,
        Err(Error::BudgetExceeded(_)) => return Ok(overrun(!b)),
        Err(e) => return Err(e),
    };
    let world = if b { World::Real } else { blinded };
    match hub.enter_guess(challenge.tag, world) {
        Ok(()) => {}
        Err(Error::InvalidChallenge(_)) => return Ok(Trial::Invalid),
        Err(e) => return Err(e),
    }
    let mut oracles = GuessOracles::new(&mut hub)?;
    match adversary.guess(&mut oracles, &challenge, &mut adv_rng) {
        Ok(g) => Ok(Trial::Guess(g)),
        Err(Error::BudgetExceeded(_)) => Ok(overrun(!b)),
        Err(e) => Err(e),
    }
    .map(|t| match t {
        Trial::Guess(g) => Trial::Guess(g == b),
        other => other,
    })
}

fn privacy_experiment<P: GameProtocol>(
    name: &str,
    blinded: World,
    factory: &(dyn Fn(&mut Rng) -> Result<GameSetup<P>> + Sync),
    adversary: &dyn Adversary<P>,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    if cfg.trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    let protocol = factory(&mut Rng::from_u64(cfg.seed).fork("setup"))?
        .system
        .proto
        .name();
    let outcomes = run_trials(cfg.seed, cfg.trials, |_, rng| {
        privacy_trial(factory, adversary, cfg, blinded, rng)
    });
    let mut report = ExperimentReport::skeleton(name, protocol, adversary.name(), cfg);
    let mut wins = 0;
    let mut counted = 0;
    for (seed, t) in outcomes {
        report.trial_seeds.push(seed);
        match t? {
            Trial::Guess(ok) => {
                counted += 1;
                wins += u64::from(ok);
            }
            Trial::Invalid => report.invalid += 1,
            Trial::Aborted => report.aborted += 1,
        }
    }
    Ok(report.with_estimate(Estimate::guessing(wins, counted)))
}

/// The unp# experiment: the blinded world follows the session rules of
/// the blinded oracles and returns execution results.
pub fn exp_unp_sharp<P: GameProtocol>(
    factory: &(dyn Fn(&mut Rng) -> Result<GameSetup<P>> + Sync),
    adversary: &dyn Adversary<P>,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    privacy_experiment("unp-sharp", World::BlindedSharp, factory, adversary, cfg)
}

/// The unp* experiment: uniform messages when `b = 0`, and execution
/// results withheld in both stages.
pub fn exp_unp_star<P: GameProtocol>(
    factory: &(dyn Fn(&mut Rng) -> Result<GameSetup<P>> + Sync),
    adversary: &dyn Adversary<P>,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    privacy_experiment("unp-star", World::BlindedStar, factory, adversary, cfg)
}

/// `(E1, E2)` for a submitted credential.
///
/// E1: names the reader and an uncorrupted tag, verifies, and no reader
/// session reproduces it. E2: names a registered adversary issuer and an
/// uncorrupted tag, and verifies under `para ∪ para_A`.
pub fn cred_events<P: GameProtocol>(hub: &OracleHub<P>, cred: &Credential) -> Result<(bool, bool)> {
    let dir = hub
        .directory()
        .ok_or(Error::OracleUnavailable("key directory"))?;
    let Some(i) = dir.tag_position(&cred.tag_id) else {
        return Ok((false, false));
    };
    if hub.is_corrupted(i) {
        return Ok((false, false));
    }
    if cred.reader_id == dir.reader_id {
        if !cred_veri(dir, cred) {
            return Ok((false, false));
        }
        let reader = &hub.system().reader;
        for j in 1..=reader.sessions() {
            if hub.system().proto.get_cred(reader, j)?.as_ref() == Some(cred) {
                return Ok((false, false));
            }
        }
        return Ok((true, false));
    }
    Ok((false, dir.is_adversary(&cred.reader_id) && cred_veri(dir, cred)))
}

/// The credential unforgeability experiment. `successes` counts trials in
/// which E1 or E2 fired.
pub fn exp_cred_unforge<P: GameProtocol>(
    factory: &(dyn Fn(&mut Rng) -> Result<GameSetup<P>> + Sync),
    forger: &dyn Forger<P>,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    if cfg.trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    let protocol = factory(&mut Rng::from_u64(cfg.seed).fork("setup"))?
        .system
        .proto
        .name();
    let outcomes = run_trials(cfg.seed, cfg.trials, |_, rng| -> Result<Option<(bool, bool)>> {
        let mut hub = setup_hub(factory, cfg, rng)?;
        let mut adv_rng = rng.fork("adversary");
        match forger.forge(&mut hub, &mut adv_rng) {
            Ok(Some(cred)) => cred_events(&hub, &cred).map(Some),
            Ok(None) => Ok(Some((false, false))),
            Err(Error::BudgetExceeded(_)) if cfg.policy == BudgetPolicy::AbortTrial => Ok(None),
            Err(Error::BudgetExceeded(_)) => Ok(Some((false, false))),
            Err(e) => Err(e),
        }
    });
    let mut report = ExperimentReport::skeleton("cred-ufrg", protocol, forger.name(), cfg);
    let (mut e1, mut e2, mut any, mut counted) = (0, 0, 0, 0);
    for (seed, t) in outcomes {
        report.trial_seeds.push(seed);
        match t? {
            Some((a, b)) => {
                counted += 1;
                e1 += u64::from(a);
                e2 += u64::from(b);
                any += u64::from(a || b);
            }
            None => report.aborted += 1,
        }
    }
    report.e1 = Some(e1);
    report.e2 = Some(e2);
    Ok(report.with_estimate(Estimate::event(any, counted)))
}

/// The PTPT game for a PRF family, reported in the common format.
pub fn exp_ptpt(
    prf: &(dyn Prf + Sync),
    distinguisher: &dyn Distinguisher,
    trials: u64,
    seed: u64,
) -> Result<ExperimentReport> {
    let r = ptpt_experiment(prf, distinguisher, trials, seed)?;
    let d = prf.descriptor();
    let cfg = ExperimentConfig::new(trials, seed);
    let mut report = ExperimentReport::skeleton(
        "ptpt",
        format!("prf({}, {}, {})", d.key_bits, d.in_bits, d.out_bits),
        &r.distinguisher,
        &cfg,
    );
    report.trial_seeds = r.trial_seeds;
    Ok(report.with_estimate(r.estimate))
}
