//! The `experiment` command: named games against named protocols, and the
//! acceptance bound each report is held to.

use std::fmt;
use std::str::FromStr;

use rfpop::cex::Cex;
use rfpop::error::{Error, Result};
use rfpop::harness::{
    exp_cred_unforge, exp_ptpt, exp_unp_sharp, exp_unp_star, forger, privacy_adversary,
    ExperimentConfig, ExperimentReport, GameProtocol, GameSetup,
};
use rfpop::ma::Ma;
use rfpop::model::System;
use rfpop::pop::{mapop_system, PopMode};
use rfpop::primitives::prf::{KeyedHashPrf, Prf};
use rfpop::primitives::ptpt::{distinguisher_by_name, IdentityPrf};
use rfpop::rng::Rng;

use crate::config::Config;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Game {
    UnpSharp,
    UnpStar,
    CredUfrg,
    Ptpt,
}

impl FromStr for Game {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unp-sharp" => Ok(Self::UnpSharp),
            "unp-star" => Ok(Self::UnpStar),
            "cred-ufrg" => Ok(Self::CredUfrg),
            "ptpt" => Ok(Self::Ptpt),
            _ => Err(Error::Config(format!(
                "unknown experiment {s:?}, expected unp-sharp, unp-star, cred-ufrg or ptpt"
            ))),
        }
    }
}

/// What a game runs against. `identity` is the broken PRF family and is
/// only meaningful for `ptpt`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Ma,
    Mapop,
    Cex,
    Identity,
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ma" => Ok(Self::Ma),
            "mapop" => Ok(Self::Mapop),
            "cex" => Ok(Self::Cex),
            "identity" => Ok(Self::Identity),
            _ => Err(Error::Config(format!(
                "unknown protocol {s:?}, expected ma, mapop, cex or identity"
            ))),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Ma => "ma",
            Target::Mapop => "mapop",
            Target::Cex => "cex",
            Target::Identity => "identity",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Request {
    pub game: Game,
    pub target: Target,
    pub adversary: String,
    pub trials: u64,
    pub seed: u64,
    /// Tags per trial system.
    pub tags: usize,
    /// Lengths and tag signature instantiation of the trial systems.
    pub config: Config,
}

impl Request {
    pub fn new(game: Game, target: Target, adversary: &str, trials: u64, seed: u64) -> Self {
        Self {
            game,
            target,
            adversary: adversary.into(),
            trials,
            seed,
            tags: 3,
            config: Config::default(),
        }
    }
}

/// Advantage a positive control must reach.
pub const ATTACK_FLOOR: f64 = 0.45;

/// The bound a report is held to: positive controls must clear
/// [`ATTACK_FLOOR`], forgers must never fire an event, and every other
/// adversary's 95% interval must contain zero.
pub fn within_bounds(report: &ExperimentReport) -> bool {
    match (report.experiment.as_str(), report.adversary.as_str()) {
        (_, "cex-distinguisher") if report.protocol == "cex" => report.advantage >= ATTACK_FLOOR,
        ("ptpt", "identity-probe") if report.protocol.starts_with("identity") => {
            report.advantage >= ATTACK_FLOOR
        }
        ("cred-ufrg", _) => report.successes == 0,
        _ => report.interval_contains_zero(),
    }
}

pub fn run(req: &Request) -> Result<ExperimentReport> {
    if req.tags == 0 {
        return Err(Error::Config("at least one tag is required".into()));
    }
    let cfg = ExperimentConfig::new(req.trials, req.seed);
    let params = req.config.ma_params();
    match (req.game, req.target) {
        (Game::Ptpt, Target::Identity) => ptpt(&IdentityPrf(params.f()), req),
        (Game::Ptpt, Target::Ma | Target::Mapop) => ptpt(&KeyedHashPrf(params.f()), req),
        (Game::Ptpt, Target::Cex) => ptpt(&KeyedHashPrf(Cex::new().f()), req),
        (_, Target::Identity) => Err(Error::Config("the identity family only runs under ptpt".into())),
        (Game::CredUfrg, Target::Mapop) => {
            let f = forger(&req.adversary)?;
            exp_cred_unforge(&|rng: &mut Rng| mapop(req, rng), f.as_ref(), &cfg)
        }
        (Game::CredUfrg, _) => Err(Error::Config("cred-ufrg needs a protocol with credentials".into())),
        (game, Target::Mapop) => privacy(game, &|rng: &mut Rng| mapop(req, rng), req, &cfg),
        (game, Target::Ma) => privacy(
            game,
            &|rng: &mut Rng| {
                let ma = Ma::new(params.clone())?;
                let (records, tags) = ma.setup(req.tags, rng)?;
                Ok(System::new(ma, (), records, tags, rng).into())
            },
            req,
            &cfg,
        ),
        (game, Target::Cex) => privacy(
            game,
            &|rng: &mut Rng| {
                let cex = Cex::new();
                let (records, tags) = cex.setup(req.tags, rng)?;
                Ok(System::new(cex, (), records, tags, rng).into())
            },
            req,
            &cfg,
        ),
    }
}

fn mapop(req: &Request, rng: &mut Rng) -> Result<GameSetup<rfpop::pop::MaPop>> {
    let (system, dir) = mapop_system(
        req.config.ma_params(),
        req.config.tag_impl(),
        PopMode::Full,
        req.tags,
        rng,
    )?;
    Ok(GameSetup {
        system,
        directory: Some(dir),
    })
}

fn privacy<P: GameProtocol>(
    game: Game,
    factory: &(dyn Fn(&mut Rng) -> Result<GameSetup<P>> + Sync),
    req: &Request,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    let adv = privacy_adversary::<P>(&req.adversary)?;
    match game {
        Game::UnpSharp => exp_unp_sharp(factory, adv.as_ref(), cfg),
        Game::UnpStar => exp_unp_star(factory, adv.as_ref(), cfg),
        Game::CredUfrg | Game::Ptpt => unreachable!("dispatched by run"),
    }
}

fn ptpt(prf: &(dyn Prf + Sync), req: &Request) -> Result<ExperimentReport> {
    let d = distinguisher_by_name(&req.adversary)?;
    let mut report = exp_ptpt(prf, d.as_ref(), req.trials, req.seed)?;
    report.protocol = format!("{}-{}", req.target, report.protocol);
    Ok(report)
}
