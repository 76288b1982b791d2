//! The predictable-test game for PRF families.
//!
//! Each trial flips `b`. With `b = 1` the distinguisher's oracle is the
//! family under a fresh uniform key; with `b = 0` it is a random function,
//! sampled lazily and memoized so repeated queries agree.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::prf::{Prf, PrfDescriptor};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::stats::{run_trials, Estimate};

/// Oracle handed to a distinguisher. Inputs of the wrong length are an
/// error from the family itself.
pub trait PtptOracle {
    fn query(&mut self, x: &BitString) -> Result<BitString>;
}

pub trait Distinguisher: Send + Sync {
    fn name(&self) -> &str;
    /// Returns the guess `b'`.
    fn run(&self, desc: &PrfDescriptor, oracle: &mut dyn PtptOracle, rng: &mut Rng) -> Result<bool>;
}

struct FamilyOracle<'a> {
    prf: &'a dyn Prf,
    key: BitString,
}

impl PtptOracle for FamilyOracle<'_> {
    fn query(&mut self, x: &BitString) -> Result<BitString> {
        self.prf.eval(&self.key, x)
    }
}

/// Lazily sampled random function with the family's length contract.
pub struct LazyRandomFunction {
    desc: PrfDescriptor,
    table: HashMap<BitString, BitString>,
    rng: Rng,
}

impl LazyRandomFunction {
    pub fn new(desc: PrfDescriptor, rng: Rng) -> Self {
        Self {
            desc,
            table: HashMap::new(),
            rng,
        }
    }

    pub fn distinct_queries(&self) -> usize {
        self.table.len()
    }
}

impl PtptOracle for LazyRandomFunction {
    fn query(&mut self, x: &BitString) -> Result<BitString> {
        if x.len() != self.desc.in_bits {
            return Err(Error::LengthMismatch {
                param: "prf input",
                expected: self.desc.in_bits,
                actual: x.len(),
            });
        }
        let out_bits = self.desc.out_bits;
        let rng = &mut self.rng;
        Ok(self
            .table
            .entry(x.clone())
            .or_insert_with(|| rng.bits(out_bits))
            .clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PtptReport {
    pub distinguisher: String,
    pub seed: u64,
    pub estimate: Estimate,
    pub trial_seeds: Vec<u64>,
}

/// Runs `trials` independent rounds of the game against `prf`.
pub fn ptpt_experiment(
    prf: &(dyn Prf + Sync),
    distinguisher: &dyn Distinguisher,
    trials: u64,
    seed: u64,
) -> Result<PtptReport> {
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    let desc = prf.descriptor();
    let outcomes = run_trials(seed, trials, |_, rng| -> Result<bool> {
        let b = rng.coin();
        let mut oracle_rng = rng.fork("ptpt oracle");
        let mut adv_rng = rng.fork("ptpt distinguisher");
        let guess = if b {
            let mut o = FamilyOracle {
                prf,
                key: oracle_rng.bits(desc.key_bits),
            };
            distinguisher.run(&desc, &mut o, &mut adv_rng)?
        } else {
            let mut o = LazyRandomFunction::new(desc, oracle_rng);
            distinguisher.run(&desc, &mut o, &mut adv_rng)?
        };
        Ok(guess == b)
    });
    let mut successes = 0;
    let mut trial_seeds = Vec::with_capacity(outcomes.len());
    for (s, r) in outcomes {
        trial_seeds.push(s);
        successes += u64::from(r?);
    }
    Ok(PtptReport {
        distinguisher: distinguisher.name().to_string(),
        seed,
        estimate: Estimate::guessing(successes, trials),
        trial_seeds,
    })
}

/// Always outputs the same bit.
pub struct ConstantGuess(pub bool);

impl Distinguisher for ConstantGuess {
    fn name(&self) -> &str {
        "constant"
    }

    fn run(&self, _: &PrfDescriptor, _: &mut dyn PtptOracle, _: &mut Rng) -> Result<bool> {
        Ok(self.0)
    }
}

/// Queries one random point and guesses "family" iff the answer echoes the
/// query (on the common prefix when lengths differ).
pub struct IdentityProbe;

impl Distinguisher for IdentityProbe {
    fn name(&self) -> &str {
        "identity-probe"
    }

    fn run(&self, desc: &PrfDescriptor, oracle: &mut dyn PtptOracle, rng: &mut Rng) -> Result<bool> {
        let x = rng.bits(desc.in_bits);
        let y = oracle.query(&x)?;
        let n = x.len().min(y.len());
        Ok(x.slice(0, n)? == y.slice(0, n)?)
    }
}

/// Queries `queries` distinct inputs and guesses "family" when the total
/// number of one bits deviates from half by more than two standard
/// deviations.
pub struct BitBalance {
    pub queries: usize,
}

impl Distinguisher for BitBalance {
    fn name(&self) -> &str {
        "bit-balance"
    }

    fn run(&self, desc: &PrfDescriptor, oracle: &mut dyn PtptOracle, _: &mut Rng) -> Result<bool> {
        let mut ones = 0u64;
        for i in 0..self.queries {
            let x = BitString::from_u64(i as u64, desc.in_bits);
            ones += oracle.query(&x)?.hamming_weight() as u64;
        }
        let n = (self.queries * desc.out_bits) as f64;
        let deviation = (ones as f64 - n / 2.0).abs();
        Ok(deviation > 2.0 * (n / 4.0).sqrt())
    }
}

/// A deliberately broken family that returns its input, truncated or
/// zero-extended to the output length.
#[derive(Clone, Copy, Debug)]
pub struct IdentityPrf(pub PrfDescriptor);

impl Prf for IdentityPrf {
    fn descriptor(&self) -> PrfDescriptor {
        self.0
    }

    fn eval(&self, key: &BitString, input: &BitString) -> Result<BitString> {
        self.0.check(key, input)?;
        if input.len() >= self.0.out_bits {
            input.slice(0, self.0.out_bits)
        } else {
            Ok(input.zero_extend(self.0.out_bits))
        }
    }
}

pub fn distinguisher_by_name(name: &str) -> Result<Box<dyn Distinguisher>> {
    match name {
        "constant" | "constant-one" => Ok(Box::new(ConstantGuess(true))),
        "identity-probe" => Ok(Box::new(IdentityProbe)),
        "bit-balance" => Ok(Box::new(BitBalance { queries: 8 })),
        other => Err(Error::UnknownAdversary(other.to_string())),
    }
}
