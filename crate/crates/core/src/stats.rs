//! Success-rate estimates with Wilson score intervals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Point estimate and interval of a guessing game's bias.
///
/// `ci_low`/`ci_high` bound the signed bias `p − ½`; the reported
/// `advantage` is `|p − ½|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub trials: u64,
    pub successes: u64,
    pub rate: f64,
    pub advantage: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    pub fn guessing(successes: u64, trials: u64) -> Self {
        let (lo, hi) = wilson(successes, trials, Z95);
        let rate = ratio(successes, trials);
        Self {
            trials,
            successes,
            rate,
            advantage: (rate - 0.5).abs(),
            ci_low: lo - 0.5,
            ci_high: hi - 0.5,
        }
    }

    /// For event-probability games: advantage is the event rate itself and
    /// the interval bounds that rate.
    pub fn event(successes: u64, trials: u64) -> Self {
        let (lo, hi) = wilson(successes, trials, Z95);
        let rate = ratio(successes, trials);
        Self {
            trials,
            successes,
            rate,
            advantage: rate,
            ci_low: lo,
            ci_high: hi,
        }
    }

    pub fn interval_contains_zero(&self) -> bool {
        self.ci_low <= 0.0 && 0.0 <= self.ci_high
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

fn ratio(successes: u64, trials: u64) -> f64 {
    if trials == 0 {
        0.0
    } else {
        successes as f64 / trials as f64
    }
}

/// Seed of trial `index` under `master`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let mut input = [0u8; 16];
    input[..8].copy_from_slice(&master.to_be_bytes());
    input[8..].copy_from_slice(&index.to_be_bytes());
    let key = blake3::derive_key("rfpop trial seed v1", &input);
    u64::from_be_bytes(key[..8].try_into().expect("8 bytes"))
}

/// Runs `trials` independent trials in parallel. Trial `i` gets an [`Rng`]
/// seeded with [`trial_seed`]`(master, i)`; results come back in index order,
/// so the output does not depend on scheduling.
pub fn run_trials<T, F>(master: u64, trials: u64, f: F) -> Vec<(u64, T)>
where
    T: Send,
    F: Fn(u64, &mut Rng) -> T + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(master, i);
            let mut rng = Rng::from_u64(seed);
            (seed, f(i, &mut rng))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_matches_closed_form() {
        // 50/100: centre 0.5, half = 1.96*sqrt(.25/100 + 3.8416/40000)/1.038416
        let (lo, hi) = wilson(50, 100, Z95);
        let half = Z95 * (0.0025f64 + Z95 * Z95 / 40000.0).sqrt() / (1.0 + Z95 * Z95 / 100.0);
        assert!((lo - (0.5 - half)).abs() < 1e-12);
        assert!((hi - (0.5 + half)).abs() < 1e-12);
    }

    #[test]
    fn extremes_stay_in_unit_interval() {
        let (lo, hi) = wilson(0, 10, Z95);
        assert!(lo.abs() < 1e-12);
        assert!(hi > 0.0 && hi < 0.35);
        let (lo, hi) = wilson(10, 10, Z95);
        assert!((hi - 1.0).abs() < 1e-12);
        assert!(lo > 0.65);
    }

    #[test]
    fn trials_are_ordered_and_reproducible() {
        let a = run_trials(9, 50, |i, rng| (i, rng.bits(64)));
        let b = run_trials(9, 50, |i, rng| (i, rng.bits(64)));
        assert_eq!(a, b);
        assert!(a.iter().enumerate().all(|(i, (_, (j, _)))| i as u64 == *j));
        assert_ne!(trial_seed(9, 0), trial_seed(9, 1));
    }

    #[test]
    fn guessing_advantage_is_absolute_bias() {
        let e = Estimate::guessing(30, 100);
        assert!((e.advantage - 0.2).abs() < 1e-12);
        assert!(e.ci_high < 0.0);
        assert!(!e.interval_contains_zero());
        assert!(Estimate::guessing(500, 1000).interval_contains_zero());
    }
}
