//! The two-coin game: one fair coin, one coin with bias `1/2 + Delta`, and a
//! dummy action paying 0, played for `H = round(1/(400 Delta^2))` days.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::hardseq::{coin_block, validate_delta};
use super::Adversary;
use crate::error::{Error, Result};
use crate::numeric::seeded_rng;
use crate::regret::{ActionDistribution, RewardVector};

#[derive(Debug, Clone, PartialEq)]
pub struct TwoCoinConfig {
    delta: f64,
    block: u64,
    seed: u64,
}

impl TwoCoinConfig {
    pub fn new(delta: f64, seed: u64) -> Result<Self> {
        validate_delta(delta)?;
        Ok(Self {
            delta,
            block: coin_block(delta),
            seed,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Number of days `H`.
    pub fn block(&self) -> u64 {
        self.block
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// One seeded instance of the game. Action 0 and 1 are the coins, 2 the dummy.
#[derive(Debug, Clone)]
pub struct TwoCoinGame {
    config: TwoCoinConfig,
    biased: usize,
    rng: ChaCha8Rng,
    day: u64,
    finished_reported: bool,
}

impl TwoCoinGame {
    pub fn new(config: TwoCoinConfig) -> Self {
        let mut rng = seeded_rng(config.seed, "twocoin");
        let biased = usize::from(rng.gen_bool(0.5));
        Self {
            config,
            biased,
            rng,
            day: 0,
            finished_reported: false,
        }
    }

    /// Index (0 or 1) of the biased coin.
    pub fn biased(&self) -> usize {
        self.biased
    }

    pub fn config(&self) -> &TwoCoinConfig {
        &self.config
    }

    pub fn remaining(&self) -> u64 {
        self.config.block - self.day
    }

    /// Draws both coins for the next day.
    pub fn next_day(&mut self) -> Result<RewardVector> {
        if self.day >= self.config.block {
            return Err(Error::Lifecycle(format!(
                "two-coin game of {} days exhausted",
                self.config.block
            )));
        }
        self.day += 1;
        let mut rewards = [0.0; 3];
        for (coin, slot) in rewards.iter_mut().take(2).enumerate() {
            let p = if coin == self.biased {
                0.5 + self.config.delta
            } else {
                0.5
            };
            *slot = f64::from(u8::from(self.rng.gen_bool(p)));
        }
        RewardVector::new(rewards.to_vec(), 1.0)
    }
}

impl Adversary for TwoCoinGame {
    fn n(&self) -> usize {
        3
    }

    fn next_reward(&mut self, _played: &ActionDistribution) -> Result<Option<RewardVector>> {
        if self.day >= self.config.block {
            if self.finished_reported {
                return Err(Error::Lifecycle("two-coin game already finished".into()));
            }
            self.finished_reported = true;
            return Ok(None);
        }
        self.next_day().map(Some)
    }
}

/// Gain from moving all coin mass onto the biased coin:
/// `sum_h (p_h(1) + p_h(2)) r_h(i*) - (p_h(1) r_h(1) + p_h(2) r_h(2))`.
pub fn biased_swap_gain(days: &[(ActionDistribution, RewardVector)], biased: usize) -> f64 {
    days.iter()
        .map(|(p, r)| {
            let (p, r) = (p.probs(), r.rewards());
            (p[0] + p[1]) * r[biased] - (p[0] * r[0] + p[1] * r[1])
        })
        .sum()
}

/// Expected biased-swap gain of a fixed policy that splits `coin_mass` evenly
/// over the two coins every day: `Delta/2 * coin_mass * H`.
pub fn predicted_swap_gain(delta: f64, coin_mass: f64, days: u64) -> f64 {
    0.5 * delta * coin_mass * days as f64
}
