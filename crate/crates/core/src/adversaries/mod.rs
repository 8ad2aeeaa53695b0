//! Reward-stream generators and the learner/adversary play loop.

mod hardseq;
mod twocoin;

pub use hardseq::{expected_length, HardSeqConfig, HardSequence};
pub use twocoin::{biased_swap_gain, predicted_swap_gain, TwoCoinConfig, TwoCoinGame};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mwu::Learner;
use crate::regret::{ActionDistribution, PlayRecord, RewardVector};

/// A source of reward vectors. Adaptive adversaries may inspect the strategy
/// the learner committed to for the current day; oblivious ones ignore it.
pub trait Adversary {
    fn n(&self) -> usize;

    /// Lower end of the reward range.
    fn lo(&self) -> f64 {
        0.0
    }

    /// Width `B` of the reward range.
    fn width(&self) -> f64 {
        1.0
    }

    /// Reward for the day on which the learner plays `played`; `None` once the
    /// stream is exhausted. Calling again after `None` is a lifecycle error.
    fn next_reward(&mut self, played: &ActionDistribution) -> Result<Option<RewardVector>>;
}

impl<A: Adversary + ?Sized> Adversary for Box<A> {
    fn n(&self) -> usize {
        (**self).n()
    }

    fn lo(&self) -> f64 {
        (**self).lo()
    }

    fn width(&self) -> f64 {
        (**self).width()
    }

    fn next_reward(&mut self, played: &ActionDistribution) -> Result<Option<RewardVector>> {
        (**self).next_reward(played)
    }
}

/// Runs `learner` against `adversary` for at most `max_days` days.
pub fn play<L, A>(learner: &mut L, adversary: &mut A, max_days: u64) -> Result<PlayRecord>
where
    L: Learner + ?Sized,
    A: Adversary + ?Sized,
{
    if learner.n() != adversary.n() {
        return Err(Error::Dimension {
            expected: learner.n(),
            found: adversary.n(),
        });
    }
    let mut record = PlayRecord::with_capacity(max_days.min(1 << 20) as usize);
    for _ in 0..max_days {
        let played = learner.act()?;
        let Some(reward) = adversary.next_reward(&played)? else {
            break;
        };
        learner.update(&reward)?;
        record.push(played, reward)?;
    }
    Ok(record)
}

/// Distribution of i.i.d. random rewards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardDistribution {
    /// Uniform on `[0, 1]`.
    Uniform,
    /// `{0, 1}` with the given success probability.
    Bernoulli(f64),
}

/// Oblivious adversary drawing i.i.d. rewards in `[0, 1]` for every action.
#[derive(Debug, Clone)]
pub struct RandomRewards {
    n: usize,
    kind: RewardDistribution,
    rng: ChaCha8Rng,
}

impl RandomRewards {
    pub fn new(n: usize, kind: RewardDistribution, rng: ChaCha8Rng) -> Self {
        Self { n, kind, rng }
    }

    pub fn draw(&mut self) -> RewardVector {
        let rewards = (0..self.n)
            .map(|_| match self.kind {
                RewardDistribution::Uniform => self.rng.gen::<f64>(),
                RewardDistribution::Bernoulli(p) => f64::from(u8::from(self.rng.gen_bool(p))),
            })
            .collect();
        RewardVector::new(rewards, 1.0).expect("rewards in [0, 1]")
    }
}

impl Adversary for RandomRewards {
    fn n(&self) -> usize {
        self.n
    }

    fn next_reward(&mut self, _played: &ActionDistribution) -> Result<Option<RewardVector>> {
        Ok(Some(self.draw()))
    }
}

/// Strong adaptive stress adversary: reward 1 on the action with the least
/// cumulative probability mass (including the current day), 0 elsewhere.
#[derive(Debug, Clone)]
pub struct AdaptiveBestResponse {
    mass: Vec<f64>,
}

impl AdaptiveBestResponse {
    pub fn new(n: usize) -> Self {
        Self { mass: vec![0.0; n] }
    }

    /// Rewards for the day given the strategy just committed.
    pub fn respond(&mut self, played: &ActionDistribution) -> Result<RewardVector> {
        if played.len() != self.mass.len() {
            return Err(Error::Dimension {
                expected: self.mass.len(),
                found: played.len(),
            });
        }
        for (m, p) in self.mass.iter_mut().zip(played.probs()) {
            *m += p;
        }
        let mut target = 0;
        for (i, &m) in self.mass.iter().enumerate() {
            if m < self.mass[target] {
                target = i;
            }
        }
        let mut rewards = vec![0.0; self.mass.len()];
        rewards[target] = 1.0;
        RewardVector::new(rewards, 1.0)
    }
}

impl Adversary for AdaptiveBestResponse {
    fn n(&self) -> usize {
        self.mass.len()
    }

    fn next_reward(&mut self, played: &ActionDistribution) -> Result<Option<RewardVector>> {
        self.respond(played).map(Some)
    }
}

/// Extends a finite stream to a fixed horizon with all-zero reward vectors.
#[derive(Debug, Clone)]
pub struct ZeroPadded<A> {
    inner: A,
    horizon: u64,
    emitted: u64,
    padded: u64,
    inner_done: bool,
    finished: bool,
}

impl<A: Adversary> ZeroPadded<A> {
    pub fn new(inner: A, horizon: u64) -> Self {
        Self {
            inner,
            horizon,
            emitted: 0,
            padded: 0,
            inner_done: false,
            finished: false,
        }
    }

    pub fn inner(&self) -> &A {
        &self.inner
    }

    /// Number of zero days appended after the inner stream ended.
    pub fn padded_days(&self) -> u64 {
        self.padded
    }

    pub fn is_padded(&self) -> bool {
        self.padded > 0
    }
}

impl<A: Adversary> Adversary for ZeroPadded<A> {
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn lo(&self) -> f64 {
        self.inner.lo()
    }

    fn width(&self) -> f64 {
        self.inner.width()
    }

    fn next_reward(&mut self, played: &ActionDistribution) -> Result<Option<RewardVector>> {
        if self.finished {
            return Err(Error::Lifecycle("padded stream already finished".into()));
        }
        if self.emitted >= self.horizon {
            self.finished = true;
            return Ok(None);
        }
        if !self.inner_done {
            if let Some(r) = self.inner.next_reward(played)? {
                self.emitted += 1;
                return Ok(Some(r));
            }
            self.inner_done = true;
        }
        self.emitted += 1;
        self.padded += 1;
        let zeros = vec![0.0; self.inner.n()];
        RewardVector::with_offset(zeros, self.inner.lo(), self.inner.width()).map(Some)
    }
}
