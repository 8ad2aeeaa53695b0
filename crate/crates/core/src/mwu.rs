//! Multiplicative weights over `n` experts with full-information feedback.

use crate::error::{Error, Result};
use crate::numeric::{softmax_scaled, CompensatedSum};
use crate::regret::{range_slack, ActionDistribution, RewardVector};

/// A full-information online learner.
pub trait Learner {
    fn n(&self) -> usize;

    /// Strategy for the current day.
    fn act(&mut self) -> Result<ActionDistribution>;

    /// Observe the current day's rewards and advance to the next day.
    fn update(&mut self, reward: &RewardVector) -> Result<()>;
}

impl<L: Learner + ?Sized> Learner for Box<L> {
    fn n(&self) -> usize {
        (**self).n()
    }

    fn act(&mut self) -> Result<ActionDistribution> {
        (**self).act()
    }

    fn update(&mut self, reward: &RewardVector) -> Result<()> {
        (**self).update(reward)
    }
}

/// Step size `sqrt(ln(n) / T) / B`.
pub fn default_step_size(n: usize, horizon: u64, width: f64) -> f64 {
    ((n as f64).ln() / horizon as f64).sqrt() / width
}

/// External-regret guarantee `2 B sqrt(T ln n)`.
pub fn regret_bound(n: usize, horizon: u64, width: f64) -> f64 {
    2.0 * width * (horizon as f64 * (n as f64).ln()).sqrt()
}

/// Multiplicative weights: `p_t(i) ∝ exp(eta * sum_{s<t} r_s(i))`.
#[derive(Debug, Clone)]
pub struct Mwu {
    n: usize,
    horizon: u64,
    width: f64,
    eta: f64,
    cumulative: Vec<CompensatedSum>,
    updates: u64,
}

impl Mwu {
    /// Learner for `horizon` days of rewards with range width `width`, using
    /// [`default_step_size`].
    pub fn new(n: usize, horizon: u64, width: f64) -> Result<Self> {
        validate(n, horizon, width)?;
        Self::with_step_size(n, horizon, width, default_step_size(n, horizon, width))
    }

    pub fn with_step_size(n: usize, horizon: u64, width: f64, eta: f64) -> Result<Self> {
        validate(n, horizon, width)?;
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::Parameter(format!("step size must be >= 0, got {eta}")));
        }
        Ok(Self {
            n,
            horizon,
            width,
            eta,
            cumulative: vec![CompensatedSum::new(); n],
            updates: 0,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn cumulative(&self) -> Vec<f64> {
        self.cumulative.iter().map(CompensatedSum::value).collect()
    }

    /// `ln(n)/eta + eta T B^2`, the bound the analysis proves before choosing eta.
    pub fn intermediate_bound(&self) -> f64 {
        let ln_n = (self.n as f64).ln();
        let first = if ln_n == 0.0 { 0.0 } else { ln_n / self.eta };
        first + self.eta * self.horizon as f64 * self.width * self.width
    }

    /// The current strategy, computed in the max-shifted log domain.
    pub fn distribution(&self) -> ActionDistribution {
        let totals = self.cumulative();
        ActionDistribution::from_normalized(softmax_scaled(&totals, self.eta))
    }

    /// Adds a reward vector without range or horizon checks.
    pub(crate) fn accumulate(&mut self, rewards: &[f64]) {
        debug_assert_eq!(rewards.len(), self.n);
        for (acc, r) in self.cumulative.iter_mut().zip(rewards) {
            acc.add(*r);
        }
        self.updates += 1;
    }
}

fn validate(n: usize, horizon: u64, width: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::Parameter("action count must be >= 1".into()));
    }
    if horizon == 0 {
        return Err(Error::Parameter("horizon must be >= 1".into()));
    }
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::Parameter(format!("width must be > 0, got {width}")));
    }
    Ok(())
}

impl Learner for Mwu {
    fn n(&self) -> usize {
        self.n
    }

    fn act(&mut self) -> Result<ActionDistribution> {
        if self.updates >= self.horizon {
            return Err(Error::Lifecycle(format!(
                "MWU horizon of {} days exhausted",
                self.horizon
            )));
        }
        Ok(self.distribution())
    }

    fn update(&mut self, reward: &RewardVector) -> Result<()> {
        if reward.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: reward.len(),
            });
        }
        if self.updates >= self.horizon {
            return Err(Error::Lifecycle(format!(
                "MWU updated more than its horizon of {} days",
                self.horizon
            )));
        }
        let lo = reward.lo();
        let slack = range_slack(lo, self.width);
        for (i, &r) in reward.rewards().iter().enumerate() {
            if r < lo - slack || r > lo + self.width + slack {
                return Err(Error::WidthViolation {
                    action: i + 1,
                    value: r,
                    lo,
                    hi: lo + self.width,
                });
            }
        }
        self.accumulate(reward.rewards());
        Ok(())
    }
}

/// Plays the uniform distribution forever.
#[derive(Debug, Clone)]
pub struct UniformLearner {
    n: usize,
}

impl UniformLearner {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl Learner for UniformLearner {
    fn n(&self) -> usize {
        self.n
    }

    fn act(&mut self) -> Result<ActionDistribution> {
        Ok(ActionDistribution::uniform(self.n))
    }

    fn update(&mut self, reward: &RewardVector) -> Result<()> {
        if reward.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: reward.len(),
            });
        }
        Ok(())
    }
}
