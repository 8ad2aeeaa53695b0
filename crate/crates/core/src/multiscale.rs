//! Multi-scale MWU: `2^S` nested MWU threads whose meta-days grow geometrically.
//!
//! Thread `k` (1-based) restarts every `H^k` days, treats `H^(k-1)` consecutive
//! days as one meta-day, and runs an `H`-step MWU with width `H^(k-1) B` on the
//! aggregated meta-day rewards. The learner plays the uniform mixture of all
//! thread strategies. Over `T = H^(2^S)` days its swap regret is at most
//! `2^-S (sum_t |r_t|_inf - |sum_t r_t|_inf) + delta T B` with
//! `delta = 2 sqrt(ln(n) / H)`; see [`multiscale_bound`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mwu::{Learner, Mwu};
use crate::numeric::{checked_pow, CompensatedSum};
use crate::regret::{range_slack, ActionDistribution, PlayRecord, RewardVector};

/// Schedule of a multi-scale learner. `T = H^(2^S)` always holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig", into = "RawConfig")]
pub struct MultiScaleConfig {
    n: usize,
    width: f64,
    scales: u32,
    block: u64,
    horizon: u64,
    epsilon: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawConfig {
    n: usize,
    #[serde(rename = "B")]
    width: f64,
    #[serde(rename = "S")]
    scales: u32,
    #[serde(rename = "H")]
    block: u64,
    #[serde(rename = "T")]
    horizon: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
}

impl TryFrom<RawConfig> for MultiScaleConfig {
    type Error = Error;

    fn try_from(raw: RawConfig) -> Result<Self> {
        let mut cfg = MultiScaleConfig::new(raw.n, raw.width, raw.scales, raw.block)?;
        if cfg.horizon != raw.horizon {
            return Err(Error::Configuration(format!(
                "T = {} does not equal H^(2^S) = {}",
                raw.horizon, cfg.horizon
            )));
        }
        cfg.epsilon = raw.epsilon;
        Ok(cfg)
    }
}

impl From<MultiScaleConfig> for RawConfig {
    fn from(c: MultiScaleConfig) -> Self {
        RawConfig {
            n: c.n,
            width: c.width,
            scales: c.scales,
            block: c.block,
            horizon: c.horizon,
            epsilon: c.epsilon,
        }
    }
}

/// `H^(2^S)` or a configuration error that reports the magnitude.
pub fn horizon_for(block: u64, scales: u32) -> Result<u64> {
    let exponent = 1u64
        .checked_shl(scales)
        .filter(|_| scales < 64)
        .ok_or_else(|| Error::Configuration(format!("S = {scales} gives too many threads")))?;
    checked_pow(block, exponent).ok_or_else(|| {
        let log10 = exponent as f64 * (block as f64).log10();
        Error::Configuration(format!(
            "horizon H^(2^S) = {block}^{exponent} ~ 10^{log10:.1} overflows 64-bit day counts; \
             use a larger epsilon or an explicit (H, S) schedule"
        ))
    })
}

impl MultiScaleConfig {
    /// Explicit schedule with block size `H = block` and `2^scales` threads.
    pub fn new(n: usize, width: f64, scales: u32, block: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("action count must be >= 1".into()));
        }
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::Parameter(format!("width must be > 0, got {width}")));
        }
        if block < 2 {
            return Err(Error::Parameter(format!("block size H must be >= 2, got {block}")));
        }
        let horizon = horizon_for(block, scales)?;
        Ok(Self {
            n,
            width,
            scales,
            block,
            horizon,
            epsilon: None,
        })
    }

    /// `S = ceil(log2(1/eps)) + 1`, `H = ceil(4 ln(max(n, 2)) 2^(2S))`, `T = H^(2^S)`.
    pub fn from_epsilon(epsilon: f64, n: usize, width: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::Parameter(format!(
                "epsilon must lie in (0, 1], got {epsilon}"
            )));
        }
        let scales = (1.0 / epsilon).log2();
        let scales = (scales - 1e-12).ceil().max(0.0) as u32 + 1;
        let ln_n = (n.max(2) as f64).ln();
        let block = (4.0 * ln_n * 4f64.powi(scales as i32) - 1e-9).ceil() as u64;
        let mut cfg = Self::new(n, width, scales, block)?;
        cfg.epsilon = Some(epsilon);
        Ok(cfg)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn scales(&self) -> u32 {
        self.scales
    }

    pub fn block(&self) -> u64 {
        self.block
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn thread_count(&self) -> usize {
        1usize << self.scales
    }

    /// `delta = 2 sqrt(ln(n) / H)`.
    pub fn delta(&self) -> f64 {
        2.0 * ((self.n as f64).ln() / self.block as f64).sqrt()
    }

    /// Per-day regret rate guaranteed by the deterministic bound in the worst case:
    /// `2^-S + delta`.
    pub fn guaranteed_rate(&self) -> f64 {
        (0.5f64).powi(self.scales as i32) + self.delta()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
            message: e.message().to_string(),
        })
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

#[derive(Debug, Clone)]
struct ScaleThread {
    meta_len: u64,
    restart_len: u64,
    width: f64,
    block: u64,
    mwu: Mwu,
    buffer: Vec<CompensatedSum>,
    strategy: Vec<f64>,
    inner_updates: u64,
}

impl ScaleThread {
    fn fresh_mwu(n: usize, block: u64, width: f64) -> Mwu {
        Mwu::new(n, block, width).expect("validated thread parameters")
    }

    fn restart(&mut self) {
        let n = self.buffer.len();
        self.mwu = Self::fresh_mwu(n, self.block, self.width);
        self.strategy = self.mwu.distribution().probs().to_vec();
    }
}

/// The multi-scale learner state for one horizon of `T = H^(2^S)` days.
#[derive(Debug, Clone)]
pub struct MultiScaleLearner {
    config: MultiScaleConfig,
    threads: Vec<ScaleThread>,
    day: u64,
}

impl MultiScaleLearner {
    pub fn new(config: MultiScaleConfig) -> Self {
        let n = config.n;
        let threads = (1..=config.thread_count() as u64)
            .map(|k| {
                let meta_len = config.block.pow((k - 1) as u32);
                let restart_len = meta_len * config.block;
                let width = meta_len as f64 * config.width;
                let mwu = ScaleThread::fresh_mwu(n, config.block, width);
                let strategy = mwu.distribution().probs().to_vec();
                ScaleThread {
                    meta_len,
                    restart_len,
                    width,
                    block: config.block,
                    mwu,
                    buffer: vec![CompensatedSum::new(); n],
                    strategy,
                    inner_updates: 0,
                }
            })
            .collect();
        Self {
            config,
            threads,
            day: 0,
        }
    }

    pub fn config(&self) -> &MultiScaleConfig {
        &self.config
    }

    /// Days observed so far.
    pub fn day(&self) -> u64 {
        self.day
    }

    pub fn is_finished(&self) -> bool {
        self.day >= self.config.horizon
    }

    /// Current strategy of thread `k` (0-based).
    pub fn thread_strategy(&self, k: usize) -> &[f64] {
        &self.threads[k].strategy
    }

    /// Cumulative meta-day rewards seen by thread `k` since its last restart.
    pub fn thread_cumulative(&self, k: usize) -> Vec<f64> {
        self.threads[k].mwu.cumulative()
    }

    /// Number of inner MWU updates thread `k` has performed over the whole run.
    pub fn thread_update_count(&self, k: usize) -> u64 {
        self.threads[k].inner_updates
    }

    /// Step size of thread `k`'s inner MWU.
    pub fn thread_step_size(&self, k: usize) -> f64 {
        self.threads[k].mwu.eta()
    }
}

impl Learner for MultiScaleLearner {
    fn n(&self) -> usize {
        self.config.n
    }

    fn act(&mut self) -> Result<ActionDistribution> {
        if self.is_finished() {
            return Err(Error::Lifecycle(format!(
                "multi-scale horizon of {} days exhausted",
                self.config.horizon
            )));
        }
        let n = self.config.n;
        let mut mix = vec![0.0; n];
        for thread in &self.threads {
            for (m, q) in mix.iter_mut().zip(&thread.strategy) {
                *m += q;
            }
        }
        let count = self.threads.len() as f64;
        for m in &mut mix {
            *m /= count;
        }
        Ok(ActionDistribution::from_normalized(mix))
    }

    fn update(&mut self, reward: &RewardVector) -> Result<()> {
        let n = self.config.n;
        if reward.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: reward.len(),
            });
        }
        if self.is_finished() {
            return Err(Error::Lifecycle(format!(
                "multi-scale learner updated past its horizon of {} days",
                self.config.horizon
            )));
        }
        let lo = reward.lo();
        let slack = range_slack(lo, self.config.width);
        for (i, &r) in reward.rewards().iter().enumerate() {
            if r < lo - slack || r > lo + self.config.width + slack {
                return Err(Error::WidthViolation {
                    action: i + 1,
                    value: r,
                    lo,
                    hi: lo + self.config.width,
                });
            }
        }
        self.day += 1;
        let day = self.day;
        for thread in &mut self.threads {
            for (acc, r) in thread.buffer.iter_mut().zip(reward.rewards()) {
                acc.add(r - lo);
            }
            if day.is_multiple_of(thread.meta_len) {
                let aggregate: Vec<f64> = thread.buffer.iter().map(CompensatedSum::value).collect();
                thread.mwu.accumulate(&aggregate);
                thread.inner_updates += 1;
                thread.buffer.iter_mut().for_each(|b| *b = CompensatedSum::new());
                thread.strategy = thread.mwu.distribution().probs().to_vec();
            }
            if day.is_multiple_of(thread.restart_len) {
                thread.restart();
            }
        }
        Ok(())
    }
}

/// Running evaluation of the deterministic multi-scale bound over a prefix.
#[derive(Debug, Clone)]
pub struct BoundAccumulator {
    n: usize,
    scales: u32,
    block: u64,
    width: f64,
    sum_of_max: CompensatedSum,
    totals: Vec<CompensatedSum>,
    days: u64,
}

impl BoundAccumulator {
    pub fn new(n: usize, scales: u32, block: u64, width: f64) -> Self {
        Self {
            n,
            scales,
            block,
            width,
            sum_of_max: CompensatedSum::new(),
            totals: vec![CompensatedSum::new(); n],
            days: 0,
        }
    }

    /// Adds one day; rewards are shifted to start at the vector's offset.
    pub fn observe(&mut self, reward: &RewardVector) -> Result<()> {
        if reward.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: reward.len(),
            });
        }
        self.sum_of_max.add(reward.shifted_max());
        for (acc, r) in self.totals.iter_mut().zip(reward.rewards()) {
            acc.add(r - reward.lo());
        }
        self.days += 1;
        Ok(())
    }

    pub fn days(&self) -> u64 {
        self.days
    }

    /// `2^-S (sum_t |r_t|_inf - |sum_t r_t|_inf) + delta t B` at the current day count `t`.
    pub fn bound(&self) -> f64 {
        let max_total = self
            .totals
            .iter()
            .map(CompensatedSum::value)
            .fold(f64::NEG_INFINITY, f64::max);
        let delta = 2.0 * ((self.n as f64).ln() / self.block as f64).sqrt();
        let spread = self.sum_of_max.value() - max_total;
        0.5f64.powi(self.scales as i32) * spread + delta * self.days as f64 * self.width
    }
}

/// The deterministic multi-scale swap-regret bound for a full-length record.
pub fn multiscale_bound(record: &PlayRecord, scales: u32, block: u64, width: f64) -> Result<f64> {
    let n = record
        .n()
        .ok_or_else(|| Error::Structural("empty play record".into()))?;
    if block == 0 {
        return Err(Error::Parameter("block size must be >= 1".into()));
    }
    let expected = horizon_for(block, scales)?;
    if record.horizon() as u64 != expected {
        return Err(Error::Structural(format!(
            "record has {} days, bound needs H^(2^S) = {expected}",
            record.horizon()
        )));
    }
    let mut acc = BoundAccumulator::new(n, scales, block, width);
    for (_, r) in record.days() {
        acc.observe(r)?;
    }
    Ok(acc.bound())
}
