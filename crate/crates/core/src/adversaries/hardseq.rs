//! Depth-first hard reward sequence over a `K`-ary tree of actions.
//!
//! The tree has levels `L` (root) down to `0` (leaves). Leaf `a` (read as a
//! base-`K` number) owns actions `2a+1, 2a+2` (1-based). Visiting a leaf plays a
//! two-coin game for `H = round(1/(400 Delta^2))` days: one of its two actions
//! pays `L/(16(L+1)) + Bern(1/2 + Delta)/(16(L+1))`, the other the same with a
//! fair coin. Actions of passed leaves pay `-1` from then on. Every other action
//! pays `(L - l)/(16(L+1))`, where `l` is the level of the lowest node on the
//! current root-to-leaf path containing it. After each child of an internal
//! node, the rest of that node's subtree is skipped with probability `1/(2K)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Adversary;
use crate::error::{Error, Result};
use crate::numeric::seeded_rng;
use crate::regret::{ActionDistribution, RewardVector};

/// Parameters of the hard sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHardSeq", into = "RawHardSeq")]
pub struct HardSeqConfig {
    branching: usize,
    depth: u32,
    delta: f64,
    seed: u64,
    block: u64,
    actions: usize,
}

#[derive(Serialize, Deserialize)]
struct RawHardSeq {
    #[serde(rename = "K")]
    branching: usize,
    #[serde(rename = "L")]
    depth: u32,
    #[serde(rename = "Delta")]
    delta: f64,
    seed: u64,
}

impl TryFrom<RawHardSeq> for HardSeqConfig {
    type Error = Error;

    fn try_from(raw: RawHardSeq) -> Result<Self> {
        HardSeqConfig::new(raw.branching, raw.depth, raw.delta, raw.seed)
    }
}

impl From<HardSeqConfig> for RawHardSeq {
    fn from(c: HardSeqConfig) -> Self {
        RawHardSeq {
            branching: c.branching,
            depth: c.depth,
            delta: c.delta,
            seed: c.seed,
        }
    }
}

/// `round(1/(400 Delta^2))`, at least one day.
pub fn coin_block(delta: f64) -> u64 {
    (1.0 / (400.0 * delta * delta)).round().max(1.0) as u64
}

pub(crate) fn validate_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 0.05 + 1e-15) {
        return Err(Error::Parameter(format!(
            "coin bias must lie in (0, 1/20], got {delta}"
        )));
    }
    Ok(())
}

impl HardSeqConfig {
    pub fn new(branching: usize, depth: u32, delta: f64, seed: u64) -> Result<Self> {
        if branching < 1 {
            return Err(Error::Parameter("branching factor K must be >= 1".into()));
        }
        validate_delta(delta)?;
        let leaves = branching
            .checked_pow(depth)
            .ok_or_else(|| Error::Configuration(format!("K^L = {branching}^{depth} overflows")))?;
        let actions = leaves
            .checked_mul(2)
            .ok_or_else(|| Error::Configuration("2 K^L overflows".into()))?;
        Ok(Self {
            branching,
            depth,
            delta,
            seed,
            block: coin_block(delta),
            actions,
        })
    }

    /// `K`.
    pub fn branching(&self) -> usize {
        self.branching
    }

    /// `L`.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Days per leaf visit.
    pub fn block(&self) -> u64 {
        self.block
    }

    /// Skip probability `1/(2K)`.
    pub fn skip_probability(&self) -> f64 {
        1.0 / (2.0 * self.branching as f64)
    }

    /// `n = 2 K^L`.
    pub fn actions(&self) -> usize {
        self.actions
    }

    /// Longest possible stream, `H K^L` days.
    pub fn max_length(&self) -> u64 {
        self.block * (self.actions / 2) as u64
    }

    /// Reward unit `1/(16(L+1))`.
    pub fn unit(&self) -> f64 {
        1.0 / (16.0 * (f64::from(self.depth) + 1.0))
    }

    /// Declared reward offset.
    pub fn lo(&self) -> f64 {
        -1.0
    }

    /// Declared reward width `1 + 1/16`.
    pub fn width(&self) -> f64 {
        1.0 + 1.0 / 16.0
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            line: 0,
            message: e.message().to_string(),
        })
    }
}

/// `E[T] = H (sum_{k<K} (1 - 1/(2K))^k)^L`.
pub fn expected_length(config: &HardSeqConfig) -> f64 {
    let keep = 1.0 - config.skip_probability();
    let c_k: f64 = (0..config.branching).map(|k| keep.powi(k as i32)).sum();
    config.block as f64 * c_k.powi(config.depth as i32)
}

#[derive(Debug, Clone)]
struct Frame {
    level: u32,
    first_action: usize,
    next_child: usize,
}

#[derive(Debug, Clone)]
struct ActiveLeaf {
    first_action: usize,
    biased: usize,
    remaining: u64,
}

/// Lazily generated hard sequence; memory is `O(n + L)`.
#[derive(Debug, Clone)]
pub struct HardSequence {
    config: HardSeqConfig,
    rng: ChaCha8Rng,
    template: Vec<f64>,
    stack: Vec<Frame>,
    leaf: Option<ActiveLeaf>,
    visited: Vec<(usize, usize)>,
    days: u64,
    finished_reported: bool,
}

impl HardSequence {
    pub fn new(config: HardSeqConfig) -> Self {
        let rng = seeded_rng(config.seed, "hardseq");
        let mut seq = Self {
            template: vec![0.0; config.actions],
            rng,
            stack: Vec::with_capacity(config.depth as usize),
            leaf: None,
            visited: Vec::new(),
            days: 0,
            finished_reported: false,
            config,
        };
        seq.enter(seq.config.depth, 0);
        seq
    }

    pub fn config(&self) -> &HardSeqConfig {
        &self.config
    }

    /// Actions owned by a node at `level` are `first_action .. first_action + 2K^level`.
    fn node_size(&self, level: u32) -> usize {
        2 * self.config.branching.pow(level)
    }

    fn enter(&mut self, level: u32, first_action: usize) {
        if level == 0 {
            let biased = usize::from(self.rng.gen_bool(0.5));
            self.visited.push((first_action / 2, biased));
            self.leaf = Some(ActiveLeaf {
                first_action,
                biased,
                remaining: self.config.block,
            });
            return;
        }
        let fill = f64::from(self.config.depth - level) * self.config.unit();
        let size = self.node_size(level);
        self.template[first_action..first_action + size].fill(fill);
        self.stack.push(Frame {
            level,
            first_action,
            next_child: 1,
        });
        self.enter(level - 1, first_action);
    }

    /// Moves past a completed child, skipping or descending as the coin dictates.
    fn advance(&mut self) {
        while let Some(frame) = self.stack.last_mut() {
            if frame.next_child < self.config.branching {
                if self.rng.gen_bool(self.config.skip_probability()) {
                    let size = 2 * self.config.branching.pow(frame.level);
                    let start = frame.first_action;
                    self.template[start..start + size].fill(-1.0);
                    self.stack.pop();
                    continue;
                }
                let child = frame.next_child;
                frame.next_child += 1;
                let child_level = frame.level - 1;
                let start = frame.first_action + child * self.node_size(child_level);
                self.enter(child_level, start);
                return;
            }
            self.stack.pop();
        }
    }

    pub fn is_finished(&self) -> bool {
        self.leaf.is_none()
    }

    /// Days emitted so far; equals the realized length once finished.
    pub fn days_emitted(&self) -> u64 {
        self.days
    }

    /// Visited leaves in order, with the 0/1 offset of each leaf's biased action.
    pub fn visited_leaves(&self) -> &[(usize, usize)] {
        &self.visited
    }

    /// Current reward template (entries of the active leaf are re-drawn each day).
    pub fn template(&self) -> &[f64] {
        &self.template
    }

    /// Next day's reward vector, `None` once the root has been completed or skipped.
    pub fn next_day(&mut self) -> Result<Option<RewardVector>> {
        let Some(leaf) = self.leaf.as_mut() else {
            if self.finished_reported {
                return Err(Error::Lifecycle("hard sequence already finished".into()));
            }
            self.finished_reported = true;
            return Ok(None);
        };
        let unit = self.config.unit();
        let base = f64::from(self.config.depth) * unit;
        let mut rewards = self.template.clone();
        let first = leaf.first_action;
        let biased = leaf.biased;
        for offset in 0..2 {
            let p = if offset == biased {
                0.5 + self.config.delta
            } else {
                0.5
            };
            let coin = f64::from(u8::from(self.rng.gen_bool(p)));
            rewards[first + offset] = base + coin * unit;
        }
        leaf.remaining -= 1;
        self.days += 1;
        if leaf.remaining == 0 {
            self.template[first] = -1.0;
            self.template[first + 1] = -1.0;
            self.leaf = None;
            self.advance();
        }
        RewardVector::with_offset(rewards, self.config.lo(), self.config.width()).map(Some)
    }

    /// Runs the stream to exhaustion and returns its length.
    pub fn run_to_end(&mut self) -> Result<u64> {
        while self.next_day()?.is_some() {}
        Ok(self.days)
    }
}

impl Adversary for HardSequence {
    fn n(&self) -> usize {
        self.config.actions
    }

    fn lo(&self) -> f64 {
        self.config.lo()
    }

    fn width(&self) -> f64 {
        self.config.width()
    }

    fn next_reward(&mut self, _played: &ActionDistribution) -> Result<Option<RewardVector>> {
        self.next_day()
    }
}
