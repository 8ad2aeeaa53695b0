//! No-regret dynamics over pure-strategy spaces of extensive-form games.
//!
//! Each player follows the multi-scale schedule with one implicit MWU per
//! thread: a thread stores only per-terminal reach weights and rebuilds its
//! partition tables at the end of each meta-day. Every day `K` joint profiles
//! are drawn (each player picks one of its threads uniformly, then samples
//! from that thread's tables); the other players' parts of those profiles,
//! weighted `1/K`, form each player's reward for the day.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use serde::Serialize;

use super::partition::{build_partition, PartitionTables, TerminalWeights};
use super::tree::{eval_unchecked, GameTree, PureStrategy};
use crate::error::{Error, Result};
use crate::multiscale::MultiScaleConfig;
use crate::nfg::sample_count;
use crate::numeric::seeded_rng;
use crate::regret::{csv_error, RegretTracker};

/// Largest pure-strategy count per player accepted by [`verify_nfce`].
pub const NFCE_VERIFY_LIMIT: u64 = 12;

/// Tolerance on the total weight of a profile distribution.
const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Distribution over pure strategy profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfileDist {
    atoms: Vec<(f64, Vec<PureStrategy>)>,
}

impl StrategyProfileDist {
    pub fn new(atoms: Vec<(f64, Vec<PureStrategy>)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Structural("distribution without atoms".into()));
        }
        let players = atoms[0].1.len();
        if atoms.iter().any(|(w, p)| !(*w >= 0.0) || p.len() != players) {
            return Err(Error::Validation("atoms need nonnegative weights and full profiles".into()));
        }
        let total: f64 = atoms.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::Validation(format!("atom weights sum to {total}")));
        }
        Ok(Self { atoms })
    }

    pub fn point_mass(profile: Vec<PureStrategy>) -> Self {
        Self {
            atoms: vec![(1.0, profile)],
        }
    }

    pub fn atoms(&self) -> &[(f64, Vec<PureStrategy>)] {
        &self.atoms
    }

    /// CSV with header `atom,atom_weight,player,infoset,action` using labels.
    pub fn write_csv<W: Write>(&self, tree: &GameTree, writer: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            atom: usize,
            atom_weight: f64,
            player: usize,
            infoset: &'a str,
            action: &'a str,
        }
        let mut w = csv::Writer::from_writer(writer);
        for (k, (weight, profile)) in self.atoms.iter().enumerate() {
            for (p, s) in profile.iter().enumerate() {
                for (&h, &a) in tree.player_infosets(p).iter().zip(s.actions()) {
                    let info = &tree.infosets()[h];
                    w.serialize(Row {
                        atom: k + 1,
                        atom_weight: *weight,
                        player: p + 1,
                        infoset: &info.label,
                        action: &info.actions[a],
                    })
                    .map_err(csv_error)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Best swap per player, with swaps given as strategy-index maps.
#[derive(Debug, Clone, PartialEq)]
pub struct NfceCertificate {
    pub gains: Vec<f64>,
    pub swaps: Vec<Vec<usize>>,
    pub epsilon_achieved: f64,
}

/// Exact best swap gain of every player under `dist`, separable over
/// recommended strategies.
pub fn verify_nfce(tree: &GameTree, dist: &StrategyProfileDist) -> Result<NfceCertificate> {
    let m = tree.players();
    let mut gains = Vec::with_capacity(m);
    let mut swaps = Vec::with_capacity(m);
    for (_, profile) in dist.atoms() {
        tree.check_profile(profile)?;
    }
    for i in 0..m {
        let count = tree
            .strategy_count(i)
            .filter(|&c| c <= NFCE_VERIFY_LIMIT)
            .ok_or_else(|| {
                Error::Capacity(format!(
                    "player {} has more than {NFCE_VERIFY_LIMIT} pure strategies",
                    i + 1
                ))
            })? as usize;
        let strategies = tree.enumerate_strategies(i, NFCE_VERIFY_LIMIT)?;
        let mut tracker = RegretTracker::new(count);
        let mut played = vec![0.0; count];
        for (weight, profile) in dist.atoms() {
            let own = tree.strategy_index(i, &profile[i]) as usize;
            let mut deviation = profile.clone();
            let rewards: Vec<f64> = strategies
                .iter()
                .map(|s| {
                    deviation[i] = s.clone();
                    eval_unchecked(tree, &deviation)[i]
                })
                .collect();
            played[own] = 1.0;
            tracker.observe_weighted(*weight, &played, &rewards)?;
            played[own] = 0.0;
        }
        let (gain, phi) = tracker.swap();
        gains.push(gain.max(0.0));
        swaps.push(phi.as_slice().to_vec());
    }
    let epsilon_achieved = gains.iter().copied().fold(0.0, f64::max);
    Ok(NfceCertificate {
        gains,
        swaps,
        epsilon_achieved,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NfceConfig {
    pub epsilon: f64,
    /// Explicit `(H, S)`; `None` derives it from `epsilon / 2` and the largest `|S_i|`.
    pub schedule: Option<(u64, u32)>,
    /// Joint profiles drawn per day; `None` uses the normal-form sample count.
    pub samples: Option<usize>,
}

impl NfceConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            schedule: None,
            samples: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NfceOutcome {
    pub distribution: StrategyProfileDist,
    /// Present when every player has at most [`NFCE_VERIFY_LIMIT`] strategies.
    pub certificate: Option<NfceCertificate>,
    pub horizon: u64,
    pub samples: usize,
    pub block: u64,
    pub scales: u32,
}

struct ImplicitThread {
    meta_len: u64,
    restart_len: u64,
    eta: f64,
    cumulative: TerminalWeights,
    buffer: TerminalWeights,
    tables: PartitionTables,
}

impl ImplicitThread {
    fn end_of_day(&mut self, tree: &GameTree, day: u64) -> Result<()> {
        let mut dirty = false;
        if day.is_multiple_of(self.meta_len) {
            self.cumulative.absorb(&self.buffer);
            self.buffer.clear();
            dirty = true;
        }
        if day.is_multiple_of(self.restart_len) {
            self.cumulative.clear();
            dirty = true;
        }
        if dirty {
            self.tables = build_partition(tree, &self.cumulative, self.eta)?;
        }
        Ok(())
    }
}

pub fn run_nfce_dynamics(tree: &GameTree, config: &NfceConfig, seed: u64) -> Result<NfceOutcome> {
    let eps = config.epsilon;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Parameter(format!("epsilon must lie in (0, 1], got {eps}")));
    }
    let m = tree.players();
    let largest = (0..m)
        .map(|i| tree.strategy_count(i).map_or(usize::MAX, |c| usize::try_from(c).unwrap_or(usize::MAX)))
        .max()
        .unwrap_or(1);
    let schedule = match config.schedule {
        Some((block, scales)) => MultiScaleConfig::new(largest.max(1), 1.0, scales, block)?,
        None => MultiScaleConfig::from_epsilon(eps / 2.0, largest, 1.0)?,
    };
    let samples = match config.samples {
        Some(0) => return Err(Error::Parameter("sample count K must be >= 1".into())),
        Some(k) => k,
        None => sample_count(m, largest, eps)?,
    };
    let block = schedule.block();
    let horizon = schedule.horizon();

    let mut players: Vec<Vec<ImplicitThread>> = Vec::with_capacity(m);
    for i in 0..m {
        let log_s = tree.log_strategy_count(i);
        let mut threads = Vec::with_capacity(schedule.thread_count());
        let mut meta_len = 1u64;
        for _ in 0..schedule.thread_count() {
            let eta = (log_s / block as f64).sqrt() / meta_len as f64;
            let zero = TerminalWeights::new(tree, i);
            threads.push(ImplicitThread {
                meta_len,
                restart_len: meta_len * block,
                eta,
                tables: build_partition(tree, &zero, eta)?,
                cumulative: zero.clone(),
                buffer: zero,
            });
            meta_len = meta_len.saturating_mul(block);
        }
        players.push(threads);
    }

    let mut rng = seeded_rng(seed, "efg-dynamics");
    let mut output: BTreeMap<Vec<PureStrategy>, u64> = BTreeMap::new();
    let share = 1.0 / samples as f64;
    for day in 1..=horizon {
        let mut today: BTreeMap<Vec<PureStrategy>, u64> = BTreeMap::new();
        for _ in 0..samples {
            let profile: Vec<PureStrategy> = players
                .iter()
                .map(|threads| {
                    let t = rng.gen_range(0..threads.len());
                    threads[t].tables.sample(&mut rng)
                })
                .collect();
            *today.entry(profile).or_insert(0) += 1;
        }
        for (i, threads) in players.iter_mut().enumerate() {
            let mut reward = TerminalWeights::new(tree, i);
            for (profile, &count) in &today {
                reward.add_profile(tree, count as f64 * share, profile)?;
            }
            for thread in threads.iter_mut() {
                thread.buffer.absorb(&reward);
                thread.end_of_day(tree, day)?;
            }
        }
        for (profile, count) in today {
            *output.entry(profile).or_insert(0) += count;
        }
    }

    let total = (horizon as f64) * samples as f64;
    let distribution =
        StrategyProfileDist::new(output.into_iter().map(|(p, c)| (c as f64 / total, p)).collect())?;
    let verifiable = (0..m).all(|i| tree.strategy_count(i).is_some_and(|c| c <= NFCE_VERIFY_LIMIT));
    let certificate = if verifiable {
        Some(verify_nfce(tree, &distribution)?)
    } else {
        None
    };
    Ok(NfceOutcome {
        distribution,
        certificate,
        horizon,
        samples,
        block,
        scales: schedule.scales(),
    })
}
