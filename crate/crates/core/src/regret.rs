//! Core online-learning types and exact regret accounting.
//!
//! Actions are 0-based in the API. File formats and CLI output use 1-based
//! action numbers.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{argmax_first, CompensatedSum};

/// Absolute tolerance on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// A probability vector over `n` actions.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    probs: Vec<f64>,
}

impl ActionDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Structural("distribution over zero actions".into()));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::Parameter(format!(
                "probability {p} at action {} is not a nonnegative real",
                i + 1
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Parameter(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Normalizes nonnegative weights into a distribution.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Structural(
                "weights must be nonnegative with positive total".into(),
            ));
        }
        Ok(Self {
            probs: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution needs at least one action");
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, action: usize) -> Self {
        assert!(action < n, "action {action} out of range for n = {n}");
        let mut probs = vec![0.0; n];
        probs[action] = 1.0;
        Self { probs }
    }

    /// Wraps an already-normalized vector produced inside the crate.
    pub(crate) fn from_normalized(probs: Vec<f64>) -> Self {
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, action: usize) -> f64 {
        self.probs[action]
    }

    /// Draws one action by inverse-CDF.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last_positive = i;
                if u < acc {
                    return i;
                }
            }
        }
        last_positive
    }

    /// Inner product with a reward vector.
    pub fn dot(&self, rewards: &[f64]) -> f64 {
        self.probs.iter().zip(rewards).map(|(p, r)| p * r).sum()
    }

    /// Total-variation distance to another distribution of the same size.
    pub fn total_variation(&self, other: &ActionDistribution) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// One day's reward vector together with its declared range `[lo, lo + width]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardVector {
    rewards: Vec<f64>,
    lo: f64,
    width: f64,
}

pub(crate) fn range_slack(lo: f64, width: f64) -> f64 {
    1e-12 * (1.0 + lo.abs() + width)
}

impl RewardVector {
    /// Rewards in `[0, width]`.
    pub fn new(rewards: Vec<f64>, width: f64) -> Result<Self> {
        Self::with_offset(rewards, 0.0, width)
    }

    /// Rewards in `[lo, lo + width]`.
    pub fn with_offset(rewards: Vec<f64>, lo: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() || !lo.is_finite() {
            return Err(Error::Parameter(format!(
                "reward range needs finite lo and width > 0, got lo = {lo}, width = {width}"
            )));
        }
        if rewards.is_empty() {
            return Err(Error::Structural("reward vector over zero actions".into()));
        }
        check_range(&rewards, lo, width)?;
        Ok(Self { rewards, lo, width })
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Largest entry after shifting the range to start at zero.
    pub fn shifted_max(&self) -> f64 {
        self.rewards
            .iter()
            .map(|r| r - self.lo)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) fn check_range(rewards: &[f64], lo: f64, width: f64) -> Result<()> {
    let slack = range_slack(lo, width);
    for (i, &r) in rewards.iter().enumerate() {
        if !r.is_finite() || r < lo - slack || r > lo + width + slack {
            return Err(Error::WidthViolation {
                action: i + 1,
                value: r,
                lo,
                hi: lo + width,
            });
        }
    }
    Ok(())
}

/// A map `phi: [n] -> [n]`; entry `i` is `phi(i)` (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SwapFunction(Vec<usize>);

impl SwapFunction {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        if let Some(&bad) = map.iter().find(|&&j| j >= n) {
            return Err(Error::Parameter(format!(
                "swap target {bad} out of range for n = {n}"
            )));
        }
        Ok(Self(map))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn constant(n: usize, target: usize) -> Self {
        assert!(target < n);
        Self(vec![target; n])
    }

    pub fn apply(&self, action: usize) -> usize {
        self.0[action]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// 1-based rendering, e.g. `2 2 3`.
    pub fn to_one_based_string(&self) -> String {
        self.0
            .iter()
            .map(|j| (j + 1).to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// The ordered sequence of (strategy, reward) pairs played over `T` days.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlayRecord {
    days: Vec<(ActionDistribution, RewardVector)>,
}

impl PlayRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(days: usize) -> Self {
        Self {
            days: Vec::with_capacity(days),
        }
    }

    pub fn push(&mut self, played: ActionDistribution, reward: RewardVector) -> Result<()> {
        if played.len() != reward.len() {
            return Err(Error::Dimension {
                expected: played.len(),
                found: reward.len(),
            });
        }
        if let Some(n) = self.n() {
            if played.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: played.len(),
                });
            }
        }
        self.days.push((played, reward));
        Ok(())
    }

    /// Appends every day of `other`.
    pub fn extend(&mut self, other: PlayRecord) -> Result<()> {
        for (p, r) in other.days {
            self.push(p, r)?;
        }
        Ok(())
    }

    pub fn days(&self) -> &[(ActionDistribution, RewardVector)] {
        &self.days
    }

    pub fn horizon(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    /// Action count, `None` for an empty record.
    pub fn n(&self) -> Option<usize> {
        self.days.first().map(|(p, _)| p.len())
    }

    /// Record restricted to days `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> PlayRecord {
        PlayRecord {
            days: self.days[range].to_vec(),
        }
    }

    /// Writes `day,action,prob,reward` rows, one per (day, action), 1-based.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["day", "action", "prob", "reward"])
            .map_err(csv_error)?;
        for (t, (p, r)) in self.days.iter().enumerate() {
            for (i, (pi, ri)) in p.probs().iter().zip(r.rewards()).enumerate() {
                w.write_record(&[
                    (t + 1).to_string(),
                    (i + 1).to_string(),
                    pi.to_string(),
                    ri.to_string(),
                ])
                .map_err(csv_error)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV produced by [`PlayRecord::write_csv`]; rewards are declared
    /// to lie in `[lo, lo + width]`.
    pub fn read_csv<R: Read>(reader: R, lo: f64, width: f64) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            day: usize,
            action: usize,
            prob: f64,
            reward: f64,
        }
        let mut rdr = csv::Reader::from_reader(reader);
        let mut record = PlayRecord::new();
        let mut current_day = 0usize;
        let mut probs = Vec::new();
        let mut rewards = Vec::new();
        let flush = |probs: &mut Vec<f64>, rewards: &mut Vec<f64>, rec: &mut PlayRecord| {
            if probs.is_empty() {
                return Ok(());
            }
            let p = ActionDistribution::new(std::mem::take(probs))?;
            let r = RewardVector::with_offset(std::mem::take(rewards), lo, width)?;
            rec.push(p, r)
        };
        for (line, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::Parse {
                line: line + 2,
                message: e.to_string(),
            })?;
            if row.day != current_day {
                if row.day != current_day + 1 {
                    return Err(Error::Parse {
                        line: line + 2,
                        message: format!("day {} follows day {current_day}", row.day),
                    });
                }
                flush(&mut probs, &mut rewards, &mut record)?;
                current_day = row.day;
            }
            if row.action != probs.len() + 1 {
                return Err(Error::Parse {
                    line: line + 2,
                    message: format!("action {} out of order", row.action),
                });
            }
            probs.push(row.prob);
            rewards.push(row.reward);
        }
        flush(&mut probs, &mut rewards, &mut record)?;
        Ok(record)
    }
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Structural(format!("csv: {other:?}")),
    }
}

/// Summary of external and swap regret for one record.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub external: f64,
    pub swap: f64,
    pub best_swap: SwapFunction,
    pub best_fixed_action: usize,
}

/// Incremental regret accounting.
///
/// Maintains the `n x n` matrix `M[i][j] = sum_t w_t p_t(i) r_t(j)`. Swap regret
/// separates over source actions: `sum_i max_j M[i][j] - sum_i M[i][i]`.
#[derive(Debug, Clone)]
pub struct RegretTracker {
    n: usize,
    cross: Vec<CompensatedSum>,
    cumulative: Vec<CompensatedSum>,
    days: usize,
}

impl RegretTracker {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            cross: vec![CompensatedSum::new(); n * n],
            cumulative: vec![CompensatedSum::new(); n],
            days: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn days(&self) -> usize {
        self.days
    }

    pub fn observe(&mut self, played: &[f64], rewards: &[f64]) -> Result<()> {
        self.observe_weighted(1.0, played, rewards)
    }

    /// Adds one day scaled by `weight`.
    pub fn observe_weighted(&mut self, weight: f64, played: &[f64], rewards: &[f64]) -> Result<()> {
        if played.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: played.len(),
            });
        }
        if rewards.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: rewards.len(),
            });
        }
        for (acc, r) in self.cumulative.iter_mut().zip(rewards) {
            acc.add(weight * r);
        }
        for (i, &p) in played.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let wp = weight * p;
            let row = &mut self.cross[i * self.n..(i + 1) * self.n];
            for (acc, r) in row.iter_mut().zip(rewards) {
                acc.add(wp * r);
            }
        }
        self.days += 1;
        Ok(())
    }

    /// Merges another tracker's totals into this one.
    pub fn merge(&mut self, other: &RegretTracker) -> Result<()> {
        if other.n != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: other.n,
            });
        }
        for (a, b) in self.cross.iter_mut().zip(&other.cross) {
            a.add(b.value());
        }
        for (a, b) in self.cumulative.iter_mut().zip(&other.cumulative) {
            a.add(b.value());
        }
        self.days += other.days;
        Ok(())
    }

    /// `M[i][j]`.
    pub fn cross(&self, i: usize, j: usize) -> f64 {
        self.cross[i * self.n + j].value()
    }

    /// Cumulative reward of action `j`.
    pub fn cumulative(&self, j: usize) -> f64 {
        self.cumulative[j].value()
    }

    /// Realized reward `sum_t <p_t, r_t>`.
    pub fn realized(&self) -> f64 {
        (0..self.n).map(|i| self.cross(i, i)).sum()
    }

    /// External regret and the best fixed action (ties to the smallest index).
    pub fn external(&self) -> (f64, usize) {
        let totals: Vec<f64> = (0..self.n).map(|j| self.cumulative(j)).collect();
        let best = argmax_first(&totals);
        (totals[best] - self.realized(), best)
    }

    /// Swap regret and a maximizing swap function. Each action keeps itself when
    /// that is optimal, otherwise it maps to the smallest maximizing index.
    pub fn swap(&self) -> (f64, SwapFunction) {
        let mut phi = Vec::with_capacity(self.n);
        let mut gain = CompensatedSum::new();
        for i in 0..self.n {
            let row: Vec<f64> = (0..self.n).map(|j| self.cross(i, j)).collect();
            let best = argmax_first(&row);
            let target = if row[i] >= row[best] { i } else { best };
            gain.add(row[target] - row[i]);
            phi.push(target);
        }
        (gain.value(), SwapFunction(phi))
    }

    /// Gain of a specific swap function.
    pub fn swap_gain(&self, phi: &SwapFunction) -> f64 {
        (0..self.n)
            .map(|i| self.cross(i, phi.apply(i)) - self.cross(i, i))
            .sum()
    }

    pub fn report(&self) -> RegretReport {
        let (external, best_fixed_action) = self.external();
        let (swap, best_swap) = self.swap();
        RegretReport {
            external,
            swap,
            best_swap,
            best_fixed_action,
        }
    }
}

fn tracker_for(record: &PlayRecord) -> Result<RegretTracker> {
    let n = record
        .n()
        .ok_or_else(|| Error::Structural("empty play record".into()))?;
    let mut tracker = RegretTracker::new(n);
    for (p, r) in record.days() {
        tracker.observe(p.probs(), r.rewards())?;
    }
    Ok(tracker)
}

/// `max_i sum_t r_t(i) - sum_t <p_t, r_t>`.
pub fn external_regret(record: &PlayRecord) -> Result<f64> {
    Ok(tracker_for(record)?.external().0)
}

/// `max_phi sum_t sum_i p_t(i) r_t(phi(i)) - sum_t <p_t, r_t>` and a maximizing `phi`.
pub fn swap_regret(record: &PlayRecord) -> Result<(f64, SwapFunction)> {
    Ok(tracker_for(record)?.swap())
}

pub fn regret_report(record: &PlayRecord) -> Result<RegretReport> {
    Ok(tracker_for(record)?.report())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(days: &[(&[f64], &[f64])]) -> PlayRecord {
        let mut rec = PlayRecord::new();
        for (p, r) in days {
            rec.push(
                ActionDistribution::new(p.to_vec()).unwrap(),
                RewardVector::new(r.to_vec(), 1.0).unwrap(),
            )
            .unwrap();
        }
        rec
    }

    #[test]
    fn single_day_forced_best_action() {
        let rec = record(&[(&[1.0, 0.0], &[0.0, 1.0])]);
        assert_eq!(external_regret(&rec).unwrap(), 1.0);
        let (v, phi) = swap_regret(&rec).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(phi.apply(0), 1);
    }

    #[test]
    fn constant_rewards_give_zero_regret_and_identity() {
        let rec = record(&[
            (&[0.5, 0.5], &[0.3, 0.3]),
            (&[0.5, 0.5], &[0.9, 0.9]),
        ]);
        assert_eq!(external_regret(&rec).unwrap(), 0.0);
        let (v, phi) = swap_regret(&rec).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(phi, SwapFunction::identity(2));
    }

    #[test]
    fn empty_record_is_structural_error() {
        assert!(matches!(
            external_regret(&PlayRecord::new()),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn mismatched_days_rejected() {
        let mut rec = record(&[(&[1.0, 0.0], &[0.0, 1.0])]);
        let err = rec
            .push(
                ActionDistribution::uniform(3),
                RewardVector::new(vec![0.0; 3], 1.0).unwrap(),
            )
            .unwrap_err();
        assert!(matches!(err, Error::Dimension { expected: 2, found: 3 }));
        assert!(rec
            .push(
                ActionDistribution::uniform(2),
                RewardVector::new(vec![0.0; 3], 1.0).unwrap()
            )
            .is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(ActionDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(ActionDistribution::new(vec![1.5, -0.5]).is_err());
        assert!(ActionDistribution::new(vec![]).is_err());
        assert!(ActionDistribution::new(vec![0.25; 4]).is_ok());
    }

    #[test]
    fn reward_width_violation_is_an_error() {
        let err = RewardVector::new(vec![0.5, 1.5], 1.0).unwrap_err();
        assert!(matches!(err, Error::WidthViolation { action: 2, .. }));
        assert!(RewardVector::with_offset(vec![-1.0, 0.0625], -1.0, 1.0625).is_ok());
        assert!(RewardVector::with_offset(vec![-1.1], -1.0, 2.0).is_err());
    }

    #[test]
    fn swap_function_rejects_out_of_range() {
        assert!(SwapFunction::new(vec![0, 2]).is_err());
        assert_eq!(SwapFunction::new(vec![1, 1]).unwrap().to_one_based_string(), "2 2");
    }

    #[test]
    fn csv_round_trip() {
        let rec = record(&[
            (&[0.25, 0.75], &[0.1, 0.7]),
            (&[1.0 / 3.0, 2.0 / 3.0], &[0.0, 1.0]),
        ]);
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("day,action,prob,reward\n1,1,0.25,0.1\n"));
        let back = PlayRecord::read_csv(&buf[..], 0.0, 1.0).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn weighted_observation_scales_gain() {
        let mut a = RegretTracker::new(2);
        a.observe_weighted(0.5, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(a.swap().0, 0.5);
    }
}
