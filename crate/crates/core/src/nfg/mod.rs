//! Normal-form games, uncoupled no-regret dynamics and exact CE verification.
//!
//! Game files use the line format
//!
//! ```text
//! nfg <m> <n>
//! <a_1> ... <a_m> <u_1> ... <u_m>
//! ```
//!
//! with one line per pure profile, 1-based actions and payoffs in `[0, 1]`.

mod dynamics;
mod joint;

pub use dynamics::{
    run_uncoupled_dynamics, sample_count, DynamicsConfig, DynamicsOutcome, RewardMode, Schedule,
};
pub use joint::{verify_ce, Atom, CeCertificate, JointDistribution, PlayerCertificate};

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::error::{Error, Result};
use crate::regret::{check_range, ActionDistribution, RewardVector};

/// Largest tensor or enumeration size handled by exact operations.
pub const DENSE_LIMIT: u64 = 10_000_000;

type UtilityFn = dyn Fn(usize, &[usize]) -> f64 + Send + Sync;

enum Storage {
    Dense(Vec<f64>),
    Oracle(Box<UtilityFn>),
}

/// An `m`-player game with `n` actions per player and utilities in `[0, 1]`.
pub struct NormalFormGame {
    players: usize,
    actions: usize,
    storage: Storage,
    queries: AtomicU64,
}

impl fmt::Debug for NormalFormGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NormalFormGame")
            .field("players", &self.players)
            .field("actions", &self.actions)
            .field("dense", &self.is_dense())
            .field("queries", &self.queries())
            .finish()
    }
}

fn profile_count(players: usize, actions: usize) -> Option<u64> {
    (actions as u64).checked_pow(u32::try_from(players).ok()?)
}

impl NormalFormGame {
    /// Dense game from a payoff table laid out as `[profile][player]`, profiles in
    /// lexicographic order with player 0 most significant.
    pub fn dense(players: usize, actions: usize, payoffs: Vec<f64>) -> Result<Self> {
        if players < 1 || actions < 1 {
            return Err(Error::Parameter("games need m >= 1 and n >= 1".into()));
        }
        let profiles = profile_count(players, actions)
            .filter(|&p| p.saturating_mul(players as u64) <= DENSE_LIMIT)
            .ok_or_else(|| {
                Error::Capacity(format!(
                    "dense table for m={players}, n={actions} exceeds {DENSE_LIMIT} entries"
                ))
            })?;
        let expected = profiles as usize * players;
        if payoffs.len() != expected {
            return Err(Error::Dimension {
                expected,
                found: payoffs.len(),
            });
        }
        check_range(&payoffs, 0.0, 1.0)?;
        Ok(Self {
            players,
            actions,
            storage: Storage::Dense(payoffs),
            queries: AtomicU64::new(0),
        })
    }

    /// Dense game tabulated from `f(player, profile)`.
    pub fn from_fn<F>(players: usize, actions: usize, f: F) -> Result<Self>
    where
        F: Fn(usize, &[usize]) -> f64,
    {
        let total = profile_count(players, actions)
            .filter(|&p| p.saturating_mul(players as u64) <= DENSE_LIMIT)
            .ok_or_else(|| Error::Capacity("dense table too large".into()))?;
        let mut payoffs = Vec::with_capacity(total as usize * players);
        let mut profile = vec![0; players];
        for _ in 0..total {
            for i in 0..players {
                payoffs.push(f(i, &profile));
            }
            increment(&mut profile, actions);
        }
        Self::dense(players, actions, payoffs)
    }

    /// Game accessible only through a payoff oracle.
    pub fn oracle<F>(players: usize, actions: usize, f: F) -> Result<Self>
    where
        F: Fn(usize, &[usize]) -> f64 + Send + Sync + 'static,
    {
        if players < 1 || actions < 1 {
            return Err(Error::Parameter("games need m >= 1 and n >= 1".into()));
        }
        Ok(Self {
            players,
            actions,
            storage: Storage::Oracle(Box::new(f)),
            queries: AtomicU64::new(0),
        })
    }

    /// i.i.d. uniform payoffs in `[0, 1]`.
    pub fn random<R: Rng + ?Sized>(players: usize, actions: usize, rng: &mut R) -> Result<Self> {
        let len = profile_count(players, actions)
            .ok_or_else(|| Error::Capacity("profile count overflows".into()))?
            .saturating_mul(players as u64);
        if len > DENSE_LIMIT {
            return Err(Error::Capacity(format!("{len} payoffs exceed {DENSE_LIMIT}")));
        }
        let payoffs = (0..len).map(|_| rng.gen::<f64>()).collect();
        Self::dense(players, actions, payoffs)
    }

    /// Matching pennies scaled to `[0, 1]`: the row player wins on a match.
    pub fn matching_pennies() -> Self {
        Self::from_fn(2, 2, |i, a| {
            let matched = a[0] == a[1];
            if matched == (i == 0) {
                1.0
            } else {
                0.0
            }
        })
        .expect("2x2 game")
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    /// Payoff queries issued so far through [`NormalFormGame::query`].
    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn reset_queries(&self) {
        self.queries.store(0, Ordering::Relaxed);
    }

    pub fn profile_index(&self, profile: &[usize]) -> usize {
        profile.iter().fold(0, |acc, &a| acc * self.actions + a)
    }

    /// Uncounted payoff lookup.
    pub(crate) fn payoff(&self, player: usize, profile: &[usize]) -> f64 {
        match &self.storage {
            Storage::Dense(table) => table[self.profile_index(profile) * self.players + player],
            Storage::Oracle(f) => f(player, profile),
        }
    }

    /// Counted payoff query `u_player(profile)`.
    pub fn query(&self, player: usize, profile: &[usize]) -> Result<f64> {
        if player >= self.players {
            return Err(Error::Dimension {
                expected: self.players,
                found: player + 1,
            });
        }
        if profile.len() != self.players {
            return Err(Error::Dimension {
                expected: self.players,
                found: profile.len(),
            });
        }
        if let Some(&a) = profile.iter().find(|&&a| a >= self.actions) {
            return Err(Error::Parameter(format!("action {} out of range", a + 1)));
        }
        self.queries.fetch_add(1, Ordering::Relaxed);
        Ok(self.payoff(player, profile))
    }

    pub(crate) fn check_strategies(&self, strategies: &[ActionDistribution]) -> Result<()> {
        if strategies.len() != self.players {
            return Err(Error::Dimension {
                expected: self.players,
                found: strategies.len(),
            });
        }
        for s in strategies {
            if s.len() != self.actions {
                return Err(Error::Dimension {
                    expected: self.actions,
                    found: s.len(),
                });
            }
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut table: Vec<f64> = Vec::new();
        let mut seen: Vec<bool> = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let fields: Vec<&str> = text.split_whitespace().collect();
            let Some((m, n)) = header else {
                if fields.len() != 3 || fields[0] != "nfg" {
                    return Err(parse_err("expected header `nfg <m> <n>`".into()));
                }
                let m: usize = fields[1].parse().map_err(|_| parse_err("bad m".into()))?;
                let n: usize = fields[2].parse().map_err(|_| parse_err("bad n".into()))?;
                let profiles = profile_count(m, n)
                    .filter(|&p| m >= 1 && n >= 1 && p.saturating_mul(m as u64) <= DENSE_LIMIT)
                    .ok_or_else(|| parse_err("unsupported game size".into()))?;
                table = vec![0.0; profiles as usize * m];
                seen = vec![false; profiles as usize];
                header = Some((m, n));
                continue;
            };
            if fields.len() != 2 * m {
                return Err(parse_err(format!("expected {} fields, found {}", 2 * m, fields.len())));
            }
            let mut index = 0;
            for f in &fields[..m] {
                let a: usize = f
                    .parse()
                    .map_err(|_| parse_err(format!("bad action `{f}`")))?;
                if a < 1 || a > n {
                    return Err(parse_err(format!("action {a} outside 1..={n}")));
                }
                index = index * n + (a - 1);
            }
            if std::mem::replace(&mut seen[index], true) {
                return Err(parse_err("duplicate profile".into()));
            }
            for (i, f) in fields[m..].iter().enumerate() {
                let u: f64 = f
                    .parse()
                    .map_err(|_| parse_err(format!("bad payoff `{f}`")))?;
                if !(0.0..=1.0).contains(&u) {
                    return Err(parse_err(format!("payoff {u} outside [0, 1]")));
                }
                table[index * m + i] = u;
            }
        }
        let (m, n) = header.ok_or_else(|| Error::Parse {
            line: 0,
            message: "missing header".into(),
        })?;
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::Structural(format!("profile #{} missing", missing + 1)));
        }
        Self::dense(m, n, table)
    }

    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        let total = profile_count(self.players, self.actions)
            .filter(|&p| p <= DENSE_LIMIT)
            .ok_or_else(|| Error::Capacity("game too large to write".into()))?;
        writeln!(writer, "nfg {} {}", self.players, self.actions)?;
        let mut profile = vec![0; self.players];
        for _ in 0..total {
            let actions: Vec<String> = profile.iter().map(|a| (a + 1).to_string()).collect();
            let payoffs: Vec<String> = (0..self.players)
                .map(|i| self.payoff(i, &profile).to_string())
                .collect();
            writeln!(writer, "{} {}", actions.join(" "), payoffs.join(" "))?;
            increment(&mut profile, self.actions);
        }
        Ok(())
    }
}

/// Odometer step over profiles in lexicographic order. Returns false on wrap.
pub(crate) fn increment(profile: &mut [usize], actions: usize) -> bool {
    for a in profile.iter_mut().rev() {
        *a += 1;
        if *a < actions {
            return true;
        }
        *a = 0;
    }
    false
}

/// Exact expected rewards `r(j) = E[u_i(j; a_-i)]` under the product of the
/// other players' strategies. The entry for `player` in `strategies` is ignored.
pub fn exact_reward_vector(
    game: &NormalFormGame,
    player: usize,
    strategies: &[ActionDistribution],
) -> Result<RewardVector> {
    game.check_strategies(strategies)?;
    let terms = profile_count(game.players - 1, game.actions).unwrap_or(u64::MAX);
    if terms > DENSE_LIMIT {
        return Err(Error::Capacity(format!(
            "exact rewards need {terms} terms, limit is {DENSE_LIMIT}"
        )));
    }
    Ok(exact_rewards_unchecked(game, player, strategies))
}

pub(crate) fn exact_rewards_unchecked(
    game: &NormalFormGame,
    player: usize,
    strategies: &[ActionDistribution],
) -> RewardVector {
    let n = game.actions;
    let mut rewards = vec![0.0; n];
    let mut profile = vec![0; game.players];
    loop {
        let weight: f64 = profile
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != player)
            .map(|(k, &a)| strategies[k].prob(a))
            .product();
        if weight > 0.0 {
            for (j, r) in rewards.iter_mut().enumerate() {
                profile[player] = j;
                *r += weight * game.payoff(player, &profile);
            }
            profile[player] = 0;
        }
        if !increment_except(&mut profile, n, player) {
            break;
        }
    }
    for r in &mut rewards {
        *r = r.clamp(0.0, 1.0);
    }
    RewardVector::new(rewards, 1.0).expect("clamped rewards")
}

fn increment_except(profile: &mut [usize], actions: usize, skip: usize) -> bool {
    for (k, a) in profile.iter_mut().enumerate().rev() {
        if k == skip {
            continue;
        }
        *a += 1;
        if *a < actions {
            return true;
        }
        *a = 0;
    }
    false
}

/// Draws `count` full pure profiles from the product of `strategies`.
pub fn sample_profiles<R: Rng + ?Sized>(
    strategies: &[ActionDistribution],
    count: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    (0..count)
        .map(|_| strategies.iter().map(|s| s.sample(rng)).collect())
        .collect()
}

/// Empirical rewards `(1/K) sum_k u_i(j; a_-i,k)` over the given sampled
/// profiles, charging `n K` payoff queries.
pub fn rewards_from_profiles(
    game: &NormalFormGame,
    player: usize,
    profiles: &[Vec<usize>],
) -> Result<RewardVector> {
    if profiles.is_empty() {
        return Err(Error::Parameter("sample count K must be >= 1".into()));
    }
    let mut rewards = vec![0.0; game.actions];
    let mut profile = Vec::with_capacity(game.players);
    for sampled in profiles {
        profile.clear();
        profile.extend_from_slice(sampled);
        for (j, r) in rewards.iter_mut().enumerate() {
            profile[player] = j;
            *r += game.query(player, &profile)?;
        }
    }
    let k = profiles.len() as f64;
    RewardVector::new(rewards.into_iter().map(|r| (r / k).clamp(0.0, 1.0)).collect(), 1.0)
}

/// Sampled estimate of the reward vector from `samples` opponent profiles.
pub fn sampled_reward_vector<R: Rng + ?Sized>(
    game: &NormalFormGame,
    player: usize,
    strategies: &[ActionDistribution],
    samples: usize,
    rng: &mut R,
) -> Result<RewardVector> {
    game.check_strategies(strategies)?;
    let profiles = sample_profiles(strategies, samples, rng);
    rewards_from_profiles(game, player, &profiles)
}
