//! Log-domain partition functions over a player's pure strategies.
//!
//! With opponents' behaviour folded into per-terminal reach weights `W(z)`,
//! the cumulative utility of `s_i` splits into group terms
//! `Lambda(h.a) = eta * sum_z chance(z) gamma_i(z) W(z)` over terminals whose
//! last own move is `(h, a)`, plus one root group. Then
//!
//! ```text
//! logU(h.a) = Lambda(h.a) + sum_{c in C(h.a)} logV(c) + sum_{b != a} sum_{c in C(h.b)} L(c)
//! logV(h)   = logsumexp_a logU(h.a)
//! ```
//!
//! where `C(h.a)` are the own infosets directly below `(h, a)` and `L(c)` is the
//! log of the number of assignments to `c`'s own subtree.

use rand::Rng;

use super::tree::{GameTree, PureStrategy};
use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;

/// Accumulated reach weights `W(z)` of the other players (chance excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalWeights {
    player: usize,
    weights: Vec<f64>,
}

impl TerminalWeights {
    pub fn new(tree: &GameTree, player: usize) -> Self {
        Self {
            player,
            weights: vec![0.0; tree.terminal_count()],
        }
    }

    /// Sum over weighted opponent profiles (the entry for `player` is ignored).
    pub fn from_profiles(tree: &GameTree, player: usize, profiles: &[(f64, Vec<PureStrategy>)]) -> Result<Self> {
        let mut w = Self::new(tree, player);
        for (weight, profile) in profiles {
            w.add_profile(tree, *weight, profile)?;
        }
        Ok(w)
    }

    pub fn player(&self) -> usize {
        self.player
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn add_profile(&mut self, tree: &GameTree, weight: f64, profile: &[PureStrategy]) -> Result<()> {
        if profile.len() != tree.players() {
            return Err(Error::Structural("profile does not cover every player".into()));
        }
        for (p, s) in profile.iter().enumerate() {
            if p != self.player {
                tree.check_strategy(p, s)?;
            }
        }
        tree.accumulate_reach(self.player, profile, weight, &mut self.weights);
        Ok(())
    }

    /// Adds `other` into `self`.
    pub fn absorb(&mut self, other: &TerminalWeights) {
        for (w, o) in self.weights.iter_mut().zip(&other.weights) {
            *w += o;
        }
    }

    pub fn clear(&mut self) {
        self.weights.fill(0.0);
    }
}

/// Partition tables for one player, indexed by the player's local infoset order.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTables {
    player: usize,
    eta: f64,
    log_v: Vec<f64>,
    log_u: Vec<Vec<f64>>,
    lambda: Vec<Vec<f64>>,
    lambda_root: f64,
    subtree_log_card: Vec<f64>,
    parent: Vec<Option<(usize, usize)>>,
    children: Vec<Vec<Vec<usize>>>,
    roots: Vec<usize>,
    log_total: f64,
}

/// Builds the tables for `weights.player()` with step size `eta`.
pub fn build_partition(tree: &GameTree, weights: &TerminalWeights, eta: f64) -> Result<PartitionTables> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::Parameter(format!("eta must be finite and >= 0, got {eta}")));
    }
    let player = weights.player;
    if weights.weights.len() != tree.terminal_count() {
        return Err(Error::Dimension {
            expected: tree.terminal_count(),
            found: weights.weights.len(),
        });
    }
    let order = tree.player_infosets(player);
    let infosets = tree.infosets();
    let local = |h: usize| infosets[h].local;
    let mut lambda: Vec<Vec<f64>> = order.iter().map(|&h| vec![0.0; infosets[h].actions.len()]).collect();
    let mut lambda_root = 0.0;
    for z in 0..tree.terminal_count() {
        let value = eta * tree.terminal_chance(z) * tree.payoff(z, player) * weights.weights[z];
        match tree.terminal_group(player, z) {
            Some((h, a)) => lambda[local(h)][a] += value,
            None => lambda_root += value,
        }
    }
    let parent: Vec<Option<(usize, usize)>> = order
        .iter()
        .map(|&h| infosets[h].parent.map(|(q, a)| (local(q), a)))
        .collect();
    let children: Vec<Vec<Vec<usize>>> = order
        .iter()
        .map(|&h| {
            (0..infosets[h].actions.len())
                .map(|a| tree.child_infosets(h, a).iter().map(|&c| local(c)).collect())
                .collect()
        })
        .collect();
    let roots: Vec<usize> = tree.root_infosets(player).iter().map(|&h| local(h)).collect();

    let k = order.len();
    let mut log_v = vec![0.0; k];
    let mut log_u: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut subtree_log_card = vec![0.0; k];
    for h in (0..k).rev() {
        let per_action_card: Vec<f64> = children[h]
            .iter()
            .map(|cs| cs.iter().map(|&c| subtree_log_card[c]).sum())
            .collect();
        let all_card: f64 = per_action_card.iter().sum();
        let n = children[h].len();
        subtree_log_card[h] = (n as f64).ln() + all_card;
        log_u[h] = (0..n)
            .map(|a| {
                let below: f64 = children[h][a].iter().map(|&c| log_v[c]).sum();
                lambda[h][a] + below + (all_card - per_action_card[a])
            })
            .collect();
        log_v[h] = log_sum_exp(&log_u[h]);
    }
    let log_total = lambda_root + roots.iter().map(|&h| log_v[h]).sum::<f64>();
    if !log_total.is_finite() {
        return Err(Error::Validation("partition function is not finite".into()));
    }
    Ok(PartitionTables {
        player,
        eta,
        log_v,
        log_u,
        lambda,
        lambda_root,
        subtree_log_card,
        parent,
        children,
        roots,
        log_total,
    })
}

impl PartitionTables {
    pub fn player(&self) -> usize {
        self.player
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn log_v(&self, local: usize) -> f64 {
        self.log_v[local]
    }

    pub fn log_u(&self, local: usize, action: usize) -> f64 {
        self.log_u[local][action]
    }

    /// `Lambda(h.a)` of the terminal group below `(h, a)`.
    pub fn lambda(&self, local: usize, action: usize) -> f64 {
        self.lambda[local][action]
    }

    pub fn lambda_root(&self) -> f64 {
        self.lambda_root
    }

    /// `L(h)`: log number of assignments to `h` and its own descendants.
    pub fn subtree_log_cardinality(&self, local: usize) -> f64 {
        self.subtree_log_card[local]
    }

    pub fn children(&self, local: usize, action: usize) -> &[usize] {
        &self.children[local][action]
    }

    pub fn parent(&self, local: usize) -> Option<(usize, usize)> {
        self.parent[local]
    }

    pub fn root_infosets(&self) -> &[usize] {
        &self.roots
    }

    pub fn infoset_count(&self) -> usize {
        self.log_v.len()
    }

    /// `log sum_s exp(eta * cumulative utility of s)` over all pure strategies.
    pub fn log_partition(&self) -> f64 {
        self.log_total
    }

    /// Whether `local` is reached given the earlier assignments in `prefix`.
    fn reached(&self, local: usize, prefix: &[usize], reachable: &[bool]) -> bool {
        match self.parent[local] {
            None => true,
            Some((q, a)) => reachable[q] && prefix[q] == a,
        }
    }

    /// Samples a pure strategy, visiting infosets parent-before-child. Reached
    /// infosets use `U(h.a) / V(h)`; infosets cut off by earlier choices are uniform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PureStrategy {
        let k = self.log_v.len();
        let mut actions = Vec::with_capacity(k);
        let mut reachable = Vec::with_capacity(k);
        for h in 0..k {
            let reached = self.reached(h, &actions, &reachable);
            let a = if !reached {
                rng.gen_range(0..self.log_u[h].len())
            } else {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut chosen = self.log_u[h].len() - 1;
                for (a, &lu) in self.log_u[h].iter().enumerate() {
                    acc += (lu - self.log_v[h]).exp();
                    if u < acc {
                        chosen = a;
                        break;
                    }
                }
                chosen
            };
            reachable.push(reached);
            actions.push(a);
        }
        PureStrategy(actions)
    }

    /// Exact log-probability that a sample starts with `prefix` (actions for the
    /// first `prefix.len()` infosets in order).
    pub fn prefix_log_probability(&self, prefix: &[usize]) -> Result<f64> {
        if prefix.len() > self.log_v.len() {
            return Err(Error::Structural("prefix longer than the infoset list".into()));
        }
        let mut reachable = Vec::with_capacity(prefix.len());
        let mut total = 0.0;
        for (h, &a) in prefix.iter().enumerate() {
            let n = self.log_u[h].len();
            if a >= n {
                return Err(Error::Structural(format!("action {} out of range", a + 1)));
            }
            let reached = self.reached(h, prefix, &reachable);
            total += if reached {
                self.log_u[h][a] - self.log_v[h]
            } else {
                -(n as f64).ln()
            };
            reachable.push(reached);
        }
        Ok(total)
    }

    /// Exact log-probability of a full pure strategy.
    pub fn log_probability(&self, strategy: &PureStrategy) -> Result<f64> {
        if strategy.0.len() != self.log_v.len() {
            return Err(Error::Structural("strategy does not cover every infoset".into()));
        }
        self.prefix_log_probability(&strategy.0)
    }
}

/// Samples a pure strategy for the tables' player.
pub fn sample_strategy<R: Rng + ?Sized>(tables: &PartitionTables, tree: &GameTree, rng: &mut R) -> Result<PureStrategy> {
    if tables.infoset_count() != tree.player_infosets(tables.player).len() {
        return Err(Error::Structural("tables were built for a different tree".into()));
    }
    Ok(tables.sample(rng))
}
