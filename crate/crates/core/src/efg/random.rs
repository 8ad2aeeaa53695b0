//! Random perfect-recall game trees.

use rand::Rng;

use super::tree::{GameTree, GameTreeBuilder};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RandomTreeConfig {
    pub players: usize,
    /// Infosets per player (`Phi`).
    pub infosets: usize,
    pub min_actions: usize,
    pub max_actions: usize,
    /// Probability of inserting a chance node where one is still allowed.
    pub chance_probability: f64,
    /// Maximum chance nodes on any root-to-leaf path.
    pub max_chance_depth: usize,
    /// Probability of ending a path early at a terminal.
    pub stop_probability: f64,
}

impl RandomTreeConfig {
    pub fn new(players: usize, infosets: usize, actions: usize) -> Self {
        Self {
            players,
            infosets,
            min_actions: actions,
            max_actions: actions,
            chance_probability: 0.0,
            max_chance_depth: 0,
            stop_probability: 0.0,
        }
    }

    pub fn with_chance(mut self, probability: f64, depth: usize) -> Self {
        self.chance_probability = probability;
        self.max_chance_depth = depth;
        self
    }
}

/// `(player, parent, action count)`.
type PlannedInfoset = (usize, Option<(usize, usize)>, usize);

struct Plan {
    infosets: Vec<PlannedInfoset>,
}

const ATTEMPTS: usize = 1000;

/// Draws a tree in which every player has exactly `config.infosets` infosets.
///
/// Own infosets form a random forest: each infoset hangs below the root or
/// below an action of an earlier infoset of the same player. The game tree is
/// grown so that a player only moves at infosets hanging below its current
/// own position, which gives perfect recall; nodes of the same player at the
/// same position can share an infoset, which hides the other players' moves.
pub fn random_tree<R: Rng + ?Sized>(config: &RandomTreeConfig, rng: &mut R) -> Result<GameTree> {
    if config.players == 0 || config.min_actions == 0 || config.min_actions > config.max_actions {
        return Err(Error::Parameter("need players >= 1 and 1 <= min_actions <= max_actions".into()));
    }
    for _ in 0..ATTEMPTS {
        let mut plan = Plan { infosets: Vec::new() };
        for p in 0..config.players {
            let first = plan.infosets.len();
            for k in 0..config.infosets {
                let actions = rng.gen_range(config.min_actions..=config.max_actions);
                let parent = if k == 0 {
                    None
                } else {
                    let slots: usize = plan.infosets[first..].iter().map(|(_, _, n)| n).sum();
                    let pick = rng.gen_range(0..=slots);
                    locate(&plan.infosets[first..], pick).map(|(h, a)| (first + h, a))
                };
                plan.infosets.push((p, parent, actions));
            }
        }
        let mut builder = GameTreeBuilder::new(config.players);
        for (h, &(p, _, n)) in plan.infosets.iter().enumerate() {
            let label = format!("p{}h{}", p + 1, h + 1);
            let actions = (0..n).map(|a| format!("{label}a{}", a + 1)).collect();
            builder.infoset(p, label, actions);
        }
        let mut used = vec![false; plan.infosets.len()];
        let position = vec![None; config.players];
        let root = grow(config, &plan, &mut builder, &mut used, &position, 0, true, rng);
        if used.iter().all(|&u| u) {
            return builder.build(root);
        }
    }
    Err(Error::Configuration(format!(
        "no tree covering every infoset found in {ATTEMPTS} attempts"
    )))
}

/// Maps `pick` to an `(infoset, action)` slot; the last value means the root.
fn locate(infosets: &[PlannedInfoset], mut pick: usize) -> Option<(usize, usize)> {
    for (h, &(_, _, n)) in infosets.iter().enumerate() {
        if pick < n {
            return Some((h, pick));
        }
        pick -= n;
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn grow<R: Rng + ?Sized>(
    config: &RandomTreeConfig,
    plan: &Plan,
    builder: &mut GameTreeBuilder,
    used: &mut [bool],
    position: &[Option<(usize, usize)>],
    chance_depth: usize,
    at_root: bool,
    rng: &mut R,
) -> usize {
    if chance_depth < config.max_chance_depth && rng.gen_bool(config.chance_probability) {
        let outcomes = rng.gen_range(2..=3);
        let raw: Vec<f64> = (0..outcomes).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut probs: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let head: f64 = probs[..outcomes - 1].iter().sum();
        probs[outcomes - 1] = 1.0 - head;
        let children = (0..outcomes)
            .map(|_| grow(config, plan, builder, used, position, chance_depth + 1, false, rng))
            .collect();
        return builder.chance(probs, children);
    }
    let available: Vec<usize> = (0..plan.infosets.len())
        .filter(|&h| {
            let (p, parent, _) = plan.infosets[h];
            parent == position[p]
        })
        .collect();
    if available.is_empty() || (!at_root && rng.gen_bool(config.stop_probability)) {
        let payoffs = (0..config.players).map(|_| rng.gen::<f64>()).collect();
        return builder.terminal(payoffs);
    }
    let h = available[rng.gen_range(0..available.len())];
    used[h] = true;
    let (p, _, n) = plan.infosets[h];
    let children = (0..n)
        .map(|a| {
            let mut next = position.to_vec();
            next[p] = Some((h, a));
            grow(config, plan, builder, used, &next, chance_depth, false, rng)
        })
        .collect();
    builder.decision(h, children)
}
