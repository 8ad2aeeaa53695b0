//! Uncoupled dynamics: every player runs its own multi-scale learner on its own
//! (exact or sampled) reward vectors; the output is the uniform mixture of the
//! daily product profiles.

use super::{
    exact_reward_vector, rewards_from_profiles, sample_profiles, verify_ce, CeCertificate,
    JointDistribution, NormalFormGame,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::multiscale::{MultiScaleConfig, MultiScaleLearner};
use crate::mwu::Learner;
use crate::numeric::seeded_rng;
use crate::regret::{ActionDistribution, RegretTracker, RewardVector};

/// Upper bound on `T m n` stored in the output distribution.
pub const OUTPUT_LIMIT: u64 = 200_000_000;

/// How each player observes its reward vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardMode {
    /// Exact expectation under the other players' strategies.
    Exact,
    /// Empirical mean over `K` sampled opponent profiles. `samples: None` uses
    /// [`sample_count`]. With `shared`, one batch of profiles serves all players.
    Sampled { samples: Option<usize>, shared: bool },
}

/// Multi-scale schedule used by every player.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    /// Parameters derived from a regret target of `epsilon / 2`.
    FromEpsilon,
    /// Explicit inner horizon `H` and scale count `S`.
    Explicit { block: u64, scales: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsConfig {
    pub epsilon: f64,
    pub mode: RewardMode,
    pub schedule: Schedule,
}

impl DynamicsConfig {
    pub fn exact(epsilon: f64) -> Self {
        Self {
            epsilon,
            mode: RewardMode::Exact,
            schedule: Schedule::FromEpsilon,
        }
    }

    pub fn with_schedule(mut self, block: u64, scales: u32) -> Self {
        self.schedule = Schedule::Explicit { block, scales };
        self
    }

    pub fn learner_config(&self, actions: usize) -> Result<MultiScaleConfig> {
        match self.schedule {
            Schedule::FromEpsilon => MultiScaleConfig::from_epsilon(self.epsilon / 2.0, actions, 1.0),
            Schedule::Explicit { block, scales } => {
                MultiScaleConfig::new(actions, 1.0, scales, block)
            }
        }
    }
}

/// `K = ceil(32 ln^2(max(mn, 3)) / epsilon^3)`.
pub fn sample_count(players: usize, actions: usize, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Parameter(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    let l = ((players * actions).max(3) as f64).ln();
    Ok((32.0 * l * l / epsilon.powi(3)).ceil() as usize)
}

#[derive(Debug, Clone)]
pub struct DynamicsOutcome {
    pub distribution: JointDistribution,
    /// Exact certificate, present for dense games.
    pub certificate: Option<CeCertificate>,
    /// Payoff queries charged during the run.
    pub queries: u64,
    /// Each player's swap regret on the reward vectors it observed.
    pub swap_regret: Vec<f64>,
    pub horizon: u64,
    pub samples: Option<usize>,
    pub schedule: MultiScaleConfig,
}

pub fn run_uncoupled_dynamics(
    game: &NormalFormGame,
    config: &DynamicsConfig,
    seed: u64,
    execution: Execution,
) -> Result<DynamicsOutcome> {
    let eps = config.epsilon;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Parameter(format!("epsilon must lie in (0, 1], got {eps}")));
    }
    let m = game.players();
    let n = game.actions();
    let schedule = config.learner_config(n)?;
    let horizon = schedule.horizon();
    if horizon.saturating_mul((m * n) as u64) > OUTPUT_LIMIT {
        return Err(Error::Configuration(format!(
            "T = {horizon} days for {m} players exceeds the output limit; use a larger epsilon or an explicit schedule"
        )));
    }
    let samples = match config.mode {
        RewardMode::Exact => None,
        RewardMode::Sampled { samples, .. } => Some(match samples {
            Some(0) => return Err(Error::Parameter("sample count K must be >= 1".into())),
            Some(k) => k,
            None => sample_count(m, n, eps)?,
        }),
    };

    let mut learners: Vec<MultiScaleLearner> =
        (0..m).map(|_| MultiScaleLearner::new(schedule.clone())).collect();
    let mut trackers: Vec<RegretTracker> = (0..m).map(|_| RegretTracker::new(n)).collect();
    let mut rng = seeded_rng(seed, "nfg-samples");
    let mut profiles = Vec::with_capacity(horizon as usize);
    let before = game.queries();

    for _ in 0..horizon {
        let strategies: Vec<ActionDistribution> =
            learners.iter_mut().map(|l| l.act()).collect::<Result<_>>()?;
        let rewards: Vec<RewardVector> = match config.mode {
            RewardMode::Exact => (0..m)
                .map(|i| exact_reward_vector(game, i, &strategies))
                .collect::<Result<_>>()?,
            RewardMode::Sampled { shared, .. } => {
                let k = samples.expect("sampled mode has K");
                if shared {
                    let batch = sample_profiles(&strategies, k, &mut rng);
                    (0..m)
                        .map(|i| rewards_from_profiles(game, i, &batch))
                        .collect::<Result<_>>()?
                } else {
                    (0..m)
                        .map(|i| {
                            let batch = sample_profiles(&strategies, k, &mut rng);
                            rewards_from_profiles(game, i, &batch)
                        })
                        .collect::<Result<_>>()?
                }
            }
        };
        for ((learner, tracker), (p, r)) in learners
            .iter_mut()
            .zip(trackers.iter_mut())
            .zip(strategies.iter().zip(&rewards))
        {
            tracker.observe(p.probs(), r.rewards())?;
            learner.update(r)?;
        }
        profiles.push(strategies);
    }

    let queries = game.queries() - before;
    let distribution = JointDistribution::uniform(profiles)?;
    let certificate = if game.is_dense() {
        Some(verify_ce(game, &distribution, execution)?)
    } else {
        None
    };
    Ok(DynamicsOutcome {
        distribution,
        certificate,
        queries,
        swap_regret: trackers.iter().map(|t| t.swap().0).collect(),
        horizon,
        samples,
        schedule,
    })
}
