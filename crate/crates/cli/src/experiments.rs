//! The experiment runners. Each one writes CSV artifacts into the output
//! directory and is a pure function of its [`ExperimentConfig`].

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use swapregret::adversaries::{
    biased_swap_gain, play, predicted_swap_gain, Adversary, AdaptiveBestResponse, HardSeqConfig,
    HardSequence, RandomRewards, RewardDistribution, TwoCoinConfig, TwoCoinGame,
};
use swapregret::comm::{
    run_comm_protocol, sparsify, sparsify_rows, CommConfig, TwoPlayerCeMatrix, UtilityMatrix,
};
use swapregret::efg::{random_tree, run_nfce_dynamics, NfceConfig, RandomTreeConfig};
use swapregret::multiscale::BoundAccumulator;
use swapregret::mwu::regret_bound;
use swapregret::nfg::{run_uncoupled_dynamics, verify_ce, DynamicsConfig, NormalFormGame, RewardMode};
use swapregret::numeric::{bits_for, derive_seed, seeded_rng};
use swapregret::{
    external_regret, swap_regret, ActionDistribution, Execution, Learner, MultiScaleConfig,
    MultiScaleLearner, Mwu, PlayRecord, RegretTracker, RewardVector, UniformLearner,
};

use crate::config::{ExperimentConfig, ExperimentKind, Params};
use crate::error::{CliError, CliResult};

/// Files produced by a run, in creation order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub files: Vec<PathBuf>,
}

impl Report {
    fn path(&mut self, dir: &Path, name: &str) -> PathBuf {
        let path = dir.join(name);
        self.files.push(path.clone());
        path
    }

    fn csv<T: Serialize>(&mut self, dir: &Path, name: &str, rows: &[T]) -> CliResult<()> {
        let mut w = csv::Writer::from_path(self.path(dir, name))?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    fn writer(&mut self, dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path(dir, name))?))
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> CliResult<Report> {
    fs::create_dir_all(&config.out)?;
    let mut report = Report::default();
    let p = &config.params;
    let seed = config.seed;
    let out = config.out.as_path();
    match config.kind {
        ExperimentKind::RegretCurve => regret_curve(p, seed, out, &mut report)?,
        ExperimentKind::BoundCheck => bound_check(p, seed, out, &mut report)?,
        ExperimentKind::Hardseq => hardseq(p, seed, out, &mut report)?,
        ExperimentKind::NfgDynamics => nfg_dynamics(p, seed, out, &mut report)?,
        ExperimentKind::Comm => comm(p, seed, out, &mut report)?,
        ExperimentKind::Sparsify => sparsify_experiment(p, seed, out, &mut report)?,
        ExperimentKind::EfgNfce => efg_nfce(p, seed, out, &mut report)?,
        ExperimentKind::Twocoin => twocoin(p, seed, out, &mut report)?,
    }
    let mut echo = report.writer(out, "config.toml")?;
    echo.write_all(config.to_toml_string().as_bytes())?;
    echo.flush()?;
    Ok(report)
}

fn positive<T: PartialOrd + Default + std::fmt::Display>(name: &str, value: T) -> CliResult<T> {
    if value > T::default() {
        Ok(value)
    } else {
        Err(CliError::Usage(format!("{name} must be positive, got {value}")))
    }
}

fn adversary(name: &str, n: usize, seed: u64) -> CliResult<Box<dyn Adversary + Send>> {
    Ok(match name {
        "random" => Box::new(RandomRewards::new(
            n,
            RewardDistribution::Uniform,
            seeded_rng(seed, "adversary"),
        )),
        "bernoulli" => Box::new(RandomRewards::new(
            n,
            RewardDistribution::Bernoulli(0.5),
            seeded_rng(seed, "adversary"),
        )),
        "adaptive" => Box::new(AdaptiveBestResponse::new(n)),
        other => {
            return Err(CliError::Usage(format!(
                "unknown adversary '{other}' (expected random, bernoulli or adaptive)"
            )))
        }
    })
}

/// Plays `learner` against `adversary` for up to `days` days, calling `each`
/// with the record so far after every day.
fn play_observed<L, A, F>(learner: &mut L, adversary: &mut A, days: u64, mut each: F) -> CliResult<PlayRecord>
where
    L: Learner + ?Sized,
    A: Adversary + ?Sized,
    F: FnMut(u64, &ActionDistribution, &RewardVector) -> CliResult<()>,
{
    let mut record = PlayRecord::new();
    for day in 1..=days {
        let played = learner.act()?;
        let Some(reward) = adversary.next_reward(&played)? else {
            break;
        };
        learner.update(&reward)?;
        each(day, &played, &reward)?;
        record.push(played, reward)?;
    }
    Ok(record)
}

#[derive(Serialize)]
struct CurveRow {
    day: u64,
    external_regret: f64,
    swap_regret: f64,
    mwu_bound: f64,
}

fn regret_curve(p: &Params, seed: u64, out: &Path, report: &mut Report) -> CliResult<()> {
    let n = positive("n", p.n.unwrap_or(4))?;
    let days = positive("days", p.days.unwrap_or(1000))?;
    let mut learner = Mwu::new(n, days, 1.0)?;
    let mut adv = adversary(p.adversary.as_deref().unwrap_or("random"), n, seed)?;
    let mut tracker = RegretTracker::new(n);
    let mut rows = Vec::with_capacity(days as usize);
    play_observed(&mut learner, &mut adv, days, |day, played, reward| {
        tracker.observe(played.probs(), reward.rewards())?;
        rows.push(CurveRow {
            day,
            external_regret: tracker.external().0,
            swap_regret: tracker.swap().0,
            mwu_bound: regret_bound(n, days, 1.0),
        });
        Ok(())
    })?;
    report.csv(out, "regret_curve.csv", &rows)
}

#[derive(Serialize)]
struct BoundRow {
    day: u64,
    swap_regret_so_far: f64,
    eq3_bound: f64,
}

fn bound_check(p: &Params, seed: u64, out: &Path, report: &mut Report) -> CliResult<()> {
    let n = positive("n", p.n.unwrap_or(4))?;
    let (block, scales) = p.schedule()?.unwrap_or((4, 2));
    let config = MultiScaleConfig::new(n, 1.0, scales, block)?;
    let days = config.horizon();
    let mut learner = MultiScaleLearner::new(config);
    let mut adv = adversary(p.adversary.as_deref().unwrap_or("adaptive"), n, seed)?;
    let mut tracker = RegretTracker::new(n);
    let mut bound = BoundAccumulator::new(n, scales, block, 1.0);
    let mut rows = Vec::with_capacity(days as usize);
    play_observed(&mut learner, &mut adv, days, |day, played, reward| {
        tracker.observe(played.probs(), reward.rewards())?;
        bound.observe(reward)?;
        rows.push(BoundRow {
            day,
            swap_regret_so_far: tracker.swap().0,
            eq3_bound: bound.bound(),
        });
        Ok(())
    })?;
    report.csv(out, "eq3_check.csv", &rows)
}

/// Replays a stream fixed in advance.
struct Replay<'a> {
    n: usize,
    days: std::slice::Iter<'a, RewardVector>,
}

impl Adversary for Replay<'_> {
    fn n(&self) -> usize {
        self.n
    }

    fn next_reward(&mut self, _played: &ActionDistribution) -> swapregret::Result<Option<RewardVector>> {
        Ok(self.days.next().cloned())
    }
}

#[derive(Serialize)]
struct HardseqRow {
    run: usize,
    seed: u64,
    length: u64,
    learner: &'static str,
    swap_regret: f64,
    external_regret: f64,
}

fn hardseq(p: &Params, seed: u64, out: &Path, report: &mut Report) -> CliResult<()> {
    let base = HardSeqConfig::new(
        p.k.unwrap_or(2),
        p.l.unwrap_or(3),
        p.delta.unwrap_or(1.0 / 20.0),
        0,
    )?;
    let runs = positive("runs", p.runs.unwrap_or(10))?;
    let n = base.actions();
    let rows = Execution::default().try_map(runs, |run| -> CliResult<Vec<HardseqRow>> {
        let run_seed = derive_seed(seed, &format!("hardseq-run-{run}"));
        let mut sequence = HardSequence::new(base.with_seed(run_seed));
        let mut stream = Vec::new();
        while let Some(day) = sequence.next_day()? {
            stream.push(day);
        }
        let length = stream.len() as u64;
        let learners: [(&'static str, Box<dyn Learner>); 2] = [
            ("mwu", Box::new(Mwu::new(n, base.max_length(), base.width())?)),
            ("uniform", Box::new(UniformLearner::new(n))),
        ];
        learners
            .into_iter()
            .map(|(name, mut learner)| {
                let mut replay = Replay { n, days: stream.iter() };
                let record = play(&mut learner, &mut replay, length)?;
                Ok(HardseqRow {
                    run,
                    seed: run_seed,
                    length,
                    learner: name,
                    swap_regret: swap_regret(&record)?.0,
                    external_regret: external_regret(&record)?,
                })
            })
            .collect()
    })?;
    report.csv(out, "hardseq.csv", &rows.into_iter().flatten().collect::<Vec<_>>())
}

fn schedule_or_epsilon(p: &Params, eps: f64) -> CliResult<DynamicsConfig> {
    let config = DynamicsConfig::exact(eps);
    Ok(match p.schedule()? {
        Some((h, s)) => config.with_schedule(h, s),
        None => config,
    })
}

#[derive(Serialize)]
struct DynamicsRow {
    player: usize,
    swap_regret: f64,
    certified_gain: Option<f64>,
    epsilon_achieved: Option<f64>,
    queries: Option<u64>,
    horizon: u64,
    samples: Option<usize>,
}

fn nfg_dynamics(p: &Params, seed: u64, out: &Path, report: &mut Report) -> CliResult<()> {
    let players = positive("players", p.players.unwrap_or(2))?;
    let n = positive("n", p.n.unwrap_or(4))?;
    let eps = p.eps.unwrap_or(0.4);
    let mut config = schedule_or_epsilon(p, eps)?;
    let sampled = match p.mode.as_deref() {
        None => p.k.is_some(),
        Some("exact") => false,
        Some("sampled") => true,
        Some(other) => return Err(CliError::Usage(format!("unknown mode '{other}' (expected exact or sampled)"))),
    };
    if sampled {
        config.mode = RewardMode::Sampled {
            samples: p.k,
            shared: p.shared.unwrap_or(true),
        };
    }
    let game = NormalFormGame::random(players, n, &mut seeded_rng(seed, "nfg-game"))?;
    let outcome = run_uncoupled_dynamics(&game, &config, seed, Execution::Sequential)?;
    let rows: Vec<DynamicsRow> = (0..players)
        .map(|i| DynamicsRow {
            player: i + 1,
            swap_regret: outcome.swap_regret[i],
            certified_gain: outcome.certificate.as_ref().map(|c| c.players[i].gain),
            epsilon_achieved: outcome.certificate.as_ref().map(|c| c.epsilon_achieved),
            queries: outcome.samples.map(|_| outcome.queries),
            horizon: outcome.horizon,
            samples: outcome.samples,
        })
        .collect();
    report.csv(out, "nfg_summary.csv", &rows)?;
    let mut w = report.writer(out, "nfg_distribution.csv")?;
    outcome.distribution.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct CommRow {
    horizon: u64,
    samples: usize,
    total_bits: u64,
    expected_bits: u64,
    epsilon_achieved: f64,
}

fn comm(p: &Params, seed: u64, out: &Path, report: &mut Report) -> CliResult<()> {
    let n = positive("n", p.n.unwrap_or(4))?;
    let alice = UtilityMatrix::random(n, &mut seeded_rng(seed, "comm-alice"));
    let bob = UtilityMatrix::random(n, &mut seeded_rng(seed, "comm-bob"));
    let config = CommConfig {
        epsilon: p.eps.unwrap_or(0.4),
        schedule: p.schedule()?,
        samples: p.k,
    };
    let outcome = run_comm_protocol(&alice, &bob, &config, seed)?;
    let game = UtilityMatrix::to_game(&alice, &bob)?;
    let cert = verify_ce(&game, &outcome.matrix.to_joint()?, Execution::Sequential)?;
    let row = CommRow {
        horizon: outcome.horizon,
        samples: outcome.samples,
        total_bits: outcome.transcript.total_bits(),
        expected_bits: outcome.horizon * (outcome.samples as u64 + 1) * u64::from(bits_for(n)),
        epsilon_achieved: cert.epsilon_achieved,
    };
    report.csv(out, "comm_summary.csv", &[row])?;
    let mut w = report.writer(out, "comm_transcript.csv")?;
    outcome.transcript.write_csv(&mut w)?;
    w.flush()?;
    let mut w = report.writer(out, "comm_ce.txt")?;
    outcome.matrix.write_triplets(&mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SparsifyRow {
    game: usize,
    repeat: usize,
    epsilon_before: f64,
    epsilon_after: f64,
    rows_before: usize,
    rows_after: usize,
    row_bound: usize,
    columns_before: usize,
    columns_after: usize,
}

fn sparsify_experiment(p: &Params, seed: u64, out: &Path, report: &mut Report) -> CliResult<()> {
    let n = positive("n", p.n.unwrap_or(3))?;
    let eps = p.eps.unwrap_or(0.4);
    let delta = p.delta.unwrap_or(0.2);
    let games = positive("runs", p.runs.unwrap_or(10))?;
    let repeats = positive("repeats", p.repeats.unwrap_or(50))?;
    let config = schedule_or_epsilon(p, eps)?;
    let rows = Execution::default().try_map(games, |g| -> CliResult<Vec<SparsifyRow>> {
        let game_seed = derive_seed(seed, &format!("sparsify-game-{g}"));
        let game = NormalFormGame::random(2, n, &mut seeded_rng(game_seed, "game"))?;
        let outcome = run_uncoupled_dynamics(&game, &config, game_seed, Execution::Sequential)?;
        let ce = TwoPlayerCeMatrix::from_joint(&outcome.distribution)?;
        let before = verify_ce(&game, &ce.to_joint()?, Execution::Sequential)?;
        let row_bound = sparsify_rows(ce.column_support().len(), n, delta);
        (0..repeats)
            .map(|r| {
                let mut rng = seeded_rng(game_seed, &format!("sparsify-{r}"));
                let sparse = sparsify(&ce, delta, &mut rng)?;
                let after = verify_ce(&game, &sparse.to_joint()?, Execution::Sequential)?;
                Ok(SparsifyRow {
                    game: g,
                    repeat: r,
                    epsilon_before: before.epsilon_achieved,
                    epsilon_after: after.epsilon_achieved,
                    rows_before: ce.row_support().len(),
                    rows_after: sparse.row_support().len(),
                    row_bound,
                    columns_before: ce.column_support().len(),
                    columns_after: sparse.column_support().len(),
                })
            })
            .collect()
    })?;
    report.csv(out, "sparsify.csv", &rows.into_iter().flatten().collect::<Vec<_>>())
}

#[derive(Serialize)]
struct NfceRow {
    player: usize,
    strategies: u64,
    gain: Option<f64>,
    horizon: u64,
    samples: usize,
    block: u64,
    scales: u32,
}

fn efg_nfce(p: &Params, seed: u64, out: &Path, report: &mut Report) -> CliResult<()> {
    let players = positive("players", p.players.unwrap_or(2))?;
    let tree_config = RandomTreeConfig::new(
        players,
        positive("infosets", p.infosets.unwrap_or(2))?,
        positive("n", p.n.unwrap_or(2))?,
    )
    .with_chance(0.2, 2);
    let tree = random_tree(&tree_config, &mut seeded_rng(seed, "efg-tree"))?;
    let config = NfceConfig {
        epsilon: p.eps.unwrap_or(0.5),
        schedule: p.schedule()?,
        samples: p.k,
    };
    let outcome = run_nfce_dynamics(&tree, &config, seed)?;
    let mut w = report.writer(out, "efg_tree.txt")?;
    tree.write(&mut w)?;
    w.flush()?;
    let rows: Vec<NfceRow> = (0..players)
        .map(|i| NfceRow {
            player: i + 1,
            strategies: tree.strategy_count(i).unwrap_or(u64::MAX),
            gain: outcome.certificate.as_ref().map(|c| c.gains[i]),
            horizon: outcome.horizon,
            samples: outcome.samples,
            block: outcome.block,
            scales: outcome.scales,
        })
        .collect();
    report.csv(out, "efg_summary.csv", &rows)?;
    let mut w = report.writer(out, "efg_distribution.csv")?;
    outcome.distribution.write_csv(&tree, &mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TwoCoinRow {
    run: usize,
    biased: usize,
    days: u64,
    gain: f64,
    predicted_gain: f64,
}

fn twocoin(p: &Params, seed: u64, out: &Path, report: &mut Report) -> CliResult<()> {
    let delta = p.delta.unwrap_or(1.0 / 20.0);
    let runs = positive("runs", p.runs.unwrap_or(1000))?;
    TwoCoinConfig::new(delta, 0)?;
    let rows = Execution::default().try_map(runs, |run| -> CliResult<TwoCoinRow> {
        let config = TwoCoinConfig::new(delta, derive_seed(seed, &format!("twocoin-run-{run}")))?;
        let mut game = TwoCoinGame::new(config);
        let days = game.config().block();
        let mut learner = UniformLearner::new(3);
        let record = play(&mut learner, &mut game, days)?;
        Ok(TwoCoinRow {
            run,
            biased: game.biased(),
            days,
            gain: biased_swap_gain(record.days(), game.biased()),
            predicted_gain: predicted_swap_gain(delta, 2.0 / 3.0, days),
        })
    })?;
    report.csv(out, "twocoin.csv", &rows)
}
