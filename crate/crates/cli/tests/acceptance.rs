//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.
//! Run with `cargo test -p swapregret-cli --test acceptance`.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::Rng;
use swapregret::adversaries::{
    biased_swap_gain, expected_length, play, predicted_swap_gain, Adversary, AdaptiveBestResponse,
    HardSeqConfig, HardSequence, RandomRewards, RewardDistribution, TwoCoinConfig, TwoCoinGame,
};
use swapregret::comm::{run_comm_protocol, sparsify, sparsify_rows, CommConfig, TwoPlayerCeMatrix, UtilityMatrix};
use swapregret::efg::{
    build_partition, eval_utility, random_tree, run_nfce_dynamics, verify_nfce, GameTree, NfceConfig,
    PureStrategy, RandomTreeConfig, StrategyProfileDist, TerminalWeights,
};
use swapregret::mwu::regret_bound;
use swapregret::nfg::{run_uncoupled_dynamics, verify_ce, DynamicsConfig, NormalFormGame, RewardMode};
use swapregret::numeric::{bits_for, log_sum_exp, seeded_rng};
use swapregret::{
    multiscale_bound, external_regret, swap_regret, ActionDistribution, Execution, MultiScaleConfig,
    MultiScaleLearner, Mwu, PlayRecord, RewardVector, UniformLearner,
};

const SWAP_TOL: f64 = 1e-9;
const BOUND_SLACK: f64 = 1e-9;
const PREFIX_TOL: f64 = 1e-9;
const TV_TOL: f64 = 0.01;
const STANDARD_ERRORS: f64 = 3.0;

/// Schedule used for the dynamics criteria (6, 8, 9, 11).
const DYNAMICS_SCHEDULE: (u64, u32) = (64, 1);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within_budget(out: Outcome, elapsed: Duration, limit: Duration) -> Outcome {
    if elapsed > limit {
        outcome(false, format!("{}; runtime {elapsed:.1?} over {limit:.0?}", out.detail))
    } else {
        out
    }
}

// ---------------------------------------------------------------------------
// 1. Swap regret against exhaustive enumeration.

fn brute_force_swap(record: &PlayRecord, n: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut phi = vec![0usize; n];
    loop {
        let gain: f64 = record
            .days()
            .iter()
            .map(|(p, r)| {
                let (p, r) = (p.probs(), r.rewards());
                (0..n).map(|i| p[i] * (r[phi[i]] - r[i])).sum::<f64>()
            })
            .sum();
        best = best.max(gain);
        let mut k = 0;
        while k < n {
            phi[k] += 1;
            if phi[k] < n {
                break;
            }
            phi[k] = 0;
            k += 1;
        }
        if k == n {
            return best;
        }
    }
}

fn random_record<R: Rng>(rng: &mut R, n: usize, days: usize) -> PlayRecord {
    let mut record = PlayRecord::new();
    for _ in 0..days {
        let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let r: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        record
            .push(ActionDistribution::from_weights(&w).unwrap(), RewardVector::new(r, 1.0).unwrap())
            .unwrap();
    }
    record
}

fn criterion_1() -> Outcome {
    let mut rng = seeded_rng(1, "acceptance-1");
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=5);
        let days = rng.gen_range(1..=6);
        let record = random_record(&mut rng, n, days);
        let fast = swap_regret(&record).unwrap().0;
        worst = worst.max((fast - brute_force_swap(&record, n)).abs());
    }
    outcome(worst <= SWAP_TOL, format!("1000 records, max |diff| {worst:.2e} (tol {SWAP_TOL:.0e})"))
}

// ---------------------------------------------------------------------------
// 2. External regret of MWU.

/// Back-to-back hard sequences, truncated to `days`, with `2 K^L = n` actions.
fn hard_stream(n: usize, days: u64, seed: u64) -> (Vec<RewardVector>, f64) {
    let (k, l) = match n {
        2 => (1, 1),
        8 => (2, 2),
        32 => (2, 4),
        _ => unreachable!("no tree shape for n = {n}"),
    };
    let base = HardSeqConfig::new(k, l, 1.0 / 20.0, 0).unwrap();
    let mut out = Vec::with_capacity(days as usize);
    let mut part = 0u64;
    while (out.len() as u64) < days {
        let mut seq = HardSequence::new(base.with_seed(seed.wrapping_mul(1_000_003).wrapping_add(part)));
        while let Some(day) = seq.next_day().unwrap() {
            out.push(day);
        }
        part += 1;
    }
    out.truncate(days as usize);
    (out, base.width())
}

struct Replay(std::vec::IntoIter<RewardVector>, usize);

impl Adversary for Replay {
    fn n(&self) -> usize {
        self.1
    }

    fn next_reward(&mut self, _played: &ActionDistribution) -> swapregret::Result<Option<RewardVector>> {
        Ok(self.0.next())
    }
}

fn criterion_2() -> Outcome {
    let mut cases = Vec::new();
    for n in [2usize, 8, 32] {
        for days in [1_000u64, 10_000] {
            for adv in ["random", "hardseq", "adaptive"] {
                for seed in 0..20u64 {
                    cases.push((n, days, adv, seed));
                }
            }
        }
    }
    let results = Execution::default().map_slice(&cases, |&(n, days, adv, seed)| {
        let (record, width) = match adv {
            "random" => {
                let mut a = RandomRewards::new(n, RewardDistribution::Uniform, seeded_rng(seed, "acceptance-2"));
                (play(&mut Mwu::new(n, days, 1.0).unwrap(), &mut a, days).unwrap(), 1.0)
            }
            "hardseq" => {
                let (stream, width) = hard_stream(n, days, seed);
                let mut a = Replay(stream.into_iter(), n);
                (play(&mut Mwu::new(n, days, width).unwrap(), &mut a, days).unwrap(), width)
            }
            _ => {
                let mut a = AdaptiveBestResponse::new(n);
                (play(&mut Mwu::new(n, days, 1.0).unwrap(), &mut a, days).unwrap(), 1.0)
            }
        };
        assert_eq!(record.horizon() as u64, days);
        external_regret(&record).unwrap() / regret_bound(n, days, width)
    });
    let violations = results.iter().filter(|&&r| r > 1.0).count();
    let worst = results.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        violations == 0,
        format!("{} runs, {violations} violations, worst regret/bound {worst:.3}", results.len()),
    )
}

// ---------------------------------------------------------------------------
// 3. Deterministic multi-scale bound.

fn criterion_3() -> Outcome {
    let mut cases = Vec::new();
    for (h, s) in [(4u64, 1u32), (4, 2), (8, 2)] {
        for n in [2usize, 4, 8] {
            for adaptive in [false, true] {
                for seed in 0..50u64 {
                    cases.push((h, s, n, adaptive, seed));
                }
            }
        }
    }
    let results = Execution::default().map_slice(&cases, |&(h, s, n, adaptive, seed)| {
        let cfg = MultiScaleConfig::new(n, 1.0, s, h).unwrap();
        let days = cfg.horizon();
        let mut learner = MultiScaleLearner::new(cfg);
        let record = if adaptive {
            play(&mut learner, &mut AdaptiveBestResponse::new(n), days).unwrap()
        } else {
            let mut a = RandomRewards::new(n, RewardDistribution::Uniform, seeded_rng(seed, "acceptance-3"));
            play(&mut learner, &mut a, days).unwrap()
        };
        let regret = swap_regret(&record).unwrap().0;
        let bound = multiscale_bound(&record, s, h, 1.0).unwrap();
        (regret <= bound + BOUND_SLACK, regret - bound)
    });
    let violations = results.iter().filter(|r| !r.0).count();
    let closest = results.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    outcome(
        violations == 0,
        format!("{} runs, {violations} violations, max regret - bound {closest:.3}", results.len()),
    )
}

// ---------------------------------------------------------------------------
// 4. Mean hard-sequence length.

fn criterion_4() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (depth, target) in [(1u32, 7.0 / 4.0), (2, 49.0 / 16.0)] {
        let base = HardSeqConfig::new(2, depth, 1.0 / 20.0, 0).unwrap();
        assert_eq!(base.block(), 1);
        let runs = 100_000usize;
        let lengths = Execution::default().map(runs, |seed| {
            HardSequence::new(base.with_seed(seed as u64)).run_to_end().unwrap() as f64
        });
        let mean = lengths.iter().sum::<f64>() / runs as f64;
        let var = lengths.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
        let se = (var / runs as f64).sqrt();
        let ok = (mean - target).abs() <= STANDARD_ERRORS * se && (expected_length(&base) - target).abs() < 1e-12;
        pass &= ok;
        parts.push(format!("L={depth}: mean {mean:.4} vs {target:.4} ({:.2} SE)", (mean - target) / se));
    }
    outcome(pass, parts.join(", "))
}

// ---------------------------------------------------------------------------
// 5. Two-coin game.

fn criterion_5() -> Outcome {
    let delta = 1.0 / 20.0;
    let games = 1_000_000usize;
    let block = TwoCoinConfig::new(delta, 0).unwrap().block();
    let per_game = Execution::default().map(games, |seed| {
        let mut game = TwoCoinGame::new(TwoCoinConfig::new(delta, seed as u64).unwrap());
        let record = play(&mut UniformLearner::new(3), &mut game, block).unwrap();
        let biased = game.biased();
        let heads: f64 = record.days().iter().map(|(_, r)| r.rewards()[biased]).sum();
        (heads, biased_swap_gain(record.days(), biased))
    });
    let draws = (games as u64 * block) as f64;
    let heads: f64 = per_game.iter().map(|g| g.0).sum();
    let p = 0.5 + delta;
    let sigma = (p * (1.0 - p) / draws).sqrt();
    let mean = heads / draws;
    let coin_ok = (mean - p).abs() <= STANDARD_ERRORS * sigma;

    let gains: Vec<f64> = per_game.iter().map(|g| g.1).collect();
    let g_mean = gains.iter().sum::<f64>() / games as f64;
    let g_var = gains.iter().map(|g| (g - g_mean).powi(2)).sum::<f64>() / (games - 1) as f64;
    let g_se = (g_var / games as f64).sqrt();
    let predicted = predicted_swap_gain(delta, 2.0 / 3.0, block);
    let gain_ok = g_mean > 0.0 && (g_mean - predicted).abs() <= STANDARD_ERRORS * g_se;
    outcome(
        coin_ok && gain_ok,
        format!(
            "{draws:.0} draws, biased mean {mean:.5} vs {p:.5} ({:.2} sigma); gain {g_mean:.5} vs {predicted:.5} ({:.2} SE)",
            (mean - p) / sigma,
            (g_mean - predicted) / g_se
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. Exact-reward dynamics reach a 0.4-CE.

fn criterion_6() -> Outcome {
    let eps = 0.4;
    let (h, s) = DYNAMICS_SCHEDULE;
    let results = Execution::default().map(20, |seed| {
        let game = NormalFormGame::random(2, 4, &mut seeded_rng(seed as u64, "acceptance-6")).unwrap();
        let cfg = DynamicsConfig::exact(eps).with_schedule(h, s);
        let out = run_uncoupled_dynamics(&game, &cfg, seed as u64, Execution::Sequential).unwrap();
        let t = out.horizon as f64;
        let worst_regret = out.swap_regret.iter().cloned().fold(0.0, f64::max) / t;
        (out.certificate.unwrap().epsilon_achieved, worst_regret)
    });
    let worst_eps = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let worst_rate = results.iter().map(|r| r.1).fold(0.0, f64::max);
    outcome(
        worst_eps <= eps && worst_rate <= eps / 2.0,
        format!("20 games, (H,S)=({h},{s}), worst eps {worst_eps:.4}, worst regret/T {worst_rate:.4}"),
    )
}

// ---------------------------------------------------------------------------
// 7. Query accounting.

fn criterion_7() -> Outcome {
    use std::sync::atomic::{AtomicU64, Ordering};
    use std::sync::Arc;
    let (m, n, k) = (3usize, 3usize, 7usize);
    let dense = NormalFormGame::random(m, n, &mut seeded_rng(7, "acceptance-7")).unwrap();
    let table: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut profile = vec![0; m];
            let mut v = Vec::new();
            loop {
                v.push(dense.query(i, &profile).unwrap());
                let mut p = 0;
                while p < m {
                    profile[p] += 1;
                    if profile[p] < n {
                        break;
                    }
                    profile[p] = 0;
                    p += 1;
                }
                if p == m {
                    break v;
                }
            }
        })
        .collect();
    let calls = Arc::new(AtomicU64::new(0));
    let counter = Arc::clone(&calls);
    let oracle = NormalFormGame::oracle(m, n, move |i, a| {
        counter.fetch_add(1, Ordering::Relaxed);
        let idx = a.iter().rev().fold(0, |acc, &x| acc * n + x);
        table[i][idx]
    })
    .unwrap();
    let mut cfg = DynamicsConfig::exact(0.5).with_schedule(8, 1);
    cfg.mode = RewardMode::Sampled {
        samples: Some(k),
        shared: true,
    };
    let out = run_uncoupled_dynamics(&oracle, &cfg, 3, Execution::Sequential).unwrap();
    let expected = (m * n * k) as u64 * out.horizon;
    let observed = calls.load(Ordering::Relaxed);
    outcome(
        out.queries == expected && observed == expected,
        format!("m={m} n={n} K={k} T={}: reported {}, oracle counted {observed}, m n K T = {expected}", out.horizon, out.queries),
    )
}

// ---------------------------------------------------------------------------
// 8. Two-party protocol.

fn criterion_8() -> Outcome {
    let (n, eps) = (4usize, 0.4);
    let results = Execution::default().map(20, |seed| {
        let seed = seed as u64;
        let alice = UtilityMatrix::random(n, &mut seeded_rng(seed, "acceptance-8-alice"));
        let bob = UtilityMatrix::random(n, &mut seeded_rng(seed, "acceptance-8-bob"));
        let cfg = CommConfig {
            epsilon: eps,
            schedule: Some(DYNAMICS_SCHEDULE),
            samples: None,
        };
        let out = run_comm_protocol(&alice, &bob, &cfg, seed).unwrap();
        let game = UtilityMatrix::to_game(&alice, &bob).unwrap();
        let cert = verify_ce(&game, &out.matrix.to_joint().unwrap(), Execution::Sequential).unwrap();
        let expected_bits = out.horizon * (out.samples as u64 + 1) * u64::from(bits_for(n));
        (cert.epsilon_achieved, out.transcript.total_bits() == expected_bits, out.samples, out.horizon)
    });
    let worst = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let bits_ok = results.iter().all(|r| r.1);
    outcome(
        worst <= eps && bits_ok,
        format!(
            "20 seeds, K={} T={}, worst eps {worst:.4}, bits exact: {bits_ok}",
            results[0].2, results[0].3
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. Sparsification.

fn criterion_9() -> Outcome {
    let (n, eps, delta) = (3usize, 0.4, 0.2);
    let (h, s) = DYNAMICS_SCHEDULE;
    let results = Execution::default().map(10, |g| {
        let game = NormalFormGame::random(2, n, &mut seeded_rng(g as u64, "acceptance-9")).unwrap();
        let cfg = DynamicsConfig::exact(eps).with_schedule(h, s);
        let out = run_uncoupled_dynamics(&game, &cfg, g as u64, Execution::Sequential).unwrap();
        let ce = TwoPlayerCeMatrix::from_joint(&out.distribution).unwrap();
        let before = verify_ce(&game, &ce.to_joint().unwrap(), Execution::Sequential).unwrap().epsilon_achieved;
        let d = sparsify_rows(ce.column_support().len(), n, delta);
        let mut failures = 0;
        let mut worst_excess = f64::NEG_INFINITY;
        for r in 0..50 {
            let sparse = sparsify(&ce, delta, &mut seeded_rng(g as u64, &format!("acceptance-9-{r}"))).unwrap();
            let after = verify_ce(&game, &sparse.to_joint().unwrap(), Execution::Sequential).unwrap().epsilon_achieved;
            worst_excess = worst_excess.max(after - before);
            let ok = after <= before + delta
                && sparse.column_support().is_subset(&ce.column_support())
                && sparse.row_support().len() <= d;
            failures += usize::from(!ok);
        }
        (before, failures, worst_excess)
    });
    let failures: usize = results.iter().map(|r| r.1).sum();
    let worst_input = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let worst_excess = results.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    outcome(
        failures == 0 && worst_input <= eps,
        format!(
            "10 games x 50 seeds, worst input eps {worst_input:.4}, worst increase {worst_excess:.4} (allowed {delta}), {failures} failures"
        ),
    )
}

// ---------------------------------------------------------------------------
// 10. Partition tables and sampling.

fn tree_config(index: u64) -> RandomTreeConfig {
    let (players, phi, lo, hi) = [(2, 2, 2, 3), (2, 3, 2, 3), (2, 4, 2, 2), (3, 2, 2, 5), (2, 1, 2, 4)][index as usize % 5];
    let mut cfg = RandomTreeConfig::new(players, phi, lo).with_chance(0.3, 2);
    cfg.max_actions = hi;
    cfg.stop_probability = 0.1;
    cfg
}

fn random_profile<R: Rng>(tree: &GameTree, rng: &mut R) -> Vec<PureStrategy> {
    (0..tree.players())
        .map(|p| tree.strategy_from_index(p, rng.gen_range(0..tree.strategy_count(p).unwrap())))
        .collect()
}

struct Softmax {
    strategies: Vec<PureStrategy>,
    log_probs: Vec<f64>,
}

fn enumerated_softmax(tree: &GameTree, player: usize, context: &[(f64, Vec<PureStrategy>)], eta: f64) -> Softmax {
    let strategies = tree.enumerate_strategies(player, 30).unwrap();
    let logits: Vec<f64> = strategies
        .iter()
        .map(|s| {
            eta * context
                .iter()
                .map(|(w, prof)| {
                    let mut p = prof.clone();
                    p[player] = s.clone();
                    w * eval_utility(tree, &p).unwrap()[player]
                })
                .sum::<f64>()
        })
        .collect();
    let z = log_sum_exp(&logits);
    Softmax {
        strategies,
        log_probs: logits.iter().map(|l| l - z).collect(),
    }
}

fn criterion_10() -> Outcome {
    let mut worst = 0.0f64;
    let mut tv_worst = 0.0f64;
    let mut chance_trees = 0;
    for index in 0..50u64 {
        let mut rng = seeded_rng(index, "acceptance-10");
        let tree = random_tree(&tree_config(index), &mut rng).unwrap();
        if tree.nodes().iter().any(|n| matches!(n.kind, swapregret::efg::NodeKind::Chance { .. })) {
            chance_trees += 1;
        }
        let player = (index % tree.players() as u64) as usize;
        assert!((0..tree.players()).all(|p| tree.strategy_count(p).unwrap() <= 30));
        let context: Vec<(f64, Vec<PureStrategy>)> = (0..5)
            .map(|_| (rng.gen_range(0.1..3.0), random_profile(&tree, &mut rng)))
            .collect();
        let eta = rng.gen_range(0.1..4.0);
        let weights = TerminalWeights::from_profiles(&tree, player, &context).unwrap();
        let tables = build_partition(&tree, &weights, eta).unwrap();
        let exact = enumerated_softmax(&tree, player, &context, eta);
        for len in 1..=tables.infoset_count() {
            let mut groups: BTreeMap<&[usize], Vec<f64>> = BTreeMap::new();
            for (s, lp) in exact.strategies.iter().zip(&exact.log_probs) {
                groups.entry(&s.actions()[..len]).or_default().push(*lp);
            }
            for (prefix, lps) in groups {
                let diff = (tables.prefix_log_probability(prefix).unwrap() - log_sum_exp(&lps)).abs();
                worst = worst.max(diff);
            }
        }
        if index < 3 {
            let draws = 1_000_000;
            let mut counts = vec![0u64; exact.strategies.len()];
            let mut srng = seeded_rng(index, "acceptance-10-draws");
            for _ in 0..draws {
                counts[tree.strategy_index(player, &tables.sample(&mut srng)) as usize] += 1;
            }
            let tv: f64 = exact
                .strategies
                .iter()
                .zip(&exact.log_probs)
                .map(|(s, lp)| (counts[tree.strategy_index(player, s) as usize] as f64 / draws as f64 - lp.exp()).abs())
                .sum::<f64>()
                / 2.0;
            tv_worst = tv_worst.max(tv);
        }
    }
    outcome(
        worst <= PREFIX_TOL && tv_worst <= TV_TOL && chance_trees > 0,
        format!(
            "50 trees ({chance_trees} with chance), max prefix log diff {worst:.2e} (tol {PREFIX_TOL:.0e}), worst TV {tv_worst:.4} at 1e6 draws (tol {TV_TOL})"
        ),
    )
}

// ---------------------------------------------------------------------------
// 11. Extensive-form dynamics.

/// Best swap gain over all `|S|^|S|` maps, evaluated atom by atom.
fn enumerated_nfce_gain(tree: &GameTree, dist: &StrategyProfileDist, player: usize) -> f64 {
    let strategies = tree.enumerate_strategies(player, 16).unwrap();
    let count = strategies.len();
    // Table of u_i(s', s_-i) for each atom and each s'.
    let table: Vec<(f64, usize, Vec<f64>)> = dist
        .atoms()
        .iter()
        .map(|(w, profile)| {
            let own = tree.strategy_index(player, &profile[player]) as usize;
            let values = strategies
                .iter()
                .map(|s| {
                    let mut p = profile.clone();
                    p[player] = s.clone();
                    eval_utility(tree, &p).unwrap()[player]
                })
                .collect();
            (*w, own, values)
        })
        .collect();
    let mut best = f64::NEG_INFINITY;
    for code in 0..count.pow(count as u32) {
        let phi: Vec<usize> = (0..count).map(|k| code / count.pow(k as u32) % count).collect();
        let gain: f64 = table.iter().map(|(w, own, v)| w * (v[phi[*own]] - v[*own])).sum();
        best = best.max(gain);
    }
    best
}

fn criterion_11() -> Outcome {
    let eps = 0.5;
    let results = Execution::default().map(10, |seed| {
        let seed = seed as u64;
        let tree = random_tree(
            &RandomTreeConfig::new(2, 2, 2).with_chance(0.2, 2),
            &mut seeded_rng(seed, "acceptance-11"),
        )
        .unwrap();
        let cfg = NfceConfig {
            epsilon: eps,
            schedule: Some(DYNAMICS_SCHEDULE),
            samples: None,
        };
        let out = run_nfce_dynamics(&tree, &cfg, seed).unwrap();
        let cert = verify_nfce(&tree, &out.distribution).unwrap();
        let enumerated = (0..2)
            .map(|p| enumerated_nfce_gain(&tree, &out.distribution, p).max(0.0))
            .fold(0.0, f64::max);
        let sizes = (tree.strategy_count(0).unwrap(), tree.strategy_count(1).unwrap());
        (cert.epsilon_achieved, enumerated, sizes, out.samples)
    });
    let worst = results.iter().map(|r| r.0.max(r.1)).fold(0.0, f64::max);
    let agree = results.iter().all(|r| (r.0 - r.1).abs() < 1e-9);
    let sizes_ok = results.iter().all(|r| r.2 == (4, 4));
    outcome(
        worst <= eps && agree && sizes_ok,
        format!(
            "10 trees, |S_i| = 4 (256 swaps each), K={}, worst eps {worst:.4}, verifier agrees with enumeration: {agree}",
            results[0].3
        ),
    )
}

// ---------------------------------------------------------------------------
// 12. CLI hard-sequence report.

fn separable_swap(record: &PlayRecord, n: usize) -> f64 {
    let mut cross = vec![vec![0.0; n]; n];
    for (p, r) in record.days() {
        for i in 0..n {
            for j in 0..n {
                cross[i][j] += p.probs()[i] * r.rewards()[j];
            }
        }
    }
    (0..n)
        .map(|i| cross[i].iter().cloned().fold(f64::NEG_INFINITY, f64::max) - cross[i][i])
        .sum()
}

fn criterion_12() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: u64, tag: &str| -> Vec<u8> {
        let out = dir.path().join(format!("{seed}-{tag}"));
        let status = Command::new(env!("CARGO_BIN_EXE_swapregret"))
            .args(["--experiment", "hardseq", "--K", "2", "--L", "3", "--delta", "0.05", "--runs", "25"])
            .args(["--seed", &seed.to_string(), "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success());
        std::fs::read(out.join("hardseq.csv")).unwrap()
    };
    let config = HardSeqConfig::new(2, 3, 1.0 / 20.0, 0).unwrap();
    let n = config.actions();
    let mut deterministic = true;
    let mut uniform_rows = 0;
    let mut min_uniform = f64::INFINITY;
    let mut oracle_ok = true;
    let mut mwu_rows = 0;
    for seed in [1u64, 2, 3, 4] {
        let a = run(seed, "a");
        deterministic &= a == run(seed, "b");
        let mut rdr = csv::Reader::from_reader(&a[..]);
        for row in rdr.records() {
            let row = row.unwrap();
            let run_seed: u64 = row[1].parse().unwrap();
            let learner = &row[3];
            let reported: f64 = row[4].parse().unwrap();
            if learner == "mwu" {
                mwu_rows += 1;
                continue;
            }
            let mut seq = HardSequence::new(config.with_seed(run_seed));
            let mut stream = Vec::new();
            while let Some(day) = seq.next_day().unwrap() {
                stream.push(day);
            }
            let days = stream.len() as u64;
            let record = play(&mut UniformLearner::new(n), &mut Replay(stream.into_iter(), n), days).unwrap();
            let oracle = separable_swap(&record, n);
            oracle_ok &= (oracle - reported).abs() < 1e-9;
            min_uniform = min_uniform.min(oracle);
            uniform_rows += 1;
        }
    }
    outcome(
        deterministic && oracle_ok && min_uniform > 0.0 && uniform_rows == 100 && mwu_rows == 100,
        format!(
            "4 seeds x 25 runs, byte-identical reruns: {deterministic}, uniform swap regret min {min_uniform:.4} (oracle agrees: {oracle_ok}), {mwu_rows} MWU rows"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, u64); 12] = [
        ("swap-regret oracle equivalence", criterion_1, 60),
        ("MWU external-regret bound", criterion_2, 120),
        ("multi-scale deterministic bound", criterion_3, 300),
        ("hard-sequence mean length", criterion_4, 60),
        ("two-coin sanity", criterion_5, 60),
        ("uncoupled dynamics reach CE", criterion_6, 600),
        ("query accounting", criterion_7, 600),
        ("communication protocol", criterion_8, 600),
        ("sparsification", criterion_9, 600),
        ("partition tables and sampling", criterion_10, 300),
        ("extensive-form dynamics", criterion_11, 600),
        ("CLI hard-sequence diagnostic", criterion_12, 600),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let number = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| *f == number.to_string()) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check));
        let elapsed = start.elapsed();
        let out = match result {
            Ok(out) => within_budget(out, elapsed, Duration::from_secs(*limit)),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                outcome(false, format!("panicked: {msg}"))
            }
        };
        let status = if out.pass { "PASS" } else { "FAIL" };
        println!("{status} {number:>2} {name}: {} [{elapsed:.1?}]", out.detail);
        failed += usize::from(!out.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
