use proptest::prelude::*;
use rand::Rng;
use swapregret::nfg::{
    exact_reward_vector, run_uncoupled_dynamics, sampled_reward_vector, verify_ce, Atom,
    DynamicsConfig, JointDistribution, NormalFormGame, RewardMode, Schedule,
};
use swapregret::numeric::seeded_rng;
use swapregret::{multiscale_bound, swap_regret, ActionDistribution, Execution, PlayRecord};

fn profiles(m: usize, n: usize) -> Vec<Vec<usize>> {
    let mut all = vec![vec![]];
    for _ in 0..m {
        all = all
            .into_iter()
            .flat_map(|p| {
                (0..n).map(move |a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    all
}

fn profile_prob(atom: &Atom, profile: &[usize]) -> f64 {
    atom.factors.iter().zip(profile).map(|(f, &a)| f.prob(a)).product()
}

/// Max over all `n^n` swap functions of player `i`, summing over every joint profile.
fn brute_force_gain(game: &NormalFormGame, dist: &JointDistribution, i: usize) -> f64 {
    let m = game.players();
    let n = game.actions();
    let all = profiles(m, n);
    profiles(n, n)
        .iter()
        .map(|phi| {
            let mut gain = 0.0;
            for atom in dist.atoms() {
                for a in &all {
                    let q = atom.weight * profile_prob(atom, a);
                    if q == 0.0 {
                        continue;
                    }
                    let mut dev = a.clone();
                    dev[i] = phi[a[i]];
                    gain += q * (game.query(i, &dev).unwrap() - game.query(i, a).unwrap());
                }
            }
            gain
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn random_dist<R: Rng>(m: usize, n: usize, atoms: usize, rng: &mut R) -> JointDistribution {
    let weights: Vec<f64> = (0..atoms).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    JointDistribution::new(
        weights
            .iter()
            .map(|w| Atom {
                weight: w / total,
                factors: (0..m)
                    .map(|_| {
                        let raw: Vec<f64> = (0..n)
                            .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen() })
                            .collect();
                        ActionDistribution::from_weights(&raw)
                            .unwrap_or_else(|_| ActionDistribution::uniform(n))
                    })
                    .collect(),
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn verify_ce_matches_swap_enumeration() {
    for seed in 0..30 {
        let mut rng = seeded_rng(seed, "verify");
        let (m, n) = [(2, 3), (3, 2), (2, 4), (2, 2)][seed as usize % 4];
        let game = NormalFormGame::random(m, n, &mut rng).unwrap();
        let dist = random_dist(m, n, 1 + (seed as usize * 7) % 50, &mut rng);
        let cert = verify_ce(&game, &dist, Execution::default()).unwrap();
        for i in 0..m {
            let oracle = brute_force_gain(&game, &dist, i).max(0.0);
            assert!(
                (cert.players[i].gain - oracle).abs() < 1e-9,
                "seed {seed} player {i}: {} vs {oracle}",
                cert.players[i].gain
            );
        }
    }
}

#[test]
fn verification_is_execution_independent() {
    let mut rng = seeded_rng(1, "exec");
    let game = NormalFormGame::random(2, 4, &mut rng).unwrap();
    let dist = random_dist(2, 4, 1000, &mut rng);
    let a = verify_ce(&game, &dist, Execution::Sequential).unwrap();
    let b = verify_ce(&game, &dist, Execution::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn exact_rewards_agree_with_monte_carlo() {
    let mut rng = seeded_rng(2, "mc");
    let game = NormalFormGame::random(3, 3, &mut rng).unwrap();
    let strategies: Vec<ActionDistribution> = (0..3)
        .map(|_| ActionDistribution::from_weights(&[rng.gen(), rng.gen(), rng.gen()]).unwrap())
        .collect();
    let exact = exact_reward_vector(&game, 1, &strategies).unwrap();
    let samples = 1_000_000;
    let est = sampled_reward_vector(&game, 1, &strategies, samples, &mut rng).unwrap();
    for j in 0..3 {
        let sigma = (0.25 / samples as f64).sqrt();
        assert!((exact.rewards()[j] - est.rewards()[j]).abs() < 3.0 * sigma);
    }
    assert_eq!(game.queries(), 3 * samples as u64);
}

#[test]
fn sampled_rewards_meet_the_chernoff_rate() {
    let mut rng = seeded_rng(3, "chernoff");
    let game = NormalFormGame::random(2, 3, &mut rng).unwrap();
    let strategies = vec![ActionDistribution::uniform(3), ActionDistribution::new(vec![0.6, 0.3, 0.1]).unwrap()];
    let exact = exact_reward_vector(&game, 0, &strategies).unwrap();
    let (eps, k, trials) = (0.5f64, 200usize, 2000);
    let within = (0..trials)
        .filter(|_| {
            let est = sampled_reward_vector(&game, 0, &strategies, k, &mut rng).unwrap();
            est.rewards()
                .iter()
                .zip(exact.rewards())
                .all(|(a, b)| (a - b).abs() <= eps / 4.0)
        })
        .count();
    let guaranteed = 1.0 - 2.0 * 3.0 * (-eps * eps * k as f64 / 32.0).exp();
    assert!(within as f64 / trials as f64 >= guaranteed);
}

#[test]
fn exact_dynamics_respect_the_per_stream_bound() {
    for seed in 0..5 {
        let game = NormalFormGame::random(2, 3, &mut seeded_rng(seed, "game")).unwrap();
        let (block, scales) = (4, 1);
        let cfg = DynamicsConfig::exact(0.4).with_schedule(block, scales);
        let out = run_uncoupled_dynamics(&game, &cfg, seed, Execution::default()).unwrap();
        assert_eq!(out.distribution.atoms().len() as u64, out.horizon);
        let cert = out.certificate.as_ref().unwrap();
        for i in 0..2 {
            let mut rec = PlayRecord::new();
            for atom in out.distribution.atoms() {
                assert_eq!(atom.weight, 1.0 / out.horizon as f64);
                let r = exact_reward_vector(&game, i, &atom.factors).unwrap();
                rec.push(atom.factors[i].clone(), r).unwrap();
            }
            let (swap, _) = swap_regret(&rec).unwrap();
            assert!((swap - out.swap_regret[i]).abs() < 1e-9);
            assert!(swap <= multiscale_bound(&rec, scales, block, 1.0).unwrap() + 1e-9);
            assert!((cert.players[i].gain - swap / out.horizon as f64).abs() < 1e-9);
        }
    }
}

#[test]
fn matching_pennies_marginals_approach_uniform() {
    let game = NormalFormGame::matching_pennies();
    let cfg = DynamicsConfig::exact(0.4).with_schedule(64, 1);
    let out = run_uncoupled_dynamics(&game, &cfg, 0, Execution::default()).unwrap();
    for i in 0..2 {
        let tv = out.distribution.marginal(i).total_variation(&ActionDistribution::uniform(2));
        assert!(tv <= 0.1, "player {i}: {tv}");
    }
}

#[test]
fn sampled_mode_counts_every_query() {
    for shared in [true, false] {
        let game = NormalFormGame::random(3, 3, &mut seeded_rng(4, "q")).unwrap();
        let cfg = DynamicsConfig {
            epsilon: 0.5,
            mode: RewardMode::Sampled { samples: None, shared },
            schedule: Schedule::Explicit { block: 3, scales: 1 },
        };
        let out = run_uncoupled_dynamics(&game, &cfg, 5, Execution::default()).unwrap();
        let k = out.samples.unwrap() as u64;
        assert_eq!(out.queries, 3 * 3 * k * out.horizon);
        assert_eq!(game.queries(), out.queries);
    }
}

#[test]
fn same_seed_same_output() {
    let game = NormalFormGame::random(2, 3, &mut seeded_rng(6, "det")).unwrap();
    let cfg = DynamicsConfig {
        epsilon: 0.5,
        mode: RewardMode::Sampled { samples: Some(10), shared: true },
        schedule: Schedule::Explicit { block: 4, scales: 1 },
    };
    let a = run_uncoupled_dynamics(&game, &cfg, 9, Execution::Sequential).unwrap();
    let b = run_uncoupled_dynamics(&game, &cfg, 9, Execution::default()).unwrap();
    assert_eq!(a.distribution, b.distribution);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn certificate_is_invariant_under_atom_order(seed in any::<u64>(), atoms in 1usize..20) {
        let mut rng = seeded_rng(seed, "perm");
        let game = NormalFormGame::random(2, 3, &mut rng).unwrap();
        let dist = random_dist(2, 3, atoms, &mut rng);
        let mut reversed = dist.atoms().to_vec();
        reversed.reverse();
        let rev = JointDistribution::new(reversed).unwrap();
        let a = verify_ce(&game, &dist, Execution::Sequential).unwrap();
        let b = verify_ce(&game, &rev, Execution::Sequential).unwrap();
        prop_assert!((a.epsilon_achieved - b.epsilon_achieved).abs() < 1e-12);
    }

    #[test]
    fn game_file_round_trip(seed in any::<u64>(), m in 1usize..=3, n in 1usize..=3) {
        let game = NormalFormGame::random(m, n, &mut seeded_rng(seed, "file")).unwrap();
        let mut buf = Vec::new();
        game.write(&mut buf).unwrap();
        let back = NormalFormGame::read(&buf[..]).unwrap();
        for p in profiles(m, n) {
            for i in 0..m {
                prop_assert_eq!(game.query(i, &p).unwrap(), back.query(i, &p).unwrap());
            }
        }
    }
}
