//! Mixtures of product distributions and exact CE certificates.

use std::io::{Read, Write};

use serde::Serialize;

use super::{exact_rewards_unchecked, NormalFormGame, DENSE_LIMIT};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::regret::{csv_error, ActionDistribution, RegretTracker, SwapFunction};

/// Tolerance on the total weight of a joint distribution.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

/// One product distribution in a mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub weight: f64,
    pub factors: Vec<ActionDistribution>,
}

/// A weighted mixture of product distributions over joint action profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    atoms: Vec<Atom>,
}

impl JointDistribution {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let first = atoms
            .first()
            .ok_or_else(|| Error::Structural("joint distribution without atoms".into()))?;
        let players = first.factors.len();
        let mut total = 0.0;
        for atom in &atoms {
            if !(atom.weight >= 0.0) {
                return Err(Error::Validation(format!("negative atom weight {}", atom.weight)));
            }
            if atom.factors.len() != players {
                return Err(Error::Dimension {
                    expected: players,
                    found: atom.factors.len(),
                });
            }
            total += atom.weight;
        }
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::Validation(format!("atom weights sum to {total}")));
        }
        Ok(Self { atoms })
    }

    /// Uniform mixture over the given product profiles.
    pub fn uniform(profiles: Vec<Vec<ActionDistribution>>) -> Result<Self> {
        let w = 1.0 / profiles.len().max(1) as f64;
        Self::new(
            profiles
                .into_iter()
                .map(|factors| Atom { weight: w, factors })
                .collect(),
        )
    }

    /// Distribution over pure profiles with the given weights.
    pub fn from_pure(actions: usize, weighted: &[(f64, Vec<usize>)]) -> Result<Self> {
        Self::new(
            weighted
                .iter()
                .map(|(w, profile)| Atom {
                    weight: *w,
                    factors: profile
                        .iter()
                        .map(|&a| ActionDistribution::point_mass(actions, a))
                        .collect(),
                })
                .collect(),
        )
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn players(&self) -> usize {
        self.atoms[0].factors.len()
    }

    /// Marginal distribution of one player's action.
    pub fn marginal(&self, player: usize) -> ActionDistribution {
        let n = self.atoms[0].factors[player].len();
        let mut probs = vec![0.0; n];
        for atom in &self.atoms {
            for (p, q) in probs.iter_mut().zip(atom.factors[player].probs()) {
                *p += atom.weight * q;
            }
        }
        ActionDistribution::from_weights(&probs).expect("atoms carry valid factors")
    }

    /// CSV with header `atom,atom_weight,player,action,prob` (1-based ids).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            atom: usize,
            atom_weight: f64,
            player: usize,
            action: usize,
            prob: f64,
        }
        let mut w = csv::Writer::from_writer(writer);
        for (a, atom) in self.atoms.iter().enumerate() {
            for (i, factor) in atom.factors.iter().enumerate() {
                for (j, &prob) in factor.probs().iter().enumerate() {
                    w.serialize(Row {
                        atom: a + 1,
                        atom_weight: atom.weight,
                        player: i + 1,
                        action: j + 1,
                        prob,
                    })
                    .map_err(csv_error)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct Row {
            atom: usize,
            atom_weight: f64,
            player: usize,
            action: usize,
            prob: f64,
        }
        let mut rows: Vec<Row> = Vec::new();
        for row in csv::Reader::from_reader(reader).deserialize() {
            rows.push(row.map_err(csv_error)?);
        }
        let bad = |what: &str| Error::Parse {
            line: 0,
            message: format!("{what} ids are 1-based"),
        };
        if rows.iter().any(|r| r.atom == 0) {
            return Err(bad("atom"));
        }
        if rows.iter().any(|r| r.player == 0) {
            return Err(bad("player"));
        }
        if rows.iter().any(|r| r.action == 0) {
            return Err(bad("action"));
        }
        let atoms = rows.iter().map(|r| r.atom).max().unwrap_or(0);
        let players = rows.iter().map(|r| r.player).max().unwrap_or(0);
        let actions = rows.iter().map(|r| r.action).max().unwrap_or(0);
        let mut weights = vec![f64::NAN; atoms];
        let mut probs = vec![vec![vec![0.0; actions]; players]; atoms];
        for r in &rows {
            weights[r.atom - 1] = r.atom_weight;
            probs[r.atom - 1][r.player - 1][r.action - 1] = r.prob;
        }
        let atoms = weights
            .into_iter()
            .zip(probs)
            .map(|(weight, factors)| {
                Ok(Atom {
                    weight,
                    factors: factors
                        .into_iter()
                        .map(ActionDistribution::new)
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?;
        Self::new(atoms)
    }
}

/// Best swap for one player and its expected gain.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerCertificate {
    pub swap: SwapFunction,
    pub gain: f64,
}

/// Result of exact CE verification.
#[derive(Debug, Clone, PartialEq)]
pub struct CeCertificate {
    pub players: Vec<PlayerCertificate>,
    /// Largest best-swap gain over players.
    pub epsilon_achieved: f64,
}

impl CeCertificate {
    pub fn is_within(&self, epsilon: f64) -> bool {
        self.epsilon_achieved <= epsilon
    }
}

const CHUNK: usize = 256;

/// Exact swap gains of every player under `dist`, via per-player weighted
/// regret trackers over the atoms.
pub fn verify_ce(
    game: &NormalFormGame,
    dist: &JointDistribution,
    execution: Execution,
) -> Result<CeCertificate> {
    if !game.is_dense() {
        return Err(Error::Capacity("verification needs a dense game".into()));
    }
    let m = game.players();
    let n = game.actions();
    if (n as u64).saturating_pow(m as u32 - 1) > DENSE_LIMIT {
        return Err(Error::Capacity("opponent profile space too large".into()));
    }
    for atom in dist.atoms() {
        game.check_strategies(&atom.factors)?;
    }
    let atoms = dist.atoms();
    let chunks = atoms.len().div_ceil(CHUNK);
    let partial = execution.map(chunks, |c| {
        let mut trackers: Vec<RegretTracker> = (0..m).map(|_| RegretTracker::new(n)).collect();
        for atom in &atoms[c * CHUNK..((c + 1) * CHUNK).min(atoms.len())] {
            for (i, tracker) in trackers.iter_mut().enumerate() {
                let r = exact_rewards_unchecked(game, i, &atom.factors);
                tracker
                    .observe_weighted(atom.weight, atom.factors[i].probs(), r.rewards())
                    .expect("dimensions checked");
            }
        }
        trackers
    });
    let mut totals: Vec<RegretTracker> = (0..m).map(|_| RegretTracker::new(n)).collect();
    for trackers in &partial {
        for (t, p) in totals.iter_mut().zip(trackers) {
            t.merge(p)?;
        }
    }
    let players: Vec<PlayerCertificate> = totals
        .iter()
        .map(|t| {
            let (gain, swap) = t.swap();
            PlayerCertificate {
                swap,
                gain: gain.max(0.0),
            }
        })
        .collect();
    let epsilon_achieved = players.iter().map(|p| p.gain).fold(0.0, f64::max);
    Ok(CeCertificate {
        players,
        epsilon_achieved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prisoners() -> NormalFormGame {
        // Defect (action 1) strictly dominates.
        NormalFormGame::from_fn(2, 2, |i, a| {
            let (me, other) = (a[i], a[1 - i]);
            [[0.6, 0.0], [1.0, 0.2]][me][other]
        })
        .unwrap()
    }

    #[test]
    fn dominant_equilibrium_is_exact() {
        let g = prisoners();
        let d = JointDistribution::from_pure(2, &[(1.0, vec![1, 1])]).unwrap();
        let c = verify_ce(&g, &d, Execution::Sequential).unwrap();
        assert_eq!(c.epsilon_achieved, 0.0);
        let d = JointDistribution::from_pure(2, &[(1.0, vec![0, 0])]).unwrap();
        let c = verify_ce(&g, &d, Execution::Sequential).unwrap();
        assert!((c.epsilon_achieved - 0.4).abs() < 1e-12);
        assert_eq!(c.players[0].swap.as_slice(), &[1, 1]);
    }

    #[test]
    fn uniform_is_exact_ce_of_matching_pennies() {
        let g = NormalFormGame::matching_pennies();
        let d = JointDistribution::uniform(vec![vec![ActionDistribution::uniform(2); 2]]).unwrap();
        let c = verify_ce(&g, &d, Execution::default()).unwrap();
        assert!(c.epsilon_achieved.abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let d = JointDistribution::new(vec![
            Atom {
                weight: 0.25,
                factors: vec![
                    ActionDistribution::new(vec![0.5, 0.5, 0.0]).unwrap(),
                    ActionDistribution::point_mass(3, 2),
                ],
            },
            Atom {
                weight: 0.75,
                factors: vec![ActionDistribution::uniform(3), ActionDistribution::uniform(3)],
            },
        ])
        .unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("atom,atom_weight,player,action,prob\n"));
        let back = JointDistribution::read_csv(&buf[..]).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let f = vec![ActionDistribution::uniform(2)];
        assert!(JointDistribution::new(vec![Atom {
            weight: 0.5,
            factors: f
        }])
        .is_err());
    }

    #[test]
    fn oracle_games_cannot_be_verified() {
        let g = NormalFormGame::oracle(2, 2, |_, _| 0.0).unwrap();
        let d = JointDistribution::from_pure(2, &[(1.0, vec![0, 0])]).unwrap();
        assert!(matches!(
            verify_ce(&g, &d, Execution::Sequential),
            Err(Error::Capacity(_))
        ));
    }
}
