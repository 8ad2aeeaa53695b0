//! Two-party correlated-equilibrium protocol with exact bit accounting, and
//! row sparsification of two-player CE matrices.
//!
//! Alice runs a multi-scale learner on her own utilities. Each round she
//! samples `K` actions from her current strategy and sends them to Bob, who
//! replies with a pure best response to that multiset. Alice's output is the
//! average of `p_t (x) e_{j_t}`. Each party only ever holds its own matrix.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::multiscale::{MultiScaleConfig, MultiScaleLearner};
use crate::mwu::Learner;
use crate::nfg::{Atom, JointDistribution, NormalFormGame};
use crate::numeric::{argmax_first, bits_for, fnv1a, seeded_rng};
use crate::regret::{check_range, csv_error, ActionDistribution, RewardVector, MASS_TOLERANCE};

/// Square payoff matrix in `[0, 1]`, indexed `[own action][other action]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl UtilityMatrix {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                found: values.len(),
            });
        }
        check_range(&values, 0.0, 1.0)?;
        Ok(Self { n, values })
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self {
            n,
            values: (0..n * n).map(|_| rng.gen()).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, own: usize, other: usize) -> f64 {
        self.values[own * self.n + other]
    }

    /// Every entry multiplied by `factor` (which must keep entries in `[0, 1]`).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.n, self.values.iter().map(|v| v * factor).collect())
    }

    /// Two-player game with `row` as player 1 and `col` as player 2.
    pub fn to_game(row: &UtilityMatrix, col: &UtilityMatrix) -> Result<NormalFormGame> {
        if row.n != col.n {
            return Err(Error::Dimension {
                expected: row.n,
                found: col.n,
            });
        }
        NormalFormGame::from_fn(2, row.n, |i, a| {
            if i == 0 {
                row.get(a[0], a[1])
            } else {
                col.get(a[1], a[0])
            }
        })
    }
}

/// Who sent a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Message {
    pub round: u64,
    pub sender: Party,
    pub bits: u64,
    pub payload_hash: u64,
}

/// Ordered log of messages with their bit lengths.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    messages: Vec<Message>,
    total_bits: u64,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    /// Logs a message of fixed-width action indices.
    pub fn record(&mut self, round: u64, sender: Party, indices: &[usize], bits_per_index: u32) {
        let bytes: Vec<u8> = indices
            .iter()
            .flat_map(|&i| (i as u64).to_le_bytes())
            .collect();
        let bits = indices.len() as u64 * u64::from(bits_per_index);
        self.total_bits += bits;
        self.messages.push(Message {
            round,
            sender,
            bits,
            payload_hash: fnv1a(&bytes),
        });
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn total_bits(&self) -> u64 {
        self.total_bits
    }

    /// CSV with header `round,sender,bits,payload_hash`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for m in &self.messages {
            w.serialize(m).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sparse nonnegative `n x n` matrix of total mass one (rows belong to Alice).
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPlayerCeMatrix {
    n: usize,
    entries: BTreeMap<(usize, usize), f64>,
}

impl TwoPlayerCeMatrix {
    pub fn new(n: usize, entries: BTreeMap<(usize, usize), f64>) -> Result<Self> {
        let mut total = 0.0;
        for (&(i, j), &v) in &entries {
            if i >= n || j >= n {
                return Err(Error::Dimension {
                    expected: n,
                    found: i.max(j) + 1,
                });
            }
            if !(v >= 0.0) {
                return Err(Error::Validation(format!("entry ({}, {}) is {v}", i + 1, j + 1)));
            }
            total += v;
        }
        if (total - 1.0).abs() > MASS_TOLERANCE * (1.0 + entries.len() as f64) {
            return Err(Error::Validation(format!("matrix mass is {total}")));
        }
        let entries = entries.into_iter().filter(|&(_, v)| v > 0.0).collect();
        Ok(Self { n, entries })
    }

    /// Aggregates a two-player joint distribution into its probability matrix.
    pub fn from_joint(dist: &JointDistribution) -> Result<Self> {
        if dist.players() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                found: dist.players(),
            });
        }
        let n = dist.atoms()[0].factors[0].len();
        let mut dense = vec![0.0; n * n];
        for atom in dist.atoms() {
            let (p, q) = (&atom.factors[0], &atom.factors[1]);
            for (i, &pi) in p.probs().iter().enumerate().filter(|(_, &x)| x > 0.0) {
                for (j, &qj) in q.probs().iter().enumerate() {
                    dense[i * n + j] += atom.weight * pi * qj;
                }
            }
        }
        let total: f64 = dense.iter().sum();
        let entries = dense
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(k, &v)| ((k / n, k % n), v / total))
            .collect();
        Self::new(n, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries.get(&(row, col)).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn row_marginals(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.n];
        for (i, _, v) in self.entries() {
            r[i] += v;
        }
        r
    }

    pub fn row_support(&self) -> BTreeSet<usize> {
        self.entries.keys().map(|&(i, _)| i).collect()
    }

    pub fn column_support(&self) -> BTreeSet<usize> {
        self.entries.keys().map(|&(_, j)| j).collect()
    }

    /// Joint distribution with one pure atom per nonzero entry.
    pub fn to_joint(&self) -> Result<JointDistribution> {
        JointDistribution::new(
            self.entries()
                .map(|(i, j, v)| Atom {
                    weight: v,
                    factors: vec![
                        ActionDistribution::point_mass(self.n, i),
                        ActionDistribution::point_mass(self.n, j),
                    ],
                })
                .collect(),
        )
    }

    /// Text with one `row col mass` triplet per line, 1-based, after an
    /// `n <size>` header.
    pub fn write_triplets<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "n {}", self.n)?;
        for (i, j, v) in self.entries() {
            writeln!(writer, "{} {} {}", i + 1, j + 1, v)?;
        }
        Ok(())
    }

    pub fn read_triplets<R: BufRead>(reader: R) -> Result<Self> {
        let mut n = None;
        let mut entries = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let err = |message: &str| Error::Parse {
                line: idx + 1,
                message: message.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match (n, fields.as_slice()) {
                (_, []) => continue,
                (None, ["n", size]) => n = Some(size.parse().map_err(|_| err("bad size"))?),
                (None, _) => return Err(err("expected header `n <size>`")),
                (Some(_), [i, j, v]) => {
                    let i: usize = i.parse().map_err(|_| err("bad row"))?;
                    let j: usize = j.parse().map_err(|_| err("bad column"))?;
                    let v: f64 = v.parse().map_err(|_| err("bad mass"))?;
                    if i == 0 || j == 0 {
                        return Err(err("indices are 1-based"));
                    }
                    *entries.entry((i - 1, j - 1)).or_insert(0.0) += v;
                }
                (Some(_), _) => return Err(err("expected `row col mass`")),
            }
        }
        let n = n.ok_or_else(|| Error::Parse {
            line: 0,
            message: "missing header".into(),
        })?;
        Self::new(n, entries)
    }
}

/// Alice's side: her learner, her utilities and her sampling randomness.
#[derive(Debug, Clone)]
pub struct Alice {
    utilities: UtilityMatrix,
    learner: MultiScaleLearner,
    samples: usize,
    rng: ChaCha8Rng,
    pending: Option<ActionDistribution>,
    accumulated: Vec<f64>,
    rounds: u64,
}

impl Alice {
    pub fn new(utilities: UtilityMatrix, schedule: MultiScaleConfig, samples: usize, seed: u64) -> Result<Self> {
        if schedule.n() != utilities.n() {
            return Err(Error::Dimension {
                expected: utilities.n(),
                found: schedule.n(),
            });
        }
        let n = utilities.n();
        Ok(Self {
            utilities,
            learner: MultiScaleLearner::new(schedule),
            samples,
            rng: seeded_rng(seed, "alice"),
            pending: None,
            accumulated: vec![0.0; n * n],
            rounds: 0,
        })
    }

    /// Draws this round's multiset of `K` actions from the current strategy.
    pub fn propose(&mut self) -> Result<Vec<usize>> {
        if self.pending.is_some() {
            return Err(Error::Lifecycle("Alice is waiting for a reply".into()));
        }
        let p = self.learner.act()?;
        let multiset = (0..self.samples).map(|_| p.sample(&mut self.rng)).collect();
        self.pending = Some(p);
        Ok(multiset)
    }

    /// Consumes Bob's reply and updates on `r(i) = u_A(i, reply)`.
    pub fn receive(&mut self, reply: usize) -> Result<()> {
        let n = self.utilities.n();
        let p = self
            .pending
            .take()
            .ok_or_else(|| Error::Lifecycle("reply without a proposal".into()))?;
        if reply >= n {
            return Err(Error::Parameter(format!("reply {} out of range", reply + 1)));
        }
        let rewards: Vec<f64> = (0..n).map(|i| self.utilities.get(i, reply)).collect();
        self.learner.update(&RewardVector::new(rewards, 1.0)?)?;
        for (i, &pi) in p.probs().iter().enumerate() {
            self.accumulated[i * n + reply] += pi;
        }
        self.rounds += 1;
        Ok(())
    }

    /// `(1/T) sum_t p_t (x) e_{j_t}`.
    pub fn output(&self) -> Result<TwoPlayerCeMatrix> {
        if self.rounds == 0 {
            return Err(Error::Lifecycle("no completed rounds".into()));
        }
        let n = self.utilities.n();
        let t = self.rounds as f64;
        let entries = self
            .accumulated
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(k, &v)| ((k / n, k % n), v / t))
            .collect();
        TwoPlayerCeMatrix::new(n, entries)
    }
}

/// Bob's side: only his utilities.
#[derive(Debug, Clone)]
pub struct Bob {
    utilities: UtilityMatrix,
}

impl Bob {
    pub fn new(utilities: UtilityMatrix) -> Self {
        Self { utilities }
    }

    /// Pure best response to the uniform distribution over `multiset`,
    /// ties to the smallest index.
    pub fn respond(&self, multiset: &[usize]) -> usize {
        let n = self.utilities.n();
        let totals: Vec<f64> = (0..n)
            .map(|j| multiset.iter().map(|&i| self.utilities.get(j, i)).sum())
            .collect();
        argmax_first(&totals)
    }
}

/// `K = ceil(8 ln^2(max(n, 3)) / epsilon^3)`.
pub fn comm_sample_count(n: usize, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Parameter(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    let l = (n.max(3) as f64).ln();
    Ok((8.0 * l * l / epsilon.powi(3)).ceil() as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommConfig {
    pub epsilon: f64,
    /// Explicit `(H, S)`; `None` derives the schedule from `epsilon / 2`.
    pub schedule: Option<(u64, u32)>,
    /// Override for `K`.
    pub samples: Option<usize>,
}

impl CommConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            schedule: None,
            samples: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CommOutcome {
    pub matrix: TwoPlayerCeMatrix,
    pub transcript: Transcript,
    pub horizon: u64,
    pub samples: usize,
}

/// Runs the protocol for the full learner horizon. `alice_utilities[i][j]` is
/// Alice's payoff when she plays `i` and Bob plays `j`; `bob_utilities[j][i]`
/// is Bob's payoff for the same pair.
pub fn run_comm_protocol(
    alice_utilities: &UtilityMatrix,
    bob_utilities: &UtilityMatrix,
    config: &CommConfig,
    seed: u64,
) -> Result<CommOutcome> {
    let n = alice_utilities.n();
    if bob_utilities.n() != n {
        return Err(Error::Dimension {
            expected: n,
            found: bob_utilities.n(),
        });
    }
    let schedule = match config.schedule {
        Some((block, scales)) => MultiScaleConfig::new(n, 1.0, scales, block)?,
        None => MultiScaleConfig::from_epsilon(config.epsilon / 2.0, n, 1.0)?,
    };
    let samples = match config.samples {
        Some(0) => return Err(Error::Parameter("sample count K must be >= 1".into())),
        Some(k) => k,
        None => comm_sample_count(n, config.epsilon)?,
    };
    let horizon = schedule.horizon();
    let width = bits_for(n);
    let mut alice = Alice::new(alice_utilities.clone(), schedule, samples, seed)?;
    let bob = Bob::new(bob_utilities.clone());
    let mut transcript = Transcript::new();
    for round in 1..=horizon {
        let multiset = alice.propose()?;
        transcript.record(round, Party::Alice, &multiset, width);
        let reply = bob.respond(&multiset);
        transcript.record(round, Party::Bob, &[reply], width);
        alice.receive(reply)?;
    }
    Ok(CommOutcome {
        matrix: alice.output()?,
        transcript,
        horizon,
        samples,
    })
}

/// `D = ceil(8 S^2 ln(max(n, 2)) / delta^2)`.
pub fn sparsify_rows(column_support: usize, n: usize, delta: f64) -> usize {
    let s = column_support as f64;
    (8.0 * s * s * (n.max(2) as f64).ln() / (delta * delta)).ceil() as usize
}

/// Samples `D` rows by their marginals and averages the normalized rows.
pub fn sparsify<R: Rng + ?Sized>(
    p: &TwoPlayerCeMatrix,
    delta: f64,
    rng: &mut R,
) -> Result<TwoPlayerCeMatrix> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    let marginals = p.row_marginals();
    if marginals.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Structural("matrix has no mass".into()));
    }
    let rows = ActionDistribution::from_weights(&marginals)?;
    let d = sparsify_rows(p.column_support().len(), p.n(), delta);
    let mut counts = vec![0u64; p.n()];
    for _ in 0..d {
        counts[rows.sample(rng)] += 1;
    }
    let mut entries = BTreeMap::new();
    for (i, j, v) in p.entries() {
        if counts[i] > 0 {
            entries.insert((i, j), counts[i] as f64 / d as f64 * v / marginals[i]);
        }
    }
    let total: f64 = entries.values().sum();
    for v in entries.values_mut() {
        *v /= total;
    }
    TwoPlayerCeMatrix::new(p.n(), entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_action_needs_no_bits() {
        let u = UtilityMatrix::new(1, vec![0.3]).unwrap();
        let cfg = CommConfig {
            epsilon: 0.5,
            schedule: Some((2, 1)),
            samples: Some(5),
        };
        let out = run_comm_protocol(&u, &u, &cfg, 1).unwrap();
        assert_eq!(out.transcript.total_bits(), 0);
        assert_eq!(out.matrix.get(0, 0), 1.0);
    }

    #[test]
    fn bit_accounting() {
        let mut rng = seeded_rng(1, "m");
        let a = UtilityMatrix::random(5, &mut rng);
        let b = UtilityMatrix::random(5, &mut rng);
        let cfg = CommConfig {
            epsilon: 0.5,
            schedule: Some((3, 1)),
            samples: Some(4),
        };
        let out = run_comm_protocol(&a, &b, &cfg, 2).unwrap();
        assert_eq!(out.transcript.total_bits(), 9 * 5 * 3);
        assert_eq!(out.transcript.messages().len(), 18);
    }

    #[test]
    fn bob_breaks_ties_low() {
        let bob = Bob::new(UtilityMatrix::new(2, vec![0.5, 0.5, 0.5, 0.5]).unwrap());
        assert_eq!(bob.respond(&[0, 1, 1]), 0);
        let bob = Bob::new(UtilityMatrix::new(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        assert_eq!(bob.respond(&[0, 1, 1]), 1);
    }

    #[test]
    fn single_row_is_a_fixed_point() {
        let mut e = BTreeMap::new();
        e.insert((1, 0), 0.25);
        e.insert((1, 2), 0.75);
        let p = TwoPlayerCeMatrix::new(3, e).unwrap();
        let q = sparsify(&p, 0.3, &mut seeded_rng(0, "s")).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn triplet_round_trip() {
        let mut e = BTreeMap::new();
        e.insert((0, 0), 0.5);
        e.insert((2, 1), 0.5);
        let p = TwoPlayerCeMatrix::new(3, e).unwrap();
        let mut buf = Vec::new();
        p.write_triplets(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "n 3\n1 1 0.5\n3 2 0.5\n");
        assert_eq!(TwoPlayerCeMatrix::read_triplets(&buf[..]).unwrap(), p);
    }

    #[test]
    fn alice_enforces_turn_order() {
        let u = UtilityMatrix::new(2, vec![0.0; 4]).unwrap();
        let cfg = MultiScaleConfig::new(2, 1.0, 1, 2).unwrap();
        let mut alice = Alice::new(u, cfg, 3, 0).unwrap();
        assert!(alice.receive(0).is_err());
        alice.propose().unwrap();
        assert!(alice.propose().is_err());
    }

    #[test]
    fn sample_count_formula() {
        let l = 4f64.ln();
        assert_eq!(comm_sample_count(4, 0.4).unwrap(), (8.0 * l * l / 0.064).ceil() as usize);
    }
}
