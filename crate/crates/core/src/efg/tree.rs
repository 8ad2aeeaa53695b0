//! Game trees with perfect recall, pure strategies and exact utilities.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Tolerance on chance probabilities summing to one.
const CHANCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Decision { infoset: usize },
    Chance { probs: Vec<f64> },
    Terminal { payoffs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Infoset {
    pub player: usize,
    pub label: String,
    pub actions: Vec<String>,
    /// Decision nodes belonging to this infoset.
    pub nodes: Vec<usize>,
    /// Last own `(infoset, action)` on the way here, `None` at the player's root level.
    pub parent: Option<(usize, usize)>,
    /// Position in the owner's topological infoset order.
    pub local: usize,
}

/// Incremental, bottom-up tree construction.
#[derive(Debug, Clone, Default)]
pub struct GameTreeBuilder {
    players: usize,
    nodes: Vec<Node>,
    infosets: Vec<(usize, String, Vec<String>)>,
}

impl GameTreeBuilder {
    pub fn new(players: usize) -> Self {
        Self {
            players,
            ..Self::default()
        }
    }

    /// Declares an infoset of `player` (0-based) and returns its id.
    pub fn infoset<S: Into<String>>(&mut self, player: usize, label: S, actions: Vec<String>) -> usize {
        self.infosets.push((player, label.into(), actions));
        self.infosets.len() - 1
    }

    pub fn terminal(&mut self, payoffs: Vec<f64>) -> usize {
        self.push(NodeKind::Terminal { payoffs }, Vec::new())
    }

    pub fn chance(&mut self, probs: Vec<f64>, children: Vec<usize>) -> usize {
        self.push(NodeKind::Chance { probs }, children)
    }

    /// Decision node; `children[k]` follows the infoset's `k`-th action.
    pub fn decision(&mut self, infoset: usize, children: Vec<usize>) -> usize {
        self.push(NodeKind::Decision { infoset }, children)
    }

    fn push(&mut self, kind: NodeKind, children: Vec<usize>) -> usize {
        self.nodes.push(Node { kind, children });
        self.nodes.len() - 1
    }

    pub fn build(self, root: usize) -> Result<GameTree> {
        GameTree::validate(self.players, self.nodes, self.infosets, root)
    }
}

/// A validated extensive-form game with perfect recall.
#[derive(Debug, Clone, PartialEq)]
pub struct GameTree {
    players: usize,
    nodes: Vec<Node>,
    root: usize,
    infosets: Vec<Infoset>,
    order: Vec<Vec<usize>>,
    children: Vec<Vec<Vec<usize>>>,
    root_children: Vec<Vec<usize>>,
    terminals: Vec<usize>,
    terminal_of: Vec<Option<usize>>,
    terminal_chance: Vec<f64>,
    terminal_group: Vec<Vec<Option<(usize, usize)>>>,
}

impl GameTree {
    fn validate(
        players: usize,
        nodes: Vec<Node>,
        raw_infosets: Vec<(usize, String, Vec<String>)>,
        root: usize,
    ) -> Result<Self> {
        let structural = |m: String| Err(Error::Structural(m));
        if players == 0 {
            return structural("a game needs at least one player".into());
        }
        if root >= nodes.len() {
            return structural(format!("root {root} is not a node"));
        }
        let mut labels = HashSet::new();
        for (player, label, actions) in &raw_infosets {
            if *player >= players {
                return structural(format!("infoset {label} belongs to unknown player {}", player + 1));
            }
            if actions.is_empty() {
                return structural(format!("infoset {label} has no actions"));
            }
            for a in actions {
                if !labels.insert(a.as_str()) {
                    return Err(Error::Validation(format!(
                        "action label `{a}` appears in more than one infoset"
                    )));
                }
            }
        }
        let mut parent_count = vec![0usize; nodes.len()];
        for (id, node) in nodes.iter().enumerate() {
            match &node.kind {
                NodeKind::Decision { infoset } => {
                    let Some((_, label, actions)) = raw_infosets.get(*infoset) else {
                        return structural(format!("node {id} refers to unknown infoset {infoset}"));
                    };
                    if node.children.len() != actions.len() {
                        return structural(format!(
                            "node {id} in infoset {label} has {} children for {} actions",
                            node.children.len(),
                            actions.len()
                        ));
                    }
                }
                NodeKind::Chance { probs } => {
                    if probs.is_empty() || node.children.len() != probs.len() {
                        return structural(format!("chance node {id} has mismatched outcomes"));
                    }
                    if probs.iter().any(|&p| !(p >= 0.0)) {
                        return Err(Error::Validation(format!("chance node {id} has a negative probability")));
                    }
                    let total: f64 = probs.iter().sum();
                    if (total - 1.0).abs() > CHANCE_TOLERANCE {
                        return Err(Error::Validation(format!(
                            "chance node {id} probabilities sum to {total}"
                        )));
                    }
                }
                NodeKind::Terminal { payoffs } => {
                    if !node.children.is_empty() {
                        return structural(format!("terminal {id} has children"));
                    }
                    if payoffs.len() != players {
                        return Err(Error::Dimension {
                            expected: players,
                            found: payoffs.len(),
                        });
                    }
                    if payoffs.iter().any(|&u| !(0.0..=1.0).contains(&u)) {
                        return Err(Error::Validation(format!("terminal {id} payoff outside [0, 1]")));
                    }
                }
            }
            for &c in &node.children {
                if c >= nodes.len() {
                    return structural(format!("node {id} has unknown child {c}"));
                }
                parent_count[c] += 1;
            }
        }
        if parent_count[root] != 0 {
            return structural("root has a parent".into());
        }
        if let Some(c) = parent_count.iter().position(|&k| k > 1) {
            return structural(format!("node {c} has several parents"));
        }

        // Walk from the root recording each player's own action sequence.
        let mut sequences: Vec<Option<Vec<(usize, usize)>>> = vec![None; raw_infosets.len()];
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); raw_infosets.len()];
        let mut terminals = Vec::new();
        let mut terminal_chance = Vec::new();
        let mut terminal_group: Vec<Vec<Option<(usize, usize)>>> = vec![Vec::new(); players];
        let mut visited = vec![false; nodes.len()];
        let mut stack: Vec<(usize, f64, Vec<Vec<(usize, usize)>>)> = vec![(root, 1.0, vec![Vec::new(); players])];
        while let Some((id, reach, seqs)) = stack.pop() {
            visited[id] = true;
            let node = &nodes[id];
            match &node.kind {
                NodeKind::Terminal { .. } => {
                    terminals.push(id);
                    terminal_chance.push(reach);
                    for (p, s) in seqs.iter().enumerate() {
                        terminal_group[p].push(s.last().copied());
                    }
                }
                NodeKind::Chance { probs } => {
                    for (&c, &p) in node.children.iter().zip(probs).rev() {
                        stack.push((c, reach * p, seqs.clone()));
                    }
                }
                NodeKind::Decision { infoset } => {
                    let player = raw_infosets[*infoset].0;
                    match &sequences[*infoset] {
                        None => sequences[*infoset] = Some(seqs[player].clone()),
                        Some(s) if *s != seqs[player] => {
                            return Err(Error::Validation(format!(
                                "infoset {} of player {} violates perfect recall",
                                raw_infosets[*infoset].1,
                                player + 1
                            )));
                        }
                        Some(_) => {}
                    }
                    members[*infoset].push(id);
                    for (a, &c) in node.children.iter().enumerate().rev() {
                        let mut next = seqs.clone();
                        next[player].push((*infoset, a));
                        stack.push((c, reach, next));
                    }
                }
            }
        }
        if let Some(id) = visited.iter().position(|v| !v) {
            return structural(format!("node {id} is not reachable from the root"));
        }
        if let Some(h) = members.iter().position(|m| m.is_empty()) {
            return structural(format!("infoset {} has no nodes", raw_infosets[h].1));
        }
        let parents: Vec<Option<(usize, usize)>> = sequences
            .iter()
            .map(|s| s.as_ref().and_then(|s| s.last().copied()))
            .collect();

        // Parent-before-child order per player, ties by declaration order.
        let mut order: Vec<Vec<usize>> = vec![Vec::new(); players];
        let mut placed = vec![false; raw_infosets.len()];
        for (p, ord) in order.iter_mut().enumerate() {
            let mine: Vec<usize> = (0..raw_infosets.len()).filter(|&h| raw_infosets[h].0 == p).collect();
            while ord.len() < mine.len() {
                let next = mine
                    .iter()
                    .copied()
                    .find(|&h| !placed[h] && parents[h].is_none_or(|(q, _)| placed[q]))
                    .expect("own sequences form a forest");
                placed[next] = true;
                ord.push(next);
            }
        }
        let mut local = vec![0; raw_infosets.len()];
        for ord in &order {
            for (k, &h) in ord.iter().enumerate() {
                local[h] = k;
            }
        }
        let mut children: Vec<Vec<Vec<usize>>> = raw_infosets
            .iter()
            .map(|(_, _, actions)| vec![Vec::new(); actions.len()])
            .collect();
        let mut root_children = vec![Vec::new(); players];
        for ord in &order {
            for &h in ord {
                match parents[h] {
                    Some((q, a)) => children[q][a].push(h),
                    None => root_children[raw_infosets[h].0].push(h),
                }
            }
        }
        let mut terminal_of = vec![None; nodes.len()];
        for (k, &z) in terminals.iter().enumerate() {
            terminal_of[z] = Some(k);
        }
        let infosets = raw_infosets
            .into_iter()
            .enumerate()
            .map(|(h, (player, label, actions))| Infoset {
                player,
                label,
                actions,
                nodes: std::mem::take(&mut members[h]),
                parent: parents[h],
                local: local[h],
            })
            .collect();
        Ok(Self {
            players,
            nodes,
            root,
            infosets,
            order,
            children,
            root_children,
            terminals,
            terminal_of,
            terminal_chance,
            terminal_group,
        })
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn infosets(&self) -> &[Infoset] {
        &self.infosets
    }

    /// Global ids of `player`'s infosets, parents before children.
    pub fn player_infosets(&self, player: usize) -> &[usize] {
        &self.order[player]
    }

    /// Own infosets directly following `(infoset, action)`.
    pub fn child_infosets(&self, infoset: usize, action: usize) -> &[usize] {
        &self.children[infoset][action]
    }

    /// `player`'s infosets reachable before any of its own moves.
    pub fn root_infosets(&self, player: usize) -> &[usize] {
        &self.root_children[player]
    }

    pub fn terminal_count(&self) -> usize {
        self.terminals.len()
    }

    pub fn terminal_node(&self, terminal: usize) -> usize {
        self.terminals[terminal]
    }

    /// Product of chance probabilities on the path to a terminal.
    pub fn terminal_chance(&self, terminal: usize) -> f64 {
        self.terminal_chance[terminal]
    }

    /// Last own `(infoset, action)` of `player` on the path to a terminal.
    pub fn terminal_group(&self, player: usize, terminal: usize) -> Option<(usize, usize)> {
        self.terminal_group[player][terminal]
    }

    pub fn payoff(&self, terminal: usize, player: usize) -> f64 {
        match &self.nodes[self.terminals[terminal]].kind {
            NodeKind::Terminal { payoffs } => payoffs[player],
            _ => unreachable!("terminal list holds terminal nodes"),
        }
    }

    /// Largest infoset count over players.
    pub fn max_infosets(&self) -> usize {
        self.order.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `ln |S_i|`.
    pub fn log_strategy_count(&self, player: usize) -> f64 {
        self.order[player]
            .iter()
            .map(|&h| (self.infosets[h].actions.len() as f64).ln())
            .sum()
    }

    /// `|S_i|`, if it fits in a `u64`.
    pub fn strategy_count(&self, player: usize) -> Option<u64> {
        self.order[player]
            .iter()
            .try_fold(1u64, |acc, &h| acc.checked_mul(self.infosets[h].actions.len() as u64))
    }

    /// Pure strategy with the given mixed-radix index (first infoset most significant).
    pub fn strategy_from_index(&self, player: usize, mut index: u64) -> PureStrategy {
        let mut actions = vec![0; self.order[player].len()];
        for (k, &h) in self.order[player].iter().enumerate().rev() {
            let n = self.infosets[h].actions.len() as u64;
            actions[k] = (index % n) as usize;
            index /= n;
        }
        PureStrategy(actions)
    }

    pub fn strategy_index(&self, player: usize, strategy: &PureStrategy) -> u64 {
        self.order[player]
            .iter()
            .zip(&strategy.0)
            .fold(0, |acc, (&h, &a)| acc * self.infosets[h].actions.len() as u64 + a as u64)
    }

    /// All pure strategies of `player`, refusing more than `limit`.
    pub fn enumerate_strategies(&self, player: usize, limit: u64) -> Result<Vec<PureStrategy>> {
        let count = self
            .strategy_count(player)
            .filter(|&c| c <= limit)
            .ok_or_else(|| Error::Capacity(format!("player {} has more than {limit} pure strategies", player + 1)))?;
        Ok((0..count).map(|k| self.strategy_from_index(player, k)).collect())
    }

    pub fn check_strategy(&self, player: usize, strategy: &PureStrategy) -> Result<()> {
        if strategy.0.len() != self.order[player].len() {
            return Err(Error::Structural(format!(
                "strategy for player {} assigns {} of {} infosets",
                player + 1,
                strategy.0.len(),
                self.order[player].len()
            )));
        }
        for (&h, &a) in self.order[player].iter().zip(&strategy.0) {
            if a >= self.infosets[h].actions.len() {
                return Err(Error::Structural(format!(
                    "action {} not available at infoset {}",
                    a + 1,
                    self.infosets[h].label
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn check_profile(&self, profile: &[PureStrategy]) -> Result<()> {
        if profile.len() != self.players {
            return Err(Error::Structural(format!(
                "profile has {} strategies for {} players",
                profile.len(),
                self.players
            )));
        }
        for (p, s) in profile.iter().enumerate() {
            self.check_strategy(p, s)?;
        }
        Ok(())
    }

    /// Adds `weight` to `acc[z]` for every terminal `z` that the other
    /// players' strategies in `profile` do not cut off. Chance and `player`'s
    /// own moves are followed along every branch.
    pub fn accumulate_reach(&self, player: usize, profile: &[PureStrategy], weight: f64, acc: &mut [f64]) {
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            match &node.kind {
                NodeKind::Terminal { .. } => {
                    let z = self.terminal_of[id].expect("terminal index");
                    acc[z] += weight;
                }
                NodeKind::Chance { .. } => stack.extend(&node.children),
                NodeKind::Decision { infoset } => {
                    let info = &self.infosets[*infoset];
                    if info.player == player {
                        stack.extend(&node.children);
                    } else {
                        stack.push(node.children[profile[info.player].0[info.local]]);
                    }
                }
            }
        }
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        parse(reader)
    }

    /// Writes the line format accepted by [`GameTree::read`].
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for info in &self.infosets {
            writeln!(w, "infoset {} {} actions {}", info.player + 1, info.label, info.actions.join(" "))?;
        }
        for (id, node) in self.nodes.iter().enumerate() {
            match &node.kind {
                NodeKind::Decision { infoset } => {
                    let info = &self.infosets[*infoset];
                    writeln!(w, "node n{id} decision {} {}", info.player + 1, info.label)?;
                }
                NodeKind::Chance { probs } => {
                    let ps: Vec<String> = probs.iter().map(f64::to_string).collect();
                    writeln!(w, "node n{id} chance {}", ps.join(" "))?;
                }
                NodeKind::Terminal { payoffs } => {
                    let us: Vec<String> = payoffs.iter().map(f64::to_string).collect();
                    writeln!(w, "node n{id} terminal {}", us.join(" "))?;
                }
            }
        }
        for (id, node) in self.nodes.iter().enumerate() {
            for (k, &c) in node.children.iter().enumerate() {
                let label = match &node.kind {
                    NodeKind::Decision { infoset } => self.infosets[*infoset].actions[k].clone(),
                    _ => (k + 1).to_string(),
                };
                writeln!(w, "edge n{id} n{c} {label}")?;
            }
        }
        Ok(())
    }
}

/// One action index per infoset of a player, in that player's infoset order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PureStrategy(pub Vec<usize>);

impl PureStrategy {
    pub fn actions(&self) -> &[usize] {
        &self.0
    }
}

/// Exact chance-weighted expected payoff of every player.
pub fn eval_utility(tree: &GameTree, profile: &[PureStrategy]) -> Result<Vec<f64>> {
    tree.check_profile(profile)?;
    Ok(eval_unchecked(tree, profile))
}

pub(crate) fn eval_unchecked(tree: &GameTree, profile: &[PureStrategy]) -> Vec<f64> {
    let mut totals = vec![0.0; tree.players];
    let mut stack = vec![(tree.root, 1.0)];
    while let Some((id, reach)) = stack.pop() {
        let node = &tree.nodes[id];
        match &node.kind {
            NodeKind::Terminal { payoffs } => {
                for (t, u) in totals.iter_mut().zip(payoffs) {
                    *t += reach * u;
                }
            }
            NodeKind::Chance { probs } => {
                for (&c, &p) in node.children.iter().zip(probs) {
                    if p > 0.0 {
                        stack.push((c, reach * p));
                    }
                }
            }
            NodeKind::Decision { infoset } => {
                let info = &tree.infosets[*infoset];
                stack.push((node.children[profile[info.player].0[info.local]], reach));
            }
        }
    }
    totals
}

enum RawKind {
    Decision(usize, String),
    Chance(Vec<f64>),
    Terminal(Vec<f64>),
}

fn parse<R: BufRead>(reader: R) -> Result<GameTree> {
    let mut infosets: Vec<(usize, String, Vec<String>)> = Vec::new();
    let mut infoset_ids: HashMap<(usize, String), usize> = HashMap::new();
    let mut nodes: Vec<(String, RawKind, usize)> = Vec::new();
    let mut node_ids: HashMap<String, usize> = HashMap::new();
    let mut edges: Vec<(String, String, String, usize)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let err = |message: String| Error::Parse { line: line_no, message };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse_f64 = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number `{s}`")));
        let parse_player = |s: &str| match s.parse::<usize>() {
            Ok(p) if p >= 1 => Ok(p - 1),
            _ => Err(err(format!("bad player `{s}`"))),
        };
        match fields.as_slice() {
            [] => continue,
            [first, ..] if first.starts_with('#') => continue,
            ["infoset", player, id, "actions", actions @ ..] if !actions.is_empty() => {
                let player = parse_player(player)?;
                let key = (player, id.to_string());
                if infoset_ids.contains_key(&key) {
                    return Err(err(format!("infoset {id} declared twice")));
                }
                infoset_ids.insert(key, infosets.len());
                infosets.push((player, id.to_string(), actions.iter().map(|a| a.to_string()).collect()));
            }
            ["node", id, "decision", player, infoset] => {
                let kind = RawKind::Decision(parse_player(player)?, infoset.to_string());
                push_node(&mut nodes, &mut node_ids, id, kind, line_no)?;
            }
            ["node", id, "chance", probs @ ..] if !probs.is_empty() => {
                let probs = probs.iter().map(|p| parse_f64(p)).collect::<Result<_>>()?;
                push_node(&mut nodes, &mut node_ids, id, RawKind::Chance(probs), line_no)?;
            }
            ["node", id, "terminal", payoffs @ ..] if !payoffs.is_empty() => {
                let payoffs = payoffs.iter().map(|p| parse_f64(p)).collect::<Result<_>>()?;
                push_node(&mut nodes, &mut node_ids, id, RawKind::Terminal(payoffs), line_no)?;
            }
            ["edge", parent, child, label] => {
                edges.push((parent.to_string(), child.to_string(), label.to_string(), line_no));
            }
            _ => return Err(err(format!("unrecognized line `{}`", line.trim()))),
        }
    }
    let players = nodes
        .iter()
        .map(|(_, kind, _)| match kind {
            RawKind::Terminal(u) => u.len(),
            RawKind::Decision(p, _) => p + 1,
            RawKind::Chance(_) => 0,
        })
        .chain(infosets.iter().map(|(p, _, _)| p + 1))
        .max()
        .unwrap_or(0);
    let mut builder = GameTreeBuilder::new(players);
    for (player, label, actions) in &infosets {
        builder.infoset(*player, label.clone(), actions.clone());
    }
    let mut slots: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); nodes.len()];
    let mut has_parent = vec![false; nodes.len()];
    for (parent, child, label, line) in &edges {
        let err = |message: String| Error::Parse { line: *line, message };
        let p = *node_ids.get(parent).ok_or_else(|| err(format!("unknown node {parent}")))?;
        let c = *node_ids.get(child).ok_or_else(|| err(format!("unknown node {child}")))?;
        let slot = match &nodes[p].1 {
            RawKind::Decision(player, infoset) => {
                let h = *infoset_ids
                    .get(&(*player, infoset.clone()))
                    .ok_or_else(|| err(format!("unknown infoset {infoset}")))?;
                infosets[h]
                    .2
                    .iter()
                    .position(|a| a == label)
                    .ok_or_else(|| err(format!("action {label} not in infoset {infoset}")))?
            }
            RawKind::Chance(probs) => match label.parse::<usize>() {
                Ok(k) if k >= 1 && k <= probs.len() => k - 1,
                _ => return Err(err(format!("chance outcome `{label}` out of range"))),
            },
            RawKind::Terminal(_) => return Err(err(format!("terminal {parent} cannot have children"))),
        };
        if slots[p].insert(slot, c).is_some() {
            return Err(err(format!("duplicate edge {label} from {parent}")));
        }
        has_parent[c] = true;
    }
    let roots: Vec<usize> = (0..nodes.len()).filter(|&k| !has_parent[k]).collect();
    let [root] = roots.as_slice() else {
        return Err(Error::Structural(format!("expected one root, found {}", roots.len())));
    };
    for (k, (name, kind, line)) in nodes.iter().enumerate() {
        let children: Vec<usize> = slots[k].values().copied().collect();
        let expected = match kind {
            RawKind::Decision(player, infoset) => {
                let h = *infoset_ids
                    .get(&(*player, infoset.clone()))
                    .ok_or_else(|| Error::Parse {
                        line: *line,
                        message: format!("unknown infoset {infoset}"),
                    })?;
                builder.decision(h, children.clone());
                infosets[h].2.len()
            }
            RawKind::Chance(probs) => {
                builder.chance(probs.clone(), children.clone());
                probs.len()
            }
            RawKind::Terminal(payoffs) => {
                builder.terminal(payoffs.clone());
                0
            }
        };
        if children.len() != expected {
            return Err(Error::Structural(format!(
                "node {name} has {} of {expected} outgoing edges",
                children.len()
            )));
        }
    }
    builder.build(*root)
}

fn push_node(
    nodes: &mut Vec<(String, RawKind, usize)>,
    ids: &mut HashMap<String, usize>,
    id: &str,
    kind: RawKind,
    line: usize,
) -> Result<()> {
    if ids.insert(id.to_string(), nodes.len()).is_some() {
        return Err(Error::Parse {
            line,
            message: format!("node {id} declared twice"),
        });
    }
    nodes.push((id.to_string(), kind, line));
    Ok(())
}
