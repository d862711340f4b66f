//! Finite extensive-form games with perfect recall.
//!
//! A [`GameTree`] is immutable once built. Node ids are dense and assigned
//! in depth-first preorder (the root is node 0); information-set ids are
//! assigned in order of first visit. Players are 0-based in the API and
//! 1-based in the file format.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = usize;
pub type InfosetId = usize;

/// Tolerance on the sum of chance probabilities at a node.
pub const CHANCE_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("parse error: node {node} references unknown infoset {infoset}")]
    UnknownInfoset { node: usize, infoset: usize },
    #[error("invalid game at {location}: {reason}")]
    Invalid { location: String, reason: String },
    #[error("perfect recall violated at infoset {infoset}: {reason}")]
    PerfectRecall { infoset: InfosetId, reason: String },
    #[error("unknown leaf {0}")]
    UnknownLeaf(NodeId),
    #[error("unknown player {0}")]
    UnknownPlayer(usize),
}

impl GameError {
    fn invalid(location: impl Into<String>, reason: impl Into<String>) -> Self {
        GameError::Invalid {
            location: location.into(),
            reason: reason.into(),
        }
    }
}

/// Owner of an internal node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PlayerId {
    /// 0-based numbered player.
    Player(usize),
    Chance,
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlayerId::Player(i) => write!(f, "player {}", i + 1),
            PlayerId::Chance => f.write_str("chance"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    Decision {
        player: usize,
        infoset: InfosetId,
        children: Vec<NodeId>,
    },
    Chance {
        actions: Vec<String>,
        probs: Vec<f64>,
        children: Vec<NodeId>,
    },
    Leaf {
        payoffs: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: NodeId,
    /// Parent node and the index of the action leading here.
    pub parent: Option<(NodeId, usize)>,
    pub kind: NodeKind,
}

impl Node {
    pub fn owner(&self) -> Option<PlayerId> {
        match self.kind {
            NodeKind::Decision { player, .. } => Some(PlayerId::Player(player)),
            NodeKind::Chance { .. } => Some(PlayerId::Chance),
            NodeKind::Leaf { .. } => None,
        }
    }

    pub fn children(&self) -> &[NodeId] {
        match &self.kind {
            NodeKind::Decision { children, .. } | NodeKind::Chance { children, .. } => children,
            NodeKind::Leaf { .. } => &[],
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }

    pub fn infoset(&self) -> Option<InfosetId> {
        match self.kind {
            NodeKind::Decision { infoset, .. } => Some(infoset),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfoSet {
    pub id: InfosetId,
    pub player: usize,
    pub members: Vec<NodeId>,
    pub actions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameTree {
    players: usize,
    nodes: Vec<Node>,
    infosets: Vec<InfoSet>,
    by_player: Vec<Vec<InfosetId>>,
    leaves: Vec<NodeId>,
}

/// Result of the perfect-recall check.
#[derive(Clone, Debug, PartialEq)]
pub enum RecallReport {
    Ok,
    Violations(Vec<RecallViolation>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecallViolation {
    pub infoset: InfosetId,
    pub player: usize,
    pub reason: String,
}

impl RecallReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, RecallReport::Ok)
    }

    pub fn first(&self) -> Option<&RecallViolation> {
        match self {
            RecallReport::Ok => None,
            RecallReport::Violations(v) => v.first(),
        }
    }
}

impl GameTree {
    pub fn num_players(&self) -> usize {
        self.players
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn infosets(&self) -> &[InfoSet] {
        &self.infosets
    }

    pub fn infoset(&self, id: InfosetId) -> &InfoSet {
        &self.infosets[id]
    }

    /// Information sets of `player`, in id order.
    pub fn infosets_of(&self, player: usize) -> &[InfosetId] {
        &self.by_player[player]
    }

    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn has_chance(&self) -> bool {
        self.nodes.iter().any(|n| matches!(n.kind, NodeKind::Chance { .. }))
    }

    pub fn num_actions(&self, id: NodeId) -> usize {
        self.nodes[id].children().len()
    }

    /// Labels of the actions available at `id` (empty at leaves).
    pub fn actions(&self, id: NodeId) -> &[String] {
        match &self.nodes[id].kind {
            NodeKind::Decision { infoset, .. } => &self.infosets[*infoset].actions,
            NodeKind::Chance { actions, .. } => actions,
            NodeKind::Leaf { .. } => &[],
        }
    }

    pub fn payoffs(&self, z: NodeId) -> Option<&[f64]> {
        match &self.nodes.get(z)?.kind {
            NodeKind::Leaf { payoffs } => Some(payoffs),
            _ => None,
        }
    }

    /// `u_i(z)`.
    pub fn leaf_payoff(&self, z: NodeId, player: usize) -> Result<f64, GameError> {
        if player >= self.players {
            return Err(GameError::UnknownPlayer(player));
        }
        self.payoffs(z).map(|p| p[player]).ok_or(GameError::UnknownLeaf(z))
    }

    /// Product of chance probabilities on the root path of `id`.
    pub fn chance_reach(&self, id: NodeId) -> f64 {
        let mut p = 1.0;
        let mut cur = id;
        while let Some((parent, a)) = self.nodes[cur].parent {
            if let NodeKind::Chance { probs, .. } = &self.nodes[parent].kind {
                p *= probs[a];
            }
            cur = parent;
        }
        p
    }

    /// Nodes on the root path of `id`, root first, excluding `id` itself,
    /// each paired with the action taken there.
    pub fn path_to(&self, id: NodeId) -> Vec<(NodeId, usize)> {
        let mut path = Vec::new();
        let mut cur = id;
        while let Some(step) = self.nodes[cur].parent {
            path.push(step);
            cur = step.0;
        }
        path.reverse();
        path
    }

    /// Whether `ancestor` lies on the root path of `id` (a node is not its own ancestor).
    pub fn is_ancestor(&self, ancestor: NodeId, id: NodeId) -> bool {
        let mut cur = id;
        while let Some((parent, _)) = self.nodes[cur].parent {
            if parent == ancestor {
                return true;
            }
            cur = parent;
        }
        false
    }

    /// The ordered `(infoset, action)` pairs of `player` on the root path of `id`.
    pub fn player_history(&self, id: NodeId, player: usize) -> Vec<(InfosetId, usize)> {
        self.path_to(id)
            .into_iter()
            .filter_map(|(n, a)| match self.nodes[n].kind {
                NodeKind::Decision { player: p, infoset, .. } if p == player => Some((infoset, a)),
                _ => None,
            })
            .collect()
    }

    pub fn validate_perfect_recall(&self) -> RecallReport {
        validate_perfect_recall(self)
    }
}

/// Checks that every member of every information set shares the acting
/// player's own `(infoset, action)` history.
pub fn validate_perfect_recall(game: &GameTree) -> RecallReport {
    let mut violations = Vec::new();
    for info in &game.infosets {
        let mut members = info.members.iter();
        let Some(&first) = members.next() else {
            continue;
        };
        let reference = game.player_history(first, info.player);
        for &m in members {
            let h = game.player_history(m, info.player);
            if h != reference {
                violations.push(RecallViolation {
                    infoset: info.id,
                    player: info.player,
                    reason: format!("nodes {first} and {m} have different histories {reference:?} vs {h:?}"),
                });
                break;
            }
        }
    }
    if violations.is_empty() {
        RecallReport::Ok
    } else {
        RecallReport::Violations(violations)
    }
}

// ---------------------------------------------------------------------------
// Construction

/// What a rules object says about a game state.
pub enum Turn {
    Decision {
        player: usize,
        /// Observation key; states sharing `(player, key)` share an infoset.
        key: String,
        actions: Vec<String>,
    },
    Chance {
        actions: Vec<String>,
        probs: Vec<f64>,
    },
    Terminal(Vec<f64>),
}

/// Game rules expanded into a [`GameTree`] by [`build_tree`].
pub trait Rules {
    type State;

    fn num_players(&self) -> usize;
    fn root(&self) -> Self::State;
    fn turn(&self, state: &Self::State) -> Turn;
    fn apply(&self, state: &Self::State, action: usize) -> Self::State;
}

struct Builder {
    players: usize,
    nodes: Vec<Node>,
    infosets: Vec<InfoSet>,
    keys: HashMap<(usize, String), InfosetId>,
}

impl Builder {
    fn new(players: usize) -> Self {
        Builder {
            players,
            nodes: Vec::new(),
            infosets: Vec::new(),
            keys: HashMap::new(),
        }
    }

    fn push(&mut self, parent: Option<(NodeId, usize)>, kind: NodeKind) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node { id, parent, kind });
        id
    }

    fn infoset_for(
        &mut self,
        player: usize,
        key: String,
        actions: &[String],
        node: NodeId,
    ) -> Result<InfosetId, GameError> {
        let next = self.infosets.len();
        let id = *self.keys.entry((player, key.clone())).or_insert(next);
        if id == next {
            self.infosets.push(InfoSet {
                id,
                player,
                members: Vec::new(),
                actions: actions.to_vec(),
            });
        } else if self.infosets[id].actions != actions {
            return Err(GameError::invalid(
                format!("infoset {id} ({key})"),
                "members have different action lists",
            ));
        }
        self.infosets[id].members.push(node);
        Ok(id)
    }

    fn expand<R: Rules>(
        &mut self,
        rules: &R,
        state: R::State,
        parent: Option<(NodeId, usize)>,
    ) -> Result<NodeId, GameError> {
        match rules.turn(&state) {
            Turn::Terminal(payoffs) => {
                if payoffs.len() != self.players {
                    return Err(GameError::invalid(
                        "leaf",
                        format!("expected {} payoffs, got {}", self.players, payoffs.len()),
                    ));
                }
                Ok(self.push(parent, NodeKind::Leaf { payoffs }))
            }
            Turn::Decision { player, key, actions } => {
                if actions.is_empty() {
                    return Err(GameError::invalid("decision node", "no actions"));
                }
                if actions.len() == 1 {
                    let next = rules.apply(&state, 0);
                    return self.expand(rules, next, parent);
                }
                let id = self.push(
                    parent,
                    NodeKind::Decision {
                        player,
                        infoset: usize::MAX,
                        children: Vec::new(),
                    },
                );
                let infoset = self.infoset_for(player, key, &actions, id)?;
                let mut children = Vec::with_capacity(actions.len());
                for a in 0..actions.len() {
                    let next = rules.apply(&state, a);
                    children.push(self.expand(rules, next, Some((id, a)))?);
                }
                self.nodes[id].kind = NodeKind::Decision {
                    player,
                    infoset,
                    children,
                };
                Ok(id)
            }
            Turn::Chance { actions, probs } => {
                if actions.len() != probs.len() || actions.is_empty() {
                    return Err(GameError::invalid(
                        "chance node",
                        "actions and probabilities differ in length",
                    ));
                }
                if actions.len() == 1 {
                    let next = rules.apply(&state, 0);
                    return self.expand(rules, next, parent);
                }
                let id = self.push(
                    parent,
                    NodeKind::Chance {
                        actions: Vec::new(),
                        probs: Vec::new(),
                        children: Vec::new(),
                    },
                );
                let mut children = Vec::with_capacity(actions.len());
                for a in 0..actions.len() {
                    let next = rules.apply(&state, a);
                    children.push(self.expand(rules, next, Some((id, a)))?);
                }
                self.nodes[id].kind = NodeKind::Chance {
                    actions,
                    probs,
                    children,
                };
                Ok(id)
            }
        }
    }

    fn finish(self) -> Result<GameTree, GameError> {
        let mut by_player = vec![Vec::new(); self.players];
        for info in &self.infosets {
            by_player[info.player].push(info.id);
        }
        let leaves = self.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.id).collect();
        let game = GameTree {
            players: self.players,
            nodes: self.nodes,
            infosets: self.infosets,
            by_player,
            leaves,
        };
        game.check_invariants()?;
        if let Some(v) = game.validate_perfect_recall().first() {
            return Err(GameError::PerfectRecall {
                infoset: v.infoset,
                reason: v.reason.clone(),
            });
        }
        Ok(game)
    }
}

/// Expands `rules` into a canonical tree. Nodes with a single action are
/// skipped (their child takes their place).
pub fn build_tree<R: Rules>(rules: &R) -> Result<GameTree, GameError> {
    if rules.num_players() < 2 {
        return Err(GameError::invalid("game", "at least two players required"));
    }
    let mut b = Builder::new(rules.num_players());
    b.expand(rules, rules.root(), None)?;
    b.finish()
}

impl GameTree {
    fn check_invariants(&self) -> Result<(), GameError> {
        for node in &self.nodes {
            match &node.kind {
                NodeKind::Chance { probs, .. } => {
                    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                        return Err(GameError::invalid(
                            format!("node {}", node.id),
                            "negative chance probability",
                        ));
                    }
                    let sum: f64 = probs.iter().sum();
                    if (sum - 1.0).abs() > CHANCE_SUM_TOL {
                        return Err(GameError::invalid(
                            format!("node {}", node.id),
                            format!("chance probabilities sum to {sum}"),
                        ));
                    }
                }
                NodeKind::Leaf { payoffs } => {
                    if payoffs.len() != self.players || payoffs.iter().any(|p| !p.is_finite()) {
                        return Err(GameError::invalid(
                            format!("node {}", node.id),
                            "payoff vector has wrong length or non-finite entries",
                        ));
                    }
                }
                NodeKind::Decision { player, infoset, .. } => {
                    let info = &self.infosets[*infoset];
                    if info.player != *player {
                        return Err(GameError::invalid(
                            format!("node {}", node.id),
                            "owner differs from infoset player",
                        ));
                    }
                    if node.children().len() != info.actions.len() {
                        return Err(GameError::invalid(
                            format!("node {}", node.id),
                            "child count differs from infoset actions",
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(untagged)]
enum OwnerRecord {
    Player(usize),
    Named(String),
}

#[derive(Serialize, Deserialize, Clone, Debug)]
struct NodeRecord {
    id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    owner: Option<OwnerRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    infoset: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    actions: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    children: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chance_probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    payoffs: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
struct InfosetRecord {
    id: usize,
    player: usize,
    members: Vec<usize>,
    actions: Vec<String>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
struct GameFile {
    players: usize,
    nodes: Vec<NodeRecord>,
    infosets: Vec<InfosetRecord>,
    root: usize,
}

/// Serializes a game in the JSON game-file format.
pub fn save_game(game: &GameTree) -> String {
    let nodes = game
        .nodes
        .iter()
        .map(|n| match &n.kind {
            NodeKind::Decision {
                player,
                infoset,
                children,
            } => NodeRecord {
                id: n.id,
                owner: Some(OwnerRecord::Player(player + 1)),
                infoset: Some(*infoset),
                actions: Some(game.infosets[*infoset].actions.clone()),
                children: Some(children.clone()),
                chance_probs: None,
                payoffs: None,
            },
            NodeKind::Chance {
                actions,
                probs,
                children,
            } => NodeRecord {
                id: n.id,
                owner: Some(OwnerRecord::Named("chance".into())),
                infoset: None,
                actions: Some(actions.clone()),
                children: Some(children.clone()),
                chance_probs: Some(probs.clone()),
                payoffs: None,
            },
            NodeKind::Leaf { payoffs } => NodeRecord {
                id: n.id,
                owner: None,
                infoset: None,
                actions: None,
                children: None,
                chance_probs: None,
                payoffs: Some(payoffs.clone()),
            },
        })
        .collect();
    let infosets = game
        .infosets
        .iter()
        .map(|i| InfosetRecord {
            id: i.id,
            player: i.player + 1,
            members: i.members.clone(),
            actions: i.actions.clone(),
        })
        .collect();
    let file = GameFile {
        players: game.players,
        nodes,
        infosets,
        root: game.root(),
    };
    serde_json::to_string_pretty(&file).expect("game serialization cannot fail")
}

/// Rules view over a parsed file, so loading goes through the same
/// canonicalizing expansion as the generators.
struct FileRules<'a> {
    file: &'a GameFile,
    by_id: HashMap<usize, usize>,
    infosets: HashMap<usize, usize>,
}

impl Rules for FileRules<'_> {
    type State = usize;

    fn num_players(&self) -> usize {
        self.file.players
    }

    fn root(&self) -> usize {
        self.file.root
    }

    fn turn(&self, id: &usize) -> Turn {
        let rec = &self.file.nodes[self.by_id[id]];
        match (&rec.payoffs, &rec.owner) {
            (Some(p), _) => Turn::Terminal(p.clone()),
            (None, Some(OwnerRecord::Player(p))) => {
                let info = &self.file.infosets[self.infosets[&rec.infoset.unwrap()]];
                Turn::Decision {
                    player: p - 1,
                    key: format!("file:{}", info.id),
                    actions: info.actions.clone(),
                }
            }
            _ => Turn::Chance {
                actions: rec.actions.clone().unwrap_or_default(),
                probs: rec.chance_probs.clone().unwrap_or_default(),
            },
        }
    }

    fn apply(&self, id: &usize, action: usize) -> usize {
        self.file.nodes[self.by_id[id]].children.as_ref().unwrap()[action]
    }
}

/// Parses and validates a game file. Single-action nodes are collapsed and
/// ids are renumbered canonically.
pub fn load_game(text: &str) -> Result<GameTree, GameError> {
    let file: GameFile = serde_json::from_str(text).map_err(|e| GameError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if file.players < 2 {
        return Err(GameError::invalid("players", "at least two players required"));
    }
    let mut by_id = HashMap::new();
    for (pos, n) in file.nodes.iter().enumerate() {
        if by_id.insert(n.id, pos).is_some() {
            return Err(GameError::invalid(format!("node {}", n.id), "duplicate id"));
        }
    }
    let mut infosets = HashMap::new();
    for (pos, i) in file.infosets.iter().enumerate() {
        if infosets.insert(i.id, pos).is_some() {
            return Err(GameError::invalid(format!("infoset {}", i.id), "duplicate id"));
        }
        if i.player == 0 || i.player > file.players {
            return Err(GameError::invalid(
                format!("infoset {}", i.id),
                format!("player {} out of range", i.player),
            ));
        }
        if i.members.is_empty() {
            return Err(GameError::invalid(format!("infoset {}", i.id), "no members"));
        }
        for m in &i.members {
            let ok = by_id.get(m).is_some_and(|&pos| file.nodes[pos].infoset == Some(i.id));
            if !ok {
                return Err(GameError::invalid(
                    format!("infoset {}", i.id),
                    format!("member {m} is not a node of this infoset"),
                ));
            }
        }
    }
    if !by_id.contains_key(&file.root) {
        return Err(GameError::invalid("root", format!("unknown node {}", file.root)));
    }

    // Structural checks on each record.
    let mut member_of: HashMap<usize, usize> = HashMap::new();
    for i in &file.infosets {
        for m in &i.members {
            if member_of.insert(*m, i.id).is_some() {
                return Err(GameError::invalid(format!("node {m}"), "belongs to two infosets"));
            }
        }
    }
    for n in &file.nodes {
        let loc = || format!("node {}", n.id);
        if let Some(children) = &n.children {
            for c in children {
                if !by_id.contains_key(c) {
                    return Err(GameError::invalid(loc(), format!("unknown child {c}")));
                }
            }
        }
        match (&n.payoffs, &n.owner) {
            (Some(_), _) => {
                if n.children.as_ref().is_some_and(|c| !c.is_empty())
                    || n.actions.as_ref().is_some_and(|a| !a.is_empty())
                {
                    return Err(GameError::invalid(loc(), "leaf with actions"));
                }
            }
            (None, Some(OwnerRecord::Player(p))) => {
                if *p == 0 || *p > file.players {
                    return Err(GameError::invalid(loc(), format!("player {p} out of range")));
                }
                let Some(iid) = n.infoset else {
                    return Err(GameError::invalid(loc(), "decision node without infoset"));
                };
                let Some(&ipos) = infosets.get(&iid) else {
                    return Err(GameError::UnknownInfoset {
                        node: n.id,
                        infoset: iid,
                    });
                };
                let info = &file.infosets[ipos];
                if info.player != *p {
                    return Err(GameError::invalid(loc(), "owner differs from infoset player"));
                }
                if member_of.get(&n.id) != Some(&iid) {
                    return Err(GameError::invalid(loc(), "not listed among infoset members"));
                }
                let children = n.children.as_deref().unwrap_or(&[]);
                if children.len() != info.actions.len() || info.actions.is_empty() {
                    return Err(GameError::invalid(loc(), "child count differs from actions"));
                }
                if let Some(a) = &n.actions {
                    if a != &info.actions {
                        return Err(GameError::invalid(loc(), "actions differ from infoset"));
                    }
                }
            }
            (None, Some(OwnerRecord::Named(s))) if s == "chance" => {
                let children = n.children.as_deref().unwrap_or(&[]);
                let probs = n.chance_probs.as_deref().unwrap_or(&[]);
                let actions = n.actions.as_deref().unwrap_or(&[]);
                if children.is_empty() || probs.len() != children.len() || actions.len() != children.len() {
                    return Err(GameError::invalid(
                        loc(),
                        "chance node needs matching actions, children and chance_probs",
                    ));
                }
                if probs.iter().any(|p| p.is_nan() || *p < 0.0) {
                    return Err(GameError::invalid(loc(), "negative chance probability"));
                }
                let sum: f64 = probs.iter().sum();
                if (sum - 1.0).abs() > CHANCE_SUM_TOL {
                    return Err(GameError::invalid(loc(), format!("chance probabilities sum to {sum}")));
                }
            }
            (None, Some(OwnerRecord::Named(s))) => {
                return Err(GameError::invalid(loc(), format!("unknown owner {s:?}")));
            }
            (None, None) => {
                return Err(GameError::invalid(loc(), "internal node without owner"));
            }
        }
        if n.payoffs.is_none() && n.chance_probs.is_some() && n.owner != Some(OwnerRecord::Named("chance".into())) {
            return Err(GameError::invalid(loc(), "chance_probs on a non-chance node"));
        }
    }

    // Tree property: every node reached exactly once from the root.
    let mut seen = vec![false; file.nodes.len()];
    let mut stack = vec![file.root];
    let mut count = 0usize;
    while let Some(id) = stack.pop() {
        let pos = by_id[&id];
        if seen[pos] {
            return Err(GameError::invalid(format!("node {id}"), "reached twice (not a tree)"));
        }
        seen[pos] = true;
        count += 1;
        if let Some(children) = &file.nodes[pos].children {
            stack.extend(children.iter().copied());
        }
    }
    if count != file.nodes.len() {
        return Err(GameError::invalid("nodes", "some nodes are unreachable from the root"));
    }

    let rules = FileRules {
        file: &file,
        by_id,
        infosets,
    };
    build_tree(&rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;

    #[test]
    fn m2_round_trip() {
        let g = generators::m2();
        let text = save_game(&g);
        let back = load_game(&text).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn m2_payoffs() {
        let g = generators::m2();
        assert_eq!(g.leaves().len(), 4);
        // Leaves in preorder: (H,h), (H,t), (T,h), (T,t).
        let hh = g.leaves()[0];
        let ht = g.leaves()[1];
        assert_eq!(g.leaf_payoff(hh, 0).unwrap(), 1.0);
        assert_eq!(g.leaf_payoff(ht, 1).unwrap(), 0.0);
        assert!(matches!(g.leaf_payoff(0, 0), Err(GameError::UnknownLeaf(0))));
    }

    #[test]
    fn m2_has_perfect_recall() {
        assert!(generators::m2().validate_perfect_recall().is_ok());
    }

    fn two_node_infoset_with_different_parent_actions() -> String {
        // Player 1 picks L/R, then player 1 again at a single infoset
        // spanning both children: forgets own action.
        r#"{
          "players": 2,
          "root": 0,
          "infosets": [
            {"id": 0, "player": 1, "members": [0], "actions": ["L", "R"]},
            {"id": 1, "player": 1, "members": [1, 2], "actions": ["a", "b"]}
          ],
          "nodes": [
            {"id": 0, "owner": 1, "infoset": 0, "actions": ["L", "R"], "children": [1, 2]},
            {"id": 1, "owner": 1, "infoset": 1, "actions": ["a", "b"], "children": [3, 4]},
            {"id": 2, "owner": 1, "infoset": 1, "actions": ["a", "b"], "children": [5, 6]},
            {"id": 3, "payoffs": [1, 0]},
            {"id": 4, "payoffs": [0, 0]},
            {"id": 5, "payoffs": [0, 0]},
            {"id": 6, "payoffs": [1, 0]}
          ]
        }"#
        .to_string()
    }

    #[test]
    fn forgetting_own_action_is_reported() {
        let text = two_node_infoset_with_different_parent_actions();
        let err = load_game(&text).unwrap_err();
        match err {
            GameError::PerfectRecall { infoset, .. } => assert_eq!(infoset, 1),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn chance_row_not_summing_to_one_names_node() {
        let text = r#"{
          "players": 2, "root": 0, "infosets": [],
          "nodes": [
            {"id": 0, "owner": "chance", "actions": ["a", "b"], "children": [1, 2], "chance_probs": [0.5, 0.4]},
            {"id": 1, "payoffs": [0, 0]},
            {"id": 2, "payoffs": [1, 1]}
          ]
        }"#;
        let err = load_game(text).unwrap_err();
        match err {
            GameError::Invalid { location, reason } => {
                assert_eq!(location, "node 0");
                assert!(reason.contains("sum"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_infoset_is_parse_error() {
        let text = r#"{
          "players": 2, "root": 0, "infosets": [],
          "nodes": [
            {"id": 0, "owner": 1, "infoset": 7, "actions": ["a", "b"], "children": [1, 2]},
            {"id": 1, "payoffs": [0, 0]},
            {"id": 2, "payoffs": [1, 1]}
          ]
        }"#;
        assert!(matches!(
            load_game(text),
            Err(GameError::UnknownInfoset { node: 0, infoset: 7 })
        ));
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = load_game("{\n  \"players\": 2,\n  oops\n}").unwrap_err();
        match err {
            GameError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn cycles_are_rejected() {
        let text = r#"{
          "players": 2, "root": 0,
          "infosets": [{"id": 0, "player": 1, "members": [0], "actions": ["a", "b"]}],
          "nodes": [
            {"id": 0, "owner": 1, "infoset": 0, "children": [1, 0]},
            {"id": 1, "payoffs": [0, 0]}
          ]
        }"#;
        assert!(matches!(load_game(text), Err(GameError::Invalid { .. })));
    }

    #[test]
    fn single_action_nodes_collapse_on_load() {
        let text = r#"{
          "players": 2, "root": 0,
          "infosets": [
            {"id": 0, "player": 1, "members": [0], "actions": ["only"]},
            {"id": 1, "player": 2, "members": [1], "actions": ["x", "y"]}
          ],
          "nodes": [
            {"id": 0, "owner": 1, "infoset": 0, "children": [1]},
            {"id": 1, "owner": 2, "infoset": 1, "children": [2, 3]},
            {"id": 2, "payoffs": [1, 2]},
            {"id": 3, "payoffs": [3, 4]}
          ]
        }"#;
        let g = load_game(text).unwrap();
        assert_eq!(g.nodes().len(), 3);
        assert_eq!(g.infosets().len(), 1);
        assert_eq!(g.infoset(0).player, 1);
    }

    #[test]
    fn tree_property_every_node_once() {
        let g = generators::goofspiel(3).unwrap();
        let mut seen = vec![0u32; g.nodes().len()];
        let mut stack = vec![g.root()];
        while let Some(n) = stack.pop() {
            seen[n] += 1;
            stack.extend(g.node(n).children());
        }
        assert!(seen.iter().all(|&c| c == 1));
    }
}
