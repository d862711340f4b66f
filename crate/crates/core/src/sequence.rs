//! Sequences, parent-sequence maps, sequence-form constraints and relevant
//! sequence pairs.

use std::collections::HashMap;

use thiserror::Error;

use crate::game::{GameTree, InfosetId, NodeId, NodeKind};

/// Index of a sequence within one player's sequence list. The empty
/// sequence is always 0.
pub type SeqId = usize;

pub const EMPTY_SEQ: SeqId = 0;

#[derive(Debug, Error, PartialEq)]
pub enum SequenceError {
    #[error("perfect recall violated: parent sequence of infoset {0} is ambiguous")]
    AmbiguousParent(InfosetId),
    #[error("infosets {0} and {1} belong to the same player")]
    SamePlayer(InfosetId, InfosetId),
    #[error("relevant pairs require exactly two players, game has {0}")]
    NotTwoPlayers(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sequence {
    Empty,
    Pair { infoset: InfosetId, action: usize },
}

/// Sequences of one player.
#[derive(Clone, Debug)]
pub struct PlayerSequences {
    pub player: usize,
    seqs: Vec<Sequence>,
    /// Game infoset ids of this player, in local order.
    infosets: Vec<InfosetId>,
    /// First sequence id of each local infoset; its actions follow consecutively.
    first_seq: Vec<SeqId>,
    /// Parent sequence of each local infoset.
    parent: Vec<SeqId>,
    /// Local index of each sequence's infoset (unused for the empty sequence).
    seq_infoset: Vec<usize>,
    /// Local infosets whose parent sequence is the given sequence.
    children: Vec<Vec<usize>>,
}

impl PlayerSequences {
    pub fn len(&self) -> usize {
        self.seqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seqs.is_empty()
    }

    pub fn sequences(&self) -> &[Sequence] {
        &self.seqs
    }

    pub fn sequence(&self, s: SeqId) -> Sequence {
        self.seqs[s]
    }

    pub fn num_infosets(&self) -> usize {
        self.infosets.len()
    }

    /// Game infoset id of local infoset `k`.
    pub fn infoset_id(&self, k: usize) -> InfosetId {
        self.infosets[k]
    }

    pub fn infoset_ids(&self) -> &[InfosetId] {
        &self.infosets
    }

    /// Local index of a game infoset, if it belongs to this player.
    pub fn local(&self, infoset: InfosetId) -> Option<usize> {
        self.infosets.binary_search(&infoset).ok()
    }

    pub fn num_actions(&self, k: usize) -> usize {
        let end = self.first_seq.get(k + 1).copied().unwrap_or(self.seqs.len());
        end - self.first_seq[k]
    }

    /// Sequence ids of the actions of local infoset `k`.
    pub fn action_seqs(&self, k: usize) -> std::ops::Range<SeqId> {
        self.first_seq[k]..self.first_seq[k] + self.num_actions(k)
    }

    pub fn seq_of(&self, k: usize, action: usize) -> SeqId {
        self.first_seq[k] + action
    }

    /// Parent sequence `σ(I)` of local infoset `k`.
    pub fn parent_seq(&self, k: usize) -> SeqId {
        self.parent[k]
    }

    /// Local infoset at which sequence `s` is played (`None` for the empty sequence).
    pub fn infoset_of_seq(&self, s: SeqId) -> Option<usize> {
        (s != EMPTY_SEQ).then(|| self.seq_infoset[s])
    }

    /// Action index of a non-empty sequence.
    pub fn action_of_seq(&self, s: SeqId) -> Option<usize> {
        self.infoset_of_seq(s).map(|k| s - self.first_seq[k])
    }

    /// Local infosets whose parent sequence is `s`.
    pub fn child_infosets(&self, s: SeqId) -> &[usize] {
        &self.children[s]
    }

    /// `s` followed by its ancestors up to the empty sequence.
    pub fn chain(&self, s: SeqId) -> impl Iterator<Item = SeqId> + '_ {
        let mut cur = Some(s);
        std::iter::from_fn(move || {
            let out = cur?;
            cur = self.infoset_of_seq(out).map(|k| self.parent[k]);
            Some(out)
        })
    }

    /// Whether `anc` is `s` or one of its ancestor sequences.
    pub fn is_prefix(&self, anc: SeqId, s: SeqId) -> bool {
        self.chain(s).any(|c| c == anc)
    }

    /// Local infosets in the subtree rooted at the given local infosets
    /// (those infosets plus every infoset below them), parents before children.
    pub fn subtree_infosets(&self, tops: &[usize]) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack: Vec<usize> = tops.iter().rev().copied().collect();
        while let Some(k) = stack.pop() {
            out.push(k);
            for s in self.action_seqs(k).rev() {
                stack.extend(self.children[s].iter().rev());
            }
        }
        out
    }

    /// Rows of `F_i`: row 0 fixes `y(∅) = 1`; row `1 + k` is
    /// `-y(σ(I_k)) + Σ_a y(I_k, a) = 0`.
    pub fn constraint_rows(&self) -> Vec<Vec<(SeqId, f64)>> {
        let mut rows = Vec::with_capacity(self.infosets.len() + 1);
        rows.push(vec![(EMPTY_SEQ, 1.0)]);
        for k in 0..self.infosets.len() {
            let mut row = vec![(self.parent[k], -1.0)];
            row.extend(self.action_seqs(k).map(|s| (s, 1.0)));
            rows.push(row);
        }
        rows
    }

    /// Right-hand side `f_i = e_0`.
    pub fn constraint_rhs(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.infosets.len() + 1];
        f[0] = 1.0;
        f
    }

    /// Largest absolute residual of `F y = f` and `y ≥ 0`.
    pub fn residual(&self, y: &[f64]) -> f64 {
        let rhs = self.constraint_rhs();
        let mut worst = y.iter().fold(0.0f64, |m, v| m.max(-v));
        for (row, f) in self.constraint_rows().iter().zip(rhs) {
            let lhs: f64 = row.iter().map(|(s, c)| c * y[*s]).sum();
            worst = worst.max((lhs - f).abs());
        }
        worst
    }
}

/// Sequence structure of every player of a game.
#[derive(Clone, Debug)]
pub struct SequenceFormIndex {
    players: Vec<PlayerSequences>,
    /// `σ_i(v)` for every node `v` and player `i`, flattened `node * n + i`.
    node_seq: Vec<SeqId>,
    num_players: usize,
    /// For each infoset, sorted infosets of other players that lie on the
    /// root path of one of its members.
    ancestors: Vec<Vec<InfosetId>>,
    /// For each infoset, sorted infosets of other players connected to it.
    connections: Vec<Vec<InfosetId>>,
}

impl SequenceFormIndex {
    pub fn player(&self, i: usize) -> &PlayerSequences {
        &self.players[i]
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    /// `σ_i(v)`.
    pub fn node_seq(&self, v: NodeId, i: usize) -> SeqId {
        self.node_seq[v * self.num_players + i]
    }

    /// Parent sequence of a game infoset (in its owner's numbering).
    pub fn infoset_parent(&self, game: &GameTree, infoset: InfosetId) -> SeqId {
        let p = &self.players[game.infoset(infoset).player];
        p.parent_seq(p.local(infoset).expect("infoset of its owner"))
    }

    /// `I ⇌ J` for infosets of distinct players.
    pub fn connected(&self, game: &GameTree, a: InfosetId, b: InfosetId) -> Result<bool, SequenceError> {
        if game.infoset(a).player == game.infoset(b).player {
            return Err(SequenceError::SamePlayer(a, b));
        }
        Ok(self.ancestors[a].binary_search(&b).is_ok() || self.ancestors[b].binary_search(&a).is_ok())
    }

    /// Infosets of other players connected to `a`, sorted.
    pub fn connected_to(&self, a: InfosetId) -> &[InfosetId] {
        &self.connections[a]
    }
}

/// Builds sequences, parent maps and connectivity for every player.
pub fn build_sequences(game: &GameTree) -> Result<SequenceFormIndex, SequenceError> {
    let n = game.num_players();
    let mut players = Vec::with_capacity(n);
    for i in 0..n {
        let infosets = game.infosets_of(i).to_vec();
        let mut seqs = vec![Sequence::Empty];
        let mut first_seq = Vec::with_capacity(infosets.len());
        let mut seq_infoset = vec![usize::MAX];
        for (k, &info) in infosets.iter().enumerate() {
            first_seq.push(seqs.len());
            for a in 0..game.infoset(info).actions.len() {
                seqs.push(Sequence::Pair {
                    infoset: info,
                    action: a,
                });
                seq_infoset.push(k);
            }
        }
        players.push(PlayerSequences {
            player: i,
            children: vec![Vec::new(); seqs.len()],
            parent: vec![usize::MAX; infosets.len()],
            seqs,
            infosets,
            first_seq,
            seq_infoset,
        });
    }

    // Preorder ids: parents come before children, so one forward pass
    // propagates parent sequences.
    let mut node_seq = vec![EMPTY_SEQ; game.nodes().len() * n];
    for node in game.nodes() {
        let v = node.id;
        if let Some((p, a)) = node.parent {
            for i in 0..n {
                node_seq[v * n + i] = node_seq[p * n + i];
            }
            if let NodeKind::Decision { player, infoset, .. } = game.node(p).kind {
                let ps = &players[player];
                let k = ps.local(infoset).expect("infoset of its owner");
                node_seq[v * n + player] = ps.seq_of(k, a);
            }
        }
    }

    for ps in players.iter_mut() {
        for k in 0..ps.infosets.len() {
            let info = game.infoset(ps.infosets[k]);
            let mut parent = None;
            for &m in &info.members {
                let s = node_seq[m * n + ps.player];
                match parent {
                    None => parent = Some(s),
                    Some(p) if p != s => {
                        return Err(SequenceError::AmbiguousParent(info.id));
                    }
                    _ => {}
                }
            }
            let parent = parent.expect("infosets are nonempty");
            ps.parent[k] = parent;
            ps.children[parent].push(k);
        }
    }

    // Connectivity: record, per infoset, the other players' infosets on the
    // root paths of its members.
    let mut ancestors: Vec<Vec<InfosetId>> = vec![Vec::new(); game.infosets().len()];
    let mut path: Vec<InfosetId> = Vec::new();
    collect_ancestors(game, game.root(), &mut path, &mut ancestors);
    for a in ancestors.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    let mut connections = ancestors.clone();
    for (b, anc) in ancestors.iter().enumerate() {
        for &a in anc {
            connections[a].push(b);
        }
    }
    for c in connections.iter_mut() {
        c.sort_unstable();
        c.dedup();
    }

    Ok(SequenceFormIndex {
        players,
        node_seq,
        num_players: n,
        ancestors,
        connections,
    })
}

fn collect_ancestors(game: &GameTree, v: NodeId, path: &mut Vec<InfosetId>, out: &mut [Vec<InfosetId>]) {
    let node = game.node(v);
    if let NodeKind::Decision { player, infoset, .. } = node.kind {
        out[infoset].extend(path.iter().copied().filter(|&j| game.infoset(j).player != player));
        path.push(infoset);
        for &c in node.children() {
            collect_ancestors(game, c, path, out);
        }
        path.pop();
    } else {
        for &c in node.children() {
            collect_ancestors(game, c, path, out);
        }
    }
}

/// Where a relevant pair comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairKind {
    BothEmpty,
    OneEmpty,
    Connected,
}

/// Relevant sequence pairs of a two-player game with a dense index.
#[derive(Clone, Debug)]
pub struct RelevantPairSet {
    pairs: Vec<(SeqId, SeqId)>,
    kinds: Vec<PairKind>,
    index: HashMap<(SeqId, SeqId), usize>,
}

impl RelevantPairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(SeqId, SeqId)] {
        &self.pairs
    }

    pub fn pair(&self, k: usize) -> (SeqId, SeqId) {
        self.pairs[k]
    }

    pub fn kind(&self, k: usize) -> PairKind {
        self.kinds[k]
    }

    pub fn index_of(&self, s1: SeqId, s2: SeqId) -> Option<usize> {
        self.index.get(&(s1, s2)).copied()
    }
}

/// Enumerates the relevant pairs: `(∅,∅)` first, then pairs with one empty
/// sequence, then pairs of sequences at connected infosets.
pub fn relevant_pairs(game: &GameTree, index: &SequenceFormIndex) -> Result<RelevantPairSet, SequenceError> {
    if game.num_players() != 2 {
        return Err(SequenceError::NotTwoPlayers(game.num_players()));
    }
    let p1 = index.player(0);
    let p2 = index.player(1);
    let mut pairs = vec![(EMPTY_SEQ, EMPTY_SEQ)];
    let mut kinds = vec![PairKind::BothEmpty];
    for s2 in 1..p2.len() {
        pairs.push((EMPTY_SEQ, s2));
        kinds.push(PairKind::OneEmpty);
    }
    for s1 in 1..p1.len() {
        pairs.push((s1, EMPTY_SEQ));
        kinds.push(PairKind::OneEmpty);
    }
    for k1 in 0..p1.num_infosets() {
        let mut partners: Vec<usize> = index
            .connected_to(p1.infoset_id(k1))
            .iter()
            .filter_map(|&j| p2.local(j))
            .collect();
        partners.sort_unstable();
        for s1 in p1.action_seqs(k1) {
            for &k2 in &partners {
                for s2 in p2.action_seqs(k2) {
                    pairs.push((s1, s2));
                    kinds.push(PairKind::Connected);
                }
            }
        }
    }
    let index = pairs.iter().enumerate().map(|(k, p)| (*p, k)).collect();
    Ok(RelevantPairSet { pairs, kinds, index })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;

    #[test]
    fn m2_sequences() {
        let g = generators::m2();
        let idx = build_sequences(&g).unwrap();
        assert_eq!(idx.player(0).len(), 3);
        assert_eq!(idx.player(1).len(), 3);
        let rows = idx.player(0).constraint_rows();
        assert_eq!(rows, vec![vec![(0, 1.0)], vec![(0, -1.0), (1, 1.0), (2, 1.0)]]);
        assert_eq!(idx.player(0).constraint_rhs(), vec![1.0, 0.0]);
    }

    #[test]
    fn m2_connected_and_pairs() {
        let g = generators::m2();
        let idx = build_sequences(&g).unwrap();
        assert!(idx.connected(&g, 0, 1).unwrap());
        assert_eq!(idx.connected(&g, 0, 0), Err(SequenceError::SamePlayer(0, 0)));
        let pairs = relevant_pairs(&g, &idx).unwrap();
        assert_eq!(pairs.len(), 9);
        assert_eq!(pairs.pair(0), (EMPTY_SEQ, EMPTY_SEQ));
    }

    #[test]
    fn goofspiel_three_sequence_count() {
        let g = generators::goofspiel(3).unwrap();
        let idx = build_sequences(&g).unwrap();
        assert_eq!(idx.player(0).len(), 22);
        assert_eq!(idx.player(1).len(), 22);
    }

    #[test]
    fn disjoint_subtrees_are_not_connected() {
        // Player 1 picks L or R; player 2 has a distinct infoset under each,
        // followed by player 1 again under L only.
        let text = r#"{
          "players": 2, "root": 0,
          "infosets": [
            {"id": 0, "player": 1, "members": [0], "actions": ["L", "R"]},
            {"id": 1, "player": 2, "members": [1], "actions": ["a", "b"]},
            {"id": 2, "player": 2, "members": [2], "actions": ["c", "d"]},
            {"id": 3, "player": 1, "members": [3], "actions": ["x", "y"]}
          ],
          "nodes": [
            {"id": 0, "owner": 1, "infoset": 0, "children": [1, 2]},
            {"id": 1, "owner": 2, "infoset": 1, "children": [3, 4]},
            {"id": 2, "owner": 2, "infoset": 2, "children": [5, 6]},
            {"id": 3, "owner": 1, "infoset": 3, "children": [7, 8]},
            {"id": 4, "payoffs": [0, 0]},
            {"id": 5, "payoffs": [0, 0]},
            {"id": 6, "payoffs": [0, 0]},
            {"id": 7, "payoffs": [0, 0]},
            {"id": 8, "payoffs": [0, 0]}
          ]
        }"#;
        let g = crate::game::load_game(text).unwrap();
        let idx = build_sequences(&g).unwrap();
        // Infoset ids are canonical preorder: L/R=0, a/b=1, x/y=2, c/d=3.
        let xy = g.infosets_of(0)[1];
        let cd = g.infosets_of(1)[1];
        assert!(!idx.connected(&g, xy, cd).unwrap());
        let pairs = relevant_pairs(&g, &idx).unwrap();
        let full = idx.player(0).len() * idx.player(1).len();
        assert!(pairs.len() < full);
    }

    #[test]
    fn chain_and_subtree() {
        let g = generators::goofspiel(3).unwrap();
        let idx = build_sequences(&g).unwrap();
        let p = idx.player(0);
        let root = p.child_infosets(EMPTY_SEQ)[0];
        assert_eq!(p.subtree_infosets(&[root]).len(), p.num_infosets());
        let deep = p.num_infosets() - 1;
        let s = p.seq_of(deep, 0);
        let chain: Vec<_> = p.chain(s).collect();
        assert_eq!(chain.len(), 3);
        assert_eq!(*chain.last().unwrap(), EMPTY_SEQ);
    }
}
