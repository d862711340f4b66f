//! The compact description of the correlation-plan polytope Ξ for
//! two-player games without chance, and leaf-substituted access to ξ.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{GameTree, NodeId};
use crate::sequence::{
    build_sequences, relevant_pairs, RelevantPairSet, SeqId, Sequence, SequenceError, SequenceFormIndex, EMPTY_SEQ,
};

#[derive(Debug, Error, PartialEq)]
pub enum XiError {
    #[error("chance not supported by compact Ξ; use the oracle")]
    Chance,
    #[error("compact Ξ needs exactly two players, game has {0}; use the oracle")]
    NotTwoPlayers(usize),
    #[error("pair ({seq} of player {player}, opponent sequence at leaf {leaf}) is not relevant")]
    NotRelevant { player: usize, seq: SeqId, leaf: NodeId },
    #[error("correlation plan has {got} entries, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

/// A vector over relevant sequence pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CorrelationPlan(pub Vec<f64>);

impl CorrelationPlan {
    pub fn new(values: Vec<f64>) -> Self {
        CorrelationPlan(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for CorrelationPlan {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for CorrelationPlan {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Where a row of the Ξ system comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XiRowKind {
    /// `ξ(∅, ∅) = 1`.
    Normalization,
    /// `Σ_a ξ(σ, (J, a)) = ξ(σ, σ(J))` where `σ` belongs to `owner` and `J`
    /// is a local infoset of the other player.
    Mass { owner: usize, seq: SeqId, infoset: usize },
}

#[derive(Clone, Debug)]
pub struct XiRow {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
    pub kind: XiRowKind,
}

/// Equality rows over relevant-pair coordinates; all variables are
/// nonnegative.
#[derive(Clone, Debug)]
pub struct XiConstraintSystem {
    pub num_vars: usize,
    pub rows: Vec<XiRow>,
}

impl XiConstraintSystem {
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Worst violated row (or negative coordinate) and its magnitude.
    pub fn worst_violation(&self, xi: &[f64]) -> Option<(String, f64)> {
        let mut worst: Option<(String, f64)> = None;
        let mut consider = |label: &dyn Fn() -> String, v: f64| {
            if v > worst.as_ref().map_or(0.0, |w| w.1) {
                worst = Some((label(), v));
            }
        };
        for (r, row) in self.rows.iter().enumerate() {
            let lhs: f64 = row.terms.iter().map(|(k, c)| c * xi[*k]).sum();
            consider(&|| format!("row {r} ({:?})", row.kind), (lhs - row.rhs).abs());
        }
        for (k, v) in xi.iter().enumerate() {
            consider(&|| format!("xi[{k}] >= 0"), -v);
        }
        worst
    }
}

/// `max_r |lhs_r − rhs_r|` together with `max_k max(0, −ξ_k)`.
pub fn check_membership(xi: &[f64], system: &XiConstraintSystem) -> f64 {
    if xi.len() != system.num_vars {
        return f64::INFINITY;
    }
    let mut worst = xi.iter().fold(0.0f64, |m, v| m.max(-v));
    for row in &system.rows {
        let lhs: f64 = row.terms.iter().map(|(k, c)| c * xi[*k]).sum();
        worst = worst.max((lhs - row.rhs).abs());
    }
    worst
}

/// Builds the Ξ rows: normalization, then for each player's sequence `σ`
/// and each opponent infoset `J` that is reachable together with `σ`, the
/// mass-conservation row over `J`'s actions.
pub fn build_xi_constraints(
    game: &GameTree,
    index: &SequenceFormIndex,
    pairs: &RelevantPairSet,
) -> Result<XiConstraintSystem, XiError> {
    if game.num_players() != 2 {
        return Err(XiError::NotTwoPlayers(game.num_players()));
    }
    if game.has_chance() {
        return Err(XiError::Chance);
    }
    let mut rows = vec![XiRow {
        terms: vec![(pairs.index_of(EMPTY_SEQ, EMPTY_SEQ).expect("(∅,∅) is relevant"), 1.0)],
        rhs: 1.0,
        kind: XiRowKind::Normalization,
    }];
    for owner in 0..2 {
        let me = index.player(owner);
        let other = index.player(1 - owner);
        let key = |mine: SeqId, theirs: SeqId| {
            if owner == 0 {
                pairs.index_of(mine, theirs)
            } else {
                pairs.index_of(theirs, mine)
            }
        };
        for s in 0..me.len() {
            let partners: Vec<usize> = match me.infoset_of_seq(s) {
                None => (0..other.num_infosets()).collect(),
                Some(k) => index
                    .connected_to(me.infoset_id(k))
                    .iter()
                    .filter_map(|&j| other.local(j))
                    .collect(),
            };
            for j in partners {
                let Some(parent) = key(s, other.parent_seq(j)) else {
                    continue;
                };
                let mut terms = vec![(parent, -1.0)];
                for t in other.action_seqs(j) {
                    terms.push((key(s, t).expect("connected pair is relevant"), 1.0));
                }
                rows.push(XiRow {
                    terms,
                    rhs: 0.0,
                    kind: XiRowKind::Mass {
                        owner,
                        seq: s,
                        infoset: j,
                    },
                });
            }
        }
    }
    Ok(XiConstraintSystem {
        num_vars: pairs.len(),
        rows,
    })
}

/// Per-leaf data used by every leaf-sum formula.
#[derive(Clone, Debug)]
pub struct LeafInfo {
    pub node: NodeId,
    /// `σ_1(z), σ_2(z)`.
    pub seqs: [SeqId; 2],
    pub payoffs: [f64; 2],
    /// Coordinate of `ξ(σ_1(z), σ_2(z))`.
    pub own: usize,
}

/// Resolves `ξ[σ ⋈ z] = ξ(σ, σ_{-i}(z))` to a coordinate.
#[derive(Clone, Debug)]
pub struct LeafSubstitutionIndex {
    leaves: Vec<LeafInfo>,
}

impl LeafSubstitutionIndex {
    pub fn new(game: &GameTree, index: &SequenceFormIndex, pairs: &RelevantPairSet) -> Self {
        let leaves = game
            .leaves()
            .iter()
            .map(|&z| {
                let seqs = [index.node_seq(z, 0), index.node_seq(z, 1)];
                let p = game.payoffs(z).expect("leaf");
                LeafInfo {
                    node: z,
                    seqs,
                    payoffs: [p[0], p[1]],
                    own: pairs
                        .index_of(seqs[0], seqs[1])
                        .expect("leaf sequence pairs are relevant"),
                }
            })
            .collect();
        LeafSubstitutionIndex { leaves }
    }

    pub fn leaves(&self) -> &[LeafInfo] {
        &self.leaves
    }

    /// Coordinate of `ξ[σ ⋈ z]` for player `i` and leaf position `k`.
    pub fn coord(&self, pairs: &RelevantPairSet, i: usize, seq: SeqId, k: usize) -> Result<usize, XiError> {
        let leaf = &self.leaves[k];
        let found = if i == 0 {
            pairs.index_of(seq, leaf.seqs[1])
        } else {
            pairs.index_of(leaf.seqs[0], seq)
        };
        found.ok_or(XiError::NotRelevant {
            player: i,
            seq,
            leaf: leaf.node,
        })
    }
}

/// A two-player game without chance together with its sequence index,
/// relevant pairs, Ξ rows and leaf index.
#[derive(Clone, Debug)]
pub struct CompactGame {
    game: GameTree,
    index: SequenceFormIndex,
    pairs: RelevantPairSet,
    xi: XiConstraintSystem,
    leaves: LeafSubstitutionIndex,
    /// Per player and sequence `s`: positions of the leaves whose player
    /// sequence extends `s` (all leaves for `∅`).
    under: [Vec<Vec<usize>>; 2],
}

impl CompactGame {
    pub fn new(game: GameTree) -> Result<Self, XiError> {
        if game.num_players() != 2 {
            return Err(XiError::NotTwoPlayers(game.num_players()));
        }
        if game.has_chance() {
            return Err(XiError::Chance);
        }
        let index = build_sequences(&game)?;
        let pairs = relevant_pairs(&game, &index)?;
        let xi = build_xi_constraints(&game, &index, &pairs)?;
        let leaves = LeafSubstitutionIndex::new(&game, &index, &pairs);
        let under = [0, 1].map(|i| {
            let ps = index.player(i);
            let mut under = vec![Vec::new(); ps.len()];
            for (k, leaf) in leaves.leaves().iter().enumerate() {
                for s in ps.chain(leaf.seqs[i]) {
                    under[s].push(k);
                }
            }
            under
        });
        Ok(CompactGame {
            game,
            index,
            pairs,
            xi,
            leaves,
            under,
        })
    }

    pub fn game(&self) -> &GameTree {
        &self.game
    }

    pub fn index(&self) -> &SequenceFormIndex {
        &self.index
    }

    pub fn pairs(&self) -> &RelevantPairSet {
        &self.pairs
    }

    pub fn xi_system(&self) -> &XiConstraintSystem {
        &self.xi
    }

    pub fn leaf_index(&self) -> &LeafSubstitutionIndex {
        &self.leaves
    }

    pub fn leaves(&self) -> &[LeafInfo] {
        self.leaves.leaves()
    }

    /// `Z_σ`: leaf positions whose player-`i` sequence extends `s`.
    pub fn leaves_under(&self, i: usize, s: SeqId) -> &[usize] {
        &self.under[i][s]
    }

    /// `Z_I`: leaf positions whose root path crosses local infoset `k` of player `i`.
    pub fn leaves_through(&self, i: usize, k: usize) -> Vec<usize> {
        let ps = self.index.player(i);
        let mut out: Vec<usize> = ps
            .action_seqs(k)
            .flat_map(|s| self.under[i][s].iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    /// Coordinate of `ξ[σ ⋈ z]`, `k` being the leaf's position in [`Self::leaves`].
    pub fn coord(&self, i: usize, seq: SeqId, k: usize) -> Result<usize, XiError> {
        self.leaves.coord(&self.pairs, i, seq, k)
    }

    /// `ξ[σ ⋈ z]`.
    pub fn xi_leaf(&self, xi: &[f64], i: usize, seq: SeqId, k: usize) -> Result<f64, XiError> {
        self.check_dim(xi)?;
        Ok(xi[self.coord(i, seq, k)?])
    }

    pub fn check_dim(&self, xi: &[f64]) -> Result<(), XiError> {
        if xi.len() != self.dim() {
            return Err(XiError::Dimension {
                expected: self.dim(),
                got: xi.len(),
            });
        }
        Ok(())
    }

    pub fn membership(&self, xi: &[f64]) -> f64 {
        check_membership(xi, &self.xi)
    }

    /// `ξ(σ_1, σ_2) = y_1(σ_1)·y_2(σ_2)` on relevant pairs.
    pub fn product_plan(&self, y1: &[f64], y2: &[f64]) -> CorrelationPlan {
        CorrelationPlan::new(self.pairs.pairs().iter().map(|&(a, b)| y1[a] * y2[b]).collect())
    }

    /// Human-readable label of a sequence: `∅` or `infoset:action`.
    pub fn seq_label(&self, i: usize, s: SeqId) -> String {
        match self.index.player(i).sequence(s) {
            Sequence::Empty => "∅".to_string(),
            Sequence::Pair { infoset, action } => {
                format!("I{infoset}:{}", self.game.infoset(infoset).actions[action])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;

    #[test]
    fn m2_system() {
        let space = CompactGame::new(generators::m2()).unwrap();
        assert_eq!(space.dim(), 9);
        assert_eq!(space.xi_system().num_rows(), 7);
        let y = [1.0, 0.5, 0.5];
        let xi = space.product_plan(&y, &y);
        assert!(space.membership(&xi) < 1e-15);
        let mut bad = xi.clone();
        bad[0] = 0.9;
        assert!((space.membership(&bad) - 0.1).abs() < 1e-12);
        assert_eq!(space.membership(&[0.0; 9]), 1.0);
        let (label, v) = space.xi_system().worst_violation(&[0.0; 9]).unwrap();
        assert_eq!(v, 1.0);
        assert!(label.contains("Normalization"));
    }

    #[test]
    fn perturbation_scales_linearly() {
        let space = CompactGame::new(generators::m2()).unwrap();
        let y = [1.0, 0.5, 0.5];
        let mut xi = space.product_plan(&y, &y);
        let k = space.pairs().index_of(1, 1).unwrap();
        xi[k] += 1e-6;
        let r = space.membership(&xi);
        assert!((r - 1e-6).abs() < 1e-12, "{r}");
    }

    #[test]
    fn leaf_substitution() {
        let space = CompactGame::new(generators::m2()).unwrap();
        let y = [1.0, 0.25, 0.75];
        let xi = space.product_plan(&y, &y);
        for (k, leaf) in space.leaves().iter().enumerate() {
            assert_eq!(space.coord(0, leaf.seqs[0], k).unwrap(), leaf.own);
            assert_eq!(space.xi_leaf(&xi, 0, EMPTY_SEQ, k).unwrap(), y[leaf.seqs[1]]);
        }
    }

    #[test]
    fn non_relevant_query_is_an_error() {
        let space = CompactGame::new(generators::goofspiel(3).unwrap()).unwrap();
        let p1 = space.index().player(0);
        let mut found = false;
        'outer: for k in 0..space.leaves().len() {
            for s in 0..p1.len() {
                if let Err(e) = space.coord(0, s, k) {
                    assert!(matches!(e, XiError::NotRelevant { player: 0, .. }));
                    found = true;
                    break 'outer;
                }
            }
        }
        assert!(found);
    }

    #[test]
    fn rejects_chance_and_player_count() {
        let clauses = generators::parse_clauses("!x;x|y;x|!y").unwrap();
        let g = generators::sat_game(&clauses).unwrap();
        assert_eq!(CompactGame::new(g).unwrap_err(), XiError::Chance);
    }
}
