//! Incentive blocks, the equilibrium LPs for NFCCE, EFCCE and EFCE, the
//! deviation LPs and the welfare objective.
//!
//! Every trigger `t` of player `i` contributes an inequality
//! `max_y ξᵀA_t y ≤ b_tᵀξ`, where `y` ranges over player `i`'s sequence-form
//! strategies restricted to the trigger's subtree and normalized at
//! `norm(t)`. The inner maximum is replaced by its LP dual: a free scalar
//! `w_t` for the normalization row and one free `v_{t,J}` per infoset `J`
//! of the subtree.

use std::collections::HashMap;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correlation::{CompactGame, CorrelationPlan, XiError};
use crate::exec::Execution;
use crate::lp::{self, Direction, LinearProgram, LpError, LpStatus, Sense, SolveOptions};
use crate::sequence::{SeqId, SequenceFormIndex, EMPTY_SEQ};
use crate::verify;

#[derive(Debug, Error, PartialEq)]
pub enum EquilibriumError {
    #[error(transparent)]
    Xi(#[from] XiError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("trigger {trigger} does not belong to concept {concept}")]
    TriggerMismatch { trigger: String, concept: Concept },
    #[error("trigger {0} does not exist in this game")]
    UnknownTrigger(String),
    #[error("LP not solved to optimality: {0}")]
    NotOptimal(LpStatus),
    #[error("unknown concept '{0}' (expected nfcce, efcce or efce)")]
    UnknownConcept(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Concept {
    Nfcce,
    Efcce,
    Efce,
}

impl Concept {
    pub const ALL: [Concept; 3] = [Concept::Nfcce, Concept::Efcce, Concept::Efce];
}

impl std::fmt::Display for Concept {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Concept::Nfcce => "nfcce",
            Concept::Efcce => "efcce",
            Concept::Efce => "efce",
        })
    }
}

impl FromStr for Concept {
    type Err = EquilibriumError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nfcce" => Ok(Concept::Nfcce),
            "efcce" => Ok(Concept::Efcce),
            "efce" => Ok(Concept::Efce),
            _ => Err(EquilibriumError::UnknownConcept(s.to_string())),
        }
    }
}

/// Who deviates, and from where. Infosets are local to the player's
/// sequence numbering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trigger {
    Player { player: usize },
    Infoset { player: usize, infoset: usize },
    Sequence { player: usize, seq: SeqId },
}

impl Trigger {
    pub fn player(&self) -> usize {
        match *self {
            Trigger::Player { player } | Trigger::Infoset { player, .. } | Trigger::Sequence { player, .. } => player,
        }
    }

    pub fn concept(&self) -> Concept {
        match self {
            Trigger::Player { .. } => Concept::Nfcce,
            Trigger::Infoset { .. } => Concept::Efcce,
            Trigger::Sequence { .. } => Concept::Efce,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Trigger::Player { player } => format!("p{}", player + 1),
            Trigger::Infoset { player, infoset } => format!("p{}/J{infoset}", player + 1),
            Trigger::Sequence { player, seq } => format!("p{}/s{seq}", player + 1),
        }
    }
}

/// All triggers of `concept`, player by player.
pub fn triggers(index: &SequenceFormIndex, concept: Concept) -> Vec<Trigger> {
    let mut out = Vec::new();
    for player in 0..index.num_players() {
        let ps = index.player(player);
        match concept {
            Concept::Nfcce => out.push(Trigger::Player { player }),
            Concept::Efcce => out.extend((0..ps.num_infosets()).map(|infoset| Trigger::Infoset { player, infoset })),
            Concept::Efce => out.extend((1..ps.len()).map(|seq| Trigger::Sequence { player, seq })),
        }
    }
    out
}

/// Leaves and deviation polytope of one trigger.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviationScope {
    pub trigger: Trigger,
    /// Sequence the deviation strategy is normalized at.
    pub norm: SeqId,
    /// Sequence substituted into ξ on the deviation side.
    pub anchor: SeqId,
    /// Infosets directly below `norm` that the deviation controls.
    pub tops: Vec<usize>,
    /// `tops` and every infoset below them, parents first.
    pub infosets: Vec<usize>,
    /// `norm` followed by the action sequences of `infosets`.
    pub sequences: Vec<SeqId>,
    /// Leaves the deviation side sums over (`Z`, or `Z_Î`).
    pub deviation_leaves: Vec<usize>,
    /// Leaves the followed side sums over (`Z`, `Z_Î`, or `Z_σ̂`).
    pub followed_leaves: Vec<usize>,
}

impl DeviationScope {
    /// Position of each scope sequence in `sequences`.
    pub fn sequence_positions(&self) -> HashMap<SeqId, usize> {
        self.sequences.iter().enumerate().map(|(p, &s)| (s, p)).collect()
    }
}

fn check_trigger(index: &SequenceFormIndex, t: &Trigger) -> Result<(), EquilibriumError> {
    let ok = match *t {
        Trigger::Player { player } => player < index.num_players(),
        Trigger::Infoset { player, infoset } => {
            player < index.num_players() && infoset < index.player(player).num_infosets()
        }
        Trigger::Sequence { player, seq } => {
            player < index.num_players() && seq != EMPTY_SEQ && seq < index.player(player).len()
        }
    };
    if ok {
        Ok(())
    } else {
        Err(EquilibriumError::UnknownTrigger(t.label()))
    }
}

pub fn deviation_block_scope(space: &CompactGame, trigger: Trigger) -> Result<DeviationScope, EquilibriumError> {
    let index = space.index();
    check_trigger(index, &trigger)?;
    let i = trigger.player();
    let ps = index.player(i);
    let (norm, anchor, tops, dev, fol) = match trigger {
        Trigger::Player { .. } => {
            let all: Vec<usize> = (0..space.leaves().len()).collect();
            (
                EMPTY_SEQ,
                EMPTY_SEQ,
                ps.child_infosets(EMPTY_SEQ).to_vec(),
                all.clone(),
                all,
            )
        }
        Trigger::Infoset { infoset, .. } => {
            let z = space.leaves_through(i, infoset);
            let p = ps.parent_seq(infoset);
            (p, p, vec![infoset], z.clone(), z)
        }
        Trigger::Sequence { seq, .. } => {
            let k = ps.infoset_of_seq(seq).expect("pair sequence");
            let z = space.leaves_through(i, k);
            let fol = space.leaves_under(i, seq).to_vec();
            (ps.parent_seq(k), seq, vec![k], z, fol)
        }
    };
    let infosets = ps.subtree_infosets(&tops);
    let mut sequences = vec![norm];
    for &k in &infosets {
        sequences.extend(ps.action_seqs(k));
    }
    Ok(DeviationScope {
        trigger,
        norm,
        anchor,
        tops,
        infosets,
        sequences,
        deviation_leaves: dev,
        followed_leaves: fol,
    })
}

/// Sparse `(A, b)` of one trigger: `ξᵀA y − bᵀξ ≤ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct IncentiveBlock {
    pub scope: DeviationScope,
    /// `(ξ coordinate, sequence, coefficient)`, merged and sorted.
    pub a: Vec<(usize, SeqId, f64)>,
    /// `(ξ coordinate, coefficient)`, merged and sorted.
    pub b: Vec<(usize, f64)>,
}

impl IncentiveBlock {
    pub fn trigger(&self) -> Trigger {
        self.scope.trigger
    }

    /// `bᵀξ`.
    pub fn followed(&self, xi: &[f64]) -> f64 {
        self.b.iter().map(|(k, c)| c * xi[*k]).sum()
    }

    /// `(Aᵀξ)_s` for every sequence `s` in the scope, in scope order.
    pub fn deviation_coefficients(&self, xi: &[f64]) -> Vec<(SeqId, f64)> {
        let mut out: Vec<(SeqId, f64)> = self.scope.sequences.iter().map(|&s| (s, 0.0)).collect();
        let pos = self.scope.sequence_positions();
        for &(k, s, c) in &self.a {
            out[pos[&s]].1 += c * xi[k];
        }
        out
    }

    /// `ξᵀA y` for a strategy `y` indexed by sequence.
    pub fn deviation_value(&self, xi: &[f64], y: &[f64]) -> f64 {
        self.a.iter().map(|&(k, s, c)| c * xi[k] * y[s]).sum()
    }
}

fn merge<K: Ord + Copy>(mut items: Vec<(K, f64)>) -> Vec<(K, f64)> {
    items.sort_by_key(|x| x.0);
    let mut out: Vec<(K, f64)> = Vec::with_capacity(items.len());
    for (k, c) in items {
        match out.last_mut() {
            Some(last) if last.0 == k => last.1 += c,
            _ => out.push((k, c)),
        }
    }
    out.retain(|(_, c)| *c != 0.0);
    out
}

pub fn incentive_block(
    space: &CompactGame,
    concept: Concept,
    trigger: Trigger,
) -> Result<IncentiveBlock, EquilibriumError> {
    if trigger.concept() != concept {
        return Err(EquilibriumError::TriggerMismatch {
            trigger: trigger.label(),
            concept,
        });
    }
    let scope = deviation_block_scope(space, trigger)?;
    let i = trigger.player();
    let leaves = space.leaves();
    let mut a = Vec::with_capacity(scope.deviation_leaves.len());
    for &k in &scope.deviation_leaves {
        let u = leaves[k].payoffs[i];
        if u != 0.0 {
            a.push(((space.coord(i, scope.anchor, k)?, leaves[k].seqs[i]), u));
        }
    }
    let b = scope
        .followed_leaves
        .iter()
        .filter(|&&k| leaves[k].payoffs[i] != 0.0)
        .map(|&k| (leaves[k].own, leaves[k].payoffs[i]))
        .collect();
    Ok(IncentiveBlock {
        scope,
        a: merge(a).into_iter().map(|((k, s), c)| (k, s, c)).collect(),
        b: merge(b),
    })
}

/// All blocks of a concept, built with `exec`.
pub fn incentive_blocks(
    space: &CompactGame,
    concept: Concept,
    exec: Execution,
) -> Result<Vec<IncentiveBlock>, EquilibriumError> {
    let ts = triggers(space.index(), concept);
    exec.map(&ts, |&t| incentive_block(space, concept, t))
        .into_iter()
        .collect()
}

/// Player `i`'s followed utility as a vector over ξ: `u_i(z)` at
/// `ξ(σ_1(z), σ_2(z))`.
pub fn utility_vector(space: &CompactGame, i: usize) -> Vec<f64> {
    let mut c = vec![0.0; space.dim()];
    for leaf in space.leaves() {
        c[leaf.own] += leaf.payoffs[i];
    }
    c
}

/// Social welfare `c`: `Σ_i u_i(z)` at `ξ(σ_1(z), σ_2(z))`.
pub fn welfare_vector(space: &CompactGame) -> Vec<f64> {
    let mut c = vec![0.0; space.dim()];
    for leaf in space.leaves() {
        c[leaf.own] += leaf.payoffs[0] + leaf.payoffs[1];
    }
    c
}

/// What the equilibrium LP maximizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Welfare,
    /// `dx·u_1 + dy·u_2`.
    Direction {
        dx: f64,
        dy: f64,
    },
    /// Arbitrary vector over ξ coordinates.
    Linear(Vec<f64>),
}

impl Objective {
    pub fn vector(&self, space: &CompactGame) -> Vec<f64> {
        match self {
            Objective::Welfare => welfare_vector(space),
            Objective::Direction { dx, dy } => {
                let u1 = utility_vector(space, 0);
                let u2 = utility_vector(space, 1);
                u1.iter().zip(&u2).map(|(a, b)| dx * a + dy * b).collect()
            }
            Objective::Linear(c) => c.clone(),
        }
    }
}

/// Dual-variable layout of one trigger inside an LP.
#[derive(Clone, Debug)]
pub struct TriggerVars {
    pub w: usize,
    /// `v` per scope infoset, same order as `scope.infosets`.
    pub v: Vec<usize>,
}

/// Adds `w_t` and `v_{t,J}` and returns, for each scope sequence, the terms
/// of `(G_tᵀλ)_s`.
fn add_dual_block(
    lp: &mut LinearProgram,
    index: &SequenceFormIndex,
    block: &IncentiveBlock,
) -> (TriggerVars, Vec<Vec<(usize, f64)>>) {
    let scope = &block.scope;
    let inf = f64::INFINITY;
    let tag = scope.trigger.label();
    let w = lp.add_var(format!("w[{tag}]"), -inf, inf, 0.0);
    let v: Vec<usize> = scope
        .infosets
        .iter()
        .map(|k| lp.add_var(format!("v[{tag},J{k}]"), -inf, inf, 0.0))
        .collect();
    let ps = index.player(scope.trigger.player());
    let at: HashMap<usize, usize> = scope.infosets.iter().enumerate().map(|(p, &k)| (k, p)).collect();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); scope.sequences.len()];
    cols[0].push((w, 1.0));
    for k in &scope.tops {
        cols[0].push((v[at[k]], -1.0));
    }
    // Sequences after `norm` are the infosets' actions in scope order.
    let mut row = 1;
    for (pos, &k) in scope.infosets.iter().enumerate() {
        for s in ps.action_seqs(k) {
            cols[row].push((v[pos], 1.0));
            for child in ps.child_infosets(s) {
                cols[row].push((v[at[child]], -1.0));
            }
            row += 1;
        }
    }
    (TriggerVars { w, v }, cols)
}

/// A built equilibrium LP and its variable layout.
#[derive(Clone, Debug)]
pub struct EquilibriumLp {
    pub concept: Concept,
    pub lp: LinearProgram,
    /// ξ occupies variables `0..dim`.
    pub dim: usize,
    pub u: usize,
    pub triggers: Vec<Trigger>,
    pub vars: Vec<TriggerVars>,
}

pub fn build_lp(space: &CompactGame, concept: Concept, objective: &[f64]) -> Result<EquilibriumLp, EquilibriumError> {
    build_lp_with(space, concept, objective, Execution::default())
}

/// `max cᵀξ` over ξ ∈ Ξ subject to every trigger's dualized incentive
/// constraint.
pub fn build_lp_with(
    space: &CompactGame,
    concept: Concept,
    objective: &[f64],
    exec: Execution,
) -> Result<EquilibriumLp, EquilibriumError> {
    space.check_dim(objective)?;
    let blocks = incentive_blocks(space, concept, exec)?;
    let mut lp = LinearProgram::new(Direction::Maximize);
    let dim = space.dim();
    for (k, &c) in objective.iter().enumerate() {
        let (s1, s2) = space.pairs().pair(k);
        lp.add_var(format!("xi[{s1},{s2}]"), 0.0, f64::INFINITY, c);
    }
    let u = lp.add_var("u", f64::NEG_INFINITY, 0.0, 0.0);
    for (r, row) in space.xi_system().rows.iter().enumerate() {
        lp.add_row(format!("xi{r}"), row.terms.iter().copied(), Sense::Eq, row.rhs)?;
    }
    let mut vars = Vec::with_capacity(blocks.len());
    for block in &blocks {
        let tag = block.trigger().label();
        let (tv, cols) = add_dual_block(&mut lp, space.index(), block);
        // u − w_t + b_tᵀξ ≥ 0
        let mut terms = vec![(u, 1.0), (tv.w, -1.0)];
        terms.extend(block.b.iter().copied());
        lp.add_row(format!("inc[{tag}]"), terms, Sense::Ge, 0.0)?;
        // (G_tᵀλ)_s − (A_tᵀξ)_s ≥ 0
        let mut a_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); cols.len()];
        let pos = block.scope.sequence_positions();
        for &(k, s, c) in &block.a {
            a_cols[pos[&s]].push((k, -c));
        }
        for ((s, g), a) in block.scope.sequences.iter().zip(cols).zip(a_cols) {
            lp.add_row(format!("dev[{tag},s{s}]"), g.into_iter().chain(a), Sense::Ge, 0.0)?;
        }
        vars.push(tv);
    }
    Ok(EquilibriumLp {
        concept,
        lp,
        dim,
        u,
        triggers: blocks.iter().map(|b| b.trigger()).collect(),
        vars,
    })
}

/// Appends `cᵀξ ≥ τ` with `c` the social welfare.
pub fn add_welfare_floor(elp: &mut EquilibriumLp, space: &CompactGame, tau: f64) -> Result<(), EquilibriumError> {
    let c = welfare_vector(space);
    let terms: Vec<(usize, f64)> = c.into_iter().enumerate().filter(|(_, v)| *v != 0.0).collect();
    elp.lp.add_row("welfare-floor", terms, Sense::Ge, tau)?;
    Ok(())
}

/// `min u` with ξ fixed: the optimum is the largest deviation benefit
/// `max_t (max_y ξᵀA_t y − b_tᵀξ)` over all triggers of `concept`.
pub fn build_deviation_lp(
    space: &CompactGame,
    xi: &[f64],
    concept: Concept,
) -> Result<LinearProgram, EquilibriumError> {
    space.check_dim(xi)?;
    let blocks = incentive_blocks(space, concept, Execution::default())?;
    let mut lp = LinearProgram::new(Direction::Minimize);
    let u = lp.add_var("u", f64::NEG_INFINITY, f64::INFINITY, 1.0);
    for block in &blocks {
        let tag = block.trigger().label();
        let (tv, cols) = add_dual_block(&mut lp, space.index(), block);
        lp.add_row(
            format!("inc[{tag}]"),
            [(u, 1.0), (tv.w, -1.0)],
            Sense::Ge,
            -block.followed(xi),
        )?;
        add_fixed_rows(&mut lp, &tag, block, xi, cols)?;
    }
    Ok(lp)
}

/// `min w` subject to `G_tᵀλ ≥ A_tᵀξ`: the optimum is the trigger's best
/// deviation value `max_y ξᵀA_t y`.
pub fn build_trigger_deviation_lp(
    space: &CompactGame,
    xi: &[f64],
    block: &IncentiveBlock,
) -> Result<LinearProgram, EquilibriumError> {
    space.check_dim(xi)?;
    let mut lp = LinearProgram::new(Direction::Minimize);
    let tag = block.trigger().label();
    let (tv, cols) = add_dual_block(&mut lp, space.index(), block);
    lp.set_objective(tv.w, 1.0);
    add_fixed_rows(&mut lp, &tag, block, xi, cols)?;
    Ok(lp)
}

fn add_fixed_rows(
    lp: &mut LinearProgram,
    tag: &str,
    block: &IncentiveBlock,
    xi: &[f64],
    cols: Vec<Vec<(usize, f64)>>,
) -> Result<(), EquilibriumError> {
    for ((s, rhs), g) in block.deviation_coefficients(xi).into_iter().zip(cols) {
        lp.add_row(format!("dev[{tag},s{s}]"), g, Sense::Ge, rhs)?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub concept: Concept,
    pub status: LpStatus,
    /// Optimal value of the LP objective.
    pub objective: f64,
    pub welfare: f64,
    /// Followed utility of each player.
    pub utilities: [f64; 2],
    pub xi: CorrelationPlan,
    pub max_gap: f64,
    pub gaps: Vec<verify::TriggerReport>,
    pub lp_rows: usize,
    pub lp_cols: usize,
    pub backend: String,
    pub build_seconds: f64,
    pub solve_seconds: f64,
}

/// Builds and solves the LP for `concept`, optionally with a welfare floor,
/// and evaluates the per-trigger gaps of the optimum by dynamic programming.
pub fn solve_equilibrium(
    space: &CompactGame,
    concept: Concept,
    objective: &Objective,
    tau: Option<f64>,
    options: &SolveOptions,
) -> Result<EquilibriumSolution, EquilibriumError> {
    solve_equilibrium_with(space, concept, objective, tau, options, Execution::default())
}

pub fn solve_equilibrium_with(
    space: &CompactGame,
    concept: Concept,
    objective: &Objective,
    tau: Option<f64>,
    options: &SolveOptions,
    exec: Execution,
) -> Result<EquilibriumSolution, EquilibriumError> {
    let t0 = Instant::now();
    let mut elp = build_lp_with(space, concept, &objective.vector(space), exec)?;
    if let Some(tau) = tau {
        add_welfare_floor(&mut elp, space, tau)?;
    }
    let build_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let sol = lp::solve(&elp.lp, options)?;
    let solve_seconds = t1.elapsed().as_secs_f64();
    if sol.status != LpStatus::Optimal {
        return Err(EquilibriumError::NotOptimal(sol.status));
    }
    let xi = CorrelationPlan::new(sol.primal[..elp.dim].iter().map(|v| v.max(0.0)).collect());
    let report = verify::certify_with(space, &xi, concept, verify::VERIFY_TOL, exec)?;
    Ok(EquilibriumSolution {
        concept,
        status: sol.status,
        objective: sol.objective,
        welfare: dot(&welfare_vector(space), &xi),
        utilities: [
            verify::followed_value(space, &xi, 0),
            verify::followed_value(space, &xi, 1),
        ],
        max_gap: report.max_gap,
        gaps: report.triggers,
        xi,
        lp_rows: elp.lp.num_rows(),
        lp_cols: elp.lp.num_vars(),
        backend: sol.backend,
        build_seconds,
        solve_seconds,
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
