//! Reduced-normal-form plans and the maps from plan distributions to
//! sequence-form strategies and correlation plans.

use thiserror::Error;

use crate::correlation::CorrelationPlan;
use crate::sequence::{RelevantPairSet, SeqId, SequenceFormIndex, EMPTY_SEQ};

/// Default cap on the number of plans enumerated per player.
pub const DEFAULT_PLAN_CAP: usize = 1_000_000;

/// Marks an infoset a plan does not reach.
pub const UNREACHED: u32 = u32::MAX;

/// Tolerance on the total mass of a distribution.
pub const DISTRIBUTION_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("player {player} has {count} reduced plans, too large for enumeration (cap {cap})")]
    TooLarge { player: usize, count: f64, cap: usize },
    #[error("sequence {seq} does not belong to player {player}")]
    ForeignSequence { player: usize, seq: SeqId },
    #[error("not a probability distribution: {0}")]
    NotDistribution(String),
}

/// A reduced plan: one action index per local infoset, or [`UNREACHED`].
pub type Plan = Vec<u32>;

#[derive(Clone, Debug)]
pub struct PlanSet {
    pub player: usize,
    plans: Vec<Plan>,
    /// Sequences each plan enables (including the empty sequence).
    enabled: Vec<Vec<SeqId>>,
}

impl PlanSet {
    pub fn len(&self) -> usize {
        self.plans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }

    pub fn plans(&self) -> &[Plan] {
        &self.plans
    }

    pub fn plan(&self, k: usize) -> &Plan {
        &self.plans[k]
    }

    /// Sequences played by plan `k`, ascending, starting with `∅`.
    pub fn enabled(&self, k: usize) -> &[SeqId] {
        &self.enabled[k]
    }

    /// `π_k ∈ Π_i(σ)`.
    pub fn reaches(&self, index: &SequenceFormIndex, k: usize, seq: SeqId) -> bool {
        let ps = index.player(self.player);
        match ps.infoset_of_seq(seq) {
            None => true,
            Some(info) => self.plans[k][info] == ps.action_of_seq(seq).expect("pair sequence") as u32,
        }
    }

    /// `Π_i(σ)` as plan indices.
    pub fn plans_reaching(&self, index: &SequenceFormIndex, seq: SeqId) -> Result<Vec<usize>, PlanError> {
        if seq >= index.player(self.player).len() {
            return Err(PlanError::ForeignSequence {
                player: self.player,
                seq,
            });
        }
        Ok((0..self.plans.len()).filter(|&k| self.reaches(index, k, seq)).collect())
    }
}

/// Number of reduced plans of `player`, from the recursive product/sum
/// formula over the infoset forest.
pub fn count_plans(index: &SequenceFormIndex, player: usize) -> f64 {
    let ps = index.player(player);
    fn count_seq(ps: &crate::sequence::PlayerSequences, s: SeqId) -> f64 {
        ps.child_infosets(s)
            .iter()
            .map(|&k| ps.action_seqs(k).map(|t| count_seq(ps, t)).sum::<f64>())
            .product()
    }
    count_seq(ps, EMPTY_SEQ)
}

/// Enumerates `Π_i`, refusing when the count exceeds `cap`.
pub fn enumerate_plans(index: &SequenceFormIndex, player: usize, cap: usize) -> Result<PlanSet, PlanError> {
    let count = count_plans(index, player);
    if count > cap as f64 {
        return Err(PlanError::TooLarge { player, count, cap });
    }
    let ps = index.player(player);
    let mut plans = vec![vec![UNREACHED; ps.num_infosets()]];
    extend_below(ps, EMPTY_SEQ, &mut plans);
    let enabled = plans
        .iter()
        .map(|plan| {
            let mut seqs = vec![EMPTY_SEQ];
            seqs.extend(
                plan.iter()
                    .enumerate()
                    .filter(|(_, &a)| a != UNREACHED)
                    .map(|(k, &a)| ps.seq_of(k, a as usize)),
            );
            seqs.sort_unstable();
            seqs
        })
        .collect();
    Ok(PlanSet { player, plans, enabled })
}

/// Takes partial plans that already play `s` and fills in every infoset
/// below it, multiplying out the choices.
fn extend_below(ps: &crate::sequence::PlayerSequences, s: SeqId, plans: &mut Vec<Plan>) {
    for &k in ps.child_infosets(s) {
        let mut next = Vec::new();
        for a in 0..ps.num_actions(k) {
            let mut branch: Vec<Plan> = plans
                .iter()
                .map(|p| {
                    let mut p = p.clone();
                    p[k] = a as u32;
                    p
                })
                .collect();
            extend_below(ps, ps.seq_of(k, a), &mut branch);
            next.extend(branch);
        }
        *plans = next;
    }
}

fn check_distribution(mu: &[f64], expected_len: usize) -> Result<(), PlanError> {
    if mu.len() != expected_len {
        return Err(PlanError::NotDistribution(format!(
            "expected {expected_len} entries, got {}",
            mu.len()
        )));
    }
    if let Some(v) = mu.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(PlanError::NotDistribution(format!("entry {v} is not a probability")));
    }
    let sum: f64 = mu.iter().sum();
    if (sum - 1.0).abs() > DISTRIBUTION_TOL {
        return Err(PlanError::NotDistribution(format!("mass sums to {sum}")));
    }
    Ok(())
}

/// `y(σ) = Σ_{π ∈ Π_i(σ)} μ(π)`.
pub fn strategy_from_distribution(
    index: &SequenceFormIndex,
    plans: &PlanSet,
    mu: &[f64],
) -> Result<Vec<f64>, PlanError> {
    check_distribution(mu, plans.len())?;
    let mut y = vec![0.0; index.player(plans.player).len()];
    for (k, &m) in mu.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        for &s in plans.enabled(k) {
            y[s] += m;
        }
    }
    Ok(y)
}

/// `ξ(σ_1, σ_2) = Σ μ(π_1, π_2)` over plan pairs reaching both sequences,
/// on relevant pairs only. `mu` is row-major over `Π_1 × Π_2`.
pub fn correlation_from_joint(
    pairs: &RelevantPairSet,
    plans: [&PlanSet; 2],
    mu: &[f64],
) -> Result<CorrelationPlan, PlanError> {
    let (n1, n2) = (plans[0].len(), plans[1].len());
    check_distribution(mu, n1 * n2)?;
    let mut xi = vec![0.0; pairs.len()];
    for p1 in 0..n1 {
        for p2 in 0..n2 {
            let m = mu[p1 * n2 + p2];
            if m == 0.0 {
                continue;
            }
            for &s1 in plans[0].enabled(p1) {
                for &s2 in plans[1].enabled(p2) {
                    if let Some(k) = pairs.index_of(s1, s2) {
                        xi[k] += m;
                    }
                }
            }
        }
    }
    Ok(CorrelationPlan::new(xi))
}
