//! Independent checks of correlation plans: followed utilities, best
//! deviations by dynamic programming, certification, SW ordering across
//! concepts, payoff-region sampling and a brute-force normal-form oracle.

pub mod oracle;
pub mod region;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::correlation::{CompactGame, CorrelationPlan};
use crate::equilibrium::{
    incentive_block, solve_equilibrium_with, triggers, Concept, DeviationScope, EquilibriumError, Objective, Trigger,
};
use crate::exec::Execution;
use crate::lp::SolveOptions;
use crate::plans::{correlation_from_joint, PlanSet};
use crate::sequence::SeqId;

pub use oracle::{oracle_optimum, OracleError, OracleOptions, OracleSolution};
pub use region::{sample_payoff_region, PayoffRegionSample, RegionPoint};

/// Verification tolerance on gaps and Ξ residuals.
pub const VERIFY_TOL: f64 = 1e-6;

/// `Σ_z u_i(z)·ξ(σ_1(z), σ_2(z))`.
pub fn followed_value(space: &CompactGame, xi: &[f64], i: usize) -> f64 {
    space.leaves().iter().map(|leaf| leaf.payoffs[i] * xi[leaf.own]).sum()
}

/// Largest `ξᵀA_t y` over deviation strategies `y`, by a bottom-up pass over
/// the trigger's infoset subtree. No LP involved.
pub fn best_deviation_value(
    space: &CompactGame,
    xi: &[f64],
    concept: Concept,
    trigger: Trigger,
) -> Result<f64, EquilibriumError> {
    if trigger.concept() != concept {
        return Err(EquilibriumError::TriggerMismatch {
            trigger: trigger.label(),
            concept,
        });
    }
    space.check_dim(xi)?;
    let scope = crate::equilibrium::deviation_block_scope(space, trigger)?;
    dp_value(space, xi, &scope)
}

fn dp_value(space: &CompactGame, xi: &[f64], scope: &DeviationScope) -> Result<f64, EquilibriumError> {
    let i = scope.trigger.player();
    let ps = space.index().player(i);
    let mut weight = vec![0.0; ps.len()];
    for &k in &scope.deviation_leaves {
        let leaf = &space.leaves()[k];
        if leaf.payoffs[i] != 0.0 {
            weight[leaf.seqs[i]] += leaf.payoffs[i] * xi[space.coord(i, scope.anchor, k)?];
        }
    }
    // Children come after parents in `scope.infosets`, so a reverse sweep
    // sees every child infoset before its parent sequence.
    let mut value = weight;
    for &k in scope.infosets.iter().rev() {
        let best = ps.action_seqs(k).map(|s| value[s]).fold(f64::NEG_INFINITY, f64::max);
        let parent = ps.parent_seq(k);
        if parent != scope.norm || scope.tops.contains(&k) {
            value[parent] += best;
        }
    }
    Ok(value[scope.norm])
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TriggerReport {
    pub trigger: Trigger,
    pub label: String,
    pub followed: f64,
    pub deviation: f64,
    pub gap: f64,
}

pub fn trigger_report(
    space: &CompactGame,
    xi: &[f64],
    concept: Concept,
    trigger: Trigger,
) -> Result<TriggerReport, EquilibriumError> {
    let block = incentive_block(space, concept, trigger)?;
    let followed = block.followed(xi);
    let deviation = dp_value(space, xi, &block.scope)?;
    Ok(TriggerReport {
        trigger,
        label: trigger.label(),
        followed,
        deviation,
        gap: deviation - followed,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub concept: Concept,
    pub tolerance: f64,
    pub triggers: Vec<TriggerReport>,
    pub max_gap: f64,
    pub membership_residual: f64,
    /// Worst Ξ row or coordinate, when the residual is positive.
    pub worst_row: Option<String>,
    pub pass: bool,
}

pub fn certify(
    space: &CompactGame,
    xi: &[f64],
    concept: Concept,
    tol: f64,
) -> Result<VerificationReport, EquilibriumError> {
    certify_with(space, xi, concept, tol, Execution::default())
}

/// Evaluates every trigger's gap and Ξ membership.
pub fn certify_with(
    space: &CompactGame,
    xi: &[f64],
    concept: Concept,
    tol: f64,
    exec: Execution,
) -> Result<VerificationReport, EquilibriumError> {
    space.check_dim(xi)?;
    let ts = triggers(space.index(), concept);
    let reports: Vec<TriggerReport> = exec
        .map(&ts, |&t| trigger_report(space, xi, concept, t))
        .into_iter()
        .collect::<Result<_, _>>()?;
    let max_gap = reports.iter().map(|r| r.gap).fold(f64::NEG_INFINITY, f64::max);
    let membership_residual = space.membership(xi);
    let worst_row = space.xi_system().worst_violation(xi).map(|(r, _)| r);
    Ok(VerificationReport {
        concept,
        tolerance: tol,
        pass: max_gap <= tol && membership_residual <= tol,
        triggers: reports,
        max_gap,
        membership_residual,
        worst_row,
    })
}

/// Maximum SW per concept, in the order NFCCE, EFCCE, EFCE.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InclusionReport {
    pub nfcce: f64,
    pub efcce: f64,
    pub efce: f64,
    pub pass: bool,
}

pub fn inclusion_check(
    space: &CompactGame,
    options: &SolveOptions,
    exec: Execution,
) -> Result<InclusionReport, EquilibriumError> {
    let sw: Vec<f64> = exec
        .map(&Concept::ALL, |&c| {
            solve_equilibrium_with(space, c, &Objective::Welfare, None, options, Execution::Sequential)
                .map(|s| s.objective)
        })
        .into_iter()
        .collect::<Result<_, _>>()?;
    Ok(InclusionReport {
        nfcce: sw[0],
        efcce: sw[1],
        efce: sw[2],
        pass: sw[2] <= sw[1] + VERIFY_TOL && sw[1] <= sw[0] + VERIFY_TOL,
    })
}

/// ξ of a random joint distribution supported on `support` plan pairs.
pub fn random_correlation_plan<R: Rng>(
    space: &CompactGame,
    plans: [&PlanSet; 2],
    support: usize,
    rng: &mut R,
) -> CorrelationPlan {
    let (n1, n2) = (plans[0].len(), plans[1].len());
    let mut cells: Vec<usize> = (0..n1 * n2).collect();
    cells.shuffle(rng);
    cells.truncate(support.clamp(1, n1 * n2));
    let weights: Vec<f64> = cells.iter().map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut mu = vec![0.0; n1 * n2];
    for (c, w) in cells.iter().zip(&weights) {
        mu[*c] = w / total;
    }
    // Renormalize exactly enough for the distribution check.
    let s: f64 = mu.iter().sum();
    mu[cells[0]] += 1.0 - s;
    correlation_from_joint(space.pairs(), plans, &mu).expect("valid distribution")
}

/// The sequences a deviation in `scope` is defined on, for diagnostics.
pub fn scope_sequences(scope: &DeviationScope) -> &[SeqId] {
    &scope.sequences
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;

    fn m2() -> CompactGame {
        CompactGame::new(generators::m2()).unwrap()
    }

    fn diagonal(space: &CompactGame) -> Vec<f64> {
        let mut xi = vec![0.0; space.dim()];
        for (k, &(a, b)) in space.pairs().pairs().iter().enumerate() {
            xi[k] = match (a, b) {
                (0, 0) => 1.0,
                (0, _) | (_, 0) => 0.5,
                (a, b) if a == b => 0.5,
                _ => 0.0,
            };
        }
        xi
    }

    #[test]
    fn m2_followed_values() {
        let space = m2();
        let xi = diagonal(&space);
        assert_eq!(followed_value(&space, &xi, 0), 1.0);
        assert_eq!(followed_value(&space, &xi, 1), 1.0);
        let y = [1.0, 0.5, 0.5];
        let prod = space.product_plan(&y, &y);
        assert_eq!(followed_value(&space, &prod, 0), 0.5);
    }

    #[test]
    fn m2_diagonal_deviation() {
        let space = m2();
        let xi = diagonal(&space);
        let v = best_deviation_value(&space, &xi, Concept::Nfcce, Trigger::Player { player: 0 }).unwrap();
        assert_eq!(v, 0.5);
        for c in Concept::ALL {
            assert!(certify(&space, &xi, c, VERIFY_TOL).unwrap().pass, "{c}");
        }
    }

    /// Player 1 moves, player 2 moves without observing; `p[a][b]` are the
    /// leaf payoffs.
    fn two_by_two(p: [[(f64, f64); 2]; 2]) -> CompactGame {
        let leaf =
            |a: usize, b: usize, id: usize| format!(r#"{{"id": {id}, "payoffs": [{:?}, {:?}]}}"#, p[a][b].0, p[a][b].1);
        let text = format!(
            r#"{{"players": 2, "root": 0,
              "infosets": [
                {{"id": 0, "player": 1, "members": [0], "actions": ["H", "T"]}},
                {{"id": 1, "player": 2, "members": [1, 2], "actions": ["h", "t"]}}],
              "nodes": [
                {{"id": 0, "owner": 1, "infoset": 0, "actions": ["H", "T"], "children": [1, 2]}},
                {{"id": 1, "owner": 2, "infoset": 1, "actions": ["h", "t"], "children": [3, 4]}},
                {{"id": 2, "owner": 2, "infoset": 1, "actions": ["h", "t"], "children": [5, 6]}},
                {}, {}, {}, {}]}}"#,
            leaf(0, 0, 3),
            leaf(0, 1, 4),
            leaf(1, 0, 5),
            leaf(1, 1, 6)
        );
        CompactGame::new(crate::game::load_game(&text).unwrap()).unwrap()
    }

    #[test]
    fn pennies_product_is_an_equilibrium() {
        let space = two_by_two([[(1.0, -1.0), (-1.0, 1.0)], [(-1.0, 1.0), (1.0, -1.0)]]);
        let y = [1.0, 0.5, 0.5];
        let xi = space.product_plan(&y, &y);
        for c in Concept::ALL {
            let r = certify(&space, &xi, c, VERIFY_TOL).unwrap();
            assert!(r.pass, "{c}: {}", r.max_gap);
        }
    }

    #[test]
    fn zero_payoffs_follow_zero() {
        let space = two_by_two([[(0.0, 0.0); 2]; 2]);
        let xi = diagonal(&space);
        assert_eq!(followed_value(&space, &xi, 0), 0.0);
    }

    #[test]
    fn non_member_fails_certification() {
        let space = m2();
        let mut xi = diagonal(&space);
        xi[0] = 0.0;
        let r = certify(&space, &xi, Concept::Nfcce, VERIFY_TOL).unwrap();
        assert!(!r.pass);
        assert!(r.worst_row.unwrap().contains("Normalization"));
    }
}
