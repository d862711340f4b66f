//! Brute-force normal-form oracle: an LP over joint distributions μ on
//! reduced-plan profiles, with one incentive row per trigger and pure
//! deviation. Works for any number of players and with chance.

use serde::Serialize;
use thiserror::Error;

use crate::equilibrium::{triggers, Concept, Trigger};
use crate::game::GameTree;
use crate::lp::{self, Direction, LinearProgram, LpError, LpStatus, Sense, SolveOptions};
use crate::plans::{correlation_from_joint, enumerate_plans, PlanError, PlanSet, DEFAULT_PLAN_CAP};
use crate::sequence::{build_sequences, RelevantPairSet, SeqId, SequenceError, SequenceFormIndex, EMPTY_SEQ};
use crate::CorrelationPlan;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Plans(#[from] PlanError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("{count} plan profiles exceed the oracle cap of {cap}")]
    TooManyProfiles { count: f64, cap: usize },
    #[error("objective has {got} weights for {players} players")]
    Weights { got: usize, players: usize },
}

#[derive(Clone, Debug)]
pub struct OracleOptions {
    pub plan_cap: usize,
    pub profile_cap: usize,
    pub lp: SolveOptions,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            plan_cap: DEFAULT_PLAN_CAP,
            profile_cap: 50_000,
            lp: SolveOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleSolution {
    pub concept: Concept,
    pub status: LpStatus,
    /// Optimal `Σ_i weight_i · u_i`.
    pub value: f64,
    /// Expected utility of each player under μ.
    pub utilities: Vec<f64>,
    /// Joint distribution over profiles, row-major with player 1 slowest.
    pub mu: Vec<f64>,
    #[serde(skip)]
    pub plans: Vec<PlanSet>,
    pub lp_rows: usize,
    pub lp_cols: usize,
}

impl OracleSolution {
    /// ξ of the witness distribution (two-player games).
    pub fn correlation_plan(&self, pairs: &RelevantPairSet) -> Result<CorrelationPlan, PlanError> {
        let mut mu: Vec<f64> = self.mu.iter().map(|v| v.max(0.0)).collect();
        let s: f64 = mu.iter().sum();
        mu.iter_mut().for_each(|v| *v /= s);
        correlation_from_joint(pairs, [&self.plans[0], &self.plans[1]], &mu)
    }
}

struct LeafData {
    chance: f64,
    seqs: Vec<SeqId>,
    payoffs: Vec<f64>,
}

struct Profiles {
    sizes: Vec<usize>,
    count: usize,
}

impl Profiles {
    fn decode(&self, mut p: usize, out: &mut [usize]) {
        for j in (0..self.sizes.len()).rev() {
            out[j] = p % self.sizes[j];
            p /= self.sizes[j];
        }
    }
}

/// Player `i`'s scope for a trigger: the deviation leaves and the sequence a
/// recommended plan must reach for the trigger to fire.
fn trigger_scope(index: &SequenceFormIndex, leaves: &[LeafData], t: Trigger) -> (Vec<usize>, SeqId, Option<SeqId>) {
    let i = t.player();
    let ps = index.player(i);
    let through = |k: usize| -> Vec<usize> {
        (0..leaves.len())
            .filter(|&z| ps.chain(leaves[z].seqs[i]).any(|s| ps.infoset_of_seq(s) == Some(k)))
            .collect()
    };
    match t {
        Trigger::Player { .. } => ((0..leaves.len()).collect(), EMPTY_SEQ, None),
        Trigger::Infoset { infoset, .. } => {
            let p = ps.parent_seq(infoset);
            (through(infoset), p, Some(p))
        }
        Trigger::Sequence { seq, .. } => {
            let k = ps.infoset_of_seq(seq).expect("pair sequence");
            (through(k), seq, Some(ps.parent_seq(k)))
        }
    }
}

/// Maximizes `Σ_i weights_i·u_i` over joint plan distributions that
/// satisfy every trigger's incentive constraint against every pure
/// deviation.
pub fn oracle_optimum(
    game: &GameTree,
    concept: Concept,
    weights: &[f64],
    options: &OracleOptions,
) -> Result<OracleSolution, OracleError> {
    let n = game.num_players();
    if weights.len() != n {
        return Err(OracleError::Weights {
            got: weights.len(),
            players: n,
        });
    }
    let index = build_sequences(game)?;
    let plans: Vec<PlanSet> = (0..n)
        .map(|i| enumerate_plans(&index, i, options.plan_cap))
        .collect::<Result<_, _>>()?;
    let sizes: Vec<usize> = plans.iter().map(|p| p.len()).collect();
    let count_f: f64 = sizes.iter().map(|&s| s as f64).product();
    if count_f > options.profile_cap as f64 {
        return Err(OracleError::TooManyProfiles {
            count: count_f,
            cap: options.profile_cap,
        });
    }
    let profiles = Profiles {
        count: count_f as usize,
        sizes,
    };

    let leaves: Vec<LeafData> = game
        .leaves()
        .iter()
        .map(|&z| LeafData {
            chance: game.chance_reach(z),
            seqs: (0..n).map(|i| index.node_seq(z, i)).collect(),
            payoffs: game.payoffs(z).expect("leaf").to_vec(),
        })
        .collect();
    let nz = leaves.len();
    // reach[j][plan * nz + z]: plan of player j plays toward leaf z.
    let reach: Vec<Vec<bool>> = (0..n)
        .map(|j| {
            let mut r = vec![false; plans[j].len() * nz];
            for k in 0..plans[j].len() {
                for (z, leaf) in leaves.iter().enumerate() {
                    r[k * nz + z] = plans[j].reaches(&index, k, leaf.seqs[j]);
                }
            }
            r
        })
        .collect();

    let mut lp = LinearProgram::new(Direction::Maximize);
    let mut digits = vec![0usize; n];
    for p in 0..profiles.count {
        profiles.decode(p, &mut digits);
        let mut obj = 0.0;
        for (z, leaf) in leaves.iter().enumerate() {
            if (0..n).all(|j| reach[j][digits[j] * nz + z]) {
                obj += leaf.chance * leaf.payoffs.iter().zip(weights).map(|(u, w)| u * w).sum::<f64>();
            }
        }
        lp.add_var(format!("mu[{p}]"), 0.0, f64::INFINITY, obj);
    }
    lp.add_row("simplex", (0..profiles.count).map(|p| (p, 1.0)), Sense::Eq, 1.0)?;

    for t in triggers(&index, concept) {
        let i = t.player();
        let (scope, event, anchor) = trigger_scope(&index, &leaves, t);
        // Pure deviations, deduplicated by the scope leaves they reach.
        let mut devs: Vec<Vec<bool>> = Vec::new();
        for k in 0..plans[i].len() {
            if let Some(a) = anchor {
                if !plans[i].reaches(&index, k, a) {
                    continue;
                }
            }
            let sig: Vec<bool> = scope.iter().map(|&z| reach[i][k * nz + z]).collect();
            if !devs.contains(&sig) {
                devs.push(sig);
            }
        }
        for (d, sig) in devs.iter().enumerate() {
            let mut terms = Vec::new();
            for p in 0..profiles.count {
                profiles.decode(p, &mut digits);
                if !plans[i].reaches(&index, digits[i], event) {
                    continue;
                }
                let mut coef = 0.0;
                for (pos, &z) in scope.iter().enumerate() {
                    let leaf = &leaves[z];
                    let u = leaf.payoffs[i];
                    if u == 0.0 || !(0..n).all(|j| j == i || reach[j][digits[j] * nz + z]) {
                        continue;
                    }
                    let follow = reach[i][digits[i] * nz + z] as u8 as f64;
                    let dev = sig[pos] as u8 as f64;
                    coef += leaf.chance * u * (follow - dev);
                }
                if coef != 0.0 {
                    terms.push((p, coef));
                }
            }
            if !terms.is_empty() {
                lp.add_row(format!("inc[{}][{d}]", t.label()), terms, Sense::Ge, 0.0)?;
            }
        }
    }

    let sol = lp::solve(&lp, &options.lp)?;
    let mut utilities = vec![0.0; n];
    if sol.status == LpStatus::Optimal {
        for (p, &m) in sol.primal.iter().enumerate() {
            if m <= 0.0 {
                continue;
            }
            profiles.decode(p, &mut digits);
            for (z, leaf) in leaves.iter().enumerate() {
                if (0..n).all(|j| reach[j][digits[j] * nz + z]) {
                    for (u, p) in utilities.iter_mut().zip(&leaf.payoffs) {
                        *u += m * leaf.chance * p;
                    }
                }
            }
        }
    }
    Ok(OracleSolution {
        concept,
        status: sol.status,
        value: sol.objective,
        utilities,
        mu: sol.primal,
        plans,
        lp_rows: lp.num_rows(),
        lp_cols: lp.num_vars(),
    })
}
