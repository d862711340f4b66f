//! Benchmark instances and run records.

use std::time::Instant;

use serde::Serialize;

use crate::correlation::CompactGame;
use crate::equilibrium::{build_lp_with, solve_equilibrium_with, welfare_vector, Concept, EquilibriumError, Objective};
use crate::exec::Execution;
use crate::game::{GameError, GameTree};
use crate::generators;
use crate::lp::SolveOptions;

/// A generated game with a stable name.
#[derive(Clone, Debug)]
pub struct Instance {
    pub game: String,
    pub params: String,
    pub tree: GameTree,
}

impl Instance {
    pub fn goofspiel(r: usize) -> Result<Self, GameError> {
        Ok(Instance {
            game: "goofspiel".into(),
            params: format!("r={r}"),
            tree: generators::goofspiel(r)?,
        })
    }

    pub fn sheriff(n: usize, b: usize, r: usize) -> Result<Self, GameError> {
        Ok(Instance {
            game: "sheriff".into(),
            params: format!("n={n} b={b} r={r}"),
            tree: generators::sheriff(n, b, r)?,
        })
    }

    pub fn battleship(w: usize, h: usize, r: usize) -> Result<Self, GameError> {
        Ok(Instance {
            game: "battleship".into(),
            params: format!("w={w} h={h} r={r}"),
            tree: generators::battleship(w, h, r)?,
        })
    }

    pub fn m2() -> Self {
        Instance {
            game: "m2".into(),
            params: String::new(),
            tree: generators::m2(),
        }
    }
}

/// Goofspiel r ∈ {2,3}; Sheriff with every parameter in {1,2};
/// Battleship 2×1 and 2×2 with r ∈ {1,2}.
pub fn bench_grid() -> Result<Vec<Instance>, GameError> {
    let mut out = vec![Instance::goofspiel(2)?, Instance::goofspiel(3)?];
    for n in 1..=2 {
        for b in 1..=2 {
            for r in 1..=2 {
                out.push(Instance::sheriff(n, b, r)?);
            }
        }
    }
    for h in 1..=2 {
        for r in 1..=2 {
            out.push(Instance::battleship(2, h, r)?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub game: String,
    pub params: String,
    pub concept: Concept,
    pub seq_pairs: usize,
    pub relevant_pairs: usize,
    pub lp_rows: usize,
    pub lp_cols: usize,
    pub wall_seconds: f64,
    pub status: String,
    pub sw: Option<f64>,
    pub max_gap: Option<f64>,
}

impl RunRecord {
    pub const CSV_HEADER: &'static str =
        "game,params,concept,seq_pairs,relevant_pairs,lp_rows,lp_cols,wall_seconds,status,sw,max_gap";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.9}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{:.3},{},{},{}",
            self.game,
            self.params,
            self.concept,
            self.seq_pairs,
            self.relevant_pairs,
            self.lp_rows,
            self.lp_cols,
            self.wall_seconds,
            self.status,
            opt(self.sw),
            opt(self.max_gap.map(|g| g.max(0.0))),
        )
    }
}

/// Solves the welfare-maximizing equilibrium of one instance.
pub fn run_instance(
    inst: &Instance,
    space: &CompactGame,
    concept: Concept,
    options: &SolveOptions,
    exec: Execution,
) -> Result<RunRecord, EquilibriumError> {
    let t0 = Instant::now();
    let size = build_lp_with(space, concept, &welfare_vector(space), exec)?;
    let result = solve_equilibrium_with(space, concept, &Objective::Welfare, None, options, exec);
    let wall_seconds = t0.elapsed().as_secs_f64();
    let (status, sw, max_gap) = match result {
        Ok(sol) => (sol.status.to_string(), Some(sol.objective), Some(sol.max_gap)),
        Err(EquilibriumError::NotOptimal(s)) => (s.to_string(), None, None),
        Err(e) => return Err(e),
    };
    Ok(RunRecord {
        game: inst.game.clone(),
        params: inst.params.clone(),
        concept,
        seq_pairs: space.index().player(0).len() * space.index().player(1).len(),
        relevant_pairs: space.dim(),
        lp_rows: size.lp.num_rows(),
        lp_cols: size.lp.num_vars(),
        wall_seconds,
        status,
        sw,
        max_gap,
    })
}
