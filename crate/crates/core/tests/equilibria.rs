use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use corrsolve::equilibrium::{
    build_deviation_lp, build_lp, deviation_block_scope, incentive_block, incentive_blocks, triggers, welfare_vector,
    Trigger,
};
use corrsolve::lp::{self, LpStatus};
use corrsolve::plans::{enumerate_plans, DEFAULT_PLAN_CAP};
use corrsolve::verify::{
    best_deviation_value, certify, oracle_optimum, random_correlation_plan, OracleOptions, VERIFY_TOL,
};
use corrsolve::{
    generators, solve_equilibrium, CompactGame, Concept, EquilibriumError, Execution, GameTree, Objective, SolveOptions,
};

fn space(g: GameTree) -> CompactGame {
    CompactGame::new(g).unwrap()
}

fn sw(space: &CompactGame, c: Concept) -> f64 {
    solve_equilibrium(space, c, &Objective::Welfare, None, &SolveOptions::default())
        .unwrap()
        .objective
}

#[test]
fn m2_welfare_is_two() {
    let s = space(generators::m2());
    for c in Concept::ALL {
        let sol = solve_equilibrium(&s, c, &Objective::Welfare, None, &SolveOptions::default()).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-9, "{c}");
        assert!((sol.welfare - sol.objective).abs() < 1e-9);
        assert!(sol.max_gap <= VERIFY_TOL);
    }
}

#[test]
fn m2_lp_duals_price_the_normalization_row() {
    // Scaling ξ(∅,∅) scales the whole polytope, so the optimum moves by SW.
    let s = space(generators::m2());
    let elp = build_lp(&s, Concept::Nfcce, &welfare_vector(&s)).unwrap();
    let sol = lp::solve(&elp.lp, &SolveOptions::with_backend("bundled")).unwrap();
    let duals = sol.duals.unwrap();
    assert!((duals[0] - 2.0).abs() < 1e-9, "{duals:?}");
}

/// SW values derived by the compact LP and cross-checked by the oracle or
/// by the certification pass.
#[test]
fn derived_welfare_values() {
    let cases: [(GameTree, [f64; 3]); 5] = [
        (generators::goofspiel(2).unwrap(), [3.0, 3.0, 3.0]),
        (generators::sheriff(1, 1, 1).unwrap(), [5.0, 5.0, 5.0]),
        (
            generators::sheriff(2, 1, 1).unwrap(),
            [70.0 / 13.0, 235.0 / 93.0, 10.0 / 7.0],
        ),
        (generators::battleship(2, 1, 1).unwrap(), [0.0, -0.75, -0.75]),
        (generators::battleship(2, 1, 2).unwrap(), [-0.25, -1.0, -1.0]),
    ];
    for (g, want) in cases {
        let s = space(g);
        for (c, w) in Concept::ALL.into_iter().zip(want) {
            let v = sw(&s, c);
            assert!((v - w).abs() < 1e-7, "{c}: {v} vs {w}");
        }
    }
}

#[test]
fn sheriff_2_1_1_separates_all_three() {
    let s = space(generators::sheriff(2, 1, 1).unwrap());
    let v: Vec<f64> = Concept::ALL.iter().map(|&c| sw(&s, c)).collect();
    assert!(v[0] > v[1] + 1e-3 && v[1] > v[2] + 1e-3, "{v:?}");
}

#[test]
fn lp_matches_oracle_under_directions() {
    let g = generators::sheriff(1, 1, 1).unwrap();
    let s = space(g.clone());
    for (dx, dy) in [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.3), (0.6, -0.8)] {
        for c in Concept::ALL {
            let lp = solve_equilibrium(&s, c, &Objective::Direction { dx, dy }, None, &SolveOptions::default())
                .unwrap()
                .objective;
            let or = oracle_optimum(&g, c, &[dx, dy], &OracleOptions::default())
                .unwrap()
                .value;
            assert!((lp - or).abs() < 1e-6, "{c} ({dx},{dy}): {lp} vs {or}");
        }
    }
}

#[test]
fn oracle_witnesses_certify() {
    let g = generators::battleship(2, 1, 1).unwrap();
    let s = space(g.clone());
    for c in Concept::ALL {
        let sol = oracle_optimum(&g, c, &[1.0, 1.0], &OracleOptions::default()).unwrap();
        let xi = sol.correlation_plan(s.pairs()).unwrap();
        let r = certify(&s, &xi, c, 1e-6).unwrap();
        assert!(r.pass, "{c}: gap {} residual {}", r.max_gap, r.membership_residual);
    }
}

#[test]
fn welfare_floor_is_respected_and_infeasible_above_optimum() {
    let s = space(generators::sheriff(2, 1, 1).unwrap());
    let best = sw(&s, Concept::Efce);
    let sol = solve_equilibrium(
        &s,
        Concept::Efce,
        &Objective::Direction { dx: 1.0, dy: 0.0 },
        Some(best - 0.5),
        &SolveOptions::default(),
    )
    .unwrap();
    assert!(sol.welfare >= best - 0.5 - 1e-7);
    let err = solve_equilibrium(
        &s,
        Concept::Efce,
        &Objective::Welfare,
        Some(best + 0.1),
        &SolveOptions::default(),
    )
    .unwrap_err();
    assert_eq!(err, EquilibriumError::NotOptimal(LpStatus::Infeasible));
}

#[test]
fn scaling_payoffs_scales_welfare() {
    let g = generators::sheriff(1, 2, 1).unwrap();
    let text = corrsolve::save_game(&g);
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for node in v["nodes"].as_array_mut().unwrap() {
        if let Some(p) = node.get_mut("payoffs") {
            for x in p.as_array_mut().unwrap() {
                *x = serde_json::json!(3.0 * x.as_f64().unwrap() + 0.0);
            }
        }
    }
    let scaled = space(corrsolve::load_game(&v.to_string()).unwrap());
    let base = space(g);
    for c in Concept::ALL {
        assert!((sw(&scaled, c) - 3.0 * sw(&base, c)).abs() < 1e-6, "{c}");
    }
}

#[test]
fn triggers_per_concept() {
    let s = space(generators::goofspiel(3).unwrap());
    let idx = s.index();
    let infosets: usize = (0..2).map(|i| idx.player(i).num_infosets()).sum();
    let seqs: usize = (0..2).map(|i| idx.player(i).len() - 1).sum();
    assert_eq!(triggers(idx, Concept::Nfcce).len(), 2);
    assert_eq!(triggers(idx, Concept::Efcce).len(), infosets);
    assert_eq!(triggers(idx, Concept::Efce).len(), seqs);
}

#[test]
fn efce_blocks_agree_with_efcce_on_deviation_side() {
    // An EFCE trigger at (Î, a) deviates over the same subtree as the EFCCE
    // trigger at Î; only the anchor and the followed leaves differ.
    let s = space(generators::sheriff(1, 1, 2).unwrap());
    for i in 0..2 {
        let ps = s.index().player(i);
        for k in 0..ps.num_infosets() {
            let inf = deviation_block_scope(&s, Trigger::Infoset { player: i, infoset: k }).unwrap();
            for seq in ps.action_seqs(k) {
                let sq = deviation_block_scope(&s, Trigger::Sequence { player: i, seq }).unwrap();
                assert_eq!(sq.sequences, inf.sequences);
                assert_eq!(sq.deviation_leaves, inf.deviation_leaves);
                assert_eq!(sq.anchor, seq);
                assert!(sq.followed_leaves.iter().all(|z| inf.followed_leaves.contains(z)));
            }
        }
    }
}

#[test]
fn parallel_and_sequential_blocks_match() {
    let s = space(generators::sheriff(1, 2, 1).unwrap());
    for c in Concept::ALL {
        let a = incentive_blocks(&s, c, Execution::Sequential).unwrap();
        let b = incentive_blocks(&s, c, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn deviation_lp_equals_max_trigger_gap() {
    let s = space(generators::sheriff(1, 1, 1).unwrap());
    let plans = [0, 1].map(|i| enumerate_plans(s.index(), i, DEFAULT_PLAN_CAP).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let xi = random_correlation_plan(&s, [&plans[0], &plans[1]], rng.gen_range(1..8), &mut rng);
        for c in Concept::ALL {
            let want = triggers(s.index(), c)
                .into_iter()
                .map(|t| {
                    let b = incentive_block(&s, c, t).unwrap();
                    best_deviation_value(&s, &xi, c, t).unwrap() - b.followed(&xi)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let sol = lp::solve(&build_deviation_lp(&s, &xi, c).unwrap(), &SolveOptions::default()).unwrap();
            assert!((sol.objective - want).abs() < 1e-9, "{c}: {} vs {want}", sol.objective);
        }
    }
}

#[test]
fn backends_agree() {
    let s = space(generators::sheriff(1, 1, 1).unwrap());
    let mut names = vec!["bundled", "sparse"];
    if lp::backend_names().iter().any(|n| n == "highs") {
        names.push("highs");
    }
    for c in Concept::ALL {
        let elp = build_lp(&s, c, &welfare_vector(&s)).unwrap();
        let vals: Vec<f64> = names
            .iter()
            .map(|n| lp::solve(&elp.lp, &SolveOptions::with_backend(n)).unwrap().objective)
            .collect();
        for v in &vals {
            assert!((v - vals[0]).abs() < 1e-7, "{c}: {vals:?}");
        }
    }
}

#[test]
fn chance_games_are_rejected() {
    let g = generators::sat_game(&generators::parse_clauses("x;!x").unwrap()).unwrap();
    assert!(matches!(CompactGame::new(g), Err(corrsolve::XiError::Chance)));
}
