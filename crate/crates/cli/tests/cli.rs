use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_corrsolve"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn corrsolve")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn gen(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    let mut all = vec!["gen"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", path.to_str().unwrap()]);
    let o = run(&all);
    assert!(o.status.success(), "{}", stderr(&o));
    path
}

fn solve(game: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["solve", game.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn m2_solves_to_welfare_two_and_verifies() {
    let dir = TempDir::new().unwrap();
    let game = gen(dir.path(), "m2", &["m2"]);
    let sol = dir.path().join("sol.json");
    let o = solve(&game, &sol, &["--concept", "nfcce"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = read_json(&sol);
    assert!((v["objective"].as_f64().unwrap() - 2.0).abs() < 1e-9);

    let o = run(&["verify", game.to_str().unwrap(), sol.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("PASS"));
}

#[test]
fn tampered_solution_names_the_row() {
    let dir = TempDir::new().unwrap();
    let game = gen(dir.path(), "sheriff", &["sheriff"]);
    let sol = dir.path().join("sol.json");
    assert!(solve(&game, &sol, &["--concept", "efce"]).status.success());
    let mut v = read_json(&sol);
    v["xi"][0] = serde_json::json!(0.5);
    std::fs::write(&sol, v.to_string()).unwrap();
    let o = run(&["verify", game.to_str().unwrap(), sol.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("violated row: row 0 (Normalization)"), "{out}");
    assert!(out.contains("FAIL"));
}

#[test]
fn direction_objective_and_welfare_floor() {
    let dir = TempDir::new().unwrap();
    let game = gen(dir.path(), "sheriff", &["sheriff", "--n", "2"]);
    let sol = dir.path().join("sol.json");
    let o = solve(
        &game,
        &sol,
        &[
            "--concept",
            "efcce",
            "--objective",
            "dir",
            "--dx",
            "-1",
            "--dy",
            "0.5",
            "--tau",
            "1",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(read_json(&sol)["welfare"].as_f64().unwrap() >= 1.0 - 1e-7);

    let o = solve(&game, &sol, &["--concept", "efcce", "--objective", "dir", "--dx", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = solve(&game, &sol, &["--concept", "efcce", "--dx", "1", "--dy", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn infeasible_floor_is_not_optimal() {
    let dir = TempDir::new().unwrap();
    let game = gen(dir.path(), "m2", &["m2"]);
    let sol = dir.path().join("sol.json");
    let o = solve(&game, &sol, &["--concept", "efce", "--tau", "3"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn chance_game_points_to_the_oracle() {
    let dir = TempDir::new().unwrap();
    let game = gen(dir.path(), "sat", &["sat", "--clauses", "x;!x"]);
    let sol = dir.path().join("sol.json");
    let o = solve(&game, &sol, &["--concept", "nfcce"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("corrsolve oracle"), "{}", stderr(&o));

    let out = dir.path().join("oracle.json");
    let o = run(&[
        "oracle",
        game.to_str().unwrap(),
        "--concept",
        "nfcce",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(read_json(&out)["value"].as_f64().unwrap() < 1.5 + 1e-6);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["solve"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "x.json", "--concept", "ce"]).status.code(), Some(2));
    assert_eq!(
        run(&["solve", "/nonexistent.json", "--concept", "efce"]).status.code(),
        Some(2)
    );
}

#[test]
fn info_counts() {
    let dir = TempDir::new().unwrap();
    let game = gen(dir.path(), "goof", &["goofspiel", "--r", "3"]);
    let o = run(&["info", game.to_str().unwrap(), "--xi"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("sequence pairs: 484"), "{out}");
    assert!(out.contains("relevant pairs: 196"), "{out}");
}

#[test]
fn region_csv_is_seeded() {
    let dir = TempDir::new().unwrap();
    let game = gen(dir.path(), "m2", &["m2"]);
    let a = run(&["region", game.to_str().unwrap(), "--directions", "4", "--seed", "5"]);
    let b = run(&["region", game.to_str().unwrap(), "--directions", "4", "--seed", "5"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 1 + 3 * 4);
}

fn without_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|l| {
            let mut cols: Vec<&str> = l.split(',').collect();
            cols[7] = "";
            cols.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn bench_csv_is_stable_except_wall_time() {
    let dir = TempDir::new().unwrap();
    let paths = [dir.path().join("a.csv"), dir.path().join("b.csv")];
    for p in &paths {
        let o = run(&[
            "bench",
            "--game",
            "sheriff",
            "--n",
            "1",
            "--b",
            "2",
            "--r",
            "1",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let a = std::fs::read_to_string(&paths[0]).unwrap();
    let b = std::fs::read_to_string(&paths[1]).unwrap();
    assert_eq!(a.lines().count(), 4);
    assert!(a.starts_with("game,params,concept"));
    assert_eq!(without_wall_time(&a), without_wall_time(&b));
}

#[test]
fn dump_lp_round_trips() {
    let dir = TempDir::new().unwrap();
    let game = gen(dir.path(), "m2", &["m2"]);
    let lp = dir.path().join("m2.lp");
    let sol = dir.path().join("sol.json");
    let o = solve(&game, &sol, &["--concept", "efce", "--dump-lp", lp.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&lp).unwrap();
    let parsed = corrsolve::LinearProgram::from_text(&text).unwrap();
    assert_eq!(parsed.num_rows() as u64, read_json(&sol)["lp_rows"].as_u64().unwrap());
}

#[test]
fn backend_env_var_selects_solver() {
    let dir = TempDir::new().unwrap();
    let game = gen(dir.path(), "m2", &["m2"]);
    let sol = dir.path().join("sol.json");
    let o = bin()
        .args([
            "solve",
            game.to_str().unwrap(),
            "--concept",
            "efcce",
            "--out",
            sol.to_str().unwrap(),
        ])
        .env("CORRSOLVE_LP_BACKEND", "sparse")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_json(&sol)["backend"], "sparse");
    let o = bin()
        .args(["solve", game.to_str().unwrap(), "--concept", "efcce"])
        .env("CORRSOLVE_LP_BACKEND", "nope")
        .output()
        .unwrap();
    assert_ne!(o.status.code(), Some(0));
}
