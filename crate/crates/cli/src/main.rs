use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use corrsolve::equilibrium::{add_welfare_floor, build_lp};
use corrsolve::report::{bench_grid, run_instance, Instance, RunRecord};
use corrsolve::verify::region::directions;
use corrsolve::verify::{certify, oracle_optimum, sample_payoff_region, OracleOptions, PayoffRegionSample, VERIFY_TOL};
use corrsolve::{
    generators, load_game, save_game, CompactGame, Concept, EquilibriumError, EquilibriumSolution, Execution, GameTree,
    Objective, SolveOptions, XiError,
};

/// Optimal correlated and coarse-correlated equilibria of two-player
/// extensive-form games.
#[derive(Parser)]
#[command(name = "corrsolve", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a game file.
    Gen {
        #[command(subcommand)]
        game: GenGame,
    },
    /// Print sequence and relevant-pair counts.
    Info {
        game: PathBuf,
        /// Also print the size of the correlation-plan constraint system.
        #[arg(long)]
        xi: bool,
    },
    /// Solve for an optimal equilibrium and write it as JSON.
    Solve {
        game: PathBuf,
        #[arg(long, value_enum)]
        concept: ConceptArg,
        #[command(flatten)]
        objective: ObjectiveArgs,
        /// Require social welfare at least this value.
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the LP in text form before solving.
        #[arg(long)]
        dump_lp: Option<PathBuf>,
    },
    /// Check a solution file against a game.
    Verify {
        game: PathBuf,
        solution: PathBuf,
        /// Concept to certify (defaults to the solution's).
        #[arg(long, value_enum)]
        concept: Option<ConceptArg>,
    },
    /// Sample the equilibrium payoff region along unit directions (CSV).
    Region {
        game: PathBuf,
        /// Concept to sample (all three when omitted).
        #[arg(long, value_enum)]
        concept: Option<ConceptArg>,
        #[arg(long, default_value_t = 16)]
        directions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force normal-form LP over joint plan distributions.
    Oracle {
        game: PathBuf,
        #[arg(long, value_enum)]
        concept: ConceptArg,
        #[command(flatten)]
        objective: ObjectiveArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve benchmark instances for every concept (CSV of run records).
    Bench {
        #[arg(long, value_enum, default_value_t = BenchGame::All)]
        game: BenchGame,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        b: Option<usize>,
        #[arg(long)]
        w: Option<usize>,
        #[arg(long)]
        h: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GenGame {
    M2 {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Sheriff {
        /// Maximum number of illegal items.
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Maximum bribe.
        #[arg(long, default_value_t = 1)]
        b: usize,
        /// Bargaining rounds.
        #[arg(long, default_value_t = 1)]
        r: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Battleship {
        #[arg(long, default_value_t = 2)]
        w: usize,
        #[arg(long, default_value_t = 1)]
        h: usize,
        #[arg(long, default_value_t = 1)]
        r: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Goofspiel {
        /// Cards per deck.
        #[arg(long, default_value_t = 3)]
        r: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Sat {
        /// Clauses separated by `;`, literals by `|`, negation `!`,
        /// e.g. `!x;x|y;x|!y`.
        #[arg(long)]
        clauses: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ConceptArg {
    Nfcce,
    Efcce,
    Efce,
}

impl From<ConceptArg> for Concept {
    fn from(c: ConceptArg) -> Self {
        match c {
            ConceptArg::Nfcce => Concept::Nfcce,
            ConceptArg::Efcce => Concept::Efcce,
            ConceptArg::Efce => Concept::Efce,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ObjectiveKind {
    Welfare,
    Dir,
}

#[derive(Args)]
struct ObjectiveArgs {
    #[arg(long, value_enum, default_value_t = ObjectiveKind::Welfare)]
    objective: ObjectiveKind,
    /// Weight on player 1's utility for `--objective dir`.
    #[arg(long, allow_negative_numbers = true)]
    dx: Option<f64>,
    /// Weight on player 2's utility for `--objective dir`.
    #[arg(long, allow_negative_numbers = true)]
    dy: Option<f64>,
}

impl ObjectiveArgs {
    fn objective(&self) -> Result<Objective, Failure> {
        match self.objective {
            ObjectiveKind::Welfare => {
                if self.dx.is_some() || self.dy.is_some() {
                    return Err(Failure::usage("--dx/--dy require --objective dir"));
                }
                Ok(Objective::Welfare)
            }
            ObjectiveKind::Dir => match (self.dx, self.dy) {
                (Some(dx), Some(dy)) => Ok(Objective::Direction { dx, dy }),
                _ => Err(Failure::usage("--objective dir needs both --dx and --dy")),
            },
        }
    }

    fn weights(&self) -> Result<[f64; 2], Failure> {
        Ok(match self.objective()? {
            Objective::Direction { dx, dy } => [dx, dy],
            _ => [1.0, 1.0],
        })
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum BenchGame {
    All,
    Goofspiel,
    Sheriff,
    Battleship,
}

/// Error with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure {
            code: 2,
            error: anyhow::anyhow!(msg.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: 2, error }
    }
}

const EXIT_VERIFY_FAIL: u8 = 1;
const EXIT_NOT_OPTIMAL: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> Result<u8, Failure> {
    match cmd {
        Command::Gen { game } => cmd_gen(game),
        Command::Info { game, xi } => cmd_info(&game, xi),
        Command::Solve {
            game,
            concept,
            objective,
            tau,
            out,
            dump_lp,
        } => cmd_solve(
            &game,
            concept.into(),
            &objective,
            tau,
            out.as_deref(),
            dump_lp.as_deref(),
        ),
        Command::Verify {
            game,
            solution,
            concept,
        } => cmd_verify(&game, &solution, concept.map(Into::into)),
        Command::Region {
            game,
            concept,
            directions,
            seed,
            out,
        } => cmd_region(&game, concept.map(Into::into), directions, seed, out.as_deref()),
        Command::Oracle {
            game,
            concept,
            objective,
            out,
        } => cmd_oracle(&game, concept.into(), &objective, out.as_deref()),
        Command::Bench {
            game,
            r,
            n,
            b,
            w,
            h,
            out,
        } => cmd_bench(game, [r, n, b, w, h], out.as_deref()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn read_game(path: &Path) -> Result<GameTree> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    load_game(&text).with_context(|| format!("loading {}", path.display()))
}

fn compact(path: &Path) -> Result<CompactGame, Failure> {
    let game = read_game(path)?;
    CompactGame::new(game).map_err(|e| match e {
        XiError::Chance | XiError::NotTwoPlayers(_) => Failure::usage(format!(
            "{e}; the compact LP needs a two-player game without chance, use `corrsolve oracle` instead"
        )),
        other => Failure::from(anyhow::Error::new(other)),
    })
}

fn cmd_gen(game: GenGame) -> Result<u8, Failure> {
    let (tree, out) = match game {
        GenGame::M2 { out } => (generators::m2(), out),
        GenGame::Sheriff { n, b, r, out } => (generators::sheriff(n, b, r).context("sheriff")?, out),
        GenGame::Battleship { w, h, r, out } => (generators::battleship(w, h, r).context("battleship")?, out),
        GenGame::Goofspiel { r, out } => (generators::goofspiel(r).context("goofspiel")?, out),
        GenGame::Sat { clauses, out } => {
            let parsed = generators::parse_clauses(&clauses).context("parsing clauses")?;
            (generators::sat_game(&parsed).context("sat")?, out)
        }
    };
    emit(out.as_deref(), &save_game(&tree))?;
    Ok(0)
}

fn cmd_info(path: &Path, xi: bool) -> Result<u8, Failure> {
    let game = read_game(path)?;
    let index = corrsolve::build_sequences(&game).context("indexing sequences")?;
    let sizes: Vec<usize> = (0..index.num_players()).map(|i| index.player(i).len()).collect();
    println!("players: {}", game.num_players());
    println!("nodes: {}", game.nodes().len());
    println!("leaves: {}", game.leaves().len());
    println!("chance: {}", game.has_chance());
    for (i, s) in sizes.iter().enumerate() {
        println!("sequences p{}: {s}", i + 1);
    }
    println!("sequence pairs: {}", sizes.iter().product::<usize>());
    if game.num_players() == 2 {
        let pairs = corrsolve::relevant_pairs(&game, &index).context("relevant pairs")?;
        println!("relevant pairs: {}", pairs.len());
    }
    if xi {
        let space = compact(path)?;
        println!("xi variables: {}", space.dim());
        println!("xi rows: {}", space.xi_system().num_rows());
    }
    Ok(0)
}

fn cmd_solve(
    path: &Path,
    concept: Concept,
    objective: &ObjectiveArgs,
    tau: Option<f64>,
    out: Option<&Path>,
    dump_lp: Option<&Path>,
) -> Result<u8, Failure> {
    let objective = objective.objective()?;
    let space = compact(path)?;
    if let Some(p) = dump_lp {
        let mut elp = build_lp(&space, concept, &objective.vector(&space)).context("building LP")?;
        if let Some(tau) = tau {
            add_welfare_floor(&mut elp, &space, tau).context("welfare floor")?;
        }
        fs::write(p, elp.lp.to_text()).with_context(|| format!("writing {}", p.display()))?;
    }
    let options = SolveOptions::default();
    match corrsolve::solve_equilibrium(&space, concept, &objective, tau, &options) {
        Ok(sol) => {
            eprintln!(
                "{concept}: status {} objective {:.9} welfare {:.9} max gap {:.3e} ({} rows, {} cols, {})",
                sol.status, sol.objective, sol.welfare, sol.max_gap, sol.lp_rows, sol.lp_cols, sol.backend
            );
            let json = serde_json::to_string_pretty(&sol).context("serializing solution")?;
            emit(out, &(json + "\n"))?;
            Ok(0)
        }
        Err(EquilibriumError::NotOptimal(status)) => {
            eprintln!("{concept}: solver status {status}");
            Ok(EXIT_NOT_OPTIMAL)
        }
        Err(e) => Err(anyhow::Error::new(e).context("solving").into()),
    }
}

fn cmd_verify(game: &Path, solution: &Path, concept: Option<Concept>) -> Result<u8, Failure> {
    let space = compact(game)?;
    let text = fs::read_to_string(solution).with_context(|| format!("reading {}", solution.display()))?;
    let sol: EquilibriumSolution = serde_json::from_str(&text).context("parsing solution")?;
    let concept = concept.unwrap_or(sol.concept);
    if sol.xi.len() != space.dim() {
        return Err(Failure::usage(format!(
            "solution has {} coordinates, game has {} relevant pairs",
            sol.xi.len(),
            space.dim()
        )));
    }
    let report = certify(&space, &sol.xi, concept, VERIFY_TOL).context("certifying")?;
    println!("concept: {concept}");
    println!("membership residual: {:.3e}", report.membership_residual);
    if let Some(row) = &report.worst_row {
        println!("worst row: {row}");
    }
    println!("max gap: {:.3e}", report.max_gap);
    for t in report.triggers.iter().filter(|t| t.gap > report.tolerance) {
        println!("violated trigger {}: gap {:.3e}", t.label, t.gap);
    }
    if report.pass {
        println!("PASS");
        Ok(0)
    } else {
        if report.membership_residual > report.tolerance {
            println!("violated row: {}", report.worst_row.as_deref().unwrap_or("unknown"));
        }
        println!("FAIL");
        Ok(EXIT_VERIFY_FAIL)
    }
}

fn cmd_region(path: &Path, concept: Option<Concept>, k: usize, seed: u64, out: Option<&Path>) -> Result<u8, Failure> {
    if k == 0 {
        return Err(Failure::usage("--directions must be positive"));
    }
    let space = compact(path)?;
    let dirs = directions(k, seed);
    let concepts = concept.map_or(Concept::ALL.to_vec(), |c| vec![c]);
    let mut csv = String::from(PayoffRegionSample::CSV_HEADER);
    csv.push('\n');
    for c in concepts {
        match sample_payoff_region(&space, c, &dirs, &SolveOptions::default(), Execution::default()) {
            Ok(sample) => {
                for row in sample.csv_rows() {
                    csv.push_str(&row);
                    csv.push('\n');
                }
            }
            Err(EquilibriumError::NotOptimal(status)) => {
                eprintln!("{c}: solver status {status}");
                return Ok(EXIT_NOT_OPTIMAL);
            }
            Err(e) => return Err(anyhow::Error::new(e).context("sampling region").into()),
        }
    }
    emit(out, &csv)?;
    Ok(0)
}

fn cmd_oracle(path: &Path, concept: Concept, objective: &ObjectiveArgs, out: Option<&Path>) -> Result<u8, Failure> {
    let weights = objective.weights()?;
    let game = read_game(path)?;
    if game.num_players() != 2 && objective.objective != ObjectiveKind::Welfare {
        return Err(Failure::usage("--objective dir needs a two-player game"));
    }
    let weights: Vec<f64> = if game.num_players() == 2 {
        weights.to_vec()
    } else {
        vec![1.0; game.num_players()]
    };
    let sol = oracle_optimum(&game, concept, &weights, &OracleOptions::default()).context("oracle")?;
    eprintln!(
        "{concept}: status {} value {:.9} ({} rows, {} cols)",
        sol.status, sol.value, sol.lp_rows, sol.lp_cols
    );
    let json = serde_json::to_string_pretty(&sol).context("serializing oracle solution")?;
    emit(out, &(json + "\n"))?;
    Ok(if sol.status == corrsolve::LpStatus::Optimal {
        0
    } else {
        EXIT_NOT_OPTIMAL
    })
}

fn bench_instances(game: BenchGame, [r, n, b, w, h]: [Option<usize>; 5]) -> Result<Vec<Instance>, Failure> {
    let explicit = [r, n, b, w, h].iter().any(Option::is_some);
    let inst = match game {
        BenchGame::All if explicit => {
            return Err(Failure::usage("size flags need --game goofspiel|sheriff|battleship"))
        }
        BenchGame::All => return Ok(bench_grid().context("bench grid")?),
        BenchGame::Goofspiel if explicit => Instance::goofspiel(r.unwrap_or(3)),
        BenchGame::Sheriff if explicit => Instance::sheriff(n.unwrap_or(1), b.unwrap_or(1), r.unwrap_or(1)),
        BenchGame::Battleship if explicit => Instance::battleship(w.unwrap_or(2), h.unwrap_or(1), r.unwrap_or(1)),
        _ => {
            let name = match game {
                BenchGame::Goofspiel => "goofspiel",
                BenchGame::Sheriff => "sheriff",
                _ => "battleship",
            };
            let grid = bench_grid().context("bench grid")?;
            return Ok(grid.into_iter().filter(|i| i.game == name).collect());
        }
    };
    Ok(vec![inst.context("generating instance")?])
}

fn cmd_bench(game: BenchGame, sizes: [Option<usize>; 5], out: Option<&Path>) -> Result<u8, Failure> {
    let instances = bench_instances(game, sizes)?;
    let options = SolveOptions::default();
    let mut csv = String::from(RunRecord::CSV_HEADER);
    csv.push('\n');
    let mut all_optimal = true;
    for inst in &instances {
        let space = CompactGame::new(inst.tree.clone()).context("indexing instance")?;
        for c in Concept::ALL {
            let rec = run_instance(inst, &space, c, &options, Execution::default()).context("solving instance")?;
            all_optimal &= rec.status == "optimal";
            csv.push_str(&rec.csv_row());
            csv.push('\n');
        }
    }
    emit(out, &csv)?;
    if !all_optimal {
        eprintln!("some instances did not solve to optimality");
        return Ok(EXIT_NOT_OPTIMAL);
    }
    Ok(0)
}
