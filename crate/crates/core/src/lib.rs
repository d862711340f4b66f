//! Optimal correlated and coarse-correlated equilibria of two-player
//! extensive-form games.
//!
//! The pipeline is: build or load a [`GameTree`], index its sequences and
//! relevant sequence pairs ([`CompactGame`]), assemble the equilibrium LP for
//! a [`Concept`] and solve it. [`verify`] re-checks any correlation plan with
//! best-response dynamic programming and offers a brute-force normal-form
//! oracle for small games (including games with chance or more players).
//!
//! ```
//! use corrsolve::{generators, CompactGame, Concept, Objective, SolveOptions};
//!
//! let space = CompactGame::new(generators::m2()).unwrap();
//! let sol = corrsolve::solve_equilibrium(&space, Concept::Efce, &Objective::Welfare, None, &SolveOptions::default()).unwrap();
//! assert!((sol.objective - 2.0).abs() < 1e-9);
//! ```

pub mod correlation;
pub mod equilibrium;
pub mod exec;
pub mod game;
pub mod generators;
pub mod lp;
pub mod plans;
pub mod report;
pub mod sequence;
pub mod verify;

pub use correlation::{CompactGame, CorrelationPlan, XiConstraintSystem, XiError};
pub use equilibrium::{solve_equilibrium, Concept, EquilibriumError, EquilibriumSolution, Objective, Trigger};
pub use exec::Execution;
pub use game::{load_game, save_game, GameError, GameTree};
pub use lp::{LinearProgram, LpError, LpSolution, LpStatus, SolveOptions};
pub use sequence::{build_sequences, relevant_pairs, SequenceFormIndex};
