//! Linear programs, a bundled dense two-phase simplex, a sparse backend and
//! the backend registry.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pivot elements smaller than this are never used.
pub const PIVOT_TOL: f64 = 1e-9;
/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-9;
/// Reduced costs below this count as nonpositive.
pub const OPT_TOL: f64 = 1e-9;
/// Pivots between refactorizations of the dense tableau.
const REFACTOR_EVERY: usize = 1000;

/// Environment variable naming the backend used by [`SolveOptions::default`].
pub const BACKEND_ENV: &str = "CORRSOLVE_LP_BACKEND";

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("unknown LP backend '{0}'")]
    UnknownBackend(String),
    #[error("row '{row}' references undeclared variable {var}")]
    UndeclaredVariable { row: String, var: usize },
    #[error("row '{0}' has a non-finite right-hand side")]
    NonFiniteRhs(String),
    #[error("variable '{0}' has inconsistent bounds")]
    BadBounds(String),
    #[error("LP text parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("backend failure: {0}")]
    Backend(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    fn token(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(j, c)| c * x[*j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// A sparse LP. Rows merge duplicate coefficients when added.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub direction: Direction,
    vars: Vec<Variable>,
    rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new(direction: Direction) -> Self {
        LinearProgram {
            direction,
            vars: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, objective: f64) -> usize {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            objective,
        });
        self.vars.len() - 1
    }

    pub fn set_objective(&mut self, var: usize, coef: f64) {
        self.vars[var].objective = coef;
    }

    pub fn clear_objective(&mut self) {
        for v in &mut self.vars {
            v.objective = 0.0;
        }
    }

    /// Adds a row, summing repeated variables and dropping zero coefficients.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> Result<usize, LpError> {
        let name = name.into();
        if !rhs.is_finite() {
            return Err(LpError::NonFiniteRhs(name));
        }
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (j, c) in terms {
            if j >= self.vars.len() {
                return Err(LpError::UndeclaredVariable { row: name, var: j });
            }
            *merged.entry(j).or_insert(0.0) += c;
        }
        self.rows.push(Row {
            name,
            terms: merged.into_iter().filter(|(_, c)| *c != 0.0).collect(),
            sense,
            rhs,
        });
        Ok(self.rows.len() - 1)
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.rows.iter().map(|r| r.terms.len()).sum()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(x).map(|(v, x)| v.objective * x).sum()
    }

    /// Largest row or bound violation of `x`.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (v, &xj) in self.vars.iter().zip(x) {
            worst = worst.max(v.lower - xj).max(xj - v.upper);
        }
        for row in &self.rows {
            worst = worst.max(row.violation(x));
        }
        worst
    }

    pub fn rhs_norm(&self) -> f64 {
        self.rows.iter().fold(0.0f64, |m, r| m.max(r.rhs.abs()))
    }

    fn validate(&self) -> Result<(), LpError> {
        for v in &self.vars {
            if v.lower.is_nan()
                || v.upper.is_nan()
                || v.lower > v.upper
                || v.lower == f64::INFINITY
                || v.upper == f64::NEG_INFINITY
            {
                return Err(LpError::BadBounds(v.name.clone()));
            }
        }
        Ok(())
    }

    /// Plain-text form:
    ///
    /// ```text
    /// lp maximize
    /// var <name> <lower> <upper> <objective>
    /// row <name> <= | = | >= <rhs> <var>:<coef> ...
    /// end
    /// ```
    ///
    /// Variables are referenced by their 0-based declaration position;
    /// infinite bounds are written `-inf` / `inf`. Names must not contain
    /// whitespace.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let dir = match self.direction {
            Direction::Maximize => "maximize",
            Direction::Minimize => "minimize",
        };
        writeln!(out, "lp {dir}").unwrap();
        for v in &self.vars {
            writeln!(
                out,
                "var {} {} {} {}",
                v.name,
                fmt_num(v.lower),
                fmt_num(v.upper),
                fmt_num(v.objective)
            )
            .unwrap();
        }
        for r in &self.rows {
            write!(out, "row {} {} {}", r.name, r.sense.token(), fmt_num(r.rhs)).unwrap();
            for (j, c) in &r.terms {
                write!(out, " {j}:{}", fmt_num(*c)).unwrap();
            }
            out.push('\n');
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self, LpError> {
        let err = |line: usize, message: String| LpError::Parse { line, message };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (n, header) = lines.next().ok_or_else(|| err(1, "empty input".into()))?;
        let direction = match header {
            "lp maximize" => Direction::Maximize,
            "lp minimize" => Direction::Minimize,
            other => return Err(err(n, format!("bad header '{other}'"))),
        };
        let mut lp = LinearProgram::new(direction);
        let mut ended = false;
        for (n, line) in lines {
            let mut tok = line.split_whitespace();
            match tok.next() {
                Some("var") => {
                    let f: Vec<&str> = tok.collect();
                    if f.len() != 4 {
                        return Err(err(n, "var needs name, lower, upper, objective".into()));
                    }
                    let num = |s: &str| parse_num(s).ok_or_else(|| err(n, format!("bad number '{s}'")));
                    lp.add_var(f[0], num(f[1])?, num(f[2])?, num(f[3])?);
                }
                Some("row") => {
                    let name = tok.next().ok_or_else(|| err(n, "row needs a name".into()))?;
                    let sense = match tok.next() {
                        Some("<=") => Sense::Le,
                        Some("=") => Sense::Eq,
                        Some(">=") => Sense::Ge,
                        other => return Err(err(n, format!("bad sense {other:?}"))),
                    };
                    let rhs = tok.next().and_then(parse_num).ok_or_else(|| err(n, "bad rhs".into()))?;
                    let mut terms = Vec::new();
                    for t in tok {
                        let (j, c) = t
                            .split_once(':')
                            .and_then(|(j, c)| Some((j.parse::<usize>().ok()?, parse_num(c)?)))
                            .ok_or_else(|| err(n, format!("bad term '{t}'")))?;
                        terms.push((j, c));
                    }
                    lp.add_row(name, terms, sense, rhs).map_err(|e| err(n, e.to_string()))?;
                }
                Some("end") => {
                    ended = true;
                    break;
                }
                Some(other) => return Err(err(n, format!("unknown keyword '{other}'"))),
                None => {}
            }
        }
        if !ended {
            return Err(err(text.lines().count(), "missing 'end'".into()));
        }
        Ok(lp)
    }
}

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        // `{:?}` round-trips f64 exactly.
        format!("{v:?}")
    }
}

fn parse_num(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl std::fmt::Display for LpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::IterationLimit => "iteration-limit",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub objective: f64,
    /// Per-row duals: the rate of change of the optimum per unit of rhs.
    pub duals: Option<Vec<f64>>,
    /// Name of the backend that produced the result.
    pub backend: String,
    pub iterations: usize,
}

impl LpSolution {
    fn non_optimal(status: LpStatus, backend: &str, iterations: usize) -> Self {
        LpSolution {
            status,
            primal: Vec::new(),
            objective: f64::NAN,
            duals: None,
            backend: backend.to_string(),
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Backend name; `None` reads [`BACKEND_ENV`] and falls back to `auto`.
    pub backend: Option<String>,
    pub max_iterations: usize,
    /// Switch from Dantzig pricing to Bland's rule after this many
    /// consecutive degenerate pivots.
    pub degenerate_switch: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            backend: None,
            max_iterations: 200_000,
            degenerate_switch: 50,
        }
    }
}

impl SolveOptions {
    pub fn with_backend(name: &str) -> Self {
        SolveOptions {
            backend: Some(name.to_string()),
            ..SolveOptions::default()
        }
    }

    pub fn backend_name(&self) -> String {
        self.backend
            .clone()
            .or_else(|| std::env::var(BACKEND_ENV).ok().filter(|s| !s.is_empty()))
            .unwrap_or_else(|| "auto".to_string())
    }
}

/// An LP solver. Implementations must be reentrant.
pub trait LpBackend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, lp: &LinearProgram, options: &SolveOptions) -> Result<LpSolution, LpError>;
}

fn registry() -> &'static RwLock<BTreeMap<String, Arc<dyn LpBackend>>> {
    static REGISTRY: OnceLock<RwLock<BTreeMap<String, Arc<dyn LpBackend>>>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut m: BTreeMap<String, Arc<dyn LpBackend>> = BTreeMap::new();
        m.insert("bundled".into(), Arc::new(DenseSimplex));
        m.insert("sparse".into(), Arc::new(SparseBackend));
        #[cfg(feature = "highs")]
        m.insert("highs".into(), Arc::new(HighsBackend));
        m.insert("auto".into(), Arc::new(AutoBackend::default()));
        RwLock::new(m)
    })
}

/// Adds or replaces a backend under its name.
pub fn register(backend: Arc<dyn LpBackend>) {
    registry()
        .write()
        .expect("registry lock")
        .insert(backend.name().to_string(), backend);
}

pub fn select(name: &str) -> Result<Arc<dyn LpBackend>, LpError> {
    registry()
        .read()
        .expect("registry lock")
        .get(name)
        .cloned()
        .ok_or_else(|| LpError::UnknownBackend(name.to_string()))
}

pub fn backend_names() -> Vec<String> {
    registry().read().expect("registry lock").keys().cloned().collect()
}

/// Solves with the backend named by `options`.
pub fn solve(lp: &LinearProgram, options: &SolveOptions) -> Result<LpSolution, LpError> {
    select(&options.backend_name())?.solve(lp, options)
}

/// Uses the dense simplex when the tableau is small. Larger programs go to
/// HiGHS when compiled in, else to the sparse solver.
#[derive(Clone, Debug)]
pub struct AutoBackend {
    /// Largest tableau (rows × columns) handed to the dense simplex.
    pub dense_limit: usize,
}

impl Default for AutoBackend {
    fn default() -> Self {
        AutoBackend { dense_limit: 60_000 }
    }
}

impl LpBackend for AutoBackend {
    fn name(&self) -> &str {
        "auto"
    }

    fn solve(&self, lp: &LinearProgram, options: &SolveOptions) -> Result<LpSolution, LpError> {
        let (m, n) = StandardForm::estimate(lp);
        if m * n <= self.dense_limit {
            DenseSimplex.solve(lp, options)
        } else {
            #[cfg(feature = "highs")]
            return HighsBackend.solve(lp, options);
            #[cfg(not(feature = "highs"))]
            SparseBackend.solve(lp, options)
        }
    }
}

/// HiGHS dual simplex, single-threaded so results do not depend on
/// scheduling.
#[cfg(feature = "highs")]
#[derive(Clone, Copy, Debug, Default)]
pub struct HighsBackend;

#[cfg(feature = "highs")]
impl LpBackend for HighsBackend {
    fn name(&self) -> &str {
        "highs"
    }

    fn solve(&self, lp: &LinearProgram, options: &SolveOptions) -> Result<LpSolution, LpError> {
        use highs::HighsModelStatus as H;
        lp.validate()?;
        let mut p = highs::RowProblem::default();
        let cols: Vec<highs::Col> = lp
            .vars
            .iter()
            .map(|v| p.add_column(v.objective, v.lower..=v.upper))
            .collect();
        for r in &lp.rows {
            let terms: Vec<(highs::Col, f64)> = r.terms.iter().map(|&(j, c)| (cols[j], c)).collect();
            match r.sense {
                Sense::Le => p.add_row(..=r.rhs, terms),
                Sense::Ge => p.add_row(r.rhs.., terms),
                Sense::Eq => p.add_row(r.rhs..=r.rhs, terms),
            }
        }
        let sense = match lp.direction {
            Direction::Maximize => highs::Sense::Maximise,
            Direction::Minimize => highs::Sense::Minimise,
        };
        let mut model = p.optimise(sense);
        model.make_quiet();
        model.set_option("threads", 1);
        model.set_option("random_seed", 0);
        model.set_option("simplex_iteration_limit", options.max_iterations as i32);
        let solved = model.try_solve().map_err(|e| LpError::Backend(format!("{e:?}")))?;
        let iterations = solved.simplex_iteration_count().max(0) as usize;
        let status = match solved.status() {
            H::Optimal | H::ModelEmpty => LpStatus::Optimal,
            H::Infeasible => LpStatus::Infeasible,
            H::Unbounded | H::UnboundedOrInfeasible => LpStatus::Unbounded,
            H::ReachedIterationLimit | H::ReachedTimeLimit => LpStatus::IterationLimit,
            other => return Err(LpError::Backend(format!("highs status {other:?}"))),
        };
        if status != LpStatus::Optimal {
            return Ok(LpSolution::non_optimal(status, "highs", iterations));
        }
        let sol = solved.get_solution();
        let primal = sol.columns().to_vec();
        let duals = sol.dual_rows().to_vec();
        Ok(LpSolution {
            status,
            objective: lp.objective_value(&primal),
            primal,
            duals: Some(duals),
            backend: "highs".into(),
            iterations,
        })
    }
}

/// Sparse primal/dual simplex from the `microlp` crate. No duals.
#[derive(Clone, Copy, Debug, Default)]
pub struct SparseBackend;

impl LpBackend for SparseBackend {
    fn name(&self) -> &str {
        "sparse"
    }

    fn solve(&self, lp: &LinearProgram, _options: &SolveOptions) -> Result<LpSolution, LpError> {
        lp.validate()?;
        let dir = match lp.direction {
            Direction::Maximize => microlp::OptimizationDirection::Maximize,
            Direction::Minimize => microlp::OptimizationDirection::Minimize,
        };
        let mut p = microlp::Problem::new(dir);
        let vars: Vec<microlp::Variable> = lp
            .vars
            .iter()
            .map(|v| p.add_var(v.objective, (v.lower, v.upper)))
            .collect();
        for r in &lp.rows {
            let op = match r.sense {
                Sense::Le => microlp::ComparisonOp::Le,
                Sense::Eq => microlp::ComparisonOp::Eq,
                Sense::Ge => microlp::ComparisonOp::Ge,
            };
            let terms: Vec<(microlp::Variable, f64)> = r.terms.iter().map(|&(j, c)| (vars[j], c)).collect();
            p.add_constraint(terms, op, r.rhs);
        }
        match p.solve() {
            Ok(outcome) => match outcome.into_solution() {
                Ok(sol) => {
                    let primal: Vec<f64> = vars.iter().map(|&v| sol.var_value(v)).collect();
                    Ok(LpSolution {
                        status: LpStatus::Optimal,
                        objective: lp.objective_value(&primal),
                        primal,
                        duals: None,
                        backend: "sparse".into(),
                        iterations: 0,
                    })
                }
                Err(_) => Ok(LpSolution::non_optimal(LpStatus::IterationLimit, "sparse", 0)),
            },
            Err(microlp::Error::Infeasible) => Ok(LpSolution::non_optimal(LpStatus::Infeasible, "sparse", 0)),
            Err(microlp::Error::Unbounded) => Ok(LpSolution::non_optimal(LpStatus::Unbounded, "sparse", 0)),
            Err(e) => Err(LpError::Backend(e.to_string())),
        }
    }
}

type SparseRow = Vec<(usize, f64)>;

/// How an original variable maps onto nonnegative standard-form columns:
/// `x = offset + Σ sign·col`.
#[derive(Clone, Debug)]
struct VarMap {
    offset: f64,
    cols: Vec<(usize, f64)>,
}

/// `max cᵀx, A x = b, x ≥ 0, b ≥ 0` with one identity column per row
/// (slack or artificial) as the starting basis.
struct StandardForm {
    m: usize,
    /// Structural + slack/surplus columns, then artificials.
    n: usize,
    n_real: usize,
    /// Sparse columns.
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    c: Vec<f64>,
    /// Starting basic column of each row.
    basis: Vec<usize>,
    /// −1 if the row was negated to make its rhs nonnegative.
    flip: Vec<f64>,
    maps: Vec<VarMap>,
    /// Number of rows coming from the original LP (the rest are bounds).
    orig_rows: usize,
}

impl StandardForm {
    fn estimate(lp: &LinearProgram) -> (usize, usize) {
        let mut m = lp.rows.len();
        let mut n = 0;
        for v in &lp.vars {
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (true, true) => {
                    m += 1;
                    n += 2;
                }
                (false, false) => n += 2,
                _ => n += 1,
            }
        }
        (m, n + 2 * m)
    }

    fn build(lp: &LinearProgram) -> Self {
        let mut maps = Vec::with_capacity(lp.vars.len());
        let mut ncols = 0usize;
        // (column, upper bound) rows for doubly bounded variables.
        let mut bound_rows = Vec::new();
        for v in &lp.vars {
            let map = match (v.lower.is_finite(), v.upper.is_finite()) {
                (true, up) => {
                    if up {
                        bound_rows.push((ncols, v.upper - v.lower));
                    }
                    ncols += 1;
                    VarMap {
                        offset: v.lower,
                        cols: vec![(ncols - 1, 1.0)],
                    }
                }
                (false, true) => {
                    ncols += 1;
                    VarMap {
                        offset: v.upper,
                        cols: vec![(ncols - 1, -1.0)],
                    }
                }
                (false, false) => {
                    ncols += 2;
                    VarMap {
                        offset: 0.0,
                        cols: vec![(ncols - 2, 1.0), (ncols - 1, -1.0)],
                    }
                }
            };
            maps.push(map);
        }
        let sign = match lp.direction {
            Direction::Maximize => 1.0,
            Direction::Minimize => -1.0,
        };
        let mut c = vec![0.0; ncols];
        for (v, map) in lp.vars.iter().zip(&maps) {
            for &(col, s) in &map.cols {
                c[col] += sign * s * v.objective;
            }
        }

        // Rows in terms of structural columns.
        let mut rows: Vec<(SparseRow, Sense, f64)> = Vec::new();
        for r in &lp.rows {
            let mut rhs = r.rhs;
            let mut terms = Vec::with_capacity(r.terms.len());
            for &(j, a) in &r.terms {
                rhs -= a * maps[j].offset;
                for &(col, s) in &maps[j].cols {
                    terms.push((col, a * s));
                }
            }
            rows.push((terms, r.sense, rhs));
        }
        let orig_rows = rows.len();
        for (col, ub) in bound_rows {
            rows.push((vec![(col, 1.0)], Sense::Le, ub));
        }

        let m = rows.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ncols];
        let mut b = Vec::with_capacity(m);
        let mut flip = Vec::with_capacity(m);
        let mut basis = vec![usize::MAX; m];
        let mut needs_art = Vec::new();
        for (r, (terms, sense, rhs)) in rows.into_iter().enumerate() {
            let f = if rhs < 0.0 { -1.0 } else { 1.0 };
            for (col, a) in terms {
                cols[col].push((r, f * a));
            }
            b.push(f * rhs);
            flip.push(f);
            let sense = match (sense, f < 0.0) {
                (Sense::Le, true) => Sense::Ge,
                (Sense::Ge, true) => Sense::Le,
                (s, _) => s,
            };
            match sense {
                Sense::Le => {
                    cols.push(vec![(r, 1.0)]);
                    basis[r] = cols.len() - 1;
                }
                Sense::Ge => {
                    cols.push(vec![(r, -1.0)]);
                    needs_art.push(r);
                }
                Sense::Eq => needs_art.push(r),
            }
        }
        let n_real = cols.len();
        for r in needs_art {
            cols.push(vec![(r, 1.0)]);
            basis[r] = cols.len() - 1;
        }
        c.resize(cols.len(), 0.0);
        StandardForm {
            m,
            n: cols.len(),
            n_real,
            cols,
            b,
            c,
            basis,
            flip,
            maps,
            orig_rows,
        }
    }
}

/// Dense two-phase tableau simplex. Dantzig pricing, switching to Bland's
/// rule for the rest of the phase after a run of degenerate pivots. The
/// tableau is rebuilt from an LU decomposition of the basis every
/// 1000 pivots and once more before optimality is declared.
#[derive(Clone, Copy, Debug, Default)]
pub struct DenseSimplex;

struct Tableau {
    m: usize,
    /// Columns plus the rhs at index `n`.
    width: usize,
    t: Vec<f64>,
    basis: Vec<usize>,
    /// Reduced costs `d_j = c_j − c_Bᵀ B⁻¹ A_j`.
    d: Vec<f64>,
    iterations: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    Limit,
}

impl Tableau {
    fn at(&self, r: usize, j: usize) -> f64 {
        self.t[r * self.width + j]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.t[r * self.width + self.width - 1]
    }

    fn set_costs(&mut self, c: &[f64]) {
        let n = self.width - 1;
        self.d = c.to_vec();
        self.d.resize(n, 0.0);
        for r in 0..self.m {
            let cb = c[self.basis[r]];
            if cb != 0.0 {
                for j in 0..n {
                    self.d[j] -= cb * self.at(r, j);
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let w = self.width;
        let p = self.t[r * w + e];
        let (before, rest) = self.t.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for v in prow.iter_mut() {
            *v /= p;
        }
        prow[e] = 1.0;
        let eliminate = |row: &mut [f64]| {
            let f = row[e];
            if f != 0.0 {
                for (x, y) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * y;
                }
                row[e] = 0.0;
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        let f = self.d[e];
        if f != 0.0 {
            for (x, y) in self.d.iter_mut().zip(prow.iter()) {
                *x -= f * y;
            }
            self.d[e] = 0.0;
        }
        self.basis[r] = e;
        self.iterations += 1;
    }

    /// Rebuilds the tableau and reduced costs from the original columns
    /// as `B⁻¹[A | b]`, discarding accumulated rounding error.
    fn refactor(&mut self, sf: &StandardForm, c: &[f64]) {
        let m = self.m;
        if m == 0 {
            return;
        }
        let mut bm = DMatrix::<f64>::zeros(m, m);
        for (k, &j) in self.basis.iter().enumerate() {
            for &(r, a) in &sf.cols[j] {
                bm[(r, k)] = a;
            }
        }
        let lu = bm.lu();
        let n = self.width - 1;
        let mut rhs = DMatrix::<f64>::zeros(m, self.width);
        for (j, col) in sf.cols.iter().enumerate() {
            for &(r, a) in col {
                rhs[(r, j)] = a;
            }
        }
        for r in 0..m {
            rhs[(r, n)] = sf.b[r];
        }
        let Some(sol) = lu.solve(&rhs) else {
            return;
        };
        for r in 0..m {
            // Row r of the tableau belongs to basis position r.
            for j in 0..self.width {
                let v = sol[(r, j)];
                self.t[r * self.width + j] = if v.abs() < 1e-13 { 0.0 } else { v };
            }
        }
        for (r, &j) in self.basis.iter().enumerate() {
            for k in 0..m {
                self.t[k * self.width + j] = if k == r { 1.0 } else { 0.0 };
            }
        }
        self.set_costs(c);
    }

    /// Maximizes `c` over columns `< allowed`.
    fn run(&mut self, sf: &StandardForm, c: &[f64], allowed: usize, options: &SolveOptions) -> PhaseEnd {
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut since_refactor = 0usize;
        let mut verified = false;
        loop {
            if self.iterations >= options.max_iterations {
                return PhaseEnd::Limit;
            }
            if since_refactor >= REFACTOR_EVERY {
                self.refactor(sf, c);
                since_refactor = 0;
            }
            let entering = if bland {
                (0..allowed).find(|&j| self.d[j] > OPT_TOL)
            } else {
                let mut best = None;
                let mut best_d = OPT_TOL;
                for j in 0..allowed {
                    if self.d[j] > best_d {
                        best_d = self.d[j];
                        best = Some(j);
                    }
                }
                best
            };
            let Some(e) = entering else {
                // Confirm optimality on a fresh factorization.
                if verified || since_refactor == 0 {
                    return PhaseEnd::Optimal;
                }
                self.refactor(sf, c);
                since_refactor = 0;
                verified = true;
                continue;
            };
            verified = false;
            // Harris ratio test: the bound allows a small infeasibility,
            // then the largest pivot (or, under Bland, the smallest basic
            // column) among the rows within it is chosen.
            // Rows still holding an artificial after phase 1 are redundant.
            let live = |r: usize| self.basis[r] < allowed;
            let mut bound = f64::INFINITY;
            for r in (0..self.m).filter(|&r| live(r)) {
                let a = self.at(r, e);
                if a > PIVOT_TOL {
                    bound = bound.min((self.rhs(r).max(0.0) + FEAS_TOL) / a);
                }
            }
            if bound == f64::INFINITY {
                return PhaseEnd::Unbounded;
            }
            let mut leave: Option<usize> = None;
            for r in (0..self.m).filter(|&r| live(r)) {
                let a = self.at(r, e);
                if a > PIVOT_TOL && self.rhs(r).max(0.0) / a <= bound {
                    leave = match leave {
                        None => Some(r),
                        Some(l) if bland && self.basis[r] < self.basis[l] => Some(r),
                        Some(l) if !bland && a > self.at(l, e) => Some(r),
                        keep => keep,
                    };
                }
            }
            let r = leave.expect("bound is attained");
            let ratio = self.rhs(r).max(0.0) / self.at(r, e);
            // Once Bland's rule is on it stays on for the rest of the phase.
            if ratio <= 1e-11 {
                degenerate += 1;
                if degenerate >= options.degenerate_switch {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            self.pivot(r, e);
            since_refactor += 1;
        }
    }
}

impl LpBackend for DenseSimplex {
    fn name(&self) -> &str {
        "bundled"
    }

    fn solve(&self, lp: &LinearProgram, options: &SolveOptions) -> Result<LpSolution, LpError> {
        lp.validate()?;
        let sf = StandardForm::build(lp);
        let (m, n) = (sf.m, sf.n);
        let width = n + 1;
        let mut t = vec![0.0; m * width];
        for (j, col) in sf.cols.iter().enumerate() {
            for &(r, a) in col {
                t[r * width + j] = a;
            }
        }
        for r in 0..m {
            t[r * width + n] = sf.b[r];
        }
        let mut tab = Tableau {
            m,
            width,
            t,
            basis: sf.basis.clone(),
            d: Vec::new(),
            iterations: 0,
        };

        // Phase 1: maximize −Σ artificials.
        let mut c1 = vec![0.0; n];
        for v in c1.iter_mut().skip(sf.n_real) {
            *v = -1.0;
        }
        tab.set_costs(&c1);
        match tab.run(&sf, &c1, n, options) {
            PhaseEnd::Limit => {
                return Ok(LpSolution::non_optimal(
                    LpStatus::IterationLimit,
                    "bundled",
                    tab.iterations,
                ))
            }
            PhaseEnd::Unbounded => unreachable!("phase 1 is bounded"),
            PhaseEnd::Optimal => {}
        }
        let infeas: f64 = (0..m).filter(|&r| tab.basis[r] >= sf.n_real).map(|r| tab.rhs(r)).sum();
        let bnorm = sf.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if infeas > FEAS_TOL * (1.0 + bnorm) {
            return Ok(LpSolution::non_optimal(LpStatus::Infeasible, "bundled", tab.iterations));
        }
        // Drive remaining artificials out where possible; rows where that is
        // impossible are redundant and keep a zero artificial.
        for r in 0..m {
            if tab.basis[r] >= sf.n_real {
                let best = (0..sf.n_real)
                    .map(|j| (j, tab.at(r, j).abs()))
                    .filter(|(_, a)| *a > 1e-7)
                    .max_by(|a, b| a.1.total_cmp(&b.1));
                if let Some((j, _)) = best {
                    tab.pivot(r, j);
                }
            }
        }

        // Phase 2.
        tab.set_costs(&sf.c);
        match tab.run(&sf, &sf.c, sf.n_real, options) {
            PhaseEnd::Limit => {
                return Ok(LpSolution::non_optimal(
                    LpStatus::IterationLimit,
                    "bundled",
                    tab.iterations,
                ))
            }
            PhaseEnd::Unbounded => return Ok(LpSolution::non_optimal(LpStatus::Unbounded, "bundled", tab.iterations)),
            PhaseEnd::Optimal => {}
        }

        let mut xs = vec![0.0; n];
        for r in 0..m {
            xs[tab.basis[r]] = tab.rhs(r);
        }
        let mut duals_std = None;
        if m > 0 {
            let mut bm = DMatrix::<f64>::zeros(m, m);
            for (k, &j) in tab.basis.iter().enumerate() {
                for &(r, a) in &sf.cols[j] {
                    bm[(r, k)] = a;
                }
            }
            let lu = bm.clone().lu();
            if let Some(xb) = lu.solve(&DVector::from_column_slice(&sf.b)) {
                for (k, &j) in tab.basis.iter().enumerate() {
                    xs[j] = xb[k].max(0.0);
                }
            }
            let cb = DVector::from_iterator(m, tab.basis.iter().map(|&j| sf.c[j]));
            duals_std = bm.transpose().lu().solve(&cb);
        }

        let primal: Vec<f64> = sf
            .maps
            .iter()
            .map(|map| map.offset + map.cols.iter().map(|&(c, s)| s * xs[c]).sum::<f64>())
            .collect();
        let sign = match lp.direction {
            Direction::Maximize => 1.0,
            Direction::Minimize => -1.0,
        };
        let duals = duals_std.map(|y| {
            (0..sf.orig_rows)
                .map(|r| sign * sf.flip[r] * y[r])
                .collect::<Vec<f64>>()
        });
        Ok(LpSolution {
            status: LpStatus::Optimal,
            objective: lp.objective_value(&primal),
            primal,
            duals,
            backend: "bundled".into(),
            iterations: tab.iterations,
        })
    }
}
