//! Benchmark and fixture games.
//!
//! All generators go through [`build_tree`], so single-action decisions
//! (for example the forced last card in Goofspiel) are collapsed.

use std::fmt::Write as _;

use crate::game::{build_tree, GameError, GameTree, Rules, Turn};

fn labels<I: IntoIterator<Item = String>>(it: I) -> Vec<String> {
    it.into_iter().collect()
}

fn bad_params(reason: impl Into<String>) -> GameError {
    GameError::Invalid {
        location: "generator parameters".into(),
        reason: reason.into(),
    }
}

// ---------------------------------------------------------------------------
// M2

struct MatchingRules;

impl Rules for MatchingRules {
    type State = Vec<usize>;

    fn num_players(&self) -> usize {
        2
    }

    fn root(&self) -> Vec<usize> {
        Vec::new()
    }

    fn turn(&self, s: &Vec<usize>) -> Turn {
        match s.len() {
            0 => Turn::Decision {
                player: 0,
                key: "I1".into(),
                actions: vec!["H".into(), "T".into()],
            },
            1 => Turn::Decision {
                player: 1,
                key: "I2".into(),
                actions: vec!["h".into(), "t".into()],
            },
            _ => {
                let v = if s[0] == s[1] { 1.0 } else { 0.0 };
                Turn::Terminal(vec![v, v])
            }
        }
    }

    fn apply(&self, s: &Vec<usize>, a: usize) -> Vec<usize> {
        let mut next = s.clone();
        next.push(a);
        next
    }
}

/// The matching micro-game: player 1 picks H/T, player 2 picks h/t without
/// observing it; both get 1 on a match and 0 otherwise.
pub fn m2() -> GameTree {
    build_tree(&MatchingRules).expect("M2 is well formed")
}

// ---------------------------------------------------------------------------
// Sheriff

/// Value of each illegal item to the Smuggler.
pub const SHERIFF_ITEM_VALUE: f64 = 5.0;
/// Fine per illegal item found.
pub const SHERIFF_PENALTY: f64 = 1.0;
/// Compensation paid by the Sheriff for inspecting a legal cargo.
pub const SHERIFF_COMPENSATION: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SheriffParams {
    pub max_items: usize,
    pub max_bribe: usize,
    pub rounds: usize,
}

#[derive(Clone)]
struct SheriffState {
    items: Option<usize>,
    rounds: Vec<(usize, bool)>,
    pending_bribe: Option<usize>,
}

struct SheriffRules(SheriffParams);

impl SheriffRules {
    fn public_history(s: &SheriffState) -> String {
        let mut h = String::new();
        for (b, accepted) in &s.rounds {
            let _ = write!(h, "b{b}{}", if *accepted { "A" } else { "R" });
        }
        h
    }
}

impl Rules for SheriffRules {
    type State = SheriffState;

    fn num_players(&self) -> usize {
        2
    }

    fn root(&self) -> SheriffState {
        SheriffState {
            items: None,
            rounds: Vec::new(),
            pending_bribe: None,
        }
    }

    fn turn(&self, s: &SheriffState) -> Turn {
        let p = &self.0;
        let Some(n) = s.items else {
            return Turn::Decision {
                player: 0,
                key: "load".into(),
                actions: labels((0..=p.max_items).map(|n| format!("n={n}"))),
            };
        };
        if let Some(b) = s.pending_bribe {
            return Turn::Decision {
                player: 1,
                key: format!("{}|b{b}", Self::public_history(s)),
                actions: vec!["accept".into(), "reject".into()],
            };
        }
        if s.rounds.len() < p.rounds {
            return Turn::Decision {
                player: 0,
                key: format!("n{n}|{}", Self::public_history(s)),
                actions: labels((0..=p.max_bribe).map(|b| format!("b={b}"))),
            };
        }
        let &(bribe, accepted) = s.rounds.last().expect("at least one round");
        let n = n as f64;
        let bribe = bribe as f64;
        if accepted {
            Turn::Terminal(vec![SHERIFF_ITEM_VALUE * n - bribe, bribe])
        } else if n > 0.0 {
            Turn::Terminal(vec![-SHERIFF_PENALTY * n, SHERIFF_PENALTY * n])
        } else {
            Turn::Terminal(vec![SHERIFF_COMPENSATION, -SHERIFF_COMPENSATION])
        }
    }

    fn apply(&self, s: &SheriffState, a: usize) -> SheriffState {
        let mut next = s.clone();
        if s.items.is_none() {
            next.items = Some(a);
        } else if let Some(b) = s.pending_bribe {
            next.rounds.push((b, a == 0));
            next.pending_bribe = None;
        } else {
            next.pending_bribe = Some(a);
        }
        next
    }
}

/// Sheriff bargaining game. The Smuggler (player 1) privately loads
/// `0..=max_items` illegal items, then for `rounds` rounds proposes a bribe
/// in `0..=max_bribe` that the Sheriff (player 2) accepts or rejects. Only
/// the last answer is binding.
pub fn sheriff(max_items: usize, max_bribe: usize, rounds: usize) -> Result<GameTree, GameError> {
    if max_items < 1 || max_bribe < 1 || rounds < 1 {
        return Err(bad_params("sheriff parameters must be at least 1"));
    }
    build_tree(&SheriffRules(SheriffParams {
        max_items,
        max_bribe,
        rounds,
    }))
}

// ---------------------------------------------------------------------------
// Battleship

/// Loss multiplier applied to the value of a sunk ship.
pub const BATTLESHIP_LOSS_MULTIPLIER: f64 = 2.0;
/// Value of the single ship each player owns.
pub const BATTLESHIP_SHIP_VALUE: f64 = 1.0;

#[derive(Clone)]
struct BattleshipState {
    ships: [Option<usize>; 2],
    shots: [Vec<usize>; 2],
}

struct BattleshipRules {
    cells: usize,
    width: usize,
    rounds: usize,
}

impl BattleshipRules {
    fn cell_label(&self, c: usize) -> String {
        format!("({},{})", c % self.width, c / self.width)
    }

    fn shot_history(s: &BattleshipState) -> String {
        let mut h = String::new();
        for k in 0..s.shots[0].len() {
            let _ = write!(h, "s{}", s.shots[0][k]);
            if let Some(t) = s.shots[1].get(k) {
                let _ = write!(h, "t{t}");
            }
        }
        h
    }

    fn sunk(s: &BattleshipState) -> Option<usize> {
        // The shooter whose shot hit the opponent's ship.
        for shooter in 0..2 {
            let target = s.ships[1 - shooter]?;
            if s.shots[shooter].contains(&target) {
                return Some(shooter);
            }
        }
        None
    }
}

impl Rules for BattleshipRules {
    type State = BattleshipState;

    fn num_players(&self) -> usize {
        2
    }

    fn root(&self) -> BattleshipState {
        BattleshipState {
            ships: [None, None],
            shots: [Vec::new(), Vec::new()],
        }
    }

    fn turn(&self, s: &BattleshipState) -> Turn {
        let cells = labels((0..self.cells).map(|c| self.cell_label(c)));
        for p in 0..2 {
            if s.ships[p].is_none() {
                return Turn::Decision {
                    player: p,
                    key: "place".into(),
                    actions: cells,
                };
            }
        }
        if let Some(shooter) = Self::sunk(s) {
            let mut payoffs = vec![0.0; 2];
            payoffs[shooter] = BATTLESHIP_SHIP_VALUE;
            payoffs[1 - shooter] = -BATTLESHIP_LOSS_MULTIPLIER * BATTLESHIP_SHIP_VALUE;
            return Turn::Terminal(payoffs);
        }
        let shooter = if s.shots[0].len() == s.shots[1].len() { 0 } else { 1 };
        if s.shots[shooter].len() >= self.rounds {
            return Turn::Terminal(vec![0.0, 0.0]);
        }
        Turn::Decision {
            player: shooter,
            key: format!("ship{}|{}", s.ships[shooter].unwrap(), Self::shot_history(s)),
            actions: cells,
        }
    }

    fn apply(&self, s: &BattleshipState, a: usize) -> BattleshipState {
        let mut next = s.clone();
        if s.ships[0].is_none() {
            next.ships[0] = Some(a);
        } else if s.ships[1].is_none() {
            next.ships[1] = Some(a);
        } else if s.shots[0].len() == s.shots[1].len() {
            next.shots[0].push(a);
        } else {
            next.shots[1].push(a);
        }
        next
    }
}

/// Battleship on a `width × height` grid with one length-1 ship per player
/// and up to `rounds` shots each, player 1 shooting first. Shots are public;
/// a hit sinks the ship and ends the game. Repeated shots at a cell are
/// allowed (they always miss).
pub fn battleship(width: usize, height: usize, rounds: usize) -> Result<GameTree, GameError> {
    if width == 0 || height == 0 || width * height < 2 {
        return Err(bad_params("battleship grid needs at least two cells"));
    }
    if rounds < 1 {
        return Err(bad_params("battleship needs at least one round"));
    }
    build_tree(&BattleshipRules {
        cells: width * height,
        width,
        rounds,
    })
}

// ---------------------------------------------------------------------------
// Goofspiel

#[derive(Clone)]
struct GoofState {
    bids: Vec<(usize, usize)>,
    pending: Option<usize>,
}

struct GoofspielRules {
    cards: usize,
}

impl GoofspielRules {
    fn remaining(&self, s: &GoofState, player: usize) -> Vec<usize> {
        (1..=self.cards)
            .filter(|c| !s.bids.iter().any(|b| if player == 0 { b.0 == *c } else { b.1 == *c }))
            .collect()
    }

    fn history(s: &GoofState) -> String {
        let mut h = String::new();
        for (a, b) in &s.bids {
            let _ = write!(h, "{a}v{b};");
        }
        h
    }
}

impl Rules for GoofspielRules {
    type State = GoofState;

    fn num_players(&self) -> usize {
        2
    }

    fn root(&self) -> GoofState {
        GoofState {
            bids: Vec::new(),
            pending: None,
        }
    }

    fn turn(&self, s: &GoofState) -> Turn {
        if s.bids.len() == self.cards {
            let mut score = [0.0, 0.0];
            for (round, (a, b)) in s.bids.iter().enumerate() {
                // Prize deck is in increasing order: round k awards value k.
                let prize = (round + 1) as f64;
                if a > b {
                    score[0] += prize;
                } else if b > a {
                    score[1] += prize;
                }
            }
            return Turn::Terminal(score.to_vec());
        }
        let player = if s.pending.is_none() { 0 } else { 1 };
        Turn::Decision {
            player,
            key: Self::history(s),
            actions: labels(self.remaining(s, player).into_iter().map(|c| format!("c{c}"))),
        }
    }

    fn apply(&self, s: &GoofState, a: usize) -> GoofState {
        let mut next = s.clone();
        match s.pending {
            None => next.pending = Some(self.remaining(s, 0)[a]),
            Some(p1) => {
                next.bids.push((p1, self.remaining(s, 1)[a]));
                next.pending = None;
            }
        }
        next
    }
}

/// Goofspiel with `cards` cards per deck. Bids are simultaneous (player 2
/// does not see player 1's pending card) and revealed after each round.
pub fn goofspiel(cards: usize) -> Result<GameTree, GameError> {
    if cards < 2 {
        return Err(bad_params("goofspiel needs at least two cards"));
    }
    build_tree(&GoofspielRules { cards })
}

// ---------------------------------------------------------------------------
// SAT reduction

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Literal {
    pub var: String,
    pub negated: bool,
}

impl Literal {
    pub fn label(&self) -> String {
        if self.negated {
            format!("!{}", self.var)
        } else {
            self.var.clone()
        }
    }
}

/// Parses clauses written as `"!x;x|y;x|!y"`.
pub fn parse_clauses(text: &str) -> Result<Vec<Vec<Literal>>, GameError> {
    let mut clauses = Vec::new();
    for clause in text.split(';') {
        let mut lits = Vec::new();
        for lit in clause.split('|') {
            let lit = lit.trim();
            let (negated, var) = match lit.strip_prefix('!') {
                Some(v) => (true, v.trim()),
                None => (false, lit),
            };
            if var.is_empty() {
                return Err(bad_params(format!("empty literal in clause {clause:?}")));
            }
            lits.push(Literal {
                var: var.to_string(),
                negated,
            });
        }
        clauses.push(lits);
    }
    Ok(clauses)
}

struct SatRules {
    clauses: Vec<Vec<Literal>>,
}

#[derive(Clone)]
struct SatState {
    clause: Option<usize>,
    literal: Option<usize>,
    satisfied: Option<bool>,
}

impl Rules for SatRules {
    type State = SatState;

    fn num_players(&self) -> usize {
        2
    }

    fn root(&self) -> SatState {
        SatState {
            clause: None,
            literal: None,
            satisfied: None,
        }
    }

    fn turn(&self, s: &SatState) -> Turn {
        if let Some(sat) = s.satisfied {
            let v = if sat { 1.0 } else { 0.0 };
            return Turn::Terminal(vec![v, v]);
        }
        let Some(c) = s.clause else {
            let k = self.clauses.len();
            return Turn::Chance {
                actions: labels((0..k).map(|i| format!("clause{i}"))),
                probs: vec![1.0 / k as f64; k],
            };
        };
        let Some(l) = s.literal else {
            return Turn::Decision {
                player: 0,
                key: format!("clause{c}"),
                actions: labels(self.clauses[c].iter().map(Literal::label)),
            };
        };
        let lit = &self.clauses[c][l];
        Turn::Decision {
            player: 1,
            key: format!("var:{}", lit.var),
            actions: vec![lit.var.clone(), format!("!{}", lit.var)],
        }
    }

    fn apply(&self, s: &SatState, a: usize) -> SatState {
        let mut next = s.clone();
        match (s.clause, s.literal) {
            (None, _) => next.clause = Some(a),
            (Some(_), None) => next.literal = Some(a),
            (Some(c), Some(l)) => {
                // Action 0 assigns true.
                next.satisfied = Some((a == 0) != self.clauses[c][l].negated);
            }
        }
        next
    }
}

/// Two-player game with chance built from a CNF formula: chance picks a
/// clause, player 1 picks one of its literals, player 2 (pooled by
/// variable) picks a truth value; both get 1 if the literal is satisfied.
pub fn sat_game(clauses: &[Vec<Literal>]) -> Result<GameTree, GameError> {
    if clauses.is_empty() {
        return Err(bad_params("formula has no clauses"));
    }
    if clauses.iter().any(Vec::is_empty) {
        return Err(bad_params("empty clause"));
    }
    build_tree(&SatRules {
        clauses: clauses.to_vec(),
    })
}
