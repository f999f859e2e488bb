//! Property language: a single coalition operator over an atomic target.
//!
//! ```text
//! formula := "<<" names ">>" ( probOp | rewOp )
//! probOp  := "P" query "[" "F" [ "<=" INT ] label "]"
//! rewOp   := "R{" QSTRING "}" query "[" star label "]"
//! query   := "max=?" | "min=?" | REL NUMBER      REL := "<=" | "<" | ">=" | ">"
//! star    := "F0" | "Fc" | "Finf"
//! names   := NAME { "," NAME } | ""               label := QSTRING
//! ```
//!
//! Whitespace is allowed between tokens.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Reward assigned to paths that never reach the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Star {
    /// Zero reward.
    Zero,
    /// Reward accumulates indefinitely.
    Cumulative,
    /// Infinite reward.
    Infinite,
}

impl Star {
    fn keyword(self) -> &'static str {
        match self {
            Star::Zero => "F0",
            Star::Cumulative => "Fc",
            Star::Infinite => "Finf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rel {
    Le,
    Lt,
    Ge,
    Gt,
}

impl Rel {
    fn symbol(self) -> &'static str {
        match self {
            Rel::Le => "<=",
            Rel::Lt => "<",
            Rel::Ge => ">=",
            Rel::Gt => ">",
        }
    }

    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Rel::Le => lhs <= rhs,
            Rel::Lt => lhs < rhs,
            Rel::Ge => lhs >= rhs,
            Rel::Gt => lhs > rhs,
        }
    }

    /// Optimisation direction that decides a bound: lower bounds need the
    /// coalition to push the value up.
    pub fn direction(self) -> Direction {
        match self {
            Rel::Ge | Rel::Gt => Direction::Max,
            Rel::Le | Rel::Lt => Direction::Min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Query {
    Bound(Rel, f64),
    Numeric(Direction),
}

impl Query {
    pub fn direction(&self) -> Direction {
        match self {
            Query::Bound(rel, _) => rel.direction(),
            Query::Numeric(d) => *d,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Reachability probability, optionally within a number of steps.
    Prob { horizon: Option<u64> },
    /// Expected reward accumulated until the target is reached.
    Reward { name: String, star: Star },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Formula {
    pub coalition: BTreeSet<String>,
    pub objective: Objective,
    pub query: Query,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {position}: expected {}", expected.join(" or "))]
    Syntax {
        position: usize,
        expected: Vec<&'static str>,
    },
    #[error("unknown player `{0}`")]
    UnknownPlayer(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("unknown reward structure `{0}`")]
    UnknownReward(String),
    #[error("probability bound {0} outside [0,1]")]
    BadBound(f64),
}

/// Names a formula may refer to.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    pub players: BTreeSet<String>,
    pub labels: BTreeSet<String>,
    pub rewards: BTreeSet<String>,
}

impl Vocabulary {
    pub fn of_game<T: crate::Scalar>(g: &crate::smg::Smg<T>) -> Self {
        Vocabulary {
            players: g.players().iter().cloned().collect(),
            labels: g.labels().keys().cloned().collect(),
            rewards: g.rewards().keys().cloned().collect(),
        }
    }
}

struct Cursor<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn fail<T>(&self, expected: &[&'static str]) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            position: self.pos,
            expected: expected.to_vec(),
        })
    }

    fn rest(&self) -> &'a [u8] {
        &self.src[self.pos..]
    }

    /// Consumes `tok` if the input continues with it.
    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok.as_bytes()) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &'static str) -> Result<(), ParseError> {
        if self.eat(tok) {
            Ok(())
        } else {
            self.fail(&[tok])
        }
    }

    fn name(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        match self.src.get(self.pos) {
            Some(c) if c.is_ascii_alphabetic() || *c == b'_' => self.pos += 1,
            _ => return None,
        }
        while let Some(c) = self.src.get(self.pos) {
            if c.is_ascii_alphanumeric() || *c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        Some(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn quoted(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        if self.src.get(self.pos) != Some(&b'"') {
            return self.fail(&["quoted string"]);
        }
        self.pos += 1;
        let mut bytes = Vec::new();
        loop {
            match self.src.get(self.pos) {
                Some(b'"') => {
                    self.pos += 1;
                    break;
                }
                Some(b'\\') => match self.src.get(self.pos + 1) {
                    Some(&e @ (b'"' | b'\\')) => {
                        bytes.push(e);
                        self.pos += 2;
                    }
                    _ => {
                        self.pos += 1;
                        return self.fail(&["\\\"", "\\\\"]);
                    }
                },
                Some(&c) => {
                    bytes.push(c);
                    self.pos += 1;
                }
                None => return self.fail(&["\""]),
            }
        }
        match String::from_utf8(bytes) {
            Ok(s) => Ok(s),
            Err(_) => self.fail(&["UTF-8 text"]),
        }
    }

    fn digits(&mut self) -> usize {
        let start = self.pos;
        while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        self.pos - start
    }

    fn integer(&mut self) -> Result<u64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.digits() == 0 {
            return self.fail(&["integer"]);
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse().or_else(|_| {
            self.pos = start;
            self.fail(&["integer"])
        })
    }

    /// Unsigned decimal with optional fraction and exponent.
    fn number(&mut self) -> Result<f64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let int_digits = self.digits();
        let mut frac_digits = 0;
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            frac_digits = self.digits();
        }
        if int_digits + frac_digits == 0 {
            self.pos = start;
            return self.fail(&["number"]);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.digits() == 0 {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => {
                self.pos = start;
                self.fail(&["finite number"])
            }
        }
    }

    fn query(&mut self) -> Result<Query, ParseError> {
        if self.eat("max=?") {
            return Ok(Query::Numeric(Direction::Max));
        }
        if self.eat("min=?") {
            return Ok(Query::Numeric(Direction::Min));
        }
        // longest match first
        let rel = if self.eat("<=") {
            Rel::Le
        } else if self.eat(">=") {
            Rel::Ge
        } else if self.eat("<") {
            Rel::Lt
        } else if self.eat(">") {
            Rel::Gt
        } else {
            return self.fail(&["max=?", "min=?", "<=", "<", ">=", ">"]);
        };
        Ok(Query::Bound(rel, self.number()?))
    }
}

/// Parses a formula without checking names.
pub fn parse_syntax(text: &str) -> Result<Formula, ParseError> {
    let mut c = Cursor {
        src: text.as_bytes(),
        pos: 0,
    };
    c.expect("<<")?;
    let mut coalition = BTreeSet::new();
    if !c.eat(">>") {
        loop {
            match c.name() {
                Some(n) => {
                    coalition.insert(n);
                }
                None => return c.fail(&["player name"]),
            }
            if c.eat(">>") {
                break;
            }
            if !c.eat(",") {
                return c.fail(&[",", ">>"]);
            }
        }
    }

    let (objective_kind, query) = if c.eat("P") {
        (None, c.query()?)
    } else if c.eat("R{") {
        let name = c.quoted()?;
        c.expect("}")?;
        (Some(name), c.query()?)
    } else {
        return c.fail(&["P", "R{"]);
    };

    c.expect("[")?;
    let objective = match objective_kind {
        None => {
            c.expect("F")?;
            let horizon = if c.eat("<=") { Some(c.integer()?) } else { None };
            Objective::Prob { horizon }
        }
        Some(name) => {
            let star = if c.eat("Finf") {
                Star::Infinite
            } else if c.eat("Fc") {
                Star::Cumulative
            } else if c.eat("F0") {
                Star::Zero
            } else {
                return c.fail(&["F0", "Fc", "Finf"]);
            };
            Objective::Reward { name, star }
        }
    };
    let target = c.quoted()?;
    c.expect("]")?;
    c.skip_ws();
    if c.pos != c.src.len() {
        return c.fail(&["end of input"]);
    }

    if let (Objective::Prob { .. }, Query::Bound(_, q)) = (&objective, query) {
        if !(0.0..=1.0).contains(&q) {
            return Err(ParseError::BadBound(q));
        }
    }
    Ok(Formula {
        coalition,
        objective,
        query,
        target,
    })
}

/// Parses a formula and resolves its names against `vocab`.
pub fn parse_formula(text: &str, vocab: &Vocabulary) -> Result<Formula, ParseError> {
    let f = parse_syntax(text)?;
    if let Some(p) = f.coalition.iter().find(|p| !vocab.players.contains(*p)) {
        return Err(ParseError::UnknownPlayer(p.clone()));
    }
    if let Objective::Reward { name, .. } = &f.objective {
        if !vocab.rewards.contains(name) {
            return Err(ParseError::UnknownReward(name.clone()));
        }
    }
    if !vocab.labels.contains(&f.target) {
        return Err(ParseError::UnknownLabel(f.target.clone()));
    }
    Ok(f)
}

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Numeric(Direction::Max) => f.write_str("max=?"),
            Query::Numeric(Direction::Min) => f.write_str("min=?"),
            // `{}` on f64 prints the shortest text that parses back exactly
            Query::Bound(rel, q) => write!(f, "{}{}", rel.symbol(), q),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.coalition.iter().map(String::as_str).collect();
        write!(f, "<<{}>> ", names.join(","))?;
        match &self.objective {
            Objective::Prob { horizon } => {
                write!(f, "P{} [ F", self.query)?;
                if let Some(n) = horizon {
                    write!(f, "<={n}")?;
                }
            }
            Objective::Reward { name, star } => {
                write!(f, "R{{{}}}{} [ {}", quote(name), self.query, star.keyword())?;
            }
        }
        write!(f, " {} ]", quote(&self.target))
    }
}

/// Canonical text of a formula; parses back to an equal AST.
pub fn format_formula(f: &Formula) -> String {
    f.to_string()
}
