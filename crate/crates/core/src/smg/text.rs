//! Line-oriented explicit-state text format.
//!
//! ```text
//! player <id> <name>
//! state <id> <owner>
//! action <state> <label>
//! trans <state> <label> <target>:<prob> [<target>:<prob> ...]
//! label "<name>" <state> [<state> ...]
//! reward "<name>" <state> <label> <value>
//! init <state>
//! ```
//!
//! `#` starts a comment. Ids are arbitrary integers; they are mapped to dense
//! indices in declaration order. A bare `reward "<name>"` declares an empty
//! reward structure.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{PlayerId, Smg, SmgBuilder, SmgError, StateId};
use crate::scalar::Scalar;

fn parse_err(line: usize, message: impl Into<String>) -> SmgError {
    SmgError::Parse {
        line,
        message: message.into(),
    }
}

/// Splits a line into whitespace-separated tokens, keeping quoted strings
/// (with `\"` and `\\` escapes) as single tokens without their quotes.
fn tokenize(line: &str, lineno: usize) -> Result<Vec<(String, bool)>, SmgError> {
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '#' {
            break;
        } else if c == '"' {
            chars.next();
            let mut s = String::new();
            loop {
                match chars.next() {
                    Some('"') => break,
                    Some('\\') => match chars.next() {
                        Some(e @ ('"' | '\\')) => s.push(e),
                        _ => return Err(parse_err(lineno, "bad escape in quoted string")),
                    },
                    Some(ch) => s.push(ch),
                    None => return Err(parse_err(lineno, "unterminated quoted string")),
                }
            }
            out.push((s, true));
        } else {
            let mut s = String::new();
            while let Some(&ch) = chars.peek() {
                if ch.is_whitespace() || ch == '#' {
                    break;
                }
                s.push(ch);
                chars.next();
            }
            out.push((s, false));
        }
    }
    Ok(out)
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

pub fn parse<T: Scalar>(input: &str) -> Result<Smg<T>, SmgError> {
    let mut lines = Vec::new();
    for (i, raw) in input.lines().enumerate() {
        let toks = tokenize(raw, i + 1)?;
        if !toks.is_empty() {
            lines.push((i + 1, toks));
        }
    }

    let mut b = SmgBuilder::<T>::new();
    let mut players: HashMap<String, PlayerId> = HashMap::new();
    let mut states: HashMap<String, StateId> = HashMap::new();

    // Pass 1: players, then states (so declaration order of either is free).
    for (lineno, toks) in &lines {
        if toks[0].0 == "player" {
            if toks.len() != 3 {
                return Err(parse_err(*lineno, "expected `player <id> <name>`"));
            }
            if players.contains_key(&toks[1].0) {
                return Err(SmgError::DuplicateName(format!("player id {}", toks[1].0)));
            }
            let id = b.add_player(&toks[2].0)?;
            players.insert(toks[1].0.clone(), id);
        }
    }
    for (lineno, toks) in &lines {
        if toks[0].0 == "state" {
            if toks.len() != 3 {
                return Err(parse_err(*lineno, "expected `state <id> <owner>`"));
            }
            let owner = *players.get(&toks[2].0).ok_or_else(|| SmgError::DanglingReference {
                kind: "player",
                name: toks[2].0.clone(),
            })?;
            if states.contains_key(&toks[1].0) {
                return Err(SmgError::DuplicateName(format!("state id {}", toks[1].0)));
            }
            let s = b.add_state(owner);
            states.insert(toks[1].0.clone(), s);
        }
    }
    let state = |tok: &str| -> Result<StateId, SmgError> {
        states.get(tok).copied().ok_or_else(|| SmgError::DanglingReference {
            kind: "state",
            name: tok.to_string(),
        })
    };

    // Pass 2: actions and transitions, keeping declaration order of actions.
    let mut declared: HashMap<(StateId, String), bool> = HashMap::new();
    let mut supports: HashMap<(StateId, String), Vec<(StateId, T)>> = HashMap::new();
    let mut order: Vec<(StateId, String)> = Vec::new();
    for (lineno, toks) in &lines {
        match toks[0].0.as_str() {
            "action" => {
                if toks.len() != 3 {
                    return Err(parse_err(*lineno, "expected `action <state> <label>`"));
                }
                let key = (state(&toks[1].0)?, toks[2].0.clone());
                if declared.insert(key.clone(), false).is_some() {
                    return Err(SmgError::DuplicateName(format!(
                        "action {} of state {}",
                        key.1, toks[1].0
                    )));
                }
                order.push(key);
            }
            "trans" => {
                if toks.len() < 4 {
                    return Err(parse_err(
                        *lineno,
                        "expected `trans <state> <label> <target>:<prob> ...`",
                    ));
                }
                let key = (state(&toks[1].0)?, toks[2].0.clone());
                match declared.get(&key) {
                    Some(true) => {
                        return Err(parse_err(
                            *lineno,
                            format!("second `trans` for action {} of state {}", key.1, toks[1].0),
                        ))
                    }
                    Some(false) => {}
                    None => order.push(key.clone()),
                }
                declared.insert(key.clone(), true);
                let mut support = Vec::new();
                for (tok, _) in &toks[3..] {
                    let (t, p) = tok
                        .split_once(':')
                        .ok_or_else(|| parse_err(*lineno, format!("expected <target>:<prob>, got `{tok}`")))?;
                    let p: T = p
                        .parse()
                        .map_err(|_| parse_err(*lineno, format!("bad probability `{p}`")))?;
                    support.push((state(t)?, p));
                }
                supports.insert(key, support);
            }
            _ => {}
        }
    }
    for key in order {
        let support = supports.remove(&key).unwrap_or_default();
        b.add_action(key.0, &key.1, support)?;
    }

    // Pass 3: labels, rewards, initial state.
    for (lineno, toks) in &lines {
        match toks[0].0.as_str() {
            "player" | "state" | "action" | "trans" => {}
            "label" => {
                if toks.len() < 2 || !toks[1].1 {
                    return Err(parse_err(*lineno, "expected `label \"<name>\" <state> ...`"));
                }
                let members = toks[2..]
                    .iter()
                    .map(|(t, _)| state(t))
                    .collect::<Result<Vec<_>, _>>()?;
                b.add_label(&toks[1].0, members)?;
            }
            "reward" => {
                if toks.len() < 2 || !toks[1].1 {
                    return Err(parse_err(*lineno, "expected `reward \"<name>\" ...`"));
                }
                if toks.len() == 2 {
                    b.add_reward_structure(&toks[1].0)?;
                    continue;
                }
                if toks.len() != 5 {
                    return Err(parse_err(
                        *lineno,
                        "expected `reward \"<name>\" <state> <label> <value>`",
                    ));
                }
                let s = state(&toks[2].0)?;
                let action = b.action_ref(s, &toks[3].0).ok_or_else(|| SmgError::DanglingReference {
                    kind: "action",
                    name: format!("{} of state {}", toks[3].0, toks[2].0),
                })?;
                let v: T = toks[4]
                    .0
                    .parse()
                    .map_err(|_| parse_err(*lineno, format!("bad reward value `{}`", toks[4].0)))?;
                b.add_reward(&toks[1].0, action, v)?;
            }
            "init" => {
                if toks.len() != 2 {
                    return Err(parse_err(*lineno, "expected `init <state>`"));
                }
                b.set_initial(state(&toks[1].0)?);
            }
            other => return Err(parse_err(*lineno, format!("unknown declaration `{other}`"))),
        }
    }
    b.build()
}

/// Writes `g` in the text format using dense ids.
pub fn write<T: Scalar>(g: &Smg<T>) -> String {
    let mut out = String::new();
    for (i, p) in g.players().iter().enumerate() {
        writeln!(out, "player {i} {p}").unwrap();
    }
    for s in 0..g.num_states() {
        writeln!(out, "state {s} {}", g.owner(s)).unwrap();
    }
    for s in 0..g.num_states() {
        for a in g.actions(s) {
            write!(out, "trans {s} {}", g.action_name(a)).unwrap();
            for (t, p) in g.transitions(a) {
                write!(out, " {t}:{p}").unwrap();
            }
            out.push('\n');
        }
    }
    for (name, states) in g.labels() {
        out.push_str("label ");
        out.push_str(&quote(name));
        for s in states {
            write!(out, " {s}").unwrap();
        }
        out.push('\n');
    }
    for (name, rs) in g.rewards() {
        if rs.entries().is_empty() {
            writeln!(out, "reward {}", quote(name)).unwrap();
        }
        for &(a, v) in rs.entries() {
            let s = g.action_state(a);
            writeln!(out, "reward {} {s} {} {v}", quote(name), g.action_name(a)).unwrap();
        }
    }
    if let Some(s) = g.initial() {
        writeln!(out, "init {s}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MICRO: &str = r#"
# two-action micro game
player 0 p1
state 10 0
state 11 0
state 12 0
action 10 a
trans 10 a 11:0.3 12:0.7
trans 10 b 11:0.7 12:0.3
label "goal" 11
reward "r" 10 b 1.5
init 10
"#;

    #[test]
    fn parse_micro_game() {
        let g: Smg<f64> = parse(MICRO).unwrap();
        assert_eq!(g.num_states(), 3);
        assert_eq!(g.initial(), Some(0));
        assert_eq!(g.num_actions_of(0), 2);
        assert_eq!(g.action_name(0), "a");
        assert_eq!(g.transitions(1).collect::<Vec<_>>(), vec![(1, 0.7), (2, 0.3)]);
        // states 11 and 12 are deadlocks closed with self-loops
        assert_eq!(g.action_name(g.action_index(1, 0)), "loop");
        assert_eq!(g.reward("r").unwrap().get(1), 1.5);
        assert_eq!(g.label("goal").unwrap(), &[1]);
    }

    #[test]
    fn write_then_parse_is_stable() {
        let g: Smg<f64> = parse(MICRO).unwrap();
        let text = write(&g);
        let h: Smg<f64> = parse(&text).unwrap();
        assert_eq!(write(&h), text);
    }

    #[test]
    fn errors_are_reported() {
        assert!(matches!(
            parse::<f64>("player 0 p\nstate 0 1\n"),
            Err(SmgError::DanglingReference { kind: "player", .. })
        ));
        assert!(matches!(
            parse::<f64>("player 0 p\nstate 0 0\ntrans 0 a 1:1\n"),
            Err(SmgError::DanglingReference { kind: "state", .. })
        ));
        assert!(matches!(
            parse::<f64>("player 0 p\nstate 0 0\ntrans 0 a 0:0.5\n"),
            Err(SmgError::BadDistribution { .. })
        ));
        assert!(matches!(
            parse::<f64>("player 0 p\nstate 0 0\nlabel \"x\" 0\nlabel \"x\" 0\n"),
            Err(SmgError::DuplicateName(_))
        ));
        assert!(matches!(
            parse::<f64>("bogus 1\n"),
            Err(SmgError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse::<f64>("player 0 p\nstate 0 0\nlabel \"x 0\n"),
            Err(SmgError::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn quoted_names_with_escapes() {
        let g: Smg<f64> = parse("player 0 p\nstate 0 0\nlabel \"a \\\"b\\\"\" 0\n").unwrap();
        assert!(g.label("a \"b\"").is_some());
        let h: Smg<f64> = parse(&write(&g)).unwrap();
        assert!(h.label("a \"b\"").is_some());
    }
}
