use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{PlayerId, Smg, SmgError, StateId};
use crate::scalar::Scalar;

/// Choices indexed by the number of remaining steps `1..=horizon`.
///
/// Consecutive identical rows are stored once, so long horizons whose
/// choices stabilise stay cheap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepTable {
    horizon: usize,
    /// `(first remaining-step count, row)`, ascending.
    segments: Vec<(usize, Vec<Option<usize>>)>,
}

impl StepTable {
    /// `rows[i]` holds the choices with `i + 1` steps remaining.
    pub fn from_rows(rows: Vec<Vec<Option<usize>>>) -> Self {
        let mut t = StepTable {
            horizon: 0,
            segments: Vec::new(),
        };
        for row in rows {
            t.push(row);
        }
        t
    }

    pub fn new() -> Self {
        Self::from_rows(Vec::new())
    }

    /// Appends the row for `horizon + 1` remaining steps.
    pub fn push(&mut self, row: Vec<Option<usize>>) {
        self.horizon += 1;
        if self.segments.last().map(|(_, last)| last) != Some(&row) {
            self.segments.push((self.horizon, row));
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Choices with `remaining` steps left (`1 <= remaining <= horizon`).
    pub fn row(&self, remaining: usize) -> &[Option<usize>] {
        assert!(remaining >= 1 && remaining <= self.horizon, "step {remaining} out of range");
        let i = self.segments.partition_point(|(start, _)| *start <= remaining) - 1;
        &self.segments[i].1
    }

    fn distinct_rows(&self) -> impl Iterator<Item = &[Option<usize>]> {
        self.segments.iter().map(|(_, r)| r.as_slice())
    }
}

impl Default for StepTable {
    fn default() -> Self {
        Self::new()
    }
}

/// Deterministic action choices (local action indices).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Choices {
    /// One choice per state.
    Memoryless(Vec<Option<usize>>),
    StepIndexed(StepTable),
}

/// A deterministic strategy for a coalition of players.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Strategy {
    pub coalition: BTreeSet<PlayerId>,
    pub choices: Choices,
}

impl Strategy {
    pub fn memoryless(coalition: BTreeSet<PlayerId>, choices: Vec<Option<usize>>) -> Self {
        Strategy {
            coalition,
            choices: Choices::Memoryless(choices),
        }
    }

    pub fn step_indexed(coalition: BTreeSet<PlayerId>, table: StepTable) -> Self {
        Strategy {
            coalition,
            choices: Choices::StepIndexed(table),
        }
    }

    /// Union of two memoryless strategies for disjoint coalitions.
    pub fn merge(&self, other: &Strategy) -> Option<Strategy> {
        let (Choices::Memoryless(a), Choices::Memoryless(b)) = (&self.choices, &other.choices) else {
            return None;
        };
        if !self.coalition.is_disjoint(&other.coalition) {
            return None;
        }
        let n = a.len().max(b.len());
        let choices = (0..n)
            .map(|s| a.get(s).copied().flatten().or(b.get(s).copied().flatten()))
            .collect();
        let coalition = self.coalition.union(&other.coalition).copied().collect();
        Some(Strategy::memoryless(coalition, choices))
    }

    pub fn is_memoryless(&self) -> bool {
        matches!(self.choices, Choices::Memoryless(_))
    }

    /// Memoryless choice at `s`, or the choice with the full horizon remaining.
    pub fn choice(&self, s: StateId) -> Option<usize> {
        match &self.choices {
            Choices::Memoryless(c) => c.get(s).copied().flatten(),
            Choices::StepIndexed(table) if table.horizon() > 0 => {
                table.row(table.horizon()).get(s).copied().flatten()
            }
            Choices::StepIndexed(_) => None,
        }
    }

    /// Checks that choices are given for exactly the coalition's states and
    /// that each choice is enabled.
    pub fn validate<T: Scalar>(&self, g: &Smg<T>) -> Result<(), SmgError> {
        let check_row = |row: &[Option<usize>]| -> Result<(), SmgError> {
            for s in 0..g.num_states() {
                let owned = self.coalition.contains(&g.owner(s));
                match (owned, row.get(s).copied().flatten()) {
                    (true, None) => return Err(SmgError::UndefinedChoice(s)),
                    (true, Some(c)) if c >= g.num_actions_of(s) => {
                        return Err(SmgError::DisabledAction { state: s, action: c })
                    }
                    (false, Some(_)) => return Err(SmgError::ForeignChoice(s)),
                    _ => {}
                }
            }
            Ok(())
        };
        match &self.choices {
            Choices::Memoryless(c) => check_row(c),
            Choices::StepIndexed(table) => table.distinct_rows().try_for_each(check_row),
        }
    }

    /// `state,step,action` rows; `-` marks a memoryless choice.
    pub fn to_csv<T: Scalar>(&self, g: &Smg<T>) -> String {
        let mut out = String::from("state,step,action\n");
        let name = |s: StateId, c: usize| g.action_name(g.action_index(s, c));
        match &self.choices {
            Choices::Memoryless(choices) => {
                for (s, c) in choices.iter().enumerate() {
                    if let Some(c) = c {
                        writeln!(out, "{s},-,{}", name(s, *c)).unwrap();
                    }
                }
            }
            Choices::StepIndexed(table) => {
                for r in 1..=table.horizon() {
                    for (s, c) in table.row(r).iter().enumerate() {
                        if let Some(c) = c {
                            writeln!(out, "{s},{r},{}", name(s, *c)).unwrap();
                        }
                    }
                }
            }
        }
        out
    }

    /// Reads the CSV written by [`Strategy::to_csv`]. The coalition is the
    /// set of owners of the listed states unless given explicitly.
    pub fn from_csv<T: Scalar>(
        text: &str,
        g: &Smg<T>,
        coalition: Option<BTreeSet<PlayerId>>,
    ) -> Result<Strategy, SmgError> {
        let n = g.num_states();
        let mut memoryless = vec![None; n];
        let mut stepped: Vec<(usize, StateId, usize)> = Vec::new();
        let mut any_memoryless = false;
        let mut owners = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("state")) {
                continue;
            }
            let err = |message: String| SmgError::Parse {
                line: i + 1,
                message,
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 fields, found {}", fields.len())));
            }
            let s: StateId = fields[0]
                .parse()
                .map_err(|_| err(format!("bad state `{}`", fields[0])))?;
            if s >= n {
                return Err(SmgError::DanglingReference {
                    kind: "state",
                    name: s.to_string(),
                });
            }
            let c = g.find_action(s, fields[2]).ok_or_else(|| SmgError::DanglingReference {
                kind: "action",
                name: format!("{} in state {s}", fields[2]),
            })?;
            owners.insert(g.owner(s));
            if fields[1] == "-" {
                any_memoryless = true;
                memoryless[s] = Some(c);
            } else {
                let r: usize = fields[1]
                    .parse()
                    .map_err(|_| err(format!("bad step `{}`", fields[1])))?;
                if r == 0 {
                    return Err(err("step must be at least 1".into()));
                }
                stepped.push((r, s, c));
            }
        }
        if any_memoryless && !stepped.is_empty() {
            return Err(SmgError::Parse {
                line: 0,
                message: "mixed memoryless and step-indexed rows".into(),
            });
        }
        let coalition = coalition.unwrap_or(owners);
        let strategy = if stepped.is_empty() {
            Strategy::memoryless(coalition, memoryless)
        } else {
            let horizon = stepped.iter().map(|e| e.0).max().unwrap_or(0);
            let mut rows = vec![vec![None; n]; horizon];
            for (r, s, c) in stepped {
                rows[r - 1][s] = Some(c);
            }
            Strategy::step_indexed(coalition, StepTable::from_rows(rows))
        };
        strategy.validate(g)?;
        Ok(strategy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smg::SmgBuilder;

    fn game() -> Smg<f64> {
        let mut b = SmgBuilder::new();
        let p = b.add_player("p").unwrap();
        let q = b.add_player("q").unwrap();
        let s0 = b.add_state(p);
        let s1 = b.add_state(q);
        b.add_action(s0, "a", vec![(s1, 1.0)]).unwrap();
        b.add_action(s0, "b", vec![(s0, 1.0)]).unwrap();
        b.add_action(s1, "c", vec![(s0, 1.0)]).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn csv_memoryless() {
        let g = game();
        let s = Strategy::memoryless([PlayerId(0)].into(), vec![Some(1), None]);
        let csv = s.to_csv(&g);
        assert_eq!(csv, "state,step,action\n0,-,b\n");
        assert_eq!(Strategy::from_csv(&csv, &g, None).unwrap(), s);
    }

    #[test]
    fn csv_step_indexed() {
        let g = game();
        let s = Strategy::step_indexed(
            [PlayerId(0)].into(),
            StepTable::from_rows(vec![vec![Some(0), None], vec![Some(1), None]]),
        );
        let csv = s.to_csv(&g);
        assert_eq!(csv, "state,step,action\n0,1,a\n0,2,b\n");
        assert_eq!(Strategy::from_csv(&csv, &g, None).unwrap(), s);
    }

    #[test]
    fn merge_disjoint() {
        let g = game();
        let p = Strategy::memoryless([PlayerId(0)].into(), vec![Some(1), None]);
        let q = Strategy::memoryless([PlayerId(1)].into(), vec![None, Some(0)]);
        let both = p.merge(&q).unwrap();
        both.validate(&g).unwrap();
        assert_eq!(both.choice(0), Some(1));
        assert_eq!(both.choice(1), Some(0));
        assert!(p.merge(&p).is_none());
    }

    #[test]
    fn csv_errors() {
        let g = game();
        assert!(Strategy::from_csv("state,step,action\n0,-,zz\n", &g, None).is_err());
        assert!(Strategy::from_csv("state,step,action\n9,-,a\n", &g, None).is_err());
        assert!(Strategy::from_csv("0,-\n", &g, None).is_err());
        // player p owns state 0 but no row covers it
        let err = Strategy::from_csv("", &g, Some([PlayerId(0)].into())).unwrap_err();
        assert_eq!(err, SmgError::UndefinedChoice(0));
    }

    #[test]
    fn step_table_compresses_repeated_rows() {
        let mut t = StepTable::new();
        for _ in 0..1000 {
            t.push(vec![Some(1), None]);
        }
        t.push(vec![Some(0), None]);
        assert_eq!(t.horizon(), 1001);
        assert_eq!(t.segments.len(), 2);
        assert_eq!(t.row(1000), &[Some(1), None]);
        assert_eq!(t.row(1001), &[Some(0), None]);
    }

    #[test]
    fn foreign_choice_rejected() {
        let g = game();
        let s = Strategy::memoryless([PlayerId(0)].into(), vec![Some(0), Some(0)]);
        assert_eq!(s.validate(&g), Err(SmgError::ForeignChoice(1)));
    }
}
