//! Value iteration and strategy synthesis for the supported rPATL fragment.

mod graph;
mod iterate;
mod prob;
mod reward;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::rpatl::{Direction, Formula, Objective, Query};
use crate::smg::{induced_game, PlayerId, Smg, SmgError, StateId, StepTable, Strategy};
use crate::Scalar;

pub use crate::rpatl::Star;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("bad target: {0}")]
    BadTarget(String),
    #[error("unknown reward structure `{0}`")]
    UnknownReward(String),
    #[error("unknown player `{0}`")]
    UnknownPlayer(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("state {0} out of range")]
    BadState(StateId),
    #[error("value iteration did not converge after {iterations} sweeps")]
    NotConverged { iterations: usize },
    #[error("formula coalition overlaps the fixed strategy's coalition")]
    CoalitionOverlap,
    #[error(transparent)]
    Smg(#[from] SmgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Unbounded,
    Steps(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Probability,
    ExpectedReward,
}

/// Per-state result; infinite rewards are `T::infinity()`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueVector<T> {
    pub values: Vec<T>,
    pub kind: ValueKind,
}

impl<T: Scalar> ValueVector<T> {
    /// `state,value` rows with `inf` for infinite values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,value\n");
        for (s, v) in self.values.iter().enumerate() {
            writeln!(out, "{s},{}", format_value(*v)).unwrap();
        }
        out
    }
}

pub fn format_value<T: Scalar>(v: T) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        v.to_string()
    }
}

/// Values together with optimal strategies for both sides.
#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub values: ValueVector<T>,
    pub strategy: Strategy,
    /// Optimal counter-strategy of the players outside the coalition.
    pub adversary: Strategy,
}

#[derive(Debug, Clone)]
pub struct CheckResult<T> {
    pub values: ValueVector<T>,
    pub initial: StateId,
    /// Value at the initial state.
    pub value: T,
    /// For bound queries: the states satisfying the bound.
    pub satisfying: Option<Vec<StateId>>,
    /// For bound queries: whether the initial state satisfies it.
    pub holds: Option<bool>,
    pub strategy: Option<Strategy>,
}

/// Value iteration engine with its numeric settings.
#[derive(Debug, Clone, Copy)]
pub struct Engine<T> {
    /// Convergence threshold on the absolute per-state change.
    pub epsilon: T,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for Engine<T> {
    fn default() -> Self {
        Engine {
            epsilon: T::default_epsilon(),
            max_iterations: 1_000_000,
        }
    }
}

/// `true` for states whose owner pushes the value up.
pub(crate) fn maximising_states<T: Scalar>(g: &Smg<T>, coalition: &BTreeSet<PlayerId>, dir: Direction) -> Vec<bool> {
    (0..g.num_states())
        .map(|s| coalition.contains(&g.owner(s)) == (dir == Direction::Max))
        .collect()
}

pub(crate) fn target_mask<T: Scalar>(g: &Smg<T>, target: &[StateId]) -> Result<Vec<bool>, EngineError> {
    if target.is_empty() {
        return Err(EngineError::BadTarget("empty target set".into()));
    }
    let mut mask = vec![false; g.num_states()];
    for &s in target {
        if s >= g.num_states() {
            return Err(EngineError::BadTarget(format!("state {s} out of range")));
        }
        mask[s] = true;
    }
    Ok(mask)
}

/// Splits a full profile (one global action per state) into the coalition
/// strategy and the adversary strategy.
pub(crate) fn split_profile<T: Scalar>(
    g: &Smg<T>,
    coalition: &BTreeSet<PlayerId>,
    profile: &[usize],
) -> (Strategy, Strategy) {
    let adversary: BTreeSet<PlayerId> = (0..g.players().len())
        .map(PlayerId)
        .filter(|p| !coalition.contains(p))
        .collect();
    let (ours, theirs) = split_row(g, coalition, profile);
    (
        Strategy::memoryless(coalition.clone(), ours),
        Strategy::memoryless(adversary, theirs),
    )
}

pub(crate) fn split_row<T: Scalar>(
    g: &Smg<T>,
    coalition: &BTreeSet<PlayerId>,
    profile: &[usize],
) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
    let mut ours = vec![None; g.num_states()];
    let mut theirs = vec![None; g.num_states()];
    for (s, &a) in profile.iter().enumerate() {
        let local = a - g.actions(s).start;
        if coalition.contains(&g.owner(s)) {
            ours[s] = Some(local);
        } else {
            theirs[s] = Some(local);
        }
    }
    (ours, theirs)
}

pub(crate) fn step_strategies<T: Scalar>(
    g: &Smg<T>,
    coalition: &BTreeSet<PlayerId>,
    ours: StepTable,
    theirs: StepTable,
) -> (Strategy, Strategy) {
    let adversary: BTreeSet<PlayerId> = (0..g.players().len())
        .map(PlayerId)
        .filter(|p| !coalition.contains(p))
        .collect();
    (
        Strategy::step_indexed(coalition.clone(), ours),
        Strategy::step_indexed(adversary, theirs),
    )
}

/// Set of states from which `coalition` can force reaching `target` with
/// probability one.
pub fn almost_sure_reach<T: Scalar>(
    g: &Smg<T>,
    coalition: &BTreeSet<PlayerId>,
    target: &[StateId],
) -> Result<BTreeSet<StateId>, EngineError> {
    let tgt = target_mask(g, target)?;
    let controlled: Vec<bool> = (0..g.num_states()).map(|s| coalition.contains(&g.owner(s))).collect();
    let r = graph::almost_sure_reach(g, &controlled, &tgt, None, None);
    Ok((0..g.num_states()).filter(|&s| r.set[s]).collect())
}

fn resolve_coalition<T: Scalar>(g: &Smg<T>, names: &BTreeSet<String>) -> Result<BTreeSet<PlayerId>, EngineError> {
    names
        .iter()
        .map(|n| g.player_by_name(n).ok_or_else(|| EngineError::UnknownPlayer(n.clone())))
        .collect()
}

impl<T: Scalar> Engine<T> {
    pub fn new(epsilon: T) -> Self {
        Engine {
            epsilon,
            ..Self::default()
        }
    }

    /// Solves the formula on `g` and reports the result at `initial`.
    pub fn check(&self, g: &Smg<T>, initial: StateId, f: &Formula) -> Result<CheckResult<T>, EngineError> {
        if initial >= g.num_states() {
            return Err(EngineError::BadState(initial));
        }
        let coalition = resolve_coalition(g, &f.coalition)?;
        let target = g
            .label(&f.target)
            .ok_or_else(|| EngineError::UnknownLabel(f.target.clone()))?;
        let dir = f.query.direction();
        let sol = match &f.objective {
            Objective::Prob { horizon } => {
                let h = horizon.map_or(Horizon::Unbounded, Horizon::Steps);
                self.solve_prob(g, &coalition, target, h, dir)?
            }
            Objective::Reward { name, star } => self.solve_reward(g, &coalition, name, target, *star, dir)?,
        };
        let value = sol.values.values[initial];
        let (satisfying, holds) = match f.query {
            Query::Bound(rel, q) => {
                let sat: Vec<StateId> = (0..g.num_states())
                    .filter(|&s| rel.holds(sol.values.values[s].as_f64(), q))
                    .collect();
                let holds = rel.holds(value.as_f64(), q);
                (Some(sat), Some(holds))
            }
            Query::Numeric(_) => (None, None),
        };
        Ok(CheckResult {
            values: sol.values,
            initial,
            value,
            satisfying,
            holds,
            strategy: Some(sol.strategy),
        })
    }

    /// Checks `f` on the game obtained by fixing `sigma`. Values are
    /// reported per original state (with the full horizon remaining for
    /// step-indexed strategies).
    pub fn evaluate_under(
        &self,
        g: &Smg<T>,
        sigma: &Strategy,
        initial: StateId,
        f: &Formula,
    ) -> Result<CheckResult<T>, EngineError> {
        let coalition = resolve_coalition(g, &f.coalition)?;
        if coalition.iter().any(|p| sigma.coalition.contains(p)) {
            return Err(EngineError::CoalitionOverlap);
        }
        if initial >= g.num_states() {
            return Err(EngineError::BadState(initial));
        }
        let induced = induced_game(g, sigma)?;
        let mut r = self.check(&induced.game, induced.initial_state(initial), f)?;
        if induced.layers > 1 {
            let n = g.num_states();
            let project = |v: &[T]| (0..n).map(|s| v[induced.initial_state(s)]).collect::<Vec<_>>();
            r.values.values = project(&r.values.values);
            r.satisfying = r.satisfying.map(|sat| {
                let top: BTreeSet<StateId> = sat.into_iter().collect();
                (0..n).filter(|&s| top.contains(&induced.initial_state(s))).collect()
            });
            // strategies of the product game do not map back onto `g`
            r.strategy = None;
        }
        r.initial = initial;
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rpatl::{parse_formula, Vocabulary};
    use crate::smg::text;

    pub(crate) const MICRO: &str = r#"
player 0 p1
player 1 p2
state 0 0
state 1 1
state 2 1
trans 0 a 1:0.3 2:0.7
trans 0 b 1:0.7 2:0.3
label "goal" 1
label "start" 0
reward "r" 0 a 1
reward "r" 0 b 2
init 0
"#;

    fn run(src: &str, formula: &str) -> CheckResult<f64> {
        let g: Smg<f64> = text::parse(src).unwrap();
        let f = parse_formula(formula, &Vocabulary::of_game(&g)).unwrap();
        Engine::default().check(&g, g.initial().unwrap(), &f).unwrap()
    }

    #[test]
    fn micro_game_queries() {
        let max = run(MICRO, r#"<<p1>> Pmax=? [ F "goal" ]"#);
        assert!((max.value - 0.7).abs() < 1e-12);
        assert_eq!(max.strategy.unwrap().choice(0), Some(1));
        let min = run(MICRO, r#"<<p1>> Pmin=? [ F "goal" ]"#);
        assert!((min.value - 0.3).abs() < 1e-12);
        assert_eq!(min.strategy.unwrap().choice(0), Some(0));
        let bound = run(MICRO, r#"<<p1>> P>=0.75 [ F<=5 "goal" ]"#);
        assert_eq!(bound.holds, Some(false));
        assert_eq!(bound.satisfying, Some(vec![1]));
        let start = run(MICRO, r#"<<>> P>=1 [ F "start" ]"#);
        assert_eq!(start.holds, Some(true));
    }

    #[test]
    fn unknown_names_and_bad_targets() {
        let g: Smg<f64> = text::parse(MICRO).unwrap();
        let e = Engine::default();
        let none = BTreeSet::new();
        assert!(matches!(
            e.solve_prob(&g, &none, &[], Horizon::Unbounded, Direction::Max),
            Err(EngineError::BadTarget(_))
        ));
        assert!(matches!(
            e.solve_prob(&g, &none, &[7], Horizon::Unbounded, Direction::Max),
            Err(EngineError::BadTarget(_))
        ));
        assert!(matches!(
            e.solve_reward(&g, &none, "nope", &[1], Star::Cumulative, Direction::Max),
            Err(EngineError::UnknownReward(_))
        ));
    }

    #[test]
    fn evaluate_under_fixes_choice() {
        let g: Smg<f64> = text::parse(MICRO).unwrap();
        let e = Engine::default();
        let sigma = Strategy::memoryless([PlayerId(0)].into(), vec![Some(0), None, None]);
        let f = parse_formula(r#"<<>> Pmax=? [ F "goal" ]"#, &Vocabulary::of_game(&g)).unwrap();
        let r = e.evaluate_under(&g, &sigma, 0, &f).unwrap();
        assert!((r.value - 0.3).abs() < 1e-12);
        let overlap = parse_formula(r#"<<p1>> Pmax=? [ F "goal" ]"#, &Vocabulary::of_game(&g)).unwrap();
        assert_eq!(e.evaluate_under(&g, &sigma, 0, &overlap).unwrap_err(), EngineError::CoalitionOverlap);
        // the empty coalition's strategy leaves the game unchanged
        let empty = Strategy::memoryless(BTreeSet::new(), vec![None; 3]);
        assert_eq!(e.evaluate_under(&g, &empty, 0, &f).unwrap().value, e.check(&g, 0, &f).unwrap().value);
    }

    #[test]
    fn bounded_strategy_is_step_indexed() {
        let g: Smg<f64> = text::parse(MICRO).unwrap();
        let e = Engine::default();
        let f = parse_formula(r#"<<p1>> Pmax=? [ F<=3 "goal" ]"#, &Vocabulary::of_game(&g)).unwrap();
        let r = e.check(&g, 0, &f).unwrap();
        let sigma = r.strategy.unwrap();
        assert!(!sigma.is_memoryless());
        let again = parse_formula(r#"<<>> Pmax=? [ F<=3 "goal" ]"#, &Vocabulary::of_game(&g)).unwrap();
        let u = e.evaluate_under(&g, &sigma, 0, &again).unwrap();
        assert!((u.value - r.value).abs() < 1e-12);
    }
}
