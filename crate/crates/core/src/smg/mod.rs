//! Explicit turn-based stochastic multi-player games.
//!
//! States are dense indices assigned at build time. Actions are stored per
//! state in declaration order, and each action owns a probability
//! distribution over successor states. The whole structure lives in flat
//! CSR-style arrays so solvers can sweep it without chasing pointers.

mod builder;
mod strategy;
pub mod text;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

use crate::scalar::Scalar;

pub use builder::{ActionRef, SmgBuilder};
pub use strategy::{Choices, StepTable, Strategy};

/// Dense state index.
pub type StateId = usize;

/// Name of the self-loop action added to states without any action.
pub const DEADLOCK_ACTION: &str = "loop";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlayerId(pub usize);

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmgError {
    #[error("reference to undeclared {kind} `{name}`")]
    DanglingReference { kind: &'static str, name: String },
    #[error("bad distribution for state {state} action `{action}`: {reason}")]
    BadDistribution {
        state: StateId,
        action: String,
        reason: String,
    },
    #[error("reward `{name}`: {reason}")]
    BadReward { name: String, reason: String },
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("no strategy choice for coalition state {0}")]
    UndefinedChoice(StateId),
    #[error("strategy chooses action {action} which is not enabled in state {state}")]
    DisabledAction { state: StateId, action: usize },
    #[error("strategy defines a choice for state {0} which is not owned by its coalition")]
    ForeignChoice(StateId),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Probability distribution over successor states.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T> {
    support: Vec<(StateId, T)>,
}

impl<T: Scalar> Distribution<T> {
    /// Validates positivity, uniqueness of support states and the unit sum.
    pub fn new(support: Vec<(StateId, T)>) -> Result<Self, String> {
        if support.is_empty() {
            return Err("empty support".into());
        }
        let mut seen = BTreeSet::new();
        let mut total = T::zero();
        for &(s, p) in &support {
            if !(p > T::zero() && p <= T::one()) {
                return Err(format!("probability {p} for state {s} outside (0,1]"));
            }
            if !seen.insert(s) {
                return Err(format!("state {s} appears twice in the support"));
            }
            total = total + p;
        }
        if (total - T::one()).abs() > T::distribution_tolerance() {
            return Err(format!("probabilities sum to {total}"));
        }
        Ok(Distribution { support })
    }

    pub fn dirac(state: StateId) -> Self {
        Distribution {
            support: vec![(state, T::one())],
        }
    }

    pub fn support(&self) -> &[(StateId, T)] {
        &self.support
    }
}

/// Sparse action rewards, keyed by global action index.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardStructure<T> {
    entries: Vec<(usize, T)>,
}

impl<T: Scalar> RewardStructure<T> {
    fn from_entries(mut entries: Vec<(usize, T)>) -> Self {
        entries.sort_by_key(|e| e.0);
        RewardStructure { entries }
    }

    pub fn get(&self, action: usize) -> T {
        match self.entries.binary_search_by_key(&action, |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => T::zero(),
        }
    }

    /// Reward per global action index.
    pub fn dense(&self, num_actions: usize) -> Vec<T> {
        let mut out = vec![T::zero(); num_actions];
        for &(a, r) in &self.entries {
            out[a] = r;
        }
        out
    }

    pub fn entries(&self) -> &[(usize, T)] {
        &self.entries
    }
}

/// A validated, immutable stochastic game.
#[derive(Debug)]
pub struct Smg<T> {
    players: Vec<String>,
    owner: Vec<PlayerId>,
    action_start: Vec<usize>,
    action_label: Vec<u32>,
    action_names: Vec<String>,
    trans_start: Vec<usize>,
    succ: Vec<StateId>,
    prob: Vec<T>,
    labels: BTreeMap<String, Vec<StateId>>,
    rewards: BTreeMap<String, RewardStructure<T>>,
    initial: Option<StateId>,
    preds: OnceLock<Predecessors>,
}

impl<T: Clone> Clone for Smg<T> {
    fn clone(&self) -> Self {
        Smg {
            players: self.players.clone(),
            owner: self.owner.clone(),
            action_start: self.action_start.clone(),
            action_label: self.action_label.clone(),
            action_names: self.action_names.clone(),
            trans_start: self.trans_start.clone(),
            succ: self.succ.clone(),
            prob: self.prob.clone(),
            labels: self.labels.clone(),
            rewards: self.rewards.clone(),
            initial: self.initial,
            preds: OnceLock::new(),
        }
    }
}

/// Reverse edges: for every state, the global actions that can move into it.
#[derive(Debug)]
pub struct Predecessors {
    start: Vec<usize>,
    actions: Vec<usize>,
    source: Vec<StateId>,
}

impl Predecessors {
    pub fn of(&self, state: StateId) -> &[usize] {
        &self.actions[self.start[state]..self.start[state + 1]]
    }

    /// State owning a global action.
    pub fn source(&self, action: usize) -> StateId {
        self.source[action]
    }
}

impl<T: Scalar> Smg<T> {
    pub fn num_states(&self) -> usize {
        self.owner.len()
    }

    pub fn num_actions(&self) -> usize {
        self.action_label.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.succ.len()
    }

    pub fn players(&self) -> &[String] {
        &self.players
    }

    pub fn player_by_name(&self, name: &str) -> Option<PlayerId> {
        self.players.iter().position(|p| p == name).map(PlayerId)
    }

    pub fn owner(&self, s: StateId) -> PlayerId {
        self.owner[s]
    }

    pub fn initial(&self) -> Option<StateId> {
        self.initial
    }

    /// Global action indices of state `s`.
    pub fn actions(&self, s: StateId) -> std::ops::Range<usize> {
        self.action_start[s]..self.action_start[s + 1]
    }

    pub fn num_actions_of(&self, s: StateId) -> usize {
        self.action_start[s + 1] - self.action_start[s]
    }

    /// Global index of the `local`-th action of `s`.
    pub fn action_index(&self, s: StateId, local: usize) -> usize {
        self.action_start[s] + local
    }

    pub fn action_name(&self, action: usize) -> &str {
        &self.action_names[self.action_label[action] as usize]
    }

    /// Local index of the action labelled `label` in state `s`.
    pub fn find_action(&self, s: StateId, label: &str) -> Option<usize> {
        self.actions(s).position(|a| self.action_name(a) == label)
    }

    /// Successors and probabilities of a global action.
    pub fn transitions(&self, action: usize) -> impl Iterator<Item = (StateId, T)> + '_ {
        let r = self.trans_start[action]..self.trans_start[action + 1];
        self.succ[r.clone()].iter().copied().zip(self.prob[r].iter().copied())
    }

    pub fn successors(&self, action: usize) -> &[StateId] {
        &self.succ[self.trans_start[action]..self.trans_start[action + 1]]
    }

    pub fn labels(&self) -> &BTreeMap<String, Vec<StateId>> {
        &self.labels
    }

    pub fn label(&self, name: &str) -> Option<&[StateId]> {
        self.labels.get(name).map(Vec::as_slice)
    }

    /// Membership mask of a label.
    pub fn label_mask(&self, name: &str) -> Option<Vec<bool>> {
        let states = self.labels.get(name)?;
        let mut mask = vec![false; self.num_states()];
        for &s in states {
            mask[s] = true;
        }
        Some(mask)
    }

    pub fn rewards(&self) -> &BTreeMap<String, RewardStructure<T>> {
        &self.rewards
    }

    pub fn reward(&self, name: &str) -> Option<&RewardStructure<T>> {
        self.rewards.get(name)
    }

    pub fn predecessors(&self) -> &Predecessors {
        self.preds.get_or_init(|| {
            let n = self.num_states();
            let mut count = vec![0usize; n + 1];
            for &t in &self.succ {
                count[t + 1] += 1;
            }
            for i in 0..n {
                count[i + 1] += count[i];
            }
            let mut fill = count.clone();
            let mut actions = vec![0usize; self.succ.len()];
            for a in 0..self.num_actions() {
                for &t in self.successors(a) {
                    actions[fill[t]] = a;
                    fill[t] += 1;
                }
            }
            let mut source = vec![0; self.num_actions()];
            for st in 0..n {
                for a in self.actions(st) {
                    source[a] = st;
                }
            }
            Predecessors {
                start: count,
                actions,
                source,
            }
        })
    }

    /// State owning a global action.
    pub fn action_state(&self, action: usize) -> StateId {
        self.action_start.partition_point(|&start| start <= action) - 1
    }

    /// Keeps, for every state, only the actions selected by `keep`, and renumbers
    /// states through `remap` (states mapped to `None` are dropped).
    fn restrict(
        &self,
        keep: impl Fn(StateId, usize) -> bool,
        remap: &[Option<StateId>],
        new_len: usize,
    ) -> Smg<T> {
        let mut old_of_new = vec![0; new_len];
        for (old, new) in remap.iter().enumerate() {
            if let Some(new) = new {
                old_of_new[*new] = old;
            }
        }
        let mut out = Smg {
            players: self.players.clone(),
            owner: Vec::with_capacity(new_len),
            action_start: vec![0],
            action_label: Vec::new(),
            action_names: self.action_names.clone(),
            trans_start: vec![0],
            succ: Vec::new(),
            prob: Vec::new(),
            labels: BTreeMap::new(),
            rewards: BTreeMap::new(),
            initial: self.initial.and_then(|s| remap[s]),
            preds: OnceLock::new(),
        };
        let mut action_map = vec![None; self.num_actions()];
        for &old in &old_of_new {
            out.owner.push(self.owner[old]);
            for (local, a) in self.actions(old).enumerate() {
                if !keep(old, local) {
                    continue;
                }
                action_map[a] = Some(out.action_label.len());
                out.action_label.push(self.action_label[a]);
                for (t, p) in self.transitions(a) {
                    out.succ.push(remap[t].expect("restriction must be closed under successors"));
                    out.prob.push(p);
                }
                out.trans_start.push(out.succ.len());
            }
            out.action_start.push(out.action_label.len());
        }
        for (name, states) in &self.labels {
            let mut mapped: Vec<StateId> = states.iter().filter_map(|&s| remap[s]).collect();
            mapped.sort_unstable();
            out.labels.insert(name.clone(), mapped);
        }
        for (name, rs) in &self.rewards {
            let entries = rs
                .entries
                .iter()
                .filter_map(|&(a, r)| action_map[a].map(|na| (na, r)))
                .collect();
            out.rewards
                .insert(name.clone(), RewardStructure::from_entries(entries));
        }
        out
    }
}

/// Restriction of a game to the states reachable from an initial state.
#[derive(Debug, Clone)]
pub struct Fragment<T> {
    pub game: Smg<T>,
    /// Original id of every fragment state.
    pub old_of_new: Vec<StateId>,
    /// Fragment id of every original state, if reachable.
    pub new_of_old: Vec<Option<StateId>>,
}

/// Breadth-first restriction of `g` to the states reachable from `initial`.
///
/// States are renumbered in discovery order, so `initial` becomes state 0 and
/// applying the operation twice is the identity.
pub fn reachable_fragment<T: Scalar>(g: &Smg<T>, initial: StateId) -> Fragment<T> {
    let mut new_of_old = vec![None; g.num_states()];
    let mut old_of_new = Vec::new();
    let mut queue = VecDeque::new();
    new_of_old[initial] = Some(0);
    old_of_new.push(initial);
    queue.push_back(initial);
    while let Some(s) = queue.pop_front() {
        for a in g.actions(s) {
            for &t in g.successors(a) {
                if new_of_old[t].is_none() {
                    new_of_old[t] = Some(old_of_new.len());
                    old_of_new.push(t);
                    queue.push_back(t);
                }
            }
        }
    }
    let mut game = g.restrict(|_, _| true, &new_of_old, old_of_new.len());
    game.initial = Some(0);
    Fragment {
        game,
        old_of_new,
        new_of_old,
    }
}

/// Game obtained by fixing a coalition's strategy.
#[derive(Debug, Clone)]
pub struct InducedGame<T> {
    pub game: Smg<T>,
    /// Number of copies of the state space (`horizon + 1` for step-indexed
    /// strategies, 1 otherwise).
    pub layers: usize,
    base_states: usize,
}

impl<T> InducedGame<T> {
    /// State of the induced game corresponding to `state` with `remaining`
    /// steps left. For memoryless strategies `remaining` is ignored.
    pub fn state(&self, state: StateId, remaining: usize) -> StateId {
        if self.layers == 1 {
            state
        } else {
            remaining.min(self.layers - 1) * self.base_states + state
        }
    }

    /// Image of an original state at the start of play.
    pub fn initial_state(&self, state: StateId) -> StateId {
        self.state(state, self.layers - 1)
    }
}

/// Fixes the choices of `sigma`'s coalition in `g`.
///
/// Coalition states keep only the chosen action; every other state,
/// transition, label and reward is carried over. A step-indexed strategy is
/// first unfolded into the product with a remaining-steps counter; in the
/// layer with no steps left coalition states keep their first action.
pub fn induced_game<T: Scalar>(g: &Smg<T>, sigma: &Strategy) -> Result<InducedGame<T>, SmgError> {
    sigma.validate(g)?;
    let n = g.num_states();
    match &sigma.choices {
        Choices::Memoryless(choice) => {
            let identity: Vec<Option<StateId>> = (0..n).map(Some).collect();
            let game = g.restrict(
                |s, local| match choice[s] {
                    Some(c) if sigma.coalition.contains(&g.owner(s)) => c == local,
                    _ => true,
                },
                &identity,
                n,
            );
            Ok(InducedGame {
                game,
                layers: 1,
                base_states: n,
            })
        }
        Choices::StepIndexed(table) => {
            let horizon = table.horizon();
            let layers = horizon + 1;
            let mut out = Smg {
                players: g.players.clone(),
                owner: Vec::with_capacity(n * layers),
                action_start: vec![0],
                action_label: Vec::new(),
                action_names: g.action_names.clone(),
                trans_start: vec![0],
                succ: Vec::new(),
                prob: Vec::new(),
                labels: BTreeMap::new(),
                rewards: BTreeMap::new(),
                initial: g.initial.map(|s| horizon * n + s),
                preds: OnceLock::new(),
            };
            let mut reward_entries: BTreeMap<&str, Vec<(usize, T)>> =
                g.rewards.keys().map(|k| (k.as_str(), Vec::new())).collect();
            for r in 0..layers {
                let next = r.saturating_sub(1);
                for s in 0..n {
                    out.owner.push(g.owner[s]);
                    let controlled = sigma.coalition.contains(&g.owner(s));
                    let chosen = if !controlled {
                        None
                    } else if r == 0 {
                        Some(0)
                    } else {
                        table.row(r)[s]
                    };
                    for (local, a) in g.actions(s).enumerate() {
                        if chosen.is_some_and(|c| c != local) {
                            continue;
                        }
                        let new_a = out.action_label.len();
                        out.action_label.push(g.action_label[a]);
                        for (t, p) in g.transitions(a) {
                            out.succ.push(next * n + t);
                            out.prob.push(p);
                        }
                        out.trans_start.push(out.succ.len());
                        for (name, rs) in &g.rewards {
                            let v = rs.get(a);
                            if v > T::zero() {
                                reward_entries.get_mut(name.as_str()).unwrap().push((new_a, v));
                            }
                        }
                    }
                    out.action_start.push(out.action_label.len());
                }
            }
            for (name, states) in &g.labels {
                let mut lifted = Vec::with_capacity(states.len() * layers);
                for r in 0..layers {
                    lifted.extend(states.iter().map(|&s| r * n + s));
                }
                out.labels.insert(name.clone(), lifted);
            }
            for (name, entries) in reward_entries {
                out.rewards
                    .insert(name.to_string(), RewardStructure::from_entries(entries));
            }
            Ok(InducedGame {
                game: out,
                layers,
                base_states: n,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn branching() -> Smg<f64> {
        let mut b = SmgBuilder::new();
        let p = b.add_player("p1").unwrap();
        let s0 = b.add_state(p);
        let s1 = b.add_state(p);
        let s2 = b.add_state(p);
        b.add_action(s0, "a", vec![(s1, 0.6), (s2, 0.4)]).unwrap();
        b.add_action(s0, "b", vec![(s1, 1.0)]).unwrap();
        b.add_label("goal", vec![s1]).unwrap();
        b.add_reward(
            "r",
            b.action_ref(s0, "a").unwrap(),
            2.0,
        )
        .unwrap();
        b.set_initial(s0);
        b.build().unwrap()
    }

    #[test]
    fn deadlocks_closed_with_self_loop() {
        let mut b = SmgBuilder::<f64>::new();
        let p = b.add_player("p").unwrap();
        let s0 = b.add_state(p);
        let g = b.build().unwrap();
        assert_eq!(g.num_actions_of(s0), 1);
        let a = g.action_index(s0, 0);
        assert_eq!(g.action_name(a), DEADLOCK_ACTION);
        assert_eq!(g.transitions(a).collect::<Vec<_>>(), vec![(s0, 1.0)]);
    }

    #[test]
    fn valid_and_invalid_distributions() {
        let g = branching();
        assert_eq!(g.num_actions_of(0), 2);
        let mut b = SmgBuilder::<f64>::new();
        let p = b.add_player("p").unwrap();
        let s0 = b.add_state(p);
        let s1 = b.add_state(p);
        let s2 = b.add_state(p);
        b.add_action(s0, "a", vec![(s1, 0.6), (s2, 0.6)]).unwrap();
        assert!(matches!(b.build(), Err(SmgError::BadDistribution { .. })));
    }

    #[test]
    fn duplicate_reward_rejected_at_build() {
        let mut b = SmgBuilder::<f64>::new();
        let p = b.add_player("p").unwrap();
        let s0 = b.add_state(p);
        let a = b.add_action(s0, "a", vec![(s0, 1.0)]).unwrap();
        b.add_reward("r", a, 1.0).unwrap();
        b.add_reward("r", a, 2.0).unwrap();
        assert!(matches!(b.build(), Err(SmgError::DuplicateName(_))));
    }

    #[test]
    fn nonpositive_probability_rejected() {
        let mut b = SmgBuilder::<f64>::new();
        let p = b.add_player("p").unwrap();
        let s0 = b.add_state(p);
        let s1 = b.add_state(p);
        b.add_action(s0, "a", vec![(s1, 1.0), (s0, 0.0)]).unwrap();
        assert!(matches!(b.build(), Err(SmgError::BadDistribution { .. })));
    }

    #[test]
    fn dangling_and_duplicate_names() {
        let mut b = SmgBuilder::<f64>::new();
        let p = b.add_player("p").unwrap();
        let s0 = b.add_state(p);
        b.add_action(s0, "a", vec![(7, 1.0)]).unwrap();
        assert!(matches!(b.build(), Err(SmgError::DanglingReference { .. })));

        let mut b = SmgBuilder::<f64>::new();
        let p = b.add_player("p").unwrap();
        let s0 = b.add_state(p);
        b.add_label("x", vec![s0]).unwrap();
        assert_eq!(b.add_label("x", vec![s0]), Err(SmgError::DuplicateName("x".into())));
        b.add_reward_structure("r").unwrap();
        assert!(b.add_reward_structure("r").is_err());
        assert!(b.add_player("p").is_err());
    }

    #[test]
    fn induced_game_keeps_chosen_action() {
        let g = branching();
        let sigma = Strategy::memoryless(
            [PlayerId(0)].into_iter().collect(),
            vec![Some(1), Some(0), Some(0)],
        );
        let ind = induced_game(&g, &sigma).unwrap();
        assert_eq!(ind.game.num_actions_of(0), 1);
        assert_eq!(ind.game.action_name(ind.game.action_index(0, 0)), "b");
        // reward was on the dropped action
        assert!(ind.game.reward("r").unwrap().entries().is_empty());
    }

    #[test]
    fn induced_game_empty_coalition_is_identity() {
        let g = branching();
        let sigma = Strategy::memoryless(BTreeSet::new(), vec![None; 3]);
        let ind = induced_game(&g, &sigma).unwrap();
        assert_eq!(ind.game.succ, g.succ);
        assert_eq!(ind.game.prob, g.prob);
        assert_eq!(ind.game.action_start, g.action_start);
        assert_eq!(ind.game.rewards, g.rewards);
    }

    #[test]
    fn induced_game_rejects_bad_strategies() {
        let g = branching();
        let coalition: BTreeSet<_> = [PlayerId(0)].into_iter().collect();
        let missing = Strategy::memoryless(coalition.clone(), vec![None, Some(0), Some(0)]);
        assert_eq!(induced_game(&g, &missing).unwrap_err(), SmgError::UndefinedChoice(0));
        let disabled = Strategy::memoryless(coalition, vec![Some(5), Some(0), Some(0)]);
        assert!(matches!(
            induced_game(&g, &disabled),
            Err(SmgError::DisabledAction { state: 0, .. })
        ));
    }

    #[test]
    fn step_indexed_product() {
        let g = branching();
        let coalition: BTreeSet<_> = [PlayerId(0)].into_iter().collect();
        let rows = vec![vec![Some(0), Some(0), Some(0)], vec![Some(1), Some(0), Some(0)]];
        let sigma = Strategy::step_indexed(coalition, StepTable::from_rows(rows));
        let ind = induced_game(&g, &sigma).unwrap();
        assert_eq!(ind.game.num_states(), 9);
        let top = ind.initial_state(0);
        assert_eq!(top, 6);
        let a = ind.game.action_index(top, 0);
        assert_eq!(ind.game.action_name(a), "b");
        assert_eq!(ind.game.successors(a), &[ind.state(1, 1)]);
        let mid = ind.state(0, 1);
        assert_eq!(ind.game.action_name(ind.game.action_index(mid, 0)), "a");
        assert_eq!(ind.game.label("goal").unwrap(), &[1, 4, 7]);
    }

    #[test]
    fn fragment_drops_unreachable_and_is_idempotent() {
        let mut b = SmgBuilder::<f64>::new();
        let p = b.add_player("p").unwrap();
        let s0 = b.add_state(p);
        let s1 = b.add_state(p);
        let s2 = b.add_state(p);
        b.add_action(s0, "a", vec![(s1, 1.0)]).unwrap();
        b.add_action(s2, "a", vec![(s0, 1.0)]).unwrap();
        b.add_label("all", vec![s0, s1, s2]).unwrap();
        let g = b.build().unwrap();
        let f = reachable_fragment(&g, s0);
        assert_eq!(f.game.num_states(), 2);
        assert_eq!(f.new_of_old[s2], None);
        assert_eq!(f.game.label("all").unwrap(), &[0, 1]);
        let ff = reachable_fragment(&f.game, 0);
        assert_eq!(ff.game.succ, f.game.succ);
        assert_eq!(ff.game.action_start, f.game.action_start);
        assert_eq!(ff.old_of_new, vec![0, 1]);
    }

    #[test]
    fn fully_connected_fragment_is_whole_game() {
        let g = branching();
        let f = reachable_fragment(&g, 0);
        assert_eq!(f.game.num_states(), 3);
        assert_eq!(f.game.succ, g.succ);
    }

    #[test]
    fn action_state_lookup() {
        let g = branching();
        assert_eq!(g.action_state(0), 0);
        assert_eq!(g.action_state(1), 0);
        assert_eq!(g.action_state(2), 1);
        assert_eq!(g.action_state(3), 2);
    }
}
