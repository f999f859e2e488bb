use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use super::{Distribution, PlayerId, RewardStructure, Smg, SmgError, StateId, DEADLOCK_ACTION};
use crate::scalar::Scalar;

/// Handle to an action declared on a builder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionRef {
    pub state: StateId,
    pub local: usize,
}

struct PendingAction<T> {
    label: u32,
    support: Vec<(StateId, T)>,
}

/// Incremental construction of an [`Smg`]; all checks happen in [`SmgBuilder::build`]
/// except name collisions, which are reported immediately. Duplicate rewards
/// on one action are reported by `build`.
pub struct SmgBuilder<T> {
    players: Vec<String>,
    owners: Vec<PlayerId>,
    actions: Vec<Vec<PendingAction<T>>>,
    names: Vec<String>,
    name_index: HashMap<String, u32>,
    labels: BTreeMap<String, Vec<StateId>>,
    rewards: BTreeMap<String, Vec<(ActionRef, T)>>,
    initial: Option<StateId>,
}

impl<T: Scalar> Default for SmgBuilder<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> SmgBuilder<T> {
    pub fn new() -> Self {
        SmgBuilder {
            players: Vec::new(),
            owners: Vec::new(),
            actions: Vec::new(),
            names: Vec::new(),
            name_index: HashMap::new(),
            labels: BTreeMap::new(),
            rewards: BTreeMap::new(),
            initial: None,
        }
    }

    pub fn add_player(&mut self, name: &str) -> Result<PlayerId, SmgError> {
        if self.players.iter().any(|p| p == name) {
            return Err(SmgError::DuplicateName(name.to_string()));
        }
        self.players.push(name.to_string());
        Ok(PlayerId(self.players.len() - 1))
    }

    pub fn num_states(&self) -> usize {
        self.owners.len()
    }

    pub fn add_state(&mut self, owner: PlayerId) -> StateId {
        self.owners.push(owner);
        self.actions.push(Vec::new());
        self.owners.len() - 1
    }

    fn intern(&mut self, label: &str) -> u32 {
        if let Some(&id) = self.name_index.get(label) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(label.to_string());
        self.name_index.insert(label.to_string(), id);
        id
    }

    /// Declares an action; the distribution is validated at build time.
    pub fn add_action(
        &mut self,
        state: StateId,
        label: &str,
        support: Vec<(StateId, T)>,
    ) -> Result<ActionRef, SmgError> {
        if state >= self.owners.len() {
            return Err(SmgError::DanglingReference {
                kind: "state",
                name: state.to_string(),
            });
        }
        let id = self.intern(label);
        if self.actions[state].iter().any(|a| a.label == id) {
            return Err(SmgError::DuplicateName(format!("{label} (state {state})")));
        }
        self.actions[state].push(PendingAction { label: id, support });
        Ok(ActionRef {
            state,
            local: self.actions[state].len() - 1,
        })
    }

    pub fn action_ref(&self, state: StateId, label: &str) -> Option<ActionRef> {
        let id = *self.name_index.get(label)?;
        let local = self.actions.get(state)?.iter().position(|a| a.label == id)?;
        Some(ActionRef { state, local })
    }

    pub fn add_label(&mut self, name: &str, states: Vec<StateId>) -> Result<(), SmgError> {
        if self.labels.contains_key(name) {
            return Err(SmgError::DuplicateName(name.to_string()));
        }
        self.labels.insert(name.to_string(), states);
        Ok(())
    }

    /// Declares an (initially empty) reward structure.
    pub fn add_reward_structure(&mut self, name: &str) -> Result<(), SmgError> {
        if self.rewards.contains_key(name) {
            return Err(SmgError::DuplicateName(name.to_string()));
        }
        self.rewards.insert(name.to_string(), Vec::new());
        Ok(())
    }

    /// Adds an action reward, creating the structure on first use.
    pub fn add_reward(&mut self, name: &str, action: ActionRef, value: T) -> Result<(), SmgError> {
        match self.rewards.get_mut(name) {
            Some(entries) => entries.push((action, value)),
            None => {
                self.rewards.insert(name.to_string(), vec![(action, value)]);
            }
        }
        Ok(())
    }

    pub fn set_initial(&mut self, state: StateId) {
        self.initial = Some(state);
    }

    pub fn build(mut self) -> Result<Smg<T>, SmgError> {
        let n = self.owners.len();
        for (i, &PlayerId(p)) in self.owners.iter().enumerate() {
            if p >= self.players.len() {
                return Err(SmgError::DanglingReference {
                    kind: "player",
                    name: format!("{p} (owner of state {i})"),
                });
            }
        }
        if let Some(s) = self.initial {
            if s >= n {
                return Err(SmgError::DanglingReference {
                    kind: "state",
                    name: s.to_string(),
                });
            }
        }
        let loop_label = self.intern(DEADLOCK_ACTION);
        for (s, acts) in self.actions.iter_mut().enumerate() {
            if acts.is_empty() {
                acts.push(PendingAction {
                    label: loop_label,
                    support: vec![(s, T::one())],
                });
            }
        }

        let mut action_start = Vec::with_capacity(n + 1);
        let mut action_label = Vec::new();
        let mut trans_start = vec![0];
        let mut succ = Vec::new();
        let mut prob = Vec::new();
        action_start.push(0);
        for (s, acts) in self.actions.iter().enumerate() {
            for a in acts {
                if let Some(&(t, _)) = a.support.iter().find(|(t, _)| *t >= n) {
                    return Err(SmgError::DanglingReference {
                        kind: "state",
                        name: t.to_string(),
                    });
                }
                let dist = Distribution::new(a.support.clone()).map_err(|reason| {
                    SmgError::BadDistribution {
                        state: s,
                        action: self.names[a.label as usize].clone(),
                        reason,
                    }
                })?;
                action_label.push(a.label);
                for &(t, p) in dist.support() {
                    succ.push(t);
                    prob.push(p);
                }
                trans_start.push(succ.len());
            }
            action_start.push(action_label.len());
        }

        let mut labels = BTreeMap::new();
        for (name, mut states) in std::mem::take(&mut self.labels) {
            if let Some(&s) = states.iter().find(|&&s| s >= n) {
                return Err(SmgError::DanglingReference {
                    kind: "state",
                    name: s.to_string(),
                });
            }
            states.sort_unstable();
            states.dedup();
            labels.insert(name, states);
        }

        let mut rewards = BTreeMap::new();
        for (name, mut entries) in std::mem::take(&mut self.rewards) {
            entries.sort_by_key(|&(a, _)| a);
            if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(SmgError::DuplicateName(format!(
                    "reward {name} at state {} action {}",
                    w[0].0.state, w[0].0.local
                )));
            }
            let mut dense = Vec::with_capacity(entries.len());
            for (ar, v) in entries {
                if ar.state >= n || ar.local >= self.actions[ar.state].len() {
                    return Err(SmgError::DanglingReference {
                        kind: "action",
                        name: format!("{} of state {}", ar.local, ar.state),
                    });
                }
                if !(v >= T::zero()) || !v.is_finite() {
                    return Err(SmgError::BadReward {
                        name,
                        reason: format!("value {v} is not finite and nonnegative"),
                    });
                }
                if v > T::zero() {
                    dense.push((action_start[ar.state] + ar.local, v));
                }
            }
            rewards.insert(name, RewardStructure::from_entries(dense));
        }

        Ok(Smg {
            players: self.players,
            owner: self.owners,
            action_start,
            action_label,
            action_names: self.names,
            trans_start,
            succ,
            prob,
            labels,
            rewards,
            initial: self.initial,
            preds: OnceLock::new(),
        })
    }
}
