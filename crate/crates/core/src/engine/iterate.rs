//! Topologically ordered Gauss–Seidel sweeps and optimal-action extraction.

use super::{graph, EngineError};
use crate::smg::{Smg, StateId};
use crate::Scalar;

/// Change between two iterates, treating equal infinities as no change.
pub(crate) fn change<T: Scalar>(old: T, new: T) -> T {
    if old == new {
        T::zero()
    } else {
        (new - old).abs()
    }
}

/// `rew(a) + Σ p·v(t)` for global action `a`.
pub(crate) fn q_value<T: Scalar>(g: &Smg<T>, a: usize, rew: Option<&[T]>, v: &[T]) -> T {
    let r = rew.map_or(T::zero(), |r| r[a]);
    g.transitions(a).fold(r, |acc, (t, p)| acc + p * v[t])
}

/// Best action value at `s` and the first action attaining it.
pub(crate) fn best<T: Scalar>(g: &Smg<T>, s: StateId, maximise: bool, rew: Option<&[T]>, v: &[T]) -> (T, usize) {
    let mut acts = g.actions(s);
    let first = acts.next().expect("every state has an action");
    let mut best = (q_value(g, first, rew, v), first);
    for a in acts {
        let q = q_value(g, a, rew, v);
        if (maximise && q > best.0) || (!maximise && q < best.0) {
            best = (q, a);
        }
    }
    best
}

/// Runs `update` (which returns the change it made) over the `active`
/// states, one strongly connected component at a time, successors first.
/// A component is swept until a full pass changes no value by `epsilon`
/// or more.
pub(crate) fn sweep<T: Scalar>(
    g: &Smg<T>,
    active: &[bool],
    epsilon: T,
    max_iterations: usize,
    mut update: impl FnMut(StateId) -> T,
) -> Result<(), EngineError> {
    for comp in graph::sccs(g, active) {
        let s0 = comp[0];
        if comp.len() == 1 && !g.actions(s0).any(|a| g.successors(a).contains(&s0)) {
            update(s0);
            continue;
        }
        let mut sweeps = 0;
        loop {
            let mut delta = T::zero();
            for &s in &comp {
                delta = delta.max(update(s));
            }
            sweeps += 1;
            if delta < epsilon {
                break;
            }
            if sweeps >= max_iterations {
                return Err(EngineError::NotConverged { iterations: sweeps });
            }
        }
    }
    Ok(())
}

/// Marks, for every state, the actions whose value is within a tolerance
/// of the optimum.
pub(crate) fn tight_actions<T: Scalar>(
    g: &Smg<T>,
    is_max: &[bool],
    rew: Option<&[T]>,
    v: &[T],
    epsilon: T,
) -> Vec<bool> {
    let mut tight = vec![false; g.num_actions()];
    let slack = epsilon * T::of(100.0);
    for s in 0..g.num_states() {
        let (b, _) = best(g, s, is_max[s], rew, v);
        let tol = slack * T::one().max(b.abs());
        for a in g.actions(s) {
            let q = q_value(g, a, rew, v);
            tight[a] = if b.is_infinite() { q == b } else { (q - b).abs() <= tol };
        }
    }
    tight
}

/// First tight action of `s`.
pub(crate) fn first_tight<T: Scalar>(g: &Smg<T>, s: StateId, tight: &[bool]) -> usize {
    g.actions(s).find(|&a| tight[a]).unwrap_or(g.actions(s).start)
}
