//! Qualitative (graph-based) game analyses.
//!
//! Every function is phrased for a `controlled` player side against the
//! remaining states. Action masks are indexed by global action id.

use std::collections::VecDeque;

use crate::smg::{Smg, StateId};
use crate::Scalar;

pub(crate) struct Attractor {
    pub set: Vec<bool>,
    /// Global action leading closer to the target, for controlled states
    /// added by the attractor (not for the target itself).
    pub witness: Vec<Option<usize>>,
}

/// States from which the controlled side can reach `target` with positive
/// probability, staying inside `domain` and using only `allowed` actions.
///
/// Uncontrolled states join once every allowed action has a successor in the
/// set; an uncontrolled state without allowed actions never joins.
pub(crate) fn positive_attractor<T: Scalar>(
    g: &Smg<T>,
    controlled: &[bool],
    target: &[bool],
    domain: Option<&[bool]>,
    allowed: Option<&[bool]>,
) -> Attractor {
    attractor(g, controlled, target, domain, allowed, None)
}

/// As [`positive_attractor`], except that taking a `free` action counts as
/// progress by itself: a controlled state with an allowed free action joins
/// at once, and an uncontrolled state joins once each allowed action is free
/// or leads into the set.
fn attractor<T: Scalar>(
    g: &Smg<T>,
    controlled: &[bool],
    target: &[bool],
    domain: Option<&[bool]>,
    allowed: Option<&[bool]>,
    free: Option<&[bool]>,
) -> Attractor {
    let n = g.num_states();
    let preds = g.predecessors();
    let allowed_at = |a: usize| allowed.map_or(true, |m| m[a]);
    let in_domain = |s: usize| domain.map_or(true, |d| d[s]);
    let mut set = target.to_vec();
    let mut witness = vec![None; n];
    let mut hit: Vec<bool> = match free {
        Some(f) => (0..g.num_actions()).map(|a| f[a] && allowed_at(a)).collect(),
        None => vec![false; g.num_actions()],
    };
    let mut remaining: Vec<u32> = (0..n)
        .map(|s| g.actions(s).filter(|&a| allowed_at(a) && !hit[a]).count() as u32)
        .collect();
    if free.is_some() {
        for s in 0..n {
            if set[s] || !in_domain(s) {
                continue;
            }
            if controlled[s] {
                if let Some(a) = g.actions(s).find(|&a| hit[a]) {
                    set[s] = true;
                    witness[s] = Some(a);
                }
            } else if remaining[s] == 0 {
                set[s] = true;
            }
        }
    }
    let mut queue: VecDeque<StateId> = (0..n).filter(|&s| set[s]).collect();
    while let Some(t) = queue.pop_front() {
        for &a in preds.of(t) {
            if hit[a] || !allowed_at(a) {
                continue;
            }
            let s = preds.source(a);
            if set[s] || !in_domain(s) {
                continue;
            }
            hit[a] = true;
            if controlled[s] {
                set[s] = true;
                witness[s] = Some(a);
                queue.push_back(s);
            } else {
                remaining[s] -= 1;
                if remaining[s] == 0 {
                    set[s] = true;
                    queue.push_back(s);
                }
            }
        }
    }
    Attractor { set, witness }
}

pub(crate) struct AlmostSure {
    pub set: Vec<bool>,
    /// Controlled-side action realising almost-sure reachability.
    pub witness: Vec<Option<usize>>,
    /// For uncontrolled states outside `set`: an action keeping the
    /// probability of reaching the target below one.
    pub spoiler: Vec<Option<usize>>,
}

/// States from which the controlled side can force reaching `target` with
/// probability one (within `domain`, with `allowed` actions).
///
/// Greatest fixpoint over a positive attractor restricted to actions that
/// cannot leave the current candidate set.
pub(crate) fn almost_sure_reach<T: Scalar>(
    g: &Smg<T>,
    controlled: &[bool],
    target: &[bool],
    domain: Option<&[bool]>,
    allowed: Option<&[bool]>,
) -> AlmostSure {
    let n = g.num_states();
    let allowed_at = |a: usize| allowed.map_or(true, |m| m[a]);
    let mut y: Vec<bool> = (0..n).map(|s| target[s] || domain.map_or(true, |d| d[s])).collect();
    let mut spoiler = vec![None; n];
    let mut safe = vec![false; g.num_actions()];
    loop {
        for s in 0..n {
            for a in g.actions(s) {
                safe[a] = y[s] && g.successors(a).iter().all(|&t| y[t]);
            }
        }
        let round_domain: Vec<bool> = (0..n)
            .map(|s| {
                y[s] && (controlled[s] || target[s] || g.actions(s).all(|a| !allowed_at(a) || safe[a]))
            })
            .collect();
        let round_allowed: Vec<bool> = (0..g.num_actions()).map(|a| allowed_at(a) && safe[a]).collect();
        let tgt: Vec<bool> = (0..n).map(|s| target[s] && y[s]).collect();
        let attr = positive_attractor(g, controlled, &tgt, Some(&round_domain), Some(&round_allowed));
        let mut changed = false;
        for s in 0..n {
            if y[s] && !attr.set[s] {
                changed = true;
                if !controlled[s] {
                    let mut acts = g.actions(s).filter(|&a| allowed_at(a));
                    spoiler[s] = if round_domain[s] {
                        acts.find(|&a| g.successors(a).iter().all(|&t| !attr.set[t]))
                    } else {
                        acts.find(|&a| !safe[a])
                    };
                }
            }
        }
        if !changed {
            return AlmostSure {
                set: y,
                witness: attr.witness,
                spoiler,
            };
        }
        for s in 0..n {
            y[s] = y[s] && attr.set[s];
        }
    }
}

pub(crate) struct Buchi {
    pub set: Vec<bool>,
    pub witness: Vec<Option<usize>>,
}

/// States from which the controlled side can, with probability one, take
/// `good` actions infinitely often while staying in `domain`. Uncontrolled
/// states may only use `allowed` actions.
pub(crate) fn almost_sure_buchi<T: Scalar>(
    g: &Smg<T>,
    controlled: &[bool],
    good: &[bool],
    domain: &[bool],
    allowed: &[bool],
) -> Buchi {
    let n = g.num_states();
    let mut y = domain.to_vec();
    let mut safe = vec![false; g.num_actions()];
    loop {
        for s in 0..n {
            for a in g.actions(s) {
                safe[a] = y[s] && (controlled[s] || allowed[a]) && g.successors(a).iter().all(|&t| y[t]);
            }
        }
        let round_domain: Vec<bool> = (0..n)
            .map(|s| {
                y[s] && (controlled[s] || g.actions(s).all(|a| !allowed[a] || safe[a]))
            })
            .collect();
        let attr = attractor(g, controlled, &vec![false; n], Some(&round_domain), Some(&safe), Some(good));
        if (0..n).all(|s| attr.set[s] == y[s]) {
            return Buchi {
                set: y,
                witness: attr.witness,
            };
        }
        y = attr.set;
    }
}

/// States from which the controlled side can, with positive probability,
/// take `good` actions infinitely often without visiting `sink` states.
///
/// Alternates a positive attractor towards the states won so far with an
/// almost-sure Büchi analysis of the remaining trap, in which the other side
/// may only use actions that stay in the trap.
pub(crate) fn positive_buchi<T: Scalar>(g: &Smg<T>, controlled: &[bool], good: &[bool], sink: &[bool]) -> Buchi {
    let n = g.num_states();
    let live: Vec<bool> = sink.iter().map(|&s| !s).collect();
    let mut won = vec![false; n];
    let mut witness = vec![None; n];
    loop {
        let attr = positive_attractor(g, controlled, &won, Some(&live), None);
        for s in 0..n {
            if attr.set[s] && !won[s] {
                witness[s] = attr.witness[s];
            }
        }
        won = attr.set;
        let stays: Vec<bool> = (0..g.num_actions())
            .map(|a| g.successors(a).iter().all(|&t| !won[t]))
            .collect();
        let domain: Vec<bool> = (0..n).map(|s| live[s] && !won[s]).collect();
        let trap = almost_sure_buchi(g, controlled, good, &domain, &stays);
        if !trap.set.iter().any(|&b| b) {
            return Buchi { set: won, witness };
        }
        for s in (0..n).filter(|&s| trap.set[s]) {
            won[s] = true;
            witness[s] = trap.witness[s];
        }
    }
}

/// Strongly connected components in reverse topological order (successor
/// components first). Edges leave only `active` states and enter only
/// `active` states.
pub(crate) fn sccs<T: Scalar>(g: &Smg<T>, active: &[bool]) -> Vec<Vec<StateId>> {
    use petgraph::graph::{DiGraph, NodeIndex};
    let n = g.num_states();
    let mut index = vec![u32::MAX; n];
    let mut graph = DiGraph::<StateId, ()>::new();
    for s in (0..n).filter(|&s| active[s]) {
        index[s] = graph.add_node(s).index() as u32;
    }
    for s in (0..n).filter(|&s| active[s]) {
        for a in g.actions(s) {
            for &t in g.successors(a) {
                if active[t] {
                    graph.add_edge(NodeIndex::new(index[s] as usize), NodeIndex::new(index[t] as usize), ());
                }
            }
        }
    }
    petgraph::algo::tarjan_scc(&graph)
        .into_iter()
        .map(|c| c.into_iter().map(|i| graph[i]).collect())
        .collect()
}

/// Actions that can be repeated forever: some successor lies in the same
/// component of the graph restricted to `active` states.
pub(crate) fn recurrent_actions<T: Scalar>(g: &Smg<T>, active: &[bool]) -> Vec<bool> {
    let mut comp = vec![usize::MAX; g.num_states()];
    for (i, c) in sccs(g, active).into_iter().enumerate() {
        for s in c {
            comp[s] = i;
        }
    }
    let mut out = vec![false; g.num_actions()];
    for s in (0..g.num_states()).filter(|&s| active[s]) {
        for a in g.actions(s) {
            out[a] = g.successors(a).iter().any(|&t| active[t] && comp[t] == comp[s]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smg::SmgBuilder;

    // 0 (p): a -> {1: .5, 2: .5}, b -> 0
    // 1 (q): goal
    // 2 (q): c -> 0, d -> 3
    // 3 (q): sink
    fn game() -> Smg<f64> {
        let mut b = SmgBuilder::new();
        let p = b.add_player("p").unwrap();
        let q = b.add_player("q").unwrap();
        let s0 = b.add_state(p);
        let s1 = b.add_state(q);
        let s2 = b.add_state(q);
        let s3 = b.add_state(q);
        b.add_action(s0, "a", vec![(s1, 0.5), (s2, 0.5)]).unwrap();
        b.add_action(s0, "b", vec![(s0, 1.0)]).unwrap();
        b.add_action(s2, "c", vec![(s0, 1.0)]).unwrap();
        b.add_action(s2, "d", vec![(s3, 1.0)]).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn attractor_and_almost_sure() {
        let g = game();
        let p_side = [true, false, false, false];
        let target = [false, true, false, false];
        let attr = positive_attractor(&g, &p_side, &target, None, None);
        assert_eq!(attr.set, vec![true, true, false, false]);
        assert_eq!(attr.witness[0], Some(0));
        // q can send the play to the sink from state 2
        let as_p = almost_sure_reach(&g, &p_side, &target, None, None);
        assert_eq!(as_p.set, vec![false, true, false, false]);
        assert_eq!(as_p.spoiler[2], Some(4));
        // if both sides cooperate the target is almost sure from 0 and 2
        let all = [true; 4];
        let as_all = almost_sure_reach(&g, &all, &target, None, None);
        assert_eq!(as_all.set, vec![true, true, true, false]);
    }

    #[test]
    fn positive_buchi_through_forced_good_loop() {
        // 0 (q): spin -> 0 (good), leave -> 1; 1 (p): good self-loop
        let mut b = SmgBuilder::<f64>::new();
        let p = b.add_player("p").unwrap();
        let q = b.add_player("q").unwrap();
        let s0 = b.add_state(q);
        let s1 = b.add_state(p);
        let s2 = b.add_state(q);
        b.add_action(s0, "spin", vec![(s0, 1.0)]).unwrap();
        b.add_action(s0, "leave", vec![(s1, 1.0)]).unwrap();
        b.add_action(s0, "stop", vec![(s2, 1.0)]).unwrap();
        b.add_action(s1, "spin", vec![(s1, 1.0)]).unwrap();
        let g = b.build().unwrap();
        let good: Vec<bool> = (0..g.num_actions()).map(|a| g.action_name(a) == "spin").collect();
        let controlled = [false, true, false];
        let pos = positive_buchi(&g, &controlled, &good, &[false; 3]);
        // q escapes to the dead state 2, so state 0 is lost for p
        assert_eq!(pos.set, vec![false, true, false]);
        let without_stop = positive_buchi(&g, &controlled, &good, &[false, false, true]);
        assert_eq!(without_stop.set, vec![false, true, false]);
    }

    #[test]
    fn buchi_when_every_opponent_choice_is_good_eventually() {
        // 0 (q): spin -> 0 (good), over -> 1; 1 (p): back -> 0 (good)
        let mut b = SmgBuilder::<f64>::new();
        let p = b.add_player("p").unwrap();
        let q = b.add_player("q").unwrap();
        let s0 = b.add_state(q);
        let s1 = b.add_state(p);
        b.add_action(s0, "spin", vec![(s0, 1.0)]).unwrap();
        b.add_action(s0, "over", vec![(s1, 1.0)]).unwrap();
        b.add_action(s1, "back", vec![(s0, 1.0)]).unwrap();
        let g = b.build().unwrap();
        let good: Vec<bool> = (0..g.num_actions()).map(|a| g.action_name(a) != "over").collect();
        let all = vec![true; g.num_actions()];
        let bu = almost_sure_buchi(&g, &[false, true], &good, &[true, true], &all);
        assert_eq!(bu.set, vec![true, true]);
        assert_eq!(positive_buchi(&g, &[false, true], &good, &[false, false]).set, vec![true, true]);
    }

    #[test]
    fn buchi_on_cycle() {
        let g = game();
        let good: Vec<bool> = (0..g.num_actions()).map(|a| g.action_name(a) == "b").collect();
        let domain = [true, false, true, true];
        let all = vec![true; g.num_actions()];
        let bu = almost_sure_buchi(&g, &[true, false, false, false], &good, &domain, &all);
        assert_eq!(bu.set, vec![true, false, false, false]);
        assert_eq!(bu.witness[0], Some(1));
        let pos = positive_buchi(&g, &[true, false, false, false], &good, &[false, true, false, false]);
        assert_eq!(pos.set, vec![true, false, false, false]);
        let rec = recurrent_actions(&g, &domain);
        assert!(rec[0] && rec[1] && rec[5] && !rec[4]);
    }
}
