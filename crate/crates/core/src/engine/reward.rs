use std::collections::BTreeSet;

use super::iterate::{best, change, first_tight, q_value, sweep, tight_actions};
use super::{graph, maximising_states, split_profile, target_mask, Engine, EngineError, Solution, Star, ValueKind, ValueVector};
use crate::rpatl::Direction;
use crate::smg::{PlayerId, Smg, StateId};
use crate::Scalar;

impl<T: Scalar> Engine<T> {
    /// Optimal expected reward accumulated until `target` is first reached,
    /// with `star` deciding the reward of paths that never reach it.
    pub fn solve_reward(
        &self,
        g: &Smg<T>,
        coalition: &BTreeSet<PlayerId>,
        reward: &str,
        target: &[StateId],
        star: Star,
        dir: Direction,
    ) -> Result<Solution<T>, EngineError> {
        let rs = g
            .reward(reward)
            .ok_or_else(|| EngineError::UnknownReward(reward.to_string()))?;
        let rew = rs.dense(g.num_actions());
        let tgt = target_mask(g, target)?;
        let is_max = maximising_states(g, coalition, dir);
        let (values, profile) = match star {
            Star::Cumulative => self.cumulative(g, &rew, &tgt, &is_max)?,
            Star::Infinite => self.infinite(g, &rew, &tgt, &is_max)?,
            Star::Zero => self.zero(g, &rew, &tgt, &is_max)?,
        };
        let (strategy, adversary) = split_profile(g, coalition, &profile);
        Ok(Solution {
            values: ValueVector {
                values,
                kind: ValueKind::ExpectedReward,
            },
            strategy,
            adversary,
        })
    }

    /// Reward accumulates forever on paths missing the target. The value is
    /// infinite exactly where the maximiser can, with positive probability,
    /// collect positive reward infinitely often.
    fn cumulative(&self, g: &Smg<T>, rew: &[T], tgt: &[bool], is_max: &[bool]) -> Result<(Vec<T>, Vec<usize>), EngineError> {
        let n = g.num_states();
        let outside: Vec<bool> = tgt.iter().map(|&t| !t).collect();
        let recurrent = graph::recurrent_actions(g, &outside);
        let good: Vec<bool> = (0..g.num_actions()).map(|a| recurrent[a] && rew[a] > T::zero()).collect();
        let (diverge, diverge_witness) = if good.iter().any(|&b| b) {
            let buchi = graph::positive_buchi(g, is_max, &good, tgt);
            (buchi.set, buchi.witness)
        } else {
            (vec![false; n], vec![None; n])
        };

        let mut v: Vec<T> = (0..n)
            .map(|s| if diverge[s] { T::infinity() } else { T::zero() })
            .collect();
        let active: Vec<bool> = (0..n).map(|s| !tgt[s] && !diverge[s]).collect();
        sweep(g, &active, self.epsilon, self.max_iterations, |s| {
            let (q, _) = best(g, s, is_max[s], Some(rew), &v);
            let d = change(v[s], q);
            v[s] = q;
            d
        })?;

        let tight = tight_actions(g, is_max, Some(rew), &v, self.epsilon);
        let base: Vec<bool> = (0..n).map(|s| tgt[s] || v[s] == T::zero()).collect();
        let progress = graph::positive_attractor(g, is_max, &base, Some(&active), Some(&tight));
        let profile = (0..n)
            .map(|s| {
                if tgt[s] {
                    g.actions(s).start
                } else if is_max[s] && diverge[s] {
                    diverge_witness[s].unwrap_or_else(|| first_tight(g, s, &tight))
                } else if is_max[s] {
                    progress.witness[s].unwrap_or_else(|| first_tight(g, s, &tight))
                } else {
                    first_tight(g, s, &tight)
                }
            })
            .collect();
        Ok((v, profile))
    }

    /// Paths missing the target earn infinite reward. The value is finite
    /// exactly where the minimiser can reach the target almost surely; there
    /// it is the greatest fixpoint below the cost of any such strategy.
    fn infinite(&self, g: &Smg<T>, rew: &[T], tgt: &[bool], is_max: &[bool]) -> Result<(Vec<T>, Vec<usize>), EngineError> {
        let n = g.num_states();
        let is_min: Vec<bool> = is_max.iter().map(|&m| !m).collect();
        let finite = graph::almost_sure_reach(g, &is_min, tgt, None, None);
        let active: Vec<bool> = (0..n).map(|s| finite.set[s] && !tgt[s]).collect();

        // Upper bound: the maximiser's best response to the almost-sure
        // witness, under which every path reaches the target.
        let mut v: Vec<T> = (0..n)
            .map(|s| if finite.set[s] { T::zero() } else { T::infinity() })
            .collect();
        sweep(g, &active, self.epsilon, self.max_iterations, |s| {
            let q = match finite.witness[s] {
                Some(a) if is_min[s] => q_value(g, a, Some(rew), &v),
                _ => best(g, s, is_max[s], Some(rew), &v).0,
            };
            let d = change(v[s], q);
            v[s] = q;
            d
        })?;
        let two = T::one() + T::one();
        for s in (0..n).filter(|&s| active[s]) {
            v[s] = two * v[s] + T::one();
        }
        sweep(g, &active, self.epsilon, self.max_iterations, |s| {
            let (q, _) = best(g, s, is_max[s], Some(rew), &v);
            let d = change(v[s], q);
            v[s] = q;
            d
        })?;

        let tight = tight_actions(g, is_max, Some(rew), &v, self.epsilon);
        // Among its optimal actions the minimiser must keep reaching the
        // target almost surely; zero-reward cycles are tight but improper.
        let allowed: Vec<bool> = (0..n)
            .flat_map(|s| g.actions(s).map(move |a| (s, a)))
            .map(|(s, a)| is_max[s] || tight[a])
            .collect();
        let proper = graph::almost_sure_reach(g, &is_min, tgt, Some(&finite.set), Some(&allowed));
        let profile = (0..n)
            .map(|s| {
                if tgt[s] {
                    g.actions(s).start
                } else if is_min[s] && finite.set[s] {
                    proper.witness[s]
                        .or(finite.witness[s])
                        .unwrap_or_else(|| first_tight(g, s, &tight))
                } else if is_max[s] && !finite.set[s] {
                    finite.spoiler[s].unwrap_or_else(|| first_tight(g, s, &tight))
                } else {
                    first_tight(g, s, &tight)
                }
            })
            .collect();
        Ok((v, profile))
    }

    /// Paths missing the target earn nothing. Iterates on pairs of value and
    /// reach probability: an action's reward counts only in proportion to the
    /// probability that the target is reached afterwards.
    fn zero(&self, g: &Smg<T>, rew: &[T], tgt: &[bool], is_max: &[bool]) -> Result<(Vec<T>, Vec<usize>), EngineError> {
        let n = g.num_states();
        let positive = graph::positive_attractor(g, is_max, tgt, None, None).set;
        let active: Vec<bool> = (0..n).map(|s| positive[s] && !tgt[s]).collect();
        let mut v = vec![T::zero(); n];
        let mut p: Vec<T> = tgt.iter().map(|&t| if t { T::one() } else { T::zero() }).collect();
        let mut choice: Vec<usize> = (0..n).map(|s| g.actions(s).start).collect();
        sweep(g, &active, self.epsilon, self.max_iterations, |s| {
            let mut chosen: Option<(T, T, usize)> = None;
            for a in g.actions(s) {
                let pa = g.transitions(a).fold(T::zero(), |acc, (t, pr)| acc + pr * p[t]);
                let va = g.transitions(a).fold(rew[a] * pa, |acc, (t, pr)| acc + pr * v[t]);
                let better = match chosen {
                    None => true,
                    Some((bv, bp, _)) => {
                        if is_max[s] {
                            va > bv || (va == bv && pa > bp)
                        } else {
                            va < bv || (va == bv && pa < bp)
                        }
                    }
                };
                if better {
                    chosen = Some((va, pa, a));
                }
            }
            let (va, pa, a) = chosen.expect("every state has an action");
            let d = change(v[s], va).max(change(p[s], pa));
            v[s] = va;
            p[s] = pa;
            choice[s] = a;
            d
        })?;
        Ok((v, choice))
    }
}
