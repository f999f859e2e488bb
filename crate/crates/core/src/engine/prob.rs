use std::collections::BTreeSet;

use super::iterate::{best, change, first_tight, sweep, tight_actions};
use super::{
    graph, maximising_states, split_profile, step_strategies, target_mask, Engine, EngineError, Horizon,
    Solution, ValueKind, ValueVector,
};
use crate::rpatl::Direction;
use crate::smg::{PlayerId, Smg, StateId, StepTable};
use crate::Scalar;

impl<T: Scalar> Engine<T> {
    /// Optimal probability of reaching `target` for `coalition`, against
    /// the remaining players.
    pub fn solve_prob(
        &self,
        g: &Smg<T>,
        coalition: &BTreeSet<PlayerId>,
        target: &[StateId],
        horizon: Horizon,
        dir: Direction,
    ) -> Result<Solution<T>, EngineError> {
        let tgt = target_mask(g, target)?;
        let is_max = maximising_states(g, coalition, dir);
        match horizon {
            Horizon::Steps(n) => Ok(self.bounded(g, coalition, &tgt, &is_max, n)),
            Horizon::Unbounded => self.unbounded(g, coalition, &tgt, &is_max),
        }
    }

    fn bounded(
        &self,
        g: &Smg<T>,
        coalition: &BTreeSet<PlayerId>,
        tgt: &[bool],
        is_max: &[bool],
        steps: u64,
    ) -> Solution<T> {
        let n = g.num_states();
        let mut v: Vec<T> = tgt.iter().map(|&t| if t { T::one() } else { T::zero() }).collect();
        let mut next = v.clone();
        let mut ours = StepTable::new();
        let mut theirs = StepTable::new();
        let mut row = vec![0usize; n];
        for _ in 0..steps {
            for s in 0..n {
                if tgt[s] {
                    row[s] = g.actions(s).start;
                    continue;
                }
                let (q, a) = best(g, s, is_max[s], None, &v);
                next[s] = q;
                row[s] = a;
            }
            std::mem::swap(&mut v, &mut next);
            let (o, t) = super::split_row(g, coalition, &row);
            ours.push(o);
            theirs.push(t);
        }
        let (strategy, adversary) = step_strategies(g, coalition, ours, theirs);
        Solution {
            values: ValueVector {
                values: v,
                kind: ValueKind::Probability,
            },
            strategy,
            adversary,
        }
    }

    fn unbounded(
        &self,
        g: &Smg<T>,
        coalition: &BTreeSet<PlayerId>,
        tgt: &[bool],
        is_max: &[bool],
    ) -> Result<Solution<T>, EngineError> {
        let n = g.num_states();
        let positive = graph::positive_attractor(g, is_max, tgt, None, None).set;
        let sure = graph::almost_sure_reach(g, is_max, tgt, None, None);
        let mut v: Vec<T> = (0..n)
            .map(|s| if sure.set[s] { T::one() } else { T::zero() })
            .collect();
        let active: Vec<bool> = (0..n).map(|s| positive[s] && !sure.set[s]).collect();
        sweep(g, &active, self.epsilon, self.max_iterations, |s| {
            let (q, _) = best(g, s, is_max[s], None, &v);
            let d = change(v[s], q);
            v[s] = q;
            d
        })?;

        let tight = tight_actions(g, is_max, None, &v, self.epsilon);
        // Maximising states must also make progress towards states whose
        // value is already realised, or a tight self-loop could stall them.
        let base: Vec<bool> = (0..n).map(|s| sure.set[s] || v[s] == T::zero()).collect();
        let progress = graph::positive_attractor(g, is_max, &base, None, Some(&tight));
        let profile: Vec<usize> = (0..n)
            .map(|s| {
                if tgt[s] {
                    g.actions(s).start
                } else if is_max[s] && sure.set[s] {
                    sure.witness[s].unwrap_or_else(|| first_tight(g, s, &tight))
                } else if is_max[s] && active[s] {
                    progress.witness[s].unwrap_or_else(|| first_tight(g, s, &tight))
                } else {
                    first_tight(g, s, &tight)
                }
            })
            .collect();
        let (strategy, adversary) = split_profile(g, coalition, &profile);
        Ok(Solution {
            values: ValueVector {
                values: v,
                kind: ValueKind::Probability,
            },
            strategy,
            adversary,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smg::SmgBuilder;

    #[test]
    fn tight_self_loop_is_not_a_witness() {
        // The maximiser can idle forever or move to the goal; both are tight.
        let mut b = SmgBuilder::<f64>::new();
        let p = b.add_player("p").unwrap();
        let s0 = b.add_state(p);
        let goal = b.add_state(p);
        b.add_action(s0, "idle", vec![(s0, 1.0)]).unwrap();
        b.add_action(s0, "go", vec![(goal, 1.0)]).unwrap();
        let g = b.build().unwrap();
        let sol = Engine::default()
            .solve_prob(&g, &[PlayerId(0)].into(), &[goal], Horizon::Unbounded, Direction::Max)
            .unwrap();
        assert_eq!(sol.values.values[s0], 1.0);
        assert_eq!(sol.strategy.choice(s0), Some(1));
    }

    #[test]
    fn bounded_values_increase_with_horizon() {
        // 0 -> {0: .5, 1: .5}
        let mut b = SmgBuilder::<f64>::new();
        let p = b.add_player("p").unwrap();
        let s0 = b.add_state(p);
        let s1 = b.add_state(p);
        b.add_action(s0, "a", vec![(s0, 0.5), (s1, 0.5)]).unwrap();
        let g = b.build().unwrap();
        let e = Engine::default();
        let c = BTreeSet::new();
        let mut last = 0.0;
        for n in 0..6u64 {
            let v = e.solve_prob(&g, &c, &[s1], Horizon::Steps(n), Direction::Max).unwrap().values.values[0];
            assert!((v - (1.0 - 0.5f64.powi(n as i32))).abs() < 1e-15);
            assert!(v >= last);
            last = v;
        }
        let u = e.solve_prob(&g, &c, &[s1], Horizon::Unbounded, Direction::Max).unwrap();
        assert_eq!(u.values.values[0], 1.0);
    }
}
