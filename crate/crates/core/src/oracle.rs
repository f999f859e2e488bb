//! Brute-force reference solver for small games.
//!
//! Enumerates every memoryless deterministic strategy profile and solves
//! the induced Markov chain with exact rational arithmetic. Slow by design
//! and independent of the value-iteration engine, so the two can be
//! compared.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{Star, ValueKind, ValueVector};
use crate::rpatl::Direction;
use crate::smg::{PlayerId, Smg, StateId, Strategy};
use crate::Scalar;

pub const DEFAULT_PROFILE_CAP: u128 = 1_000_000;

/// Chains with at most this many unknowns are solved exactly.
const EXACT_LIMIT: usize = 40;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("{profiles} strategy profiles exceed the cap of {cap}")]
    TooLarge { profiles: u128, cap: u128 },
    #[error("singular linear system")]
    SingularSystem,
    #[error("unknown reward structure `{0}`")]
    UnknownReward(String),
    #[error("bad target: {0}")]
    BadTarget(String),
    #[error("profile does not choose an enabled action in state {0}")]
    BadProfile(StateId),
}

#[derive(Debug, Clone, Copy)]
pub enum OracleObjective<'a> {
    Reach { target: &'a [StateId] },
    Reward { reward: &'a str, target: &'a [StateId], star: Star },
}

/// Local action index chosen in every state, for all players.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Profile {
    pub choices: Vec<usize>,
}

impl Profile {
    /// Merges two memoryless strategies that together cover every state.
    pub fn from_strategies(ours: &Strategy, theirs: &Strategy, n: usize) -> Option<Profile> {
        let choices = (0..n)
            .map(|s| ours.choice(s).or_else(|| theirs.choice(s)))
            .collect::<Option<Vec<_>>>()?;
        Some(Profile { choices })
    }
}

/// Lexicographic odometer over the actions of a list of states; the first
/// state is the most significant digit.
#[derive(Debug, Clone)]
struct Odometer {
    states: Vec<StateId>,
    counts: Vec<usize>,
    digits: Vec<usize>,
    done: bool,
}

impl Odometer {
    fn new<T: Scalar>(g: &Smg<T>, states: Vec<StateId>) -> Self {
        let counts = states.iter().map(|&s| g.num_actions_of(s)).collect();
        let digits = vec![0; states.len()];
        Odometer {
            states,
            counts,
            digits,
            done: false,
        }
    }

    fn len(&self) -> u128 {
        self.counts.iter().fold(1u128, |acc, &c| acc.saturating_mul(c as u128))
    }

    fn advance(&mut self) {
        for i in (0..self.digits.len()).rev() {
            self.digits[i] += 1;
            if self.digits[i] < self.counts[i] {
                return;
            }
            self.digits[i] = 0;
        }
        self.done = true;
    }
}

impl Iterator for Odometer {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.digits.clone();
        self.advance();
        Some(out)
    }
}

/// All (coalition, adversary) pairs of memoryless deterministic strategies.
pub struct Profiles {
    n: usize,
    coalition: BTreeSet<PlayerId>,
    adversary: BTreeSet<PlayerId>,
    outer: Odometer,
    fresh_inner: Odometer,
    inner: Odometer,
    current: Option<Strategy>,
}

impl Profiles {
    pub fn count(&self) -> u128 {
        self.outer.len().saturating_mul(self.fresh_inner.len())
    }
}

impl Iterator for Profiles {
    type Item = (Strategy, Strategy);

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.current.is_none() {
                let digits = self.outer.next()?;
                let choices = choices_of(&self.outer.states, &digits, self.n);
                self.current = Some(Strategy::memoryless(self.coalition.clone(), choices));
                self.inner = self.fresh_inner.clone();
            }
            if let Some(digits) = self.inner.next() {
                let choices = choices_of(&self.inner.states, &digits, self.n);
                let theirs = Strategy::memoryless(self.adversary.clone(), choices);
                return Some((self.current.clone().unwrap(), theirs));
            }
            self.current = None;
        }
    }
}

fn choices_of(states: &[StateId], digits: &[usize], n: usize) -> Vec<Option<usize>> {
    let mut out = vec![None; n];
    for (&s, &d) in states.iter().zip(digits) {
        out[s] = Some(d);
    }
    out
}

fn split_states<T: Scalar>(g: &Smg<T>, coalition: &BTreeSet<PlayerId>) -> (Vec<StateId>, Vec<StateId>) {
    (0..g.num_states()).partition(|&s| coalition.contains(&g.owner(s)))
}

/// Enumerates all strategy profiles, coalition choices varying slowest.
pub fn enumerate_profiles<T: Scalar>(
    g: &Smg<T>,
    coalition: &BTreeSet<PlayerId>,
    cap: u128,
) -> Result<Profiles, OracleError> {
    let (ours, theirs) = split_states(g, coalition);
    let outer = Odometer::new(g, ours);
    let inner = Odometer::new(g, theirs);
    let profiles = outer.len().saturating_mul(inner.len());
    if profiles > cap {
        return Err(OracleError::TooLarge { profiles, cap });
    }
    let adversary = (0..g.players().len())
        .map(PlayerId)
        .filter(|p| !coalition.contains(p))
        .collect();
    Ok(Profiles {
        n: g.num_states(),
        coalition: coalition.clone(),
        adversary,
        outer,
        fresh_inner: inner.clone(),
        inner,
        current: None,
    })
}

/// Objective with names resolved against a game.
struct Prepared {
    target: Vec<bool>,
    reward: Option<Vec<BigRational>>,
    star: Star,
}

fn prepare<T: Scalar>(g: &Smg<T>, objective: OracleObjective<'_>) -> Result<Prepared, OracleError> {
    let mask = |target: &[StateId]| -> Result<Vec<bool>, OracleError> {
        if target.is_empty() {
            return Err(OracleError::BadTarget("empty target set".into()));
        }
        let mut m = vec![false; g.num_states()];
        for &s in target {
            *m.get_mut(s)
                .ok_or_else(|| OracleError::BadTarget(format!("state {s} out of range")))? = true;
        }
        Ok(m)
    };
    match objective {
        OracleObjective::Reach { target } => Ok(Prepared {
            target: mask(target)?,
            reward: None,
            star: Star::Zero,
        }),
        OracleObjective::Reward { reward, target, star } => {
            let rs = g
                .reward(reward)
                .ok_or_else(|| OracleError::UnknownReward(reward.to_string()))?;
            let dense = rs.dense(g.num_actions()).into_iter().map(exact).collect();
            Ok(Prepared {
                target: mask(target)?,
                reward: Some(dense),
                star,
            })
        }
    }
}

fn exact<T: Scalar>(x: T) -> BigRational {
    BigRational::from_float(x.as_f64()).expect("finite model data")
}

/// Induced Markov chain: successors with exact probabilities, and the
/// reward of the chosen action.
struct Chain {
    succ: Vec<Vec<(StateId, BigRational)>>,
    reward: Vec<BigRational>,
}

impl Chain {
    fn new<T: Scalar>(g: &Smg<T>, choices: &[usize], p: &Prepared) -> Result<Chain, OracleError> {
        let n = g.num_states();
        let mut succ = Vec::with_capacity(n);
        let mut reward = Vec::with_capacity(n);
        for s in 0..n {
            let c = *choices.get(s).ok_or(OracleError::BadProfile(s))?;
            if c >= g.num_actions_of(s) {
                return Err(OracleError::BadProfile(s));
            }
            let a = g.action_index(s, c);
            succ.push(g.transitions(a).map(|(t, pr)| (t, exact(pr))).collect());
            reward.push(p.reward.as_ref().map_or_else(BigRational::zero, |r| r[a].clone()));
        }
        Ok(Chain { succ, reward })
    }

    /// States (other than `stop` states) with a path into `goal` that does
    /// not pass through a `stop` state.
    fn can_reach(&self, goal: &[bool], stop: &[bool]) -> Vec<bool> {
        let n = self.succ.len();
        let mut preds = vec![Vec::new(); n];
        for s in 0..n {
            for (t, _) in &self.succ[s] {
                preds[*t].push(s);
            }
        }
        let mut seen = goal.to_vec();
        let mut stack: Vec<StateId> = (0..n).filter(|&s| goal[s]).collect();
        while let Some(t) = stack.pop() {
            for &s in &preds[t] {
                if !seen[s] && !stop[s] {
                    seen[s] = true;
                    stack.push(s);
                }
            }
        }
        seen
    }

    /// Solves `x(s) = b(s) + Σ P(s,t) x(t)` for `s` in `unknown`, with `x`
    /// fixed to `known` elsewhere.
    fn solve(&self, unknown: &[bool], b: &[BigRational], known: &[BigRational]) -> Result<Vec<BigRational>, OracleError> {
        let n = self.succ.len();
        let idx: Vec<StateId> = (0..n).filter(|&s| unknown[s]).collect();
        let mut pos = vec![usize::MAX; n];
        for (i, &s) in idx.iter().enumerate() {
            pos[s] = i;
        }
        let m = idx.len();
        let mut a = vec![vec![BigRational::zero(); m]; m];
        let mut rhs = vec![BigRational::zero(); m];
        for (i, &s) in idx.iter().enumerate() {
            a[i][i] = BigRational::one();
            rhs[i] = b[s].clone();
            for (t, p) in &self.succ[s] {
                if unknown[*t] {
                    a[i][pos[*t]] -= p;
                } else {
                    rhs[i] += p * &known[*t];
                }
            }
        }
        let x = if m <= EXACT_LIMIT {
            bareiss(a, rhs)?
        } else {
            float_solve(&a, &rhs)?
        };
        let mut out = known.to_vec();
        for (i, &s) in idx.iter().enumerate() {
            out[s] = x[i].clone();
        }
        Ok(out)
    }

    /// Bottom strongly connected components; `comp[s]` is the component id
    /// of bottom states and `None` for transient ones.
    fn bottom_components(&self) -> Vec<Option<usize>> {
        use petgraph::graph::{DiGraph, NodeIndex};
        let n = self.succ.len();
        let mut graph = DiGraph::<(), ()>::with_capacity(n, n);
        for _ in 0..n {
            graph.add_node(());
        }
        for s in 0..n {
            for (t, _) in &self.succ[s] {
                graph.add_edge(NodeIndex::new(s), NodeIndex::new(*t), ());
            }
        }
        let mut comp_of = vec![0; n];
        let comps = petgraph::algo::tarjan_scc(&graph);
        for (i, c) in comps.iter().enumerate() {
            for v in c {
                comp_of[v.index()] = i;
            }
        }
        let mut out = vec![None; n];
        for (i, c) in comps.iter().enumerate() {
            let closed = c
                .iter()
                .all(|v| self.succ[v.index()].iter().all(|(t, _)| comp_of[*t] == i));
            if closed {
                for v in c {
                    out[v.index()] = Some(i);
                }
            }
        }
        out
    }
}

/// Fraction-free Gaussian elimination: rows are scaled to integers and
/// eliminated with exact divisions.
fn bareiss(a: Vec<Vec<BigRational>>, b: Vec<BigRational>) -> Result<Vec<BigRational>, OracleError> {
    let n = b.len();
    let mut m: Vec<Vec<BigInt>> = a
        .into_iter()
        .zip(b)
        .map(|(mut row, rhs)| {
            row.push(rhs);
            let lcm = row.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
            row.into_iter().map(|x| (x * &lcm).to_integer()).collect()
        })
        .collect();
    let mut prev = BigInt::one();
    for k in 0..n {
        let p = (k..n).find(|&i| !m[i][k].is_zero()).ok_or(OracleError::SingularSystem)?;
        m.swap(k, p);
        for i in k + 1..n {
            for j in k + 1..=n {
                let v = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &prev;
                m[i][j] = v;
            }
            m[i][k] = BigInt::zero();
        }
        prev = m[k][k].clone();
    }
    let mut x = vec![BigRational::zero(); n];
    for i in (0..n).rev() {
        let mut acc = BigRational::from_integer(m[i][n].clone());
        for j in i + 1..n {
            acc -= BigRational::from_integer(m[i][j].clone()) * &x[j];
        }
        x[i] = acc / BigRational::from_integer(m[i][i].clone());
    }
    Ok(x)
}

/// Partial-pivoting elimination in `f64`, accepted only if the residual is
/// below `1e-10` (relative to the right-hand side).
fn float_solve(a: &[Vec<BigRational>], b: &[BigRational]) -> Result<Vec<BigRational>, OracleError> {
    let n = b.len();
    let f = |x: &BigRational| x.to_f64().unwrap_or(f64::NAN);
    let a0: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(f).collect()).collect();
    let b0: Vec<f64> = b.iter().map(f).collect();
    let mut m: Vec<Vec<f64>> = a0.iter().zip(&b0).map(|(r, &v)| r.iter().copied().chain([v]).collect()).collect();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))
            .filter(|&p| m[p][k].abs() > 1e-300)
            .ok_or(OracleError::SingularSystem)?;
        m.swap(k, p);
        for i in k + 1..n {
            let factor = m[i][k] / m[k][k];
            if factor != 0.0 {
                for j in k..=n {
                    m[i][j] -= factor * m[k][j];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let acc: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - acc) / m[i][i];
    }
    let scale = b0.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let residual = (0..n)
        .map(|i| ((0..n).map(|j| a0[i][j] * x[j]).sum::<f64>() - b0[i]).abs())
        .fold(0.0, f64::max);
    if !(residual < 1e-10 * scale) {
        return Err(OracleError::SingularSystem);
    }
    Ok(x.into_iter().map(|v| BigRational::from_float(v).unwrap_or_else(BigRational::zero)).collect())
}

/// Exact value vector of a profile; `None` stands for an infinite value.
fn chain_values(chain: &Chain, p: &Prepared) -> Result<Vec<Option<BigRational>>, OracleError> {
    let n = chain.succ.len();
    let tgt = &p.target;
    let zero = vec![BigRational::zero(); n];
    let indicator: Vec<BigRational> = tgt
        .iter()
        .map(|&t| if t { BigRational::one() } else { BigRational::zero() })
        .collect();
    let reaching = chain.can_reach(tgt, tgt);
    let transient: Vec<bool> = (0..n).map(|s| reaching[s] && !tgt[s]).collect();
    let reach_prob = |chain: &Chain| chain.solve(&transient, &zero, &indicator);

    if p.reward.is_none() {
        return Ok(reach_prob(chain)?.into_iter().map(Some).collect());
    }
    match p.star {
        Star::Zero => {
            let h = reach_prob(chain)?;
            let b: Vec<BigRational> = (0..n).map(|s| &chain.reward[s] * &h[s]).collect();
            Ok(chain.solve(&transient, &b, &zero)?.into_iter().map(Some).collect())
        }
        Star::Infinite => {
            let missing: Vec<bool> = reaching.iter().map(|&r| !r).collect();
            let escapes = chain.can_reach(&missing, tgt);
            let finite: Vec<bool> = (0..n).map(|s| !tgt[s] && !escapes[s]).collect();
            let x = chain.solve(&finite, &chain.reward, &zero)?;
            Ok((0..n).map(|s| if escapes[s] && !tgt[s] { None } else { Some(x[s].clone()) }).collect())
        }
        Star::Cumulative => {
            // the target is absorbing for the purpose of accumulation
            let mut absorbed = Chain {
                succ: chain.succ.clone(),
                reward: chain.reward.clone(),
            };
            for s in (0..n).filter(|&s| tgt[s]) {
                absorbed.succ[s] = vec![(s, BigRational::one())];
                absorbed.reward[s] = BigRational::zero();
            }
            let bottom = absorbed.bottom_components();
            let mut bad = vec![false; n];
            let mut bad_comp = BTreeSet::new();
            for s in 0..n {
                if let Some(c) = bottom[s] {
                    if absorbed.reward[s].is_positive() {
                        bad_comp.insert(c);
                    }
                }
            }
            for s in 0..n {
                bad[s] = bottom[s].map_or(false, |c| bad_comp.contains(&c));
            }
            let diverging = absorbed.can_reach(&bad, tgt);
            let unknown: Vec<bool> = (0..n).map(|s| bottom[s].is_none() && !diverging[s]).collect();
            let x = absorbed.solve(&unknown, &absorbed.reward, &zero)?;
            Ok((0..n).map(|s| if diverging[s] { None } else { Some(x[s].clone()) }).collect())
        }
    }
}

fn to_scalar<T: Scalar>(v: &Option<BigRational>) -> T {
    match v {
        None => T::infinity(),
        Some(x) => T::of(x.to_f64().unwrap_or(f64::NAN)),
    }
}

fn kind(objective: &OracleObjective<'_>) -> ValueKind {
    match objective {
        OracleObjective::Reach { .. } => ValueKind::Probability,
        OracleObjective::Reward { .. } => ValueKind::ExpectedReward,
    }
}

/// Exact values of the Markov chain induced by a full profile.
pub fn evaluate_chain<T: Scalar>(
    g: &Smg<T>,
    profile: &Profile,
    objective: OracleObjective<'_>,
) -> Result<ValueVector<T>, OracleError> {
    let p = prepare(g, objective)?;
    let chain = Chain::new(g, &profile.choices, &p)?;
    let values = chain_values(&chain, &p)?.iter().map(to_scalar).collect();
    Ok(ValueVector {
        values,
        kind: kind(&objective),
    })
}

/// Extended-real comparison with `None` as +∞.
fn ext_cmp(a: &Option<BigRational>, b: &Option<BigRational>) -> std::cmp::Ordering {
    use std::cmp::Ordering::*;
    match (a, b) {
        (None, None) => Equal,
        (None, Some(_)) => Greater,
        (Some(_), None) => Less,
        (Some(x), Some(y)) => x.cmp(y),
    }
}

/// Per state: best coalition strategy against the worst adversary response
/// (`max min` for [`Direction::Max`], `min max` otherwise), over memoryless
/// deterministic strategies.
pub fn brute_force_value<T: Scalar>(
    g: &Smg<T>,
    coalition: &BTreeSet<PlayerId>,
    objective: OracleObjective<'_>,
    dir: Direction,
    cap: u128,
) -> Result<ValueVector<T>, OracleError> {
    let p = prepare(g, objective)?;
    let (ours, theirs) = split_states(g, coalition);
    let outer = Odometer::new(g, ours);
    let inner = Odometer::new(g, theirs);
    let profiles = outer.len().saturating_mul(inner.len());
    if profiles > cap {
        return Err(OracleError::TooLarge { profiles, cap });
    }
    let n = g.num_states();
    let coalition_choices: Vec<Vec<Option<usize>>> =
        outer.clone().map(|digits| choices_of(&outer.states, &digits, n)).collect();
    let better = |a: &Option<BigRational>, b: &Option<BigRational>| match dir {
        Direction::Max => ext_cmp(a, b).is_gt(),
        Direction::Min => ext_cmp(a, b).is_lt(),
    };
    let worst_cases: Vec<Vec<Option<BigRational>>> = coalition_choices
        .par_iter()
        .map(|ours| -> Result<_, OracleError> {
            let mut worst: Option<Vec<Option<BigRational>>> = None;
            for digits in inner.clone() {
                let theirs = choices_of(&inner.states, &digits, n);
                let choices: Vec<usize> = (0..n).map(|s| ours[s].or(theirs[s]).unwrap()).collect();
                let v = chain_values(&Chain::new(g, &choices, &p)?, &p)?;
                worst = Some(match worst {
                    None => v,
                    Some(w) => w
                        .into_iter()
                        .zip(v)
                        .map(|(a, b)| if better(&a, &b) { b } else { a })
                        .collect(),
                });
            }
            Ok(worst.expect("at least one profile"))
        })
        .collect::<Result<_, _>>()?;
    let mut best = worst_cases[0].clone();
    for w in &worst_cases[1..] {
        for s in 0..n {
            if better(&w[s], &best[s]) {
                best[s] = w[s].clone();
            }
        }
    }
    Ok(ValueVector {
        values: best.iter().map(to_scalar).collect(),
        kind: kind(&objective),
    })
}
