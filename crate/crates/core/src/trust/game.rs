use std::collections::{BTreeSet, HashMap, VecDeque};

use num_rational::Rational64;

use super::{service_cost, trust_level, Sharing, TrustError, TrustParams};
use crate::smg::{PlayerId, Smg, SmgBuilder, StateId, Strategy};
use crate::Scalar;

/// Protocol phase; provider indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    /// The requester picks a provider.
    Choose,
    Negotiate(usize),
    /// The service has been delivered; the requester decides on payment.
    DecidePay(usize),
    Share(usize),
    Done,
    /// No provider accepts the requester any more.
    Stuck,
}

/// `Done` and `Stuck` are single shared states with an empty trust vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TrustState {
    pub trust: Vec<u8>,
    pub services: u32,
    pub phase: Phase,
}

impl TrustState {
    pub fn trust_u32(&self) -> Vec<u32> {
        self.trust.iter().map(|&t| t as u32).collect()
    }
}

/// A generated cooperation game together with the protocol state behind
/// every game state.
#[derive(Debug, Clone)]
pub struct TrustGame<T> {
    pub game: Smg<T>,
    pub initial: StateId,
    pub states: Vec<TrustState>,
    pub params: TrustParams,
}

impl<T> TrustGame<T> {
    pub fn requester(&self) -> PlayerId {
        PlayerId(0)
    }

    pub fn provider(&self, i: usize) -> PlayerId {
        PlayerId(i + 1)
    }

    pub fn providers(&self) -> BTreeSet<PlayerId> {
        (0..self.params.n_providers).map(|i| self.provider(i)).collect()
    }

    pub fn requester_coalition(&self) -> BTreeSet<PlayerId> {
        [self.requester()].into()
    }
}

struct Explorer {
    index: HashMap<TrustState, StateId>,
    states: Vec<TrustState>,
    queue: VecDeque<StateId>,
    cap: usize,
}

impl Explorer {
    fn intern(&mut self, s: TrustState) -> Result<StateId, TrustError> {
        if let Some(&id) = self.index.get(&s) {
            return Ok(id);
        }
        if self.states.len() >= self.cap {
            return Err(TrustError::StateExplosion { cap: self.cap });
        }
        let id = self.states.len();
        self.index.insert(s.clone(), id);
        self.states.push(s);
        self.queue.push_back(id);
        Ok(id)
    }
}

fn scalar<T: Scalar>(r: Rational64) -> T {
    T::of(*r.numer() as f64 / *r.denom() as f64)
}

pub fn build_trust_game<T: Scalar>(p: &TrustParams) -> Result<TrustGame<T>, TrustError> {
    p.validate()?;
    let n = p.n_providers;
    let k = p.k;
    let mut b = SmgBuilder::<T>::new();
    let requester = b.add_player("requester")?;
    let providers: Vec<PlayerId> = (0..n)
        .map(|i| b.add_player(&format!("provider_{i}")))
        .collect::<Result<_, _>>()?;
    for name in ["cost", "paid", "unpaid", "received"] {
        b.add_reward_structure(name)?;
        for i in 0..n {
            b.add_reward_structure(&format!("{name}_{i}"))?;
        }
    }

    let done = TrustState { trust: Vec::new(), services: k, phase: Phase::Done };
    let stuck = TrustState { trust: Vec::new(), services: 0, phase: Phase::Stuck };
    let mut ex = Explorer { index: HashMap::new(), states: Vec::new(), queue: VecDeque::new(), cap: p.state_cap };
    let initial = ex.intern(TrustState {
        trust: vec![p.trust_init as u8; n],
        services: 0,
        phase: Phase::Choose,
    })?;
    // After a payment decision: share, finish, or choose again.
    let next_round = |trust: Vec<u8>, services: u32, i: usize| {
        if services == k {
            done.clone()
        } else if p.sharing == Sharing::Strategic {
            TrustState { trust, services, phase: Phase::Share(i) }
        } else {
            TrustState { trust, services, phase: Phase::Choose }
        }
    };

    while let Some(id) = ex.queue.pop_front() {
        let st = ex.states[id].clone();
        let owner = match st.phase {
            Phase::Negotiate(i) | Phase::Share(i) => providers[i],
            _ => requester,
        };
        let sid = b.add_state(owner);
        debug_assert_eq!(sid, id);
        let trust = st.trust_u32();
        match st.phase {
            Phase::Done | Phase::Stuck => {}
            Phase::Choose => {
                let mut any = false;
                for i in 0..n {
                    if trust_level(p, &trust, i)? >= Rational64::from_integer(p.st[i] as i64) {
                        let t = ex.intern(TrustState { phase: Phase::Negotiate(i), ..st.clone() })?;
                        b.add_action(id, &format!("request_{i}"), vec![(t, T::one())])?;
                        any = true;
                    }
                }
                if !any {
                    let t = ex.intern(stuck.clone())?;
                    b.add_action(id, "stuck", vec![(t, T::one())])?;
                }
            }
            Phase::Negotiate(i) => {
                let deliver = ex.intern(TrustState {
                    trust: st.trust.clone(),
                    services: st.services + 1,
                    phase: Phase::DecidePay(i),
                })?;
                let support = if p.c[i] > 0.0 {
                    let cancel = ex.intern(TrustState { phase: Phase::Choose, ..st.clone() })?;
                    vec![(cancel, T::of(p.c[i])), (deliver, T::one() - T::of(p.c[i]))]
                } else {
                    vec![(deliver, T::one())]
                };
                b.add_action(id, "negotiate", support)?;
            }
            Phase::DecidePay(i) => {
                let cost: T = scalar(service_cost(p, &trust, i)?);
                let mut paid = st.trust.clone();
                paid[i] = (trust[i] + 1).min(p.trust_max) as u8;
                let t = ex.intern(next_round(paid, st.services, i))?;
                let pay = b.add_action(id, "pay", vec![(t, T::one())])?;
                let mut unpaid = st.trust.clone();
                unpaid[i] = p.td[i].apply(trust[i]) as u8;
                let t = ex.intern(next_round(unpaid, st.services, i))?;
                let nopay = b.add_action(id, "nopay", vec![(t, T::one())])?;
                for (name, action, value) in [
                    ("cost", pay, cost),
                    ("paid", pay, T::one()),
                    ("unpaid", nopay, T::one()),
                    ("received", pay, T::one()),
                    ("received", nopay, T::one()),
                ] {
                    b.add_reward(name, action, value)?;
                    b.add_reward(&format!("{name}_{i}"), action, value)?;
                }
            }
            Phase::Share(i) => {
                let mut shared = st.trust.clone();
                let own = shared[i];
                shared.iter_mut().for_each(|t| *t = own);
                let t = ex.intern(TrustState { trust: shared, services: st.services, phase: Phase::Choose })?;
                b.add_action(id, "share", vec![(t, T::one())])?;
                let t = ex.intern(TrustState { phase: Phase::Choose, ..st.clone() })?;
                b.add_action(id, "keep", vec![(t, T::one())])?;
            }
        }
    }

    let mut got: Vec<Vec<StateId>> = vec![Vec::new(); k as usize + 1];
    for (id, st) in ex.states.iter().enumerate() {
        if !matches!(st.phase, Phase::DecidePay(_) | Phase::Stuck) {
            got[st.services as usize].push(id);
        }
    }
    let in_phase = |f: fn(&Phase) -> bool| -> Vec<StateId> {
        (0..ex.states.len()).filter(|&s| f(&ex.states[s].phase)).collect()
    };
    b.add_label("done", in_phase(|ph| *ph == Phase::Done))?;
    b.add_label("stuck", in_phase(|ph| *ph == Phase::Stuck))?;
    b.add_label("got_k", got[k as usize].clone())?;
    for (j, states) in got.into_iter().enumerate() {
        b.add_label(&format!("got_{j}"), states)?;
    }
    b.set_initial(initial);
    Ok(TrustGame {
        game: b.build()?,
        initial,
        states: ex.states,
        params: p.clone(),
    })
}

/// Providers share only when their own trust of the requester is strictly
/// below every other provider's.
pub fn heuristic_sharing_strategy<T: Scalar>(tg: &TrustGame<T>) -> Result<Strategy, TrustError> {
    if tg.params.sharing != Sharing::Strategic {
        return Err(TrustError::WrongScheme);
    }
    let choices = tg
        .states
        .iter()
        .map(|st| match st.phase {
            Phase::Negotiate(_) => Some(0),
            Phase::Share(i) => {
                let others = st.trust.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &t)| t).min();
                let share = others.is_some_and(|m| st.trust[i] < m);
                Some(if share { 0 } else { 1 })
            }
            _ => None,
        })
        .collect();
    Ok(Strategy::memoryless(tg.providers(), choices))
}
