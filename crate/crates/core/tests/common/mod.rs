#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use trustsmg::rpatl::{Direction, Formula, Objective, Query, Rel, Star};
use trustsmg::smg::{PlayerId, Smg, SmgBuilder, StateId};

/// Random game with `2..=max_states` states and `1..=3` actions per state.
/// Probabilities are multiples of 1/8 so that the oracle's exact arithmetic
/// stays cheap; some states are left without actions (deadlocks).
pub fn random_game<R: Rng>(rng: &mut R, max_states: usize) -> (Smg<f64>, Vec<StateId>, BTreeSet<PlayerId>) {
    let n = rng.gen_range(2..=max_states);
    let players = rng.gen_range(1..=3);
    let mut b = SmgBuilder::new();
    let ids: Vec<PlayerId> = (0..players).map(|i| b.add_player(&format!("p{i}")).unwrap()).collect();
    b.add_reward_structure("r").unwrap();
    let states: Vec<StateId> = (0..n).map(|_| b.add_state(*ids.choose(rng).unwrap())).collect();
    for &s in &states {
        let actions = if rng.gen_bool(0.1) { 0 } else { rng.gen_range(1..=3) };
        for a in 0..actions {
            let k = rng.gen_range(1..=3.min(n));
            let succ: Vec<StateId> = states.choose_multiple(rng, k).copied().collect();
            let mut units = vec![1u32; k];
            for _ in k..8 {
                units[rng.gen_range(0..k)] += 1;
            }
            let support = succ.iter().zip(&units).map(|(&t, &u)| (t, u as f64 / 8.0)).collect();
            let r = b.add_action(s, &format!("a{a}"), support).unwrap();
            let reward = [0.0, 0.0, 0.5, 1.0, 2.0, 3.0].choose(rng).copied().unwrap();
            b.add_reward("r", r, reward).unwrap();
        }
    }
    b.add_reward_structure("empty").unwrap();
    let mut target: Vec<StateId> = states.iter().copied().filter(|_| rng.gen_bool(0.25)).collect();
    if target.is_empty() {
        target.push(*states.choose(rng).unwrap());
    }
    let coalition = ids.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
    (b.build().unwrap(), target, coalition)
}

const NAME_START: &[u8] = b"abcxyzPRF_";
const NAME_REST: &[u8] = b"abcxyzPRF_019";

fn random_name<R: Rng>(rng: &mut R) -> String {
    let len = rng.gen_range(0..6);
    let mut s = String::new();
    s.push(*NAME_START.choose(rng).unwrap() as char);
    for _ in 0..len {
        s.push(*NAME_REST.choose(rng).unwrap() as char);
    }
    s
}

/// Arbitrary text for quoted names, including quotes, backslashes and
/// non-ASCII characters.
fn random_quoted<R: Rng>(rng: &mut R) -> String {
    const POOL: &[char] = &['a', 'Z', '_', ' ', '"', '\\', '[', ']', '=', '?', 'é', '∞', '0'];
    (0..rng.gen_range(0..8)).map(|_| *POOL.choose(rng).unwrap()).collect()
}

fn random_number<R: Rng>(rng: &mut R) -> f64 {
    match rng.gen_range(0..4) {
        0 => rng.gen_range(0..=4) as f64 / 4.0,
        1 => rng.gen::<f64>(),
        2 => rng.gen_range(0.0..1e6),
        _ => f64::from_bits(rng.gen_range(0..0x7FF0_0000_0000_0000u64)),
    }
}

pub fn random_formula<R: Rng>(rng: &mut R) -> Formula {
    let coalition = (0..rng.gen_range(0..4)).map(|_| random_name(rng)).collect();
    let objective = if rng.gen_bool(0.5) {
        let shift = rng.gen_range(0..64);
        let bounded = rng.gen_bool(0.5);
        Objective::Prob {
            horizon: bounded.then(|| rng.gen_range(0..=u64::MAX >> shift)),
        }
    } else {
        let star = *[Star::Zero, Star::Cumulative, Star::Infinite].choose(rng).unwrap();
        Objective::Reward {
            name: random_quoted(rng),
            star,
        }
    };
    let query = match rng.gen_range(0..6) {
        0 => Query::Numeric(Direction::Max),
        1 => Query::Numeric(Direction::Min),
        r => {
            let rel = [Rel::Le, Rel::Lt, Rel::Ge, Rel::Gt][r - 2];
            let q = random_number(rng);
            let q = if matches!(objective, Objective::Prob { .. }) { q.fract() } else { q };
            Query::Bound(rel, q)
        }
    };
    Formula {
        coalition,
        objective,
        query,
        target: random_quoted(rng),
    }
}

/// Byte strings biased towards formula fragments so that the fuzzer gets
/// past the first token.
pub fn random_input<R: Rng>(rng: &mut R) -> Vec<u8> {
    const PIECES: &[&str] = &[
        "<<", ">>", ",", "P", "R{", "}", "max=?", "min=?", "<=", ">=", "<", ">", "[", "]", "F", "F0", "Fc", "Finf",
        "\"", "\\", "1", "0.5", "e", "-", " ", "p1", "\"goal\"", "é", "\u{0}",
    ];
    let mut out = Vec::new();
    for _ in 0..rng.gen_range(0..24) {
        if rng.gen_bool(0.2) {
            out.push(rng.gen());
        } else {
            out.extend_from_slice(PIECES.choose(rng).unwrap().as_bytes());
        }
    }
    out
}
