mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trustsmg::engine::{Engine, Horizon, Star};
use trustsmg::oracle::{brute_force_value, evaluate_chain, OracleObjective, Profile, DEFAULT_PROFILE_CAP};
use trustsmg::rpatl::Direction;

const GAMES: usize = 250;
const TOL: f64 = 1e-6;

fn close(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x.is_infinite() && y.is_infinite() && x.signum() == y.signum()) || (x - y).abs() < TOL)
}

fn engine() -> Engine<f64> {
    let mut e = Engine::default();
    e.max_iterations = 100_000;
    e
}

#[test]
fn engine_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let e = engine();
    for i in 0..GAMES {
        let (g, t, c) = common::random_game(&mut rng, 6);
        for dir in [Direction::Max, Direction::Min] {
            let got = e.solve_prob(&g, &c, &t, Horizon::Unbounded, dir).unwrap().values.values;
            let want = brute_force_value(&g, &c, OracleObjective::Reach { target: &t }, dir, DEFAULT_PROFILE_CAP)
                .unwrap()
                .values;
            assert!(close(&got, &want), "game {i} P {dir:?}: {got:?} vs {want:?}");
            for star in [Star::Cumulative, Star::Infinite] {
                let got = e.solve_reward(&g, &c, "r", &t, star, dir).unwrap().values.values;
                let objective = OracleObjective::Reward {
                    reward: "r",
                    target: &t,
                    star,
                };
                let want = brute_force_value(&g, &c, objective, dir, DEFAULT_PROFILE_CAP).unwrap().values;
                assert!(close(&got, &want), "game {i} R{star:?} {dir:?}: {got:?} vs {want:?}");
            }
        }
    }
}

/// The synthesised profile, evaluated as a plain Markov chain, attains the
/// reported values.
#[test]
fn synthesised_profiles_attain_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let e = engine();
    for i in 0..GAMES {
        let (g, t, c) = common::random_game(&mut rng, 6);
        let n = g.num_states();
        for dir in [Direction::Max, Direction::Min] {
            let sol = e.solve_prob(&g, &c, &t, Horizon::Unbounded, dir).unwrap();
            let profile = Profile::from_strategies(&sol.strategy, &sol.adversary, n).unwrap();
            let chain = evaluate_chain(&g, &profile, OracleObjective::Reach { target: &t }).unwrap();
            assert!(close(&chain.values, &sol.values.values), "game {i} P {dir:?}");
            for star in [Star::Cumulative, Star::Infinite] {
                let sol = e.solve_reward(&g, &c, "r", &t, star, dir).unwrap();
                let profile = Profile::from_strategies(&sol.strategy, &sol.adversary, n).unwrap();
                let objective = OracleObjective::Reward {
                    reward: "r",
                    target: &t,
                    star,
                };
                let chain = evaluate_chain(&g, &profile, objective).unwrap();
                assert!(close(&chain.values, &sol.values.values), "game {i} R{star:?} {dir:?}");
            }
        }
    }
}

#[test]
fn star_ordering() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let e = engine();
    for i in 0..GAMES {
        let (g, t, c) = common::random_game(&mut rng, 6);
        for dir in [Direction::Max, Direction::Min] {
            let cum = e.solve_reward(&g, &c, "r", &t, Star::Cumulative, dir).unwrap().values.values;
            let inf = e.solve_reward(&g, &c, "r", &t, Star::Infinite, dir).unwrap().values.values;
            for s in 0..g.num_states() {
                assert!(cum[s] <= inf[s] + TOL, "game {i} state {s} {dir:?}");
            }
            // the ★=0 iteration diverges where history-dependent play is unbounded
            if let Ok(zero) = e.solve_reward(&g, &c, "r", &t, Star::Zero, dir) {
                for s in 0..g.num_states() {
                    assert!(zero.values.values[s] <= cum[s] + TOL, "game {i} state {s} {dir:?}");
                }
            }
        }
    }
}
