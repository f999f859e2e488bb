mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trustsmg::rpatl::{format_formula, parse_syntax};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn formulas_round_trip(seed in any::<u64>()) {
        let f = common::random_formula(&mut ChaCha8Rng::seed_from_u64(seed));
        let text = format_formula(&f);
        prop_assert_eq!(parse_syntax(&text).unwrap(), f, "{}", text);
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
        let _ = parse_syntax(&String::from_utf8_lossy(&bytes));
    }

    #[test]
    fn token_soup_never_panics(seed in any::<u64>()) {
        let bytes = common::random_input(&mut ChaCha8Rng::seed_from_u64(seed));
        let _ = parse_syntax(&String::from_utf8_lossy(&bytes));
    }
}
