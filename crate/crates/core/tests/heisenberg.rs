use num_bigint::BigInt;
use num_traits::Zero;
use patdens::heisenberg::{first_row_equals_counts, matrix_of_word, min_minor, GeneratorSpec};
use patdens::BinaryWord;
use proptest::prelude::*;

fn word(max: usize) -> impl Strategy<Value = BinaryWord> {
    prop::collection::vec(0u8..=1, 0..=max).prop_map(|v| BinaryWord::new(v).unwrap())
}

fn spec(max_dim: usize) -> impl Strategy<Value = GeneratorSpec> {
    prop::collection::vec(0u8..=1, 1..max_dim).prop_map(|m| GeneratorSpec::new(m).unwrap())
}

proptest! {
    #[test]
    fn word_map_is_a_homomorphism(s in spec(6), x in word(20), y in word(20)) {
        let xy = matrix_of_word(&s, &x.concat(&y));
        prop_assert_eq!(xy, matrix_of_word(&s, &x).mul(&matrix_of_word(&s, &y)));
    }

    #[test]
    fn first_row_counts(s in spec(7), x in word(30)) {
        prop_assert!(first_row_equals_counts(&s, &x).pass);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn products_are_totally_nonnegative(s in spec(5), x in word(16)) {
        let m = matrix_of_word(&s, &x);
        for order in 1..=m.dim() {
            prop_assert!(min_minor(&m, order).unwrap() >= BigInt::zero());
        }
    }
}
