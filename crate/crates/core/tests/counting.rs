use num_bigint::BigUint;
use num_traits::ToPrimitive;
use patdens::oracle::brute_force_count;
use patdens::patterns::{
    binomial, block_counts_polynomial, check_relations, count_pattern, greedy_independent_extension, independence_rank,
    BlockSequence, RankConfig,
};
use patdens::word::w;
use patdens::BinaryWord;
use proptest::prelude::*;

fn word(max: usize) -> impl Strategy<Value = BinaryWord> {
    prop::collection::vec(0u8..=1, 0..=max).prop_map(|v| BinaryWord::new(v).unwrap())
}

fn pattern(max: usize) -> impl Strategy<Value = BinaryWord> {
    prop::collection::vec(0u8..=1, 1..=max).prop_map(|v| BinaryWord::new(v).unwrap())
}

proptest! {
    #[test]
    fn dp_matches_enumeration(p in pattern(5), x in word(18)) {
        let dp = count_pattern(&p, &x).unwrap();
        prop_assert_eq!(dp, BigUint::from(brute_force_count(&p, &x)));
    }

    #[test]
    fn complement_symmetry(p in pattern(6), x in word(60)) {
        prop_assert_eq!(count_pattern(&p, &x).unwrap(), count_pattern(&p.complement(), &x.complement()).unwrap());
    }

    #[test]
    fn reversal_symmetry(p in pattern(6), x in word(60)) {
        prop_assert_eq!(count_pattern(&p, &x).unwrap(), count_pattern(&p.reversed(), &x.reversed()).unwrap());
    }

    #[test]
    fn count_bounded_by_binomial(p in pattern(5), x in word(40)) {
        let c = count_pattern(&p, &x).unwrap();
        let total = binomial(x.len() as u64, p.len() as u64);
        prop_assert!(c <= total);
        // every m-subset spells p: x = p, or both constant in the same symbol
        let full = x.len() >= p.len() && c == total;
        let constant_match = p.is_constant() && x.bits().iter().all(|&b| b == p.bits()[0]);
        prop_assert_eq!(full, x.len() >= p.len() && (constant_match || x == p));
    }

    #[test]
    fn relations_hold(x in word(64)) {
        for r in check_relations(&x) {
            prop_assert!(r.pass, "{} fails on {}: {} vs {}", r.relation, x, r.lhs, r.rhs);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn block_polynomial_matches_expansion(
        lengths in prop::collection::vec(1u32..=5, 1..=7),
        p in pattern(5),
    ) {
        let blocks = BlockSequence::new(lengths.iter().map(|&a| a as f64).collect()).unwrap();
        let x = blocks.expand().unwrap();
        let poly = block_counts_polynomial(&p, &blocks).unwrap();
        let exact = count_pattern(&p, &x).unwrap().to_f64().unwrap();
        prop_assert!((poly - exact).abs() <= 1e-9 * exact.max(1.0), "{poly} vs {exact}");
    }
}

#[test]
fn worked_counts() {
    assert_eq!(count_pattern(&w("10"), &w("0100101")).unwrap(), BigUint::from(4u32));
    let b = BlockSequence::new(vec![13.0; 4]).unwrap();
    assert_eq!(block_counts_polynomial(&w("1010"), &b).unwrap(), 28561.0);
}

#[test]
fn length_five_count_at_fixed_length() {
    let seven: Vec<BinaryWord> = ["1", "10", "100", "110", "1000", "1100", "1110"].iter().map(|s| w(s)).collect();
    let cfg = RankConfig {
        fixed_length: true,
        ..RankConfig::default()
    };
    let blocks = BlockSequence::generic(16, 3);
    let candidates: Vec<BinaryWord> = BinaryWord::all_of_len(5).collect();
    let extra = greedy_independent_extension(&seven, &candidates, &blocks, &cfg).unwrap();
    assert_eq!(extra.len(), 6);
    let mut all = seven;
    all.extend(extra);
    assert_eq!(independence_rank(&all, &blocks, &cfg).unwrap().rank, 13);
}

#[test]
fn dependent_set_loses_rank() {
    let blocks = BlockSequence::generic(8, 5);
    let set = [w("01"), w("10"), w("1"), w("0")];
    assert_eq!(independence_rank(&set, &blocks, &RankConfig::default()).unwrap().rank, 3);
}
