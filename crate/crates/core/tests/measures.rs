use patdens::measures::{density_of_measure, measure_of_word, wasserstein, Cell};
use patdens::oracle::density_by_quadrature;
use patdens::patterns::density;
use patdens::word::w;
use patdens::{BinaryWord, StepMeasure};
use proptest::prelude::*;

fn measure() -> impl Strategy<Value = StepMeasure> {
    prop::collection::vec((0.05f64..1.0, 0.0f64..=1.0), 1..8).prop_map(|cells| {
        let total: f64 = cells.iter().map(|c| c.0).sum();
        let cells = cells.iter().map(|&(w, v)| Cell { w: w / total, v }).collect();
        StepMeasure::new(cells, Vec::new()).unwrap()
    })
}

proptest! {
    #[test]
    fn wasserstein_is_a_metric(a in measure(), b in measure(), c in measure()) {
        let ab = wasserstein(&a, &b);
        prop_assert!((ab - wasserstein(&b, &a)).abs() < 1e-14);
        prop_assert!(wasserstein(&a, &a) < 1e-14);
        prop_assert!(ab <= wasserstein(&a, &c) + wasserstein(&c, &b) + 1e-13);
    }

    #[test]
    fn densities_of_one_length_sum_to_one(mu in measure(), k in 1usize..=5) {
        let total: f64 = BinaryWord::all_of_len(k).map(|p| density_of_measure(&p, &mu).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12, "{total}");
    }

    #[test]
    fn reversal_and_flip(mu in measure(), p in prop::collection::vec(0u8..=1, 1..=5)) {
        let p = BinaryWord::new(p).unwrap();
        let lhs = density_of_measure(&p.complement().reversed(), &mu.reflect_complement().unwrap()).unwrap();
        prop_assert!((lhs - density_of_measure(&p, &mu).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn dp_matches_quadrature(mu in measure(), p in prop::collection::vec(0u8..=1, 1..=3)) {
        let p = BinaryWord::new(p).unwrap();
        let dp = density_of_measure(&p, &mu).unwrap();
        prop_assert!((dp - density_by_quadrature(&p, &mu)).abs() < 1e-10);
    }
}

#[test]
fn stretched_words_converge_at_rate_one_over_kn() {
    let x = w("1101001110");
    let mu = measure_of_word(&x).unwrap();
    for p in ["10", "110", "1010"] {
        let limit = density_of_measure(&w(p), &mu).unwrap();
        for k in [1usize, 4, 16, 64] {
            let gap = (density(&w(p), &x.stretched(k)).unwrap() - limit).abs();
            let kn = (k * x.len()) as f64;
            assert!(gap * kn < 10.0, "{p} k={k}: gap {gap}");
        }
    }
}

#[test]
fn measure_of_word_distance() {
    let a = measure_of_word(&w("1100")).unwrap();
    let b = measure_of_word(&w("1010")).unwrap();
    assert!((wasserstein(&a, &b) - 0.0625).abs() < 1e-15);
}
