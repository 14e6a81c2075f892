use patdens::deckopt::{deck_density, new_deck_order, optimize_deck, AnnealConfig, DeckProblem, Mode};
use patdens::word::w;

fn quick() -> AnnealConfig {
    AnnealConfig {
        steps: 200_000,
        stages: 2000,
        ..AnnealConfig::default()
    }
}

#[test]
fn anneal_matches_exhaustive_on_small_decks() {
    for n in [12, 16, 20, 22] {
        let ex = optimize_deck(&DeckProblem::new(n, n / 2, w("1010"), Mode::Exhaustive).unwrap(), 1).unwrap();
        let mut p = DeckProblem::new(n, n / 2, w("1010"), Mode::Anneal).unwrap();
        p.anneal = quick();
        let an = optimize_deck(&p, 1).unwrap();
        assert_eq!(an.count, ex.count, "n = {n}");
    }
}

#[test]
fn search_never_loses_ground() {
    let start = new_deck_order(4);
    let mut p = DeckProblem::new(16, 8, w("1010"), Mode::Ascent).unwrap();
    p.initial = Some(start.clone());
    let up = optimize_deck(&p, 5).unwrap();
    let (c0, _) = deck_density(&w("1010"), &start).unwrap();
    assert!(up.count >= c0);
    p.mode = Mode::Anneal;
    p.anneal = quick();
    let an = optimize_deck(&p, 5).unwrap();
    assert!(an.count >= up.count);
    assert_eq!(deck_density(&w("1010"), &an.best).unwrap().0, an.count);
    assert_eq!(an.best.ones(), 8);
}

#[test]
fn complement_gives_mirror_problem() {
    for (n, k) in [(14, 5), (15, 9)] {
        let a = optimize_deck(&DeckProblem::new(n, k, w("1100"), Mode::Exhaustive).unwrap(), 0).unwrap();
        let b = optimize_deck(&DeckProblem::new(n, n - k, w("0011"), Mode::Exhaustive).unwrap(), 0).unwrap();
        assert_eq!(a.count, b.count);
    }
}

#[test]
fn rejects_bad_problems() {
    assert!(DeckProblem::new(10, 11, w("10"), Mode::Ascent).is_err());
    assert!(DeckProblem::new(80, 40, w("1010"), Mode::Exhaustive).is_err());
    let mut p = DeckProblem::new(10, 5, w("10"), Mode::Ascent).unwrap();
    p.initial = Some(w("1111111111"));
    assert!(optimize_deck(&p, 0).is_err());
}
