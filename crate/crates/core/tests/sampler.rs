use patdens::sampler::{calibrate_multipliers, mcmc_sample, stationary_tv_check, CalibrationConfig, GibbsSpec};
use patdens::word::w;

fn spec(seed: u64) -> GibbsSpec {
    let mut s = GibbsSpec::new(200, vec![w("1"), w("10")], vec![0.3, 2.0], seed).unwrap();
    s.sweeps = 60;
    s.burn_in = 20;
    s.trace_every = 10;
    s
}

#[test]
fn seeded_runs_repeat() {
    let (a, sa) = mcmc_sample(&spec(3), None).unwrap();
    let (b, sb) = mcmc_sample(&spec(3), None).unwrap();
    assert_eq!(a, b);
    assert_eq!(sa, sb);
    let (c, _) = mcmc_sample(&spec(4), None).unwrap();
    assert_ne!(a, c);
}

#[test]
fn incremental_counts_never_drift() {
    let (_, s) = mcmc_sample(&spec(9), None).unwrap();
    assert!(s.drift_checks > 0);
    assert_eq!(s.drift_mismatches, 0);
    assert!(s.acceptance_rate > 0.0 && s.acceptance_rate <= 1.0);
}

#[test]
fn untilted_chain_is_uniform() {
    let tv = stationary_tv_check(8, &[w("1")], &[0.0], 2_000_000, 2).unwrap();
    assert!(tv.total_variation < 0.02, "{}", tv.total_variation);
}

#[test]
fn calibration_hits_small_targets() {
    let targets = [(w("1"), 0.5), (w("10"), 0.2)];
    let cal = calibrate_multipliers(&targets, 200, &CalibrationConfig::default()).unwrap();
    for ((_, t), m) in targets.iter().zip(&cal.means) {
        assert!((m - t).abs() < 0.01, "{m} vs {t}");
    }
}
