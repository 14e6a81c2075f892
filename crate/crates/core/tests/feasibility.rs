use patdens::feasibility::{
    boundary_csv, c_closed_form, c_numeric, extremal_density_1010, feasible_interval, lift, AscentConfig,
};
use patdens::measures::{density_of_measure, Cell};
use patdens::word::w;
use patdens::StepMeasure;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TABULATED: [&str; 6] = ["10", "1100", "1010", "10110", "11010", "10101"];

/// Random step density rescaled to `rho_1 = rho` while staying in `[0, 1]`.
fn random_density(rng: &mut ChaCha8Rng, rho: f64) -> StepMeasure {
    let k = rng.random_range(1..=10);
    let widths: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = widths.iter().sum();
    let mut cells: Vec<Cell> = widths
        .iter()
        .map(|&wd| Cell {
            w: wd / total,
            v: if rng.random::<f64>() < 0.3 { rng.random_range(0..=1) as f64 } else { rng.random() },
        })
        .collect();
    let mean: f64 = cells.iter().map(|c| c.w * c.v).sum();
    for c in &mut cells {
        c.v = if mean > rho {
            c.v * rho / mean
        } else {
            1.0 - (1.0 - c.v) * (1.0 - rho) / (1.0 - mean)
        };
    }
    StepMeasure::new(cells, Vec::new()).unwrap()
}

#[test]
fn random_densities_respect_the_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for t in TABULATED {
        let tau = w(t);
        let c = c_closed_form(&tau).unwrap().unwrap();
        for i in 1..=20 {
            let rho = i as f64 / 21.0;
            let bound = c * rho.powi(tau.ones() as i32) * (1.0 - rho).powi(tau.zeros() as i32);
            for _ in 0..500 {
                let f = random_density(&mut rng, rho);
                assert!(density_of_measure(&tau, &f).unwrap() <= bound + 1e-9, "{t} at rho {rho}");
            }
        }
    }
}

#[test]
fn refining_the_grid_never_loses_value() {
    let cfg = AscentConfig::default();
    for t in ["1010", "10110"] {
        let tau = w(t);
        let mut prev = 0.0;
        for n in [50, 100, 200] {
            let v = c_numeric(&tau, n, &cfg).unwrap().value;
            assert!(v >= prev - 1e-9 * prev, "{t}: {v} < {prev} at grid {n}");
            prev = v;
        }
    }
}

#[test]
fn numeric_maximum_scales_like_the_bound() {
    let cfg = AscentConfig::default();
    for t in ["1010", "11010"] {
        let tau = w(t);
        let g = c_numeric(&tau, 200, &cfg).unwrap();
        let ratios: Vec<f64> = [0.2, 0.35, 0.5, 0.65, 0.8]
            .iter()
            .map(|&rho| {
                let f = lift(&g.argmax, rho).unwrap();
                assert!(f.is_sublebesgue());
                assert!((f.total_mass() - rho).abs() < 1e-12);
                density_of_measure(&tau, &f).unwrap() / (rho.powi(tau.ones() as i32) * (1.0 - rho).powi(tau.zeros() as i32))
            })
            .collect();
        for r in &ratios {
            assert!((r - ratios[0]).abs() < 0.01 * ratios[0], "{t}: {ratios:?}");
            assert!((r - g.value).abs() < 0.01 * g.value);
        }
    }
}

#[test]
fn extremal_shape_beats_block_arrangement() {
    let best = density_of_measure(&w("1010"), &extremal_density_1010(0.5, 2000).unwrap()).unwrap();
    let blocks = StepMeasure::uniform_grid(&[1.0, 0.0, 1.0, 0.0]).unwrap();
    let block = density_of_measure(&w("1010"), &blocks).unwrap();
    assert!((block - 0.09375).abs() < 1e-15);
    assert!(best > block);
}

#[test]
fn intervals_and_boundary_curve() {
    let iv = feasible_interval(&w("10"), 0.5, 100, &AscentConfig::default()).unwrap();
    assert!((iv.upper - 0.5).abs() < 1e-15 && iv.closed_form);
    let csv = boundary_csv(&w("1010"), 12.0 / std::f64::consts::E.powi(2), 4);
    assert!(csv.starts_with("rho,upper\n0,0\n"));
    assert_eq!(csv.lines().count(), 6);
    assert!(c_numeric(&w("1111"), 100, &AscentConfig::default()).is_err());
}
