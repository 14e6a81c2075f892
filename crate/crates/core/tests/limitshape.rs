use patdens::limitshape::{entropy, solve_limit_shape, DensityTargets, LimitConfig};
use patdens::measures::{density_gradient, density_of_measure, Cell};
use patdens::word::w;
use patdens::{Error, StepMeasure};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn iid_point() {
    let t = DensityTargets::parse("rho1=0.5,rho10=0.25").unwrap();
    let s = solve_limit_shape(&t, 200, &LimitConfig::default()).unwrap();
    assert!((s.p.coeffs[0] - 0.5f64.ln()).abs() < 1e-10);
    assert!((s.entropy - 2f64.ln()).abs() < 1e-10);
}

#[test]
fn solved_shape_is_entropy_maximal() {
    let grid = 400;
    let t = DensityTargets::new(0.5, vec![(2, 1.0 / 3.0)]).unwrap();
    let s = solve_limit_shape(&t, grid, &LimitConfig::default()).unwrap();
    let widths: Vec<f64> = vec![1.0 / grid as f64; grid];
    let values: Vec<f64> = (0..grid).map(|i| s.f.value_at((i as f64 + 0.5) / grid as f64)).collect();
    let f0 = StepMeasure::uniform_grid(&values).unwrap();
    let patterns = [w("1"), w("110")];
    let base: Vec<f64> = patterns.iter().map(|p| density_of_measure(p, &f0).unwrap()).collect();
    let e0 = entropy(&f0).unwrap();
    let grads = DMatrix::from_fn(grid, 2, |i, j| density_gradient(patterns[j].bits(), &widths, &values).1[i]);
    let proj = &grads * (grads.transpose() * &grads).try_inverse().unwrap() * grads.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    for _ in 0..200 {
        let k = DVector::from_fn(grid, |_, _| rng.random_range(-1.0..1.0));
        let k = &k - &proj * &k;
        let k = &k / k.amax();
        let cells: Vec<Cell> = (0..grid)
            .map(|i| Cell {
                w: widths[i],
                v: (values[i] + 1e-3 * k[i]).clamp(0.0, 1.0),
            })
            .collect();
        let f = StepMeasure::new(cells, Vec::new()).unwrap();
        let moved = patterns
            .iter()
            .zip(&base)
            .any(|(p, b)| (density_of_measure(p, &f).unwrap() - b).abs() > 1e-6);
        if moved {
            continue;
        }
        checked += 1;
        assert!(entropy(&f).unwrap() <= e0 + 1e-8);
    }
    assert!(checked > 100, "only {checked} perturbations kept the targets");
}

#[test]
fn approaching_the_boundary() {
    let cfg = LimitConfig::default();
    let mut last: Option<(f64, f64)> = None;
    for v in [0.34, 0.35, 0.36, 0.365] {
        let t = DensityTargets::new(0.5, vec![(2, v)]).unwrap();
        let s = solve_limit_shape(&t, 200, &cfg).unwrap();
        let size = s.p.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if let Some((ls, le)) = last {
            assert!(size > ls && s.entropy < le, "{v}: {size} {}", s.entropy);
        }
        last = Some((size, s.entropy));
    }
    let far = DensityTargets::new(0.5, vec![(2, 0.45)]).unwrap();
    assert!(matches!(solve_limit_shape(&far, 200, &cfg), Err(Error::NearBoundary(_))));
}

#[test]
fn shape_reproduces_targets() {
    let t = DensityTargets::parse("rho1=0.4,rho10=0.2,rho110=0.1").unwrap();
    let s = solve_limit_shape(&t, 4000, &LimitConfig::default()).unwrap();
    assert!(s.residuals.iter().all(|r| r.abs() < 1e-6), "{:?}", s.residuals);
    assert!(s.f.is_sublebesgue());
}
