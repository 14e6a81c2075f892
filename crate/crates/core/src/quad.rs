//! Adaptive Gauss–Kronrod quadrature and bracketing root finders.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// 7-point Gauss / 15-point Kronrod abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss–Kronrod 7/15 panel: (kronrod estimate, error estimate).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Tolerances for [`integrate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadTol {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Default for QuadTol {
    fn default() -> Self {
        QuadTol {
            abs: 1e-12,
            rel: 1e-12,
            max_panels: 4000,
        }
    }
}

/// Panel on the refinement heap, ordered by its error estimate.
struct Panel<V> {
    a: f64,
    b: f64,
    value: V,
    err: f64,
}

impl<V> PartialEq for Panel<V> {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err).is_eq()
    }
}

impl<V> Eq for Panel<V> {}

impl<V> PartialOrd for Panel<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<V> Ord for Panel<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive integration: the panel with the largest error estimate
/// is bisected until the summed error meets the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: QuadTol) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, err: e });
    let mut total = v;
    let mut err = e;
    let mut splits = 0usize;
    while err > tol.abs.max(tol.rel * total.abs()) {
        if heap.len() >= tol.max_panels {
            if !total.is_finite() {
                return Err(Error::NonConvergence {
                    iterations: heap.len(),
                    best: total,
                });
            }
            // Accept: the remaining error is below what double precision resolves
            // on panels this small, or the integrand is singular at an endpoint.
            break;
        }
        let p = heap.pop().expect("nonempty");
        if p.err == 0.0 {
            heap.push(p);
            break;
        }
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            err -= p.err;
            heap.push(Panel { err: 0.0, ..p });
            continue;
        }
        let (lv, le) = gk15(&f, p.a, mid);
        let (rv, re) = gk15(&f, mid, p.b);
        total += lv + rv - p.value;
        err += le + re - p.err;
        heap.push(Panel { a: p.a, b: mid, value: lv, err: le });
        heap.push(Panel { a: mid, b: p.b, value: rv, err: re });
        splits += 1;
        if splits.is_multiple_of(64) {
            // Refresh the running sums to shed accumulated cancellation.
            total = heap.iter().map(|p| p.value).sum();
            err = heap.iter().map(|p| p.err).sum();
        }
    }
    if !total.is_finite() {
        return Err(Error::NonConvergence {
            iterations: heap.len(),
            best: total,
        });
    }
    Ok(heap.iter().map(|p| p.value).sum())
}

/// Vector-valued version of [`integrate`]: `f(x, out)` fills one value per
/// component and panels are refined until every component meets the tolerance.
pub fn integrate_many<F: Fn(f64, &mut [f64])>(f: F, dim: usize, a: f64, b: f64, tol: QuadTol) -> Result<Vec<f64>> {
    let mut buf = vec![0.0; dim];
    let mut buf2 = vec![0.0; dim];
    let mut panel = |pa: f64, pb: f64| -> (Vec<f64>, f64) {
        let c = 0.5 * (pa + pb);
        let h = 0.5 * (pb - pa);
        let mut kron = vec![0.0; dim];
        let mut gauss = vec![0.0; dim];
        f(c, &mut buf);
        for d in 0..dim {
            kron[d] = buf[d] * WGK[7];
            gauss[d] = buf[d] * WG[3];
        }
        for j in 0..7 {
            let x = h * XGK[j];
            f(c - x, &mut buf);
            f(c + x, &mut buf2);
            for d in 0..dim {
                let s = buf[d] + buf2[d];
                kron[d] += WGK[j] * s;
                if j % 2 == 1 {
                    gauss[d] += WG[j / 2] * s;
                }
            }
        }
        let mut err: f64 = 0.0;
        for d in 0..dim {
            err = err.max(((kron[d] - gauss[d]) * h).abs());
            kron[d] *= h;
        }
        (kron, err)
    };
    if a == b {
        return Ok(vec![0.0; dim]);
    }
    let (v, e) = panel(a, b);
    let mut total = v.clone();
    let mut err = e;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, err: e });
    let mut splits = 0usize;
    loop {
        if total.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonConvergence {
                iterations: heap.len(),
                best: f64::NAN,
            });
        }
        let scale = total.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        if err <= tol.abs.max(tol.rel * scale) || heap.len() >= tol.max_panels {
            break;
        }
        let p = heap.pop().expect("nonempty");
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b || p.err == 0.0 {
            heap.push(p);
            break;
        }
        let (lv, le) = panel(p.a, mid);
        let (rv, re) = panel(mid, p.b);
        for d in 0..dim {
            total[d] += lv[d] + rv[d] - p.value[d];
        }
        err += le + re - p.err;
        heap.push(Panel { a: p.a, b: mid, value: lv, err: le });
        heap.push(Panel { a: mid, b: p.b, value: rv, err: re });
        splits += 1;
        if splits.is_multiple_of(64) {
            total = vec![0.0; dim];
            for q in heap.iter() {
                for d in 0..dim {
                    total[d] += q.value[d];
                }
            }
            err = heap.iter().map(|q| q.err).sum();
        }
    }
    let mut out = vec![0.0; dim];
    for q in heap.iter() {
        for d in 0..dim {
            out[d] += q.value[d];
        }
    }
    Ok(out)
}

/// Bisection on a sign-changing bracket down to width `xtol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::invalid(format!(
            "bracket [{lo}, {hi}] does not change sign"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Golden-section search for the maximum of a unimodal function on `[lo, hi]`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > xtol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
