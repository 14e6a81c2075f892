//! Entropy-maximizing limit shapes for the constraint family
//! `rho_1, rho_10, rho_110, ..., rho_{1^k 0}`.
//!
//! The maximizer has `H'(y) = 1 / (1 - e^{p(y)})` for a polynomial `p` with
//! `p < 0` on `[0, rho_1]`, where `H` is the inverse of the distribution
//! function. With `h = H' - 1`:
//!
//! * `rho_1` solves `rho_1 + int_0^{rho_1} h = 1`;
//! * `rho_{1^i 0} = (i + 1) int_0^{rho_1} y^i h(y) dy`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::c_closed_form;
use crate::measures::{density_of_measure, fmt12, Cell, StepMeasure};
use crate::quad::{gk15, integrate, integrate_many, QuadTol};
use crate::word::BinaryWord;

/// `S(p) = -p log p - (1-p) log(1-p)`, zero at the endpoints.
pub fn shannon(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.ln() };
    term(p) + term(1.0 - p)
}

/// `Ent(mu) = int S(f)`, exact for step densities.
pub fn entropy(mu: &StepMeasure) -> Result<f64> {
    if !mu.is_sublebesgue() {
        return Err(Error::invalid("entropy needs a sublebesgue density without atoms"));
    }
    Ok(mu.cells().iter().map(|c| c.w * shannon(c.v)).sum())
}

/// Coefficients `(a_0, ..., a_k)` of `p(y) = sum a_j y^j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpPolynomial {
    pub coeffs: Vec<f64>,
}

impl ExpPolynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::invalid("exponent polynomial needs degree >= 1"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("coefficients must be finite"));
        }
        if coeffs[0] >= 0.0 {
            return Err(Error::InfeasibleExponent(format!(
                "constant coefficient {} must be negative",
                coeffs[0]
            )));
        }
        Ok(ExpPolynomial { coeffs })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * y + c)
    }

    /// `h = H' - 1 = 1 / (e^{-p} - 1)`.
    pub fn h(&self, y: f64) -> f64 {
        1.0 / (-self.eval(y)).exp_m1()
    }

    /// The density `f = 1 / H' = 1 - e^p` at the point `y = F(x)`.
    pub fn f_at(&self, y: f64) -> f64 {
        -self.eval(y).exp_m1()
    }
}

/// Tolerances shared by the forward map and the solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitConfig {
    pub quad_abs: f64,
    pub quad_rel: f64,
    /// Newton stops once the max-norm residual is below this.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub max_halvings: usize,
    /// Homotopy steps, successful or not, before giving up.
    pub max_continuation: usize,
    /// Forward-map evaluations in line searches across the whole solve.
    pub max_evaluations: usize,
    /// Coefficients beyond this magnitude count as divergence to the boundary.
    pub coeff_cap: f64,
    /// `1 - e^p` below this anywhere on `[0, rho_1]` is treated as the boundary.
    pub boundary_gap: f64,
}

impl Default for LimitConfig {
    fn default() -> Self {
        LimitConfig {
            quad_abs: 1e-15,
            quad_rel: 1e-14,
            newton_tol: 1e-13,
            max_newton: 60,
            max_halvings: 30,
            max_continuation: 200,
            max_evaluations: 400,
            coeff_cap: 1e4,
            boundary_gap: 1e-13,
        }
    }
}

impl LimitConfig {
    fn tol(&self) -> QuadTol {
        QuadTol {
            abs: self.quad_abs,
            rel: self.quad_rel,
            max_panels: 4000,
        }
    }
}

/// First zero of `p` in `(0, 1]`, if any.
fn first_zero(p: &ExpPolynomial) -> Option<f64> {
    let n = 4096;
    let mut prev = 0.0;
    for j in 1..=n {
        let y = j as f64 / n as f64;
        if p.eval(y) >= 0.0 {
            let (mut lo, mut hi) = (prev, y);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if p.eval(mid) >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(lo);
        }
        prev = y;
    }
    None
}

/// Solves `rho + int_0^rho h = 1` by safeguarded Newton.
pub fn solve_rho1(p: &ExpPolynomial, cfg: &LimitConfig) -> Result<f64> {
    if p.coeffs[0] >= 0.0 {
        return Err(Error::InfeasibleExponent("p(0) >= 0".into()));
    }
    let zero = first_zero(p);
    let (mut lo, mut hi) = (0.0, zero.unwrap_or(1.0));
    let tol = cfg.tol();
    // start from the constant-coefficient solution, clipped into the bracket
    let mut y = (-p.coeffs[0].exp_m1()).clamp(0.0, hi);
    if y <= lo || y >= hi {
        y = 0.5 * (lo + hi);
    }
    let mut value = y + integrate(|t| p.h(t), 0.0, y, tol)?;
    for _ in 0..200 {
        let r = value - 1.0;
        if r.abs() < 1e-15 {
            return Ok(y);
        }
        if r > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let slope = 1.0 + p.h(y);
        let mut next = y - r / slope;
        if !(next > lo && next < hi) || !slope.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() < 1e-16 || hi - lo < 1e-16 {
            return Ok(next);
        }
        let piece = if next > y {
            integrate(|t| p.h(t), y, next, tol)?
        } else {
            -integrate(|t| p.h(t), next, y, tol)?
        };
        value += next - y + piece;
        y = next;
    }
    Ok(y)
}

/// Output of the forward map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiValue {
    pub rho1: f64,
    /// `rho_{1^i 0}` for `i = 0..=k` (the `i = 0` entry is `rho_0 = 1 - rho_1`).
    pub densities: Vec<f64>,
}

fn check_boundary(p: &ExpPolynomial, rho1: f64, cfg: &LimitConfig) -> Result<()> {
    let n = 1024;
    for j in 0..=n {
        let y = rho1 * j as f64 / n as f64;
        let gap = p.f_at(y);
        if !(gap > cfg.boundary_gap) {
            return Err(Error::NearBoundary(format!(
                "1 - e^p(y) = {gap:e} at y = {y} within [0, rho_1 = {rho1}]"
            )));
        }
    }
    Ok(())
}

/// `(rho_1, rho_0, rho_10, ..., rho_{1^k 0})` for the degree of `p`.
pub fn phi_forward(p: &ExpPolynomial, cfg: &LimitConfig) -> Result<PhiValue> {
    phi_forward_upto(p, p.degree(), cfg)
}

fn phi_forward_upto(p: &ExpPolynomial, k: usize, cfg: &LimitConfig) -> Result<PhiValue> {
    let rho1 = solve_rho1(p, cfg)?;
    check_boundary(p, rho1, cfg)?;
    let moments = integrate_many(
        |y, out| {
            let h = p.h(y);
            let mut yi = 1.0;
            for o in out.iter_mut() {
                *o = yi * h;
                yi *= y;
            }
        },
        k + 1,
        0.0,
        rho1,
        cfg.tol(),
    )?;
    let densities = moments.iter().enumerate().map(|(i, m)| (i + 1) as f64 * m).collect();
    Ok(PhiValue { rho1, densities })
}

/// Jacobian of `a -> (rho_1, rho_10, ..., rho_{1^k 0})` (rows) with respect to
/// `a_0, ..., a_k` (columns), from the closed-form derivatives with
/// `d mu = h (1 + h) dy` and `c = e^{p(rho_1)}`:
///
/// * `d rho_1 / d a_j = -(1 - c) int y^j d mu`;
/// * `d rho_{1^i 0} / d a_j = (i + 1) int y^j (y^i - rho_1^i c) d mu`.
pub fn phi_jacobian(p: &ExpPolynomial, cfg: &LimitConfig) -> Result<DMatrix<f64>> {
    let k = p.degree();
    let rows: Vec<usize> = (1..=k).collect();
    let cols: Vec<usize> = (0..=k).collect();
    jacobian_on(p, &rows, &cols, cfg)
}

/// Jacobian restricted to the `rho_{1^i 0}` rows in `rows` (after the
/// `rho_1` row) and the coefficients in `cols`.
fn jacobian_on(p: &ExpPolynomial, rows: &[usize], cols: &[usize], cfg: &LimitConfig) -> Result<DMatrix<f64>> {
    let rho1 = solve_rho1(p, cfg)?;
    check_boundary(p, rho1, cfg)?;
    let top = rows.iter().chain(std::iter::once(&0)).max().unwrap() + cols.iter().max().unwrap();
    let mu = integrate_many(
        |y, out| {
            let h = p.h(y);
            let w = h * (1.0 + h);
            let mut yi = 1.0;
            for o in out.iter_mut() {
                *o = yi * w;
                yi *= y;
            }
        },
        top + 1,
        0.0,
        rho1,
        cfg.tol(),
    )?;
    let c = p.eval(rho1).exp();
    let mut jac = DMatrix::zeros(rows.len() + 1, cols.len());
    for (cj, &j) in cols.iter().enumerate() {
        jac[(0, cj)] = -(1.0 - c) * mu[j];
        for (ri, &i) in rows.iter().enumerate() {
            jac[(ri + 1, cj)] = (i + 1) as f64 * (mu[i + j] - rho1.powi(i as i32) * c * mu[j]);
        }
    }
    Ok(jac)
}

/// Central-difference Jacobian of [`phi_forward`], for cross-checks.
pub fn phi_jacobian_fd(p: &ExpPolynomial, step: f64, cfg: &LimitConfig) -> Result<DMatrix<f64>> {
    let k = p.degree();
    let mut jac = DMatrix::zeros(k + 1, k + 1);
    for j in 0..=k {
        let h = step * p.coeffs[j].abs().max(1.0);
        let mut up = p.clone();
        let mut dn = p.clone();
        up.coeffs[j] += h;
        dn.coeffs[j] -= h;
        let fu = phi_forward(&up, cfg)?;
        let fd = phi_forward(&dn, cfg)?;
        jac[(0, j)] = (fu.rho1 - fd.rho1) / (2.0 * h);
        for i in 1..=k {
            jac[(i, j)] = (fu.densities[i] - fd.densities[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Targets `rho_1` and a selection of `rho_{1^i 0}`, `i >= 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityTargets {
    pub rho1: f64,
    /// `(i, rho_{1^i 0})` with distinct `i >= 1`.
    pub constraints: Vec<(usize, f64)>,
}

impl DensityTargets {
    pub fn new(rho1: f64, mut constraints: Vec<(usize, f64)>) -> Result<Self> {
        if !(rho1 > 0.0 && rho1 < 1.0) {
            return Err(Error::invalid(format!("rho_1 = {rho1} must lie in (0, 1)")));
        }
        constraints.sort_by_key(|c| c.0);
        for w in constraints.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::invalid("duplicate constraint"));
            }
        }
        for &(i, v) in &constraints {
            if i == 0 {
                return Err(Error::invalid("rho_0 is fixed by rho_1; constrain rho_1 instead"));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("target {v} outside [0, 1]")));
            }
        }
        Ok(DensityTargets { rho1, constraints })
    }

    /// Parses `"rho1=0.5,rho110=0.3333"`; `rho0=` fixes `rho_1 = 1 - value`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut rho1 = None;
        let mut cons = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, val) = part
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("expected key=value, got {part}")))?;
            let v: f64 = val
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad number {val}")))?;
            let pat = key.trim().strip_prefix("rho").unwrap_or(key.trim());
            match pat {
                "1" => rho1 = Some(v),
                "0" => rho1 = Some(1.0 - v),
                _ => {
                    let w: BinaryWord = pat.parse()?;
                    let i = w.len() - 1;
                    if w.bits()[i] != 0 || w.bits()[..i].iter().any(|&b| b != 1) {
                        return Err(Error::invalid(format!("{pat} is not of the form 1^i 0")));
                    }
                    cons.push((i, v));
                }
            }
        }
        let rho1 = rho1.ok_or_else(|| Error::invalid("targets must fix rho1"))?;
        Self::new(rho1, cons)
    }

    /// Target vector `(rho_1, constraint values...)`.
    fn vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.constraints.len() + 1,
            std::iter::once(self.rho1).chain(self.constraints.iter().map(|c| c.1)),
        )
    }
}

/// A solved limit shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitShape {
    pub p: ExpPolynomial,
    pub rho1: f64,
    /// Cell averages of `f` on a uniform grid.
    pub f: StepMeasure,
    /// `int S(f)` evaluated by quadrature on the exact density.
    pub entropy: f64,
    /// Differences between each target and the exact pattern density of the
    /// gridded `f`, in target order.
    pub residuals: Vec<f64>,
    pub newton_steps: usize,
}

/// Distribution function `F = H^{-1}` of the density `1 - e^{p(F)}`.
pub struct Reconstruction<'a> {
    p: &'a ExpPolynomial,
    ys: Vec<f64>,
    hs: Vec<f64>,
}

impl<'a> Reconstruction<'a> {
    pub fn new(p: &'a ExpPolynomial, rho1: f64, segments: usize) -> Self {
        let ys: Vec<f64> = (0..=segments).map(|j| rho1 * j as f64 / segments as f64).collect();
        let mut hs = vec![0.0; segments + 1];
        for j in 0..segments {
            let (a, b) = (ys[j], ys[j + 1]);
            hs[j + 1] = hs[j] + b - a + gk15(&|t| p.h(t), a, b).0;
        }
        Reconstruction { p, ys, hs }
    }

    /// `H(y)` for `y` in `[0, rho_1]`.
    pub fn big_h(&self, y: f64) -> f64 {
        let j = self.segment_of_y(y);
        self.hs[j] + y - self.ys[j] + gk15(&|t| self.p.h(t), self.ys[j], y).0
    }

    fn segment_of_y(&self, y: f64) -> usize {
        self.ys.partition_point(|&v| v <= y).saturating_sub(1).min(self.ys.len() - 2)
    }

    /// `F(x)` by Newton inversion of `H` inside the bracketing segment.
    pub fn big_f(&self, x: f64) -> f64 {
        let total = *self.hs.last().unwrap();
        if x <= 0.0 {
            return 0.0;
        }
        if x >= total {
            return *self.ys.last().unwrap();
        }
        let j = self.hs.partition_point(|&v| v <= x).saturating_sub(1).min(self.hs.len() - 2);
        let (mut lo, mut hi) = (self.ys[j], self.ys[j + 1]);
        let mut y = lo + (hi - lo) * (x - self.hs[j]) / (self.hs[j + 1] - self.hs[j]);
        for _ in 0..60 {
            let r = self.hs[j] + y - self.ys[j] + gk15(&|t| self.p.h(t), self.ys[j], y).0 - x;
            if r > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            let mut next = y - r / (1.0 + self.p.h(y));
            if !(next >= lo && next <= hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - y).abs() <= 1e-16 * y.max(1e-300) {
                return next;
            }
            y = next;
        }
        y
    }

    /// Exact cell averages of `f` on `grid` uniform cells.
    pub fn grid_measure(&self, grid: usize) -> Result<StepMeasure> {
        let h = 1.0 / grid as f64;
        let mut prev = 0.0;
        let cells = (1..=grid)
            .map(|i| {
                let x = if i == grid { 1.0 } else { i as f64 * h };
                let cur = self.big_f(x);
                let v = ((cur - prev) / h).clamp(0.0, 1.0);
                prev = cur;
                Cell { w: h, v }
            })
            .collect();
        StepMeasure::new(cells, Vec::new())
    }
}

/// `int S(f) dx = int_0^{rho_1} S(1 - e^{p(y)}) H'(y) dy`.
pub fn shape_entropy(p: &ExpPolynomial, rho1: f64, cfg: &LimitConfig) -> Result<f64> {
    integrate(|y| shannon(p.f_at(y)) * (1.0 + p.h(y)), 0.0, rho1, cfg.tol())
}

/// Pattern `1^i 0`.
pub fn one_run_zero(i: usize) -> BinaryWord {
    BinaryWord::repeat_symbol(1, i).concat(&BinaryWord::repeat_symbol(0, 1))
}

/// Description of the degenerate shapes on the boundary: `f` is a `{0,1}`
/// step function with at most `k/2 + 1` intervals of ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub max_ones_intervals: usize,
    /// Intervals where the last iterate had `f > 1/2`.
    pub last_iterate_ones: Vec<(f64, f64)>,
    pub last_coeffs: Vec<f64>,
    pub reason: String,
}

impl BoundaryReport {
    fn describe(&self) -> String {
        let ivs: Vec<String> = self
            .last_iterate_ones
            .iter()
            .map(|(a, b)| format!("[{}, {}]", fmt12(*a), fmt12(*b)))
            .collect();
        format!(
            "{}; boundary shapes are 0/1 step functions with at most {} intervals of ones; last iterate has f > 1/2 on {}",
            self.reason,
            self.max_ones_intervals,
            ivs.join(" ")
        )
    }
}

fn ones_intervals(p: &ExpPolynomial, cfg: &LimitConfig) -> Vec<(f64, f64)> {
    let Ok(rho1) = solve_rho1(p, cfg) else {
        return Vec::new();
    };
    let rec = Reconstruction::new(p, rho1, 256);
    let grid = 400;
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut prev = 0.0;
    for i in 1..=grid {
        let x = i as f64 / grid as f64;
        let cur = rec.big_f(x);
        let v = (cur - prev) * grid as f64;
        prev = cur;
        if v > 0.5 {
            let a = (i - 1) as f64 / grid as f64;
            match out.last_mut() {
                Some(last) if (last.1 - a).abs() < 1e-12 => last.1 = x,
                _ => out.push((a, x)),
            }
        }
    }
    out
}

fn boundary_error(p: &ExpPolynomial, k: usize, reason: String, cfg: &LimitConfig) -> Error {
    let report = BoundaryReport {
        max_ones_intervals: k / 2 + 1,
        last_iterate_ones: ones_intervals(p, cfg),
        last_coeffs: p.coeffs.clone(),
        reason,
    };
    Error::NearBoundary(report.describe())
}

/// Residual `Phi_S(a) - target` on the support `{0} u {i}` of the targets.
fn residual(coeffs: &[f64], support: &[usize], rows: &[usize], target: &DVector<f64>, cfg: &LimitConfig) -> Result<(ExpPolynomial, DVector<f64>)> {
    let k = *support.last().unwrap();
    let mut full = vec![0.0; k.max(1) + 1];
    for (&j, &c) in support.iter().zip(coeffs) {
        full[j] = c;
    }
    let p = ExpPolynomial::new(full)?;
    let phi = phi_forward_upto(&p, k, cfg)?;
    let value = DVector::from_iterator(
        rows.len() + 1,
        std::iter::once(phi.rho1).chain(rows.iter().map(|&i| phi.densities[i])),
    );
    Ok((p, value - target))
}

/// Damped Newton for `Phi_S(a) = target` from `start`. Returns the solution
/// and the number of steps.
fn newton(
    budget: &mut usize,
    start: &[f64],
    support: &[usize],
    rows: &[usize],
    target: &DVector<f64>,
    cfg: &LimitConfig,
) -> Result<(Vec<f64>, usize)> {
    let mut a = start.to_vec();
    let (mut p, mut r) = residual(&a, support, rows, target, cfg)?;
    for step in 0..cfg.max_newton {
        let norm = r.amax();
        if norm < cfg.newton_tol {
            return Ok((a, step));
        }
        if *budget == 0 {
            return Err(Error::NonConvergence { iterations: step, best: norm });
        }
        let jac = jacobian_on(&p, rows, support, cfg)?;
        let delta = jac
            .lu()
            .solve(&(-&r))
            .ok_or(Error::NonConvergence { iterations: step, best: norm })?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<f64> = a.iter().zip(delta.iter()).map(|(x, d)| x + lambda * d).collect();
            if trial.iter().any(|c| c.abs() > cfg.coeff_cap) {
                lambda *= 0.5;
                continue;
            }
            *budget = budget.saturating_sub(1);
            if let Ok((tp, tr)) = residual(&trial, support, rows, target, cfg) {
                if tr.amax() < norm {
                    a = trial;
                    p = tp;
                    r = tr;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            // at the resolution limit a stalled step is a converged one
            if norm < 1e3 * cfg.newton_tol {
                return Ok((a, step));
            }
            return Err(Error::NonConvergence { iterations: step, best: norm });
        }
    }
    let norm = r.amax();
    if norm < 1e3 * cfg.newton_tol {
        return Ok((a, cfg.max_newton));
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_newton,
        best: norm,
    })
}

/// Solves `Phi(p) = targets` with `p` supported on `a_0` and the `a_i` of the
/// constrained `rho_{1^i 0}`, by damped Newton along the straight homotopy
/// from the constant exponent `a_0 = log(1 - rho_1)` (the i.i.d. shape).
pub fn solve_limit_shape(targets: &DensityTargets, grid: usize, cfg: &LimitConfig) -> Result<LimitShape> {
    let (coeffs, steps) = solve_coefficients(targets, cfg)?;
    finish_shape(targets, coeffs, steps, grid, cfg)
}

/// Coefficient-space solve without reconstruction; returns `(a_0, ..., a_k)`.
pub fn solve_coefficients(targets: &DensityTargets, cfg: &LimitConfig) -> Result<(Vec<f64>, usize)> {
    let rows: Vec<usize> = targets.constraints.iter().map(|c| c.0).collect();
    let support: Vec<usize> = std::iter::once(0).chain(rows.iter().copied()).collect();
    let k = *support.last().unwrap();
    let target = targets.vector();
    for &(i, v) in &targets.constraints {
        let c = c_closed_form(&one_run_zero(i))?.expect("1^i 0 is tabulated");
        let upper = c * targets.rho1.powi(i as i32) * (1.0 - targets.rho1);
        if v <= 0.0 || v >= upper {
            return Err(Error::NearBoundary(format!(
                "rho_{} = {v} outside the open interval (0, {}) attainable at rho_1 = {}",
                one_run_zero(i),
                fmt12(upper),
                targets.rho1
            )));
        }
    }

    let mut a = vec![0.0; support.len()];
    a[0] = (-targets.rho1).ln_1p();
    let (_, r0) = residual(&a, &support, &rows, &target, cfg)?;
    let origin = &target + &r0;

    let mut t = 0.0f64;
    let mut dt = 1.0f64;
    let mut steps = 0;
    let mut attempts = 0;
    let mut budget = cfg.max_evaluations;
    while t < 1.0 {
        attempts += 1;
        let tt = (t + dt).min(1.0);
        let goal = &origin + (&target - &origin) * tt;
        match newton(&mut budget, &a, &support, &rows, &goal, cfg) {
            Ok((next, n)) => {
                a = next;
                t = tt;
                steps += n;
                dt = (dt * 2.0).min(1.0);
            }
            Err(e) => {
                if budget == 0 {
                    return Err(match e {
                        Error::NonConvergence { iterations, best } => Error::NonConvergence {
                            iterations: iterations.max(attempts),
                            best,
                        },
                        e => e,
                    });
                }
                dt *= 0.25;
                if dt < 1e-6 || attempts > cfg.max_continuation {
                    let mut full = vec![0.0; k + 1];
                    for (&j, &c) in support.iter().zip(&a) {
                        full[j] = c;
                    }
                    let p = ExpPolynomial { coeffs: full };
                    return Err(boundary_error(
                        &p,
                        k,
                        format!("continuation stalled at homotopy parameter {t:.6}"),
                        cfg,
                    ));
                }
            }
        }
    }
    let mut full = vec![0.0; k.max(1) + 1];
    for (&j, &c) in support.iter().zip(&a) {
        full[j] = c;
    }
    Ok((full, steps))
}

fn finish_shape(targets: &DensityTargets, coeffs: Vec<f64>, steps: usize, grid: usize, cfg: &LimitConfig) -> Result<LimitShape> {
    let p = ExpPolynomial::new(coeffs)?;
    let rho1 = solve_rho1(&p, cfg)?;
    let rec = Reconstruction::new(&p, rho1, grid.max(256));
    let f = rec.grid_measure(grid)?;
    let mut residuals = vec![targets.rho1 - density_of_measure(&BinaryWord::repeat_symbol(1, 1), &f)?];
    for &(i, v) in &targets.constraints {
        residuals.push(v - density_of_measure(&one_run_zero(i), &f)?);
    }
    let entropy = shape_entropy(&p, rho1, cfg)?;
    Ok(LimitShape {
        p,
        rho1,
        f,
        entropy,
        residuals,
        newton_steps: steps,
    })
}

impl LimitShape {
    /// CSV `x,f` at the midpoints of `grid` uniform cells.
    pub fn csv(&self, grid: usize) -> String {
        let mut out = String::from("x,f\n");
        for i in 0..grid {
            let x = (i as f64 + 0.5) / grid as f64;
            out.push_str(&format!("{},{}\n", fmt12(x), fmt12(self.f.value_at(x))));
        }
        out
    }
}

/// Cross-check of the density normalization: each `rho_{1^i 0}` returned by
/// [`phi_forward`] against the exact pattern density of the reconstructed
/// `f` on `grid` cells. Returns the largest discrepancy.
pub fn normalization_check(p: &ExpPolynomial, grid: usize, cfg: &LimitConfig) -> Result<f64> {
    let phi = phi_forward(p, cfg)?;
    let rec = Reconstruction::new(p, phi.rho1, grid.max(256));
    let f = rec.grid_measure(grid)?;
    let mut worst = (phi.rho1 - density_of_measure(&BinaryWord::repeat_symbol(1, 1), &f)?).abs();
    for (i, &d) in phi.densities.iter().enumerate() {
        worst = worst.max((d - density_of_measure(&one_run_zero(i), &f)?).abs());
    }
    Ok(worst)
}
