//! Feasibility of `(rho_1, rho_tau)`: the constants `C_tau` bounding
//! `rho_tau <= C_tau rho^m (1 - rho)^n`, computed in closed form where known
//! and by direct maximization otherwise.
//!
//! Substituting `u = F(x)` turns every one-letter of `tau` into Lebesgue
//! measure on `[0, rho]` and every zero-letter into the measure
//! `(H' - 1) du`. After rescaling to `[0, 1]` the zero-letters are drawn from
//! a probability measure `g` that no longer depends on `rho`, and
//! `C_tau = |tau|! max_g int_{t_1 <= ... <= t_k} prod (dt or dg)`.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Atom, Cell, StepMeasure};
use crate::quad::{bisect, golden_max};
use crate::word::BinaryWord;

const MAX_NUMERIC_LEN: usize = 6;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn multinomial(parts: &[usize]) -> f64 {
    factorial(parts.iter().sum()) / parts.iter().map(|&p| factorial(p)).product::<f64>()
}

fn check_nonconstant(tau: &BinaryWord) -> Result<()> {
    if tau.is_empty() {
        return Err(Error::invalid("pattern must be nonempty"));
    }
    if tau.is_constant() {
        return Err(Error::invalid(format!(
            "C is undefined for the constant pattern {tau}: its density is forced by rho_1"
        )));
    }
    Ok(())
}

/// Root of `xi e^xi = e^{-1}`, bracketed in `[0.1, 0.5]`.
pub fn xi_root() -> f64 {
    bisect(|x| x * x.exp() - (-1.0f64).exp(), 0.1, 0.5, 1e-14).expect("bracket changes sign")
}

fn tabulated(tau: &BinaryWord) -> Option<f64> {
    let runs = tau.runs();
    let lens: Vec<usize> = runs.iter().map(|r| r.1).collect();
    match tau.to_string().as_str() {
        "1010" => return Some(12.0 / (E * E)),
        "11010" => return Some(30.0 * (-PI / 3f64.sqrt()).exp()),
        "10110" => return Some(20.0 / 9.0),
        "10101" => {
            let xi = xi_root();
            return Some(30.0 * xi * xi / ((1.0 + xi) * (1.0 + xi)));
        }
        _ => {}
    }
    match (runs.first()?.0, lens.as_slice()) {
        (1, [k, l]) => Some(multinomial(&[*k, *l])),
        (1, [k, _, m]) => {
            let (k, m) = (*k as f64, *m as f64);
            Some(multinomial(&lens) * k.powf(k) * m.powf(m) / (k + m).powf(k + m))
        }
        _ => None,
    }
}

/// Closed-form `C_tau` for the tabulated families, trying the reversal and
/// complement images of `tau` (both leave `C` unchanged). `Ok(None)` when no
/// closed form is known.
///
/// The 11010 entry reproduces the published table value `30 e^{-pi/sqrt 3}`;
/// direct maximization gives half of it.
pub fn c_closed_form(tau: &BinaryWord) -> Result<Option<f64>> {
    check_nonconstant(tau)?;
    let images = [
        tau.clone(),
        tau.reversed(),
        tau.complement(),
        tau.complement().reversed(),
    ];
    Ok(images.iter().find_map(tabulated))
}

// ---------------------------------------------------------------------------
// Reduced functional on atomic probability measures

/// The rho-free functional evaluated on a probability measure `g` that is a
/// finite sum of atoms at sorted `nodes` in `[0, 1]`. One-letters integrate
/// against Lebesgue measure between nodes; a run of `c` zero-letters on an
/// atom of mass `m` contributes `m^c / c!`.
#[derive(Clone, Debug)]
pub struct ReducedFunctional {
    pattern: Vec<u8>,
    fact: f64,
}

impl ReducedFunctional {
    pub fn new(tau: &BinaryWord) -> Self {
        ReducedFunctional {
            pattern: tau.bits().to_vec(),
            fact: factorial(tau.len()),
        }
    }

    fn zeros(&self) -> usize {
        self.pattern.iter().filter(|&&b| b == 0).count()
    }

    /// Applies the run transitions for `symbol` with weight `x` to `dp` (in place).
    fn step(&self, dp: &mut [f64], symbol: u8, x: f64) {
        let k = self.pattern.len();
        for j in (0..k).rev() {
            if dp[j] == 0.0 {
                continue;
            }
            let mut acc = dp[j];
            let mut c = 1;
            while j + c <= k && self.pattern[j + c - 1] == symbol {
                acc *= x / c as f64;
                dp[j + c] += acc;
                c += 1;
            }
        }
    }

    /// Transpose of [`Self::step`], for the backward sweep.
    fn step_back(&self, bp: &mut [f64], symbol: u8, x: f64) {
        let k = self.pattern.len();
        for j in 0..k {
            let mut acc = 1.0;
            let mut c = 1;
            let mut add = 0.0;
            while j + c <= k && self.pattern[j + c - 1] == symbol {
                acc *= x / c as f64;
                add += acc * bp[j + c];
                c += 1;
            }
            bp[j] += add;
        }
    }

    pub fn value(&self, nodes: &[f64], masses: &[f64]) -> f64 {
        let k = self.pattern.len();
        let mut dp = vec![0.0; k + 1];
        dp[0] = 1.0;
        for i in 0..nodes.len() {
            if i > 0 {
                self.step(&mut dp, 1, nodes[i] - nodes[i - 1]);
            }
            self.step(&mut dp, 0, masses[i]);
        }
        self.fact * dp[k]
    }

    /// Value and gradient with respect to the atom masses.
    pub fn value_and_grad(&self, nodes: &[f64], masses: &[f64]) -> (f64, Vec<f64>) {
        let k = self.pattern.len();
        let n = nodes.len();
        let mut fwd = vec![vec![0.0; k + 1]; n];
        let mut dp = vec![0.0; k + 1];
        dp[0] = 1.0;
        for i in 0..n {
            if i > 0 {
                self.step(&mut dp, 1, nodes[i] - nodes[i - 1]);
            }
            fwd[i].copy_from_slice(&dp);
            self.step(&mut dp, 0, masses[i]);
        }
        let value = self.fact * dp[k];
        let mut bp = vec![0.0; k + 1];
        bp[k] = 1.0;
        let mut grad = vec![0.0; n];
        for i in (0..n).rev() {
            // bp: completion weights after atom i
            let m = masses[i];
            let mut g = 0.0;
            for j in 0..k {
                if fwd[i][j] == 0.0 {
                    continue;
                }
                // d/dm of m^c/c! is m^{c-1}/(c-1)!
                let mut acc = 1.0;
                let mut c = 1;
                while j + c <= k && self.pattern[j + c - 1] == 0 {
                    g += fwd[i][j] * acc * bp[j + c];
                    acc *= m / c as f64;
                    c += 1;
                }
            }
            grad[i] = self.fact * g;
            self.step_back(&mut bp, 0, m);
            if i > 0 {
                self.step_back(&mut bp, 1, nodes[i] - nodes[i - 1]);
            }
        }
        (value, grad)
    }
}

/// Settings for [`c_numeric`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AscentConfig {
    pub max_iters: usize,
    /// Converged once the relative gain stays below this for `patience` steps.
    pub rel_tol: f64,
    pub patience: usize,
    pub initial_step: f64,
    pub max_step: f64,
    /// Golden-section tolerance for the movable interior atom.
    pub atom_xtol: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        AscentConfig {
            max_iters: 200_000,
            rel_tol: 1e-10,
            patience: 50,
            initial_step: 1.0,
            max_step: 1e4,
            atom_xtol: 1e-6,
        }
    }
}

struct AscentOutcome {
    value: f64,
    masses: Vec<f64>,
    converged: bool,
    iterations: usize,
}

/// Moves mass to the node with the largest partial derivative from the node
/// offering the largest first-order gain, with the amount chosen by golden-section
/// search. Multiplicative steps alone crawl along the nearly flat directions
/// that spread an atom over neighbouring nodes. Returns the new value when
/// the transfer gains.
fn pairwise_transfer(func: &ReducedFunctional, nodes: &[f64], w: &mut [f64], grad: &[f64], v: f64) -> Option<f64> {
    let best = (0..w.len()).max_by(|&a, &b| grad[a].total_cmp(&grad[b]))?;
    // the node whose full transfer has the largest first-order gain
    let gain = |i: usize| (grad[best] - grad[i]) * w[i];
    let away = (0..w.len())
        .filter(|&i| i != best && w[i] > 0.0)
        .max_by(|&a, &b| gain(a).total_cmp(&gain(b)))?;
    if grad[away] >= grad[best] {
        return None;
    }
    let cap = w[away];
    let mut trial = w.to_vec();
    let mut at = |t: f64| {
        trial[away] = cap - t;
        trial[best] = w[best] + t;
        func.value(nodes, &trial)
    };
    // along the transfer the value is a polynomial of degree <= #zeros:
    // interpolate it exactly, maximize the interpolant, then confirm
    let degree = func.zeros();
    let ts: Vec<f64> = (0..=degree).map(|j| cap * j as f64 / degree as f64).collect();
    let mut coef: Vec<f64> = ts.iter().map(|&t| if t == 0.0 { v } else { at(t) }).collect();
    for j in 1..=degree {
        for i in (j..=degree).rev() {
            coef[i] = (coef[i] - coef[i - 1]) / (ts[i] - ts[i - j]);
        }
    }
    let poly = |t: f64| {
        let mut acc = coef[degree];
        for i in (0..degree).rev() {
            acc = acc * (t - ts[i]) + coef[i];
        }
        acc
    };
    let samples: usize = 64;
    let j_best = (0..=samples)
        .max_by(|&a, &b| poly(cap * a as f64 / samples as f64).total_cmp(&poly(cap * b as f64 / samples as f64)))
        .unwrap();
    let lo = cap * j_best.saturating_sub(1) as f64 / samples as f64;
    let hi = cap * (j_best + 1).min(samples) as f64 / samples as f64;
    let (t, _) = golden_max(poly, lo, hi, 1e-9 * cap);
    let tv = at(t);
    if tv > v {
        w[best] += t;
        w[away] = cap - t;
        Some(tv)
    } else {
        None
    }
}

/// Exponentiated-gradient ascent on the simplex with backtracking, each step
/// followed by a pairwise mass transfer.
fn exponentiated_ascent(
    func: &ReducedFunctional,
    nodes: &[f64],
    start: Vec<f64>,
    cfg: &AscentConfig,
    max_iters: usize,
) -> AscentOutcome {
    let degree = func.zeros().max(1) as f64;
    let mut w = start;
    let (mut v, mut grad) = func.value_and_grad(nodes, &w);
    let mut eta = cfg.initial_step;
    let mut quiet = 0;
    let mut trial = vec![0.0; w.len()];
    for it in 0..max_iters {
        if v <= 0.0 {
            // restart from uniform if a degenerate start gave zero value
            w.iter_mut().for_each(|x| *x = 1.0 / nodes.len() as f64);
            (v, grad) = func.value_and_grad(nodes, &w);
            continue;
        }
        let scaled: Vec<f64> = grad.iter().map(|g| g / (degree * v)).collect();
        let top = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut accepted = None;
        while eta > 1e-14 {
            let mut z = 0.0;
            for (t, (&wi, &si)) in trial.iter_mut().zip(w.iter().zip(&scaled)) {
                *t = wi * (eta * (si - top)).exp();
                z += *t;
            }
            trial.iter_mut().for_each(|t| *t /= z);
            let tv = func.value(nodes, &trial);
            if tv >= v {
                accepted = Some(tv);
                break;
            }
            eta *= 0.5;
        }
        let Some(tv) = accepted else {
            return AscentOutcome {
                value: v,
                masses: w,
                converged: true,
                iterations: it,
            };
        };
        let mut gain = (tv - v) / v;
        std::mem::swap(&mut w, &mut trial);
        (v, grad) = func.value_and_grad(nodes, &w);
        if let Some(pv) = pairwise_transfer(func, nodes, &mut w, &grad, v) {
            gain += (pv - v) / v;
            (v, grad) = func.value_and_grad(nodes, &w);
        }
        eta = (eta * 1.5).min(cfg.max_step);
        if gain < cfg.rel_tol {
            quiet += 1;
            if quiet >= cfg.patience {
                return AscentOutcome {
                    value: v,
                    masses: w,
                    converged: true,
                    iterations: it + 1,
                };
            }
        } else {
            quiet = 0;
        }
    }
    AscentOutcome {
        value: v,
        masses: w,
        converged: false,
        iterations: max_iters,
    }
}

/// Result of [`c_numeric`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericC {
    pub value: f64,
    /// Maximizing probability measure: grid masses as densities, endpoint
    /// and movable atoms as atoms.
    pub argmax: StepMeasure,
    pub iterations: usize,
    pub interior_atom: Option<Atom>,
}

fn to_aux_measure(nodes: &[f64], masses: &[f64], grid_n: usize, movable: Option<usize>) -> StepMeasure {
    let h = 1.0 / grid_n as f64;
    let mut cells = vec![Cell { w: 0.5 * h, v: 0.0 }];
    let mut atoms = Vec::new();
    for (i, (&x, &m)) in nodes.iter().zip(masses).enumerate() {
        if Some(i) == movable || i == 0 || i == nodes.len() - 1 {
            atoms.push(Atom { x, m });
        } else {
            cells.push(Cell { w: h, v: m / h });
        }
    }
    cells.push(Cell { w: 0.5 * h, v: 0.0 });
    StepMeasure::new(cells, atoms).expect("grid cells tile [0,1]")
}

/// Maximizes the reduced functional over probability measures supported on
/// the uniform grid `{i / grid_n}` plus one interior atom whose position is
/// refined by golden-section search around the heaviest interior node.
pub fn c_numeric(tau: &BinaryWord, grid_n: usize, cfg: &AscentConfig) -> Result<NumericC> {
    check_nonconstant(tau)?;
    if tau.len() > MAX_NUMERIC_LEN {
        return Err(Error::invalid(format!(
            "numeric C supports patterns of length at most {MAX_NUMERIC_LEN}"
        )));
    }
    if !(50..=5000).contains(&grid_n) {
        return Err(Error::invalid("grid_n must lie in [50, 5000]"));
    }
    let func = ReducedFunctional::new(tau);
    let nodes: Vec<f64> = (0..=grid_n).map(|i| i as f64 / grid_n as f64).collect();
    let start = vec![1.0 / nodes.len() as f64; nodes.len()];
    let base = exponentiated_ascent(&func, &nodes, start, cfg, cfg.max_iters);
    if !base.converged {
        return Err(Error::NonConvergence {
            iterations: base.iterations,
            best: base.value,
        });
    }

    // Movable atom: replace the heaviest interior node by an atom that slides
    // between its neighbours.
    let interior = 1..grid_n;
    let heavy = interior
        .clone()
        .max_by(|&a, &b| base.masses[a].total_cmp(&base.masses[b]))
        .unwrap();
    let h = 1.0 / grid_n as f64;
    let with_atom = |s: f64, iters: usize| {
        let mut n2 = nodes.clone();
        let mut m2 = base.masses.clone();
        let pos = n2.partition_point(|&x| x < s);
        // multiplicative updates never revive a zero mass, so the node is
        // effectively replaced by the atom
        let moved = m2[heavy];
        m2[heavy] = 0.0;
        n2.insert(pos, s);
        m2.insert(pos, moved);
        let out = exponentiated_ascent(&func, &n2, m2, cfg, iters);
        (out, n2, pos)
    };
    let lo = (heavy as f64 - 1.0) * h;
    let hi = (heavy as f64 + 1.0) * h;
    let (s_best, v_best) = golden_max(|s| with_atom(s, 300).0.value, lo + 1e-12, hi - 1e-12, cfg.atom_xtol * h);
    if v_best > base.value {
        let (out, n2, pos) = with_atom(s_best, cfg.max_iters);
        if out.converged && out.value >= base.value {
            return Ok(NumericC {
                value: out.value,
                argmax: to_aux_measure(&n2, &out.masses, grid_n, Some(pos)),
                iterations: base.iterations + out.iterations,
                interior_atom: Some(Atom {
                    x: n2[pos],
                    m: out.masses[pos],
                }),
            });
        }
    }
    Ok(NumericC {
        value: base.value,
        argmax: to_aux_measure(&nodes, &base.masses, grid_n, None),
        iterations: base.iterations,
        interior_atom: None,
    })
}

// ---------------------------------------------------------------------------
// The extremal 1010 density

/// Distribution function of the extremal 1010 density at `x`.
fn extremal_1010_cdf(rho: f64, x: f64) -> f64 {
    let x1 = rho / E;
    let x2 = 1.0 - (1.0 - rho) / E;
    let a = 4.0 * rho * (1.0 - rho);
    let anti = |x: f64| {
        let s = x + rho - 1.0;
        0.5 * (x + (a + E * s * s).sqrt() / E.sqrt())
    };
    if x <= x1 {
        x
    } else if x <= x2 {
        x1 + anti(x) - anti(x1)
    } else {
        x1 + anti(x2) - anti(x1)
    }
}

/// Pointwise value of the extremal 1010 density.
pub fn extremal_1010_value(rho: f64, x: f64) -> f64 {
    if x < rho / E {
        1.0
    } else if x < 1.0 - (1.0 - rho) / E {
        let s = x + rho - 1.0;
        0.5 * (1.0 + E.sqrt() * s / (4.0 * rho * (1.0 - rho) + E * s * s).sqrt())
    } else {
        0.0
    }
}

/// The unique maximizer of `rho_1010` at fixed `rho_1 = rho`, as exact cell
/// averages on a uniform grid.
pub fn extremal_density_1010(rho: f64, grid: usize) -> Result<StepMeasure> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid(format!("rho_1 = {rho} must lie in (0, 1)")));
    }
    if grid == 0 {
        return Err(Error::invalid("grid must be positive"));
    }
    let h = 1.0 / grid as f64;
    let cells = (0..grid)
        .map(|i| {
            let a = i as f64 * h;
            let b = if i + 1 == grid { 1.0 } else { (i + 1) as f64 * h };
            let v = (extremal_1010_cdf(rho, b) - extremal_1010_cdf(rho, a)) / (b - a);
            Cell { w: h, v: v.clamp(0.0, 1.0) }
        })
        .collect();
    StepMeasure::new(cells, Vec::new())
}

// ---------------------------------------------------------------------------
// Intervals

/// `E_{1,tau}` at fixed `rho_1`: the attainable `rho_tau` form `[0, upper]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityInterval {
    pub tau: BinaryWord,
    pub rho1: f64,
    pub c: f64,
    pub ones: usize,
    pub zeros: usize,
    pub upper: f64,
    pub closed_form: bool,
}

pub fn feasible_interval(
    tau: &BinaryWord,
    rho1: f64,
    grid_n: usize,
    cfg: &AscentConfig,
) -> Result<FeasibilityInterval> {
    check_nonconstant(tau)?;
    if !(0.0..=1.0).contains(&rho1) {
        return Err(Error::invalid(format!("rho_1 = {rho1} must lie in [0, 1]")));
    }
    let (c, closed_form) = match c_closed_form(tau)? {
        Some(c) => (c, true),
        None => (c_numeric(tau, grid_n, cfg)?.value, false),
    };
    Ok(interval_from_c(tau, rho1, c, closed_form))
}

pub fn interval_from_c(tau: &BinaryWord, rho1: f64, c: f64, closed_form: bool) -> FeasibilityInterval {
    let (ones, zeros) = (tau.ones(), tau.zeros());
    FeasibilityInterval {
        tau: tau.clone(),
        rho1,
        c,
        ones,
        zeros,
        upper: c * rho1.powi(ones as i32) * (1.0 - rho1).powi(zeros as i32),
        closed_form,
    }
}

/// Sublebesgue density with `rho_1 = rho` built from an auxiliary measure
/// `g`: ones are laid out at unit rate along `g`'s variable and `g`-mass `m`
/// of zeros takes length `(1 - rho) m`. Then `rho_tau` of the result is
/// `rho^k (1 - rho)^l` times the reduced functional of `g` (up to the
/// smoothing of `g`'s cells).
pub fn lift(g: &StepMeasure, rho: f64) -> Result<StepMeasure> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid(format!("rho = {rho} must lie in (0, 1)")));
    }
    if (g.total_mass() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("g must be a probability measure"));
    }
    let mut out = Vec::new();
    let mut push = |w: f64, v: f64| {
        if w > 0.0 {
            out.push(Cell { w, v });
        }
    };
    let piece = |dw: f64, v: f64| (rho * dw + (1.0 - rho) * v * dw, rho / (rho + (1.0 - rho) * v));
    let atoms = g.atoms();
    let mut next = 0;
    let edges = g.edges();
    for (c, e) in g.cells().iter().zip(edges.windows(2)) {
        let mut left = e[0];
        while next < atoms.len() && atoms[next].x < e[1] {
            let a = atoms[next];
            let (w, v) = piece(a.x.max(left) - left, c.v);
            push(w, v);
            push((1.0 - rho) * a.m, 0.0);
            left = a.x.max(left);
            next += 1;
        }
        let (w, v) = piece(e[1] - left, c.v);
        push(w, v);
    }
    for a in &atoms[next..] {
        push((1.0 - rho) * a.m, 0.0);
    }
    // absorb roundoff in the total width
    let total: f64 = out.iter().map(|c| c.w).sum();
    for c in &mut out {
        c.w /= total;
    }
    StepMeasure::new(out, Vec::new())
}

/// CSV `rho,upper` tracing the upper boundary of `E_{1,tau}`.
pub fn boundary_csv(tau: &BinaryWord, c: f64, points: usize) -> String {
    let mut out = String::from("rho,upper\n");
    for i in 0..=points {
        let rho = i as f64 / points as f64;
        let iv = interval_from_c(tau, rho, c, false);
        out.push_str(&format!(
            "{},{}\n",
            crate::measures::fmt12(rho),
            crate::measures::fmt12(iv.upper)
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Stationarity checks

/// Maximizers of the tabulated cases, built with exact cell masses on a
/// uniform grid. Supported: 1010, 10101, 10110.
pub fn analytic_argmax(tau: &BinaryWord, grid: usize) -> Result<StepMeasure> {
    let h = 1.0 / grid as f64;
    let cell_masses = |cdf: &dyn Fn(f64) -> f64| -> Vec<Cell> {
        (0..grid)
            .map(|i| {
                let a = i as f64 * h;
                let b = if i + 1 == grid { 1.0 } else { (i + 1) as f64 * h };
                Cell {
                    w: h,
                    v: ((cdf(b) - cdf(a)) / (b - a)).max(0.0),
                }
            })
            .collect()
    };
    match tau.to_string().as_str() {
        "1010" => {
            // c / x^2 on [1/e, 1] plus an atom of mass 1/e at 1, with c = 1/e
            let c = 1.0 / E;
            let cdf = |x: f64| if x <= c { 0.0 } else { c * (E - 1.0 / x) };
            StepMeasure::new(cell_masses(&cdf), vec![Atom { x: 1.0, m: 1.0 / E }])
        }
        "10101" => {
            let xi = xi_root();
            let b = xi / (1.0 + xi);
            let anti = |x: f64| -1.0 / x + 2.0 * x.ln() - 2.0 * (1.0 - x).ln() + 1.0 / (1.0 - x);
            let c = 1.0 / (anti(1.0 - b) - anti(b));
            let cdf = |x: f64| {
                let x = x.clamp(b, 1.0 - b);
                c * (anti(x) - anti(b))
            };
            StepMeasure::new(cell_masses(&cdf), Vec::new())
        }
        "10110" => StepMeasure::new(
            vec![Cell { w: 1.0, v: 0.0 }],
            vec![Atom { x: 1.0 / 3.0, m: 0.5 }, Atom { x: 1.0, m: 0.5 }],
        ),
        other => Err(Error::invalid(format!("no analytic maximizer for {other}"))),
    }
}

/// Resamples `g` at the midpoints of a uniform grid whose spacing is the
/// narrowest cell (at least 64 points) and returns the midpoints, values,
/// left and right neighbour values and spacing for every point at least two
/// points inside the positive support, so partially covered boundary cells
/// never enter a difference stencil.
fn interior_support(g: &StepMeasure) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64) {
    let narrowest = g.cells().iter().map(|c| c.w).fold(1.0, f64::min);
    let n = ((1.0 / narrowest).round() as usize).max(64);
    let h = 1.0 / n as f64;
    let vals: Vec<f64> = (0..n).map(|j| g.value_at((j as f64 + 0.5) * h)).collect();
    let (mut xs, mut mid, mut prev, mut next) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for j in 2..n.saturating_sub(2) {
        if vals[j - 2..=j + 2].iter().all(|&v| v > 0.0) {
            xs.push((j as f64 + 0.5) * h);
            mid.push(vals[j]);
            prev.push(vals[j - 1]);
            next.push(vals[j + 1]);
        }
    }
    (xs, mid, prev, next, h)
}

/// Maximum stationarity residual of `g` for the pattern `tau`:
///
/// * 1010: `|G(a) - (G(1) - c/a)|` with `2c = int x dg`, over the support edges;
/// * 11010: `2a^2 g'' + 12 a g' + 14 g`, relative to `max 14|g|`;
/// * 10101: `2a(1-a) g' + (4 - 8a) g`, relative to `max 4|g|`;
/// * 10110: the total mass of the density part (the maximizer is atomic).
///
/// Derivatives use central differences of the cell values.
pub fn euler_lagrange_residual(tau: &BinaryWord, g: &StepMeasure) -> Result<f64> {
    let mass = g.total_mass();
    if (mass - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(format!("g must be a probability measure (mass {mass})")));
    }
    match tau.to_string().as_str() {
        "1010" => {
            let c = 0.5 * g.moment(1);
            let dist = g.distribution();
            let edges = g.edges();
            let total = dist.eval(1.0);
            let mut worst: f64 = 0.0;
            let cells = g.cells();
            // edges inside the support: between two positive cells, or at 1
            for i in 1..=cells.len() {
                let inside = cells[i - 1].v > 0.0 && cells.get(i).is_none_or(|c| c.v > 0.0);
                if !inside {
                    continue;
                }
                let a = edges[i];
                // the law is for G just below the atom at 1
                let ga = if i == cells.len() { dist.eval_left(1.0) } else { dist.eval(a) };
                worst = worst.max((ga - (total - c / a)).abs());
            }
            Ok(worst)
        }
        "11010" => {
            let (xs, vals, prev, next, h) = interior_support(g);
            if xs.is_empty() {
                return Err(Error::invalid("g has no interior support"));
            }
            let scale = vals.iter().map(|v| 14.0 * v.abs()).fold(0.0, f64::max);
            let worst = (0..xs.len())
                .map(|i| {
                    let a = xs[i];
                    let d1 = (next[i] - prev[i]) / (2.0 * h);
                    let d2 = (next[i] - 2.0 * vals[i] + prev[i]) / (h * h);
                    (2.0 * a * a * d2 + 12.0 * a * d1 + 14.0 * vals[i]).abs()
                })
                .fold(0.0, f64::max);
            Ok(worst / scale)
        }
        "10101" => {
            let (xs, vals, prev, next, h) = interior_support(g);
            if xs.is_empty() {
                return Err(Error::invalid("g has no interior support"));
            }
            let scale = vals.iter().map(|v| 4.0 * v.abs()).fold(0.0, f64::max);
            let worst = (0..xs.len())
                .map(|i| {
                    let a = xs[i];
                    let d1 = (next[i] - prev[i]) / (2.0 * h);
                    (2.0 * a * (1.0 - a) * d1 + (4.0 - 8.0 * a) * vals[i]).abs()
                })
                .fold(0.0, f64::max);
            Ok(worst / scale)
        }
        "10110" => Ok(g.cells().iter().map(|c| c.w * c.v).sum()),
        other => Err(Error::invalid(format!(
            "no stationarity law implemented for {other}; supported: 1010, 11010, 10110, 10101"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::density_of_measure;
    use crate::word::w;

    #[test]
    fn closed_forms() {
        assert_eq!(c_closed_form(&w("10")).unwrap(), Some(2.0));
        assert_eq!(c_closed_form(&w("01")).unwrap(), Some(2.0));
        assert_eq!(c_closed_form(&w("1100")).unwrap(), Some(6.0));
        let c = c_closed_form(&w("1010")).unwrap().unwrap();
        assert!((c - 1.624_023_398_839_352).abs() < 1e-12);
        let xi = xi_root();
        assert!((xi - 0.278_464_542_761_074).abs() < 1e-13);
        let c = c_closed_form(&w("10101")).unwrap().unwrap();
        assert!((c - 1.423_258_174_457_064).abs() < 1e-12);
        assert_eq!(c_closed_form(&w("01101")).unwrap(), Some(20.0 / 9.0));
        // 1^1 0^1 1^2: 4!/(1!1!2!) * 1 * 4 / 27
        let c = c_closed_form(&w("1011")).unwrap().unwrap();
        assert!((c - 12.0 * 4.0 / 27.0).abs() < 1e-12);
        assert_eq!(c_closed_form(&w("100101")).unwrap(), None);
        assert!(c_closed_form(&w("111")).is_err());
    }

    #[test]
    fn functional_gradient_matches_differences() {
        let func = ReducedFunctional::new(&w("11010"));
        let nodes = [0.0, 0.2, 0.5, 0.7, 1.0];
        let masses = [0.1, 0.3, 0.15, 0.25, 0.2];
        let (v, g) = func.value_and_grad(&nodes, &masses);
        assert!((v - func.value(&nodes, &masses)).abs() < 1e-15);
        for i in 0..5 {
            let h = 1e-6;
            let mut up = masses;
            let mut dn = masses;
            up[i] += h;
            dn[i] -= h;
            let fd = (func.value(&nodes, &up) - func.value(&nodes, &dn)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-7, "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn functional_handles_ties_on_atoms() {
        // all mass at 1 realizes the 1^2 0^2 bound exactly
        let func = ReducedFunctional::new(&w("1100"));
        assert!((func.value(&[0.0, 1.0], &[0.0, 1.0]) - 6.0).abs() < 1e-14);
        // 10110 with atoms 1/2 at 1/3 and 1/2 at 1 attains 20/9
        let func = ReducedFunctional::new(&w("10110"));
        let v = func.value(&[0.0, 1.0 / 3.0, 1.0], &[0.0, 0.5, 0.5]);
        assert!((v - 20.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn numeric_matches_simple_closed_forms() {
        let cfg = AscentConfig::default();
        let r = c_numeric(&w("10"), 200, &cfg).unwrap();
        assert!((r.value - 2.0).abs() / 2.0 < 5e-3);
        let r = c_numeric(&w("1100"), 500, &cfg).unwrap();
        assert!((r.value - 6.0).abs() / 6.0 < 5e-3);
        assert!((r.argmax.total_mass() - 1.0).abs() < 1e-10);
        assert!(c_numeric(&w("1111"), 500, &cfg).is_err());
        assert!(c_numeric(&w("1010101"), 500, &cfg).is_err());
        assert!(c_numeric(&w("10"), 10, &cfg).is_err());
    }

    #[test]
    fn extremal_1010_examples() {
        let mu = extremal_density_1010(0.5, 2000).unwrap();
        let rho1 = density_of_measure(&w("1"), &mu).unwrap();
        assert!((rho1 - 0.5).abs() < 1e-6);
        let d = density_of_measure(&w("1010"), &mu).unwrap();
        assert!((d - 3.0 / (4.0 * E * E)).abs() < 1e-4, "{d}");
        assert_eq!(extremal_1010_value(0.5, 0.18), 1.0);
        assert!(extremal_1010_value(0.5, 0.19) < 1.0);
        assert!((0.5 / E - 0.18394).abs() < 1e-5);
        let tiny = extremal_density_1010(1e-3, 2000).unwrap();
        assert!(density_of_measure(&w("1010"), &tiny).unwrap() < 1e-5);
        assert!(extremal_density_1010(1.0, 100).is_err());
        assert!(extremal_density_1010(0.0, 100).is_err());
    }

    #[test]
    fn intervals() {
        let cfg = AscentConfig::default();
        let iv = feasible_interval(&w("10"), 0.3, 1000, &cfg).unwrap();
        assert!((iv.upper - 2.0 * 0.3 * 0.7).abs() < 1e-15);
        let iv = feasible_interval(&w("1010"), 0.5, 1000, &cfg).unwrap();
        assert!((iv.upper - 3.0 / (4.0 * E * E)).abs() < 1e-15);
        let iv = feasible_interval(&w("10"), 0.0, 1000, &cfg).unwrap();
        assert_eq!(iv.upper, 0.0);
        assert!(boundary_csv(&w("10"), 2.0, 4).starts_with("rho,upper\n0,0\n"));
    }

    #[test]
    fn residuals() {
        let g = analytic_argmax(&w("1010"), 2000).unwrap();
        let r = euler_lagrange_residual(&w("1010"), &g).unwrap();
        assert!(r < 1e-3, "{r}");
        let g = analytic_argmax(&w("10101"), 2000).unwrap();
        assert!(euler_lagrange_residual(&w("10101"), &g).unwrap() < 1e-3);
        let g = analytic_argmax(&w("10110"), 2000).unwrap();
        assert!(euler_lagrange_residual(&w("10110"), &g).unwrap() < 1e-3);
        let uniform = StepMeasure::constant(1.0).unwrap();
        assert!(euler_lagrange_residual(&w("1010"), &uniform).unwrap() > 0.05);
        assert!(euler_lagrange_residual(&w("10101"), &uniform).unwrap() > 0.05);
        assert!(euler_lagrange_residual(&w("110"), &uniform).is_err());
    }

    #[test]
    fn ode_family_for_11010_is_stationary() {
        // c a^{-5/2} cos(pi/3 + (sqrt 3 / 2) log a) on [0.2, 1], any c
        let grid = 2000;
        let h = 1.0 / grid as f64;
        let shape = |a: f64| a.powf(-2.5) * (PI / 3.0 + 0.5 * 3f64.sqrt() * a.ln()).cos();
        let raw: Vec<f64> = (0..grid)
            .map(|i| {
                let x = (i as f64 + 0.5) * h;
                if x < 0.2 {
                    0.0
                } else {
                    shape(x)
                }
            })
            .collect();
        let mass: f64 = raw.iter().sum::<f64>() * h;
        let cells = raw.iter().map(|v| Cell { w: h, v: v / mass }).collect();
        let g = StepMeasure::new(cells, vec![]).unwrap();
        assert!(euler_lagrange_residual(&w("11010"), &g).unwrap() < 1e-3);
    }
}
