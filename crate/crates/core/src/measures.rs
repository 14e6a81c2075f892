//! Sublebesgue step measures on [0,1]: construction from words, distribution
//! functions, Wasserstein distance, pattern densities and moments.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patterns;
use crate::word::{BinaryWord, MAX_PATTERN_LEN};

const WIDTH_TOL: f64 = 1e-12;
const MERGE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// width
    pub w: f64,
    /// density value on the cell
    pub v: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub m: f64,
}

#[derive(Deserialize)]
struct RawMeasure {
    cells: Vec<Cell>,
    #[serde(default)]
    atoms: Vec<Atom>,
}

/// Piecewise-constant density on [0,1] plus optional point masses.
///
/// Atoms are only meaningful for the auxiliary probability measures used by
/// the feasibility optimizer; pattern densities reject them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct StepMeasure {
    cells: Vec<Cell>,
    atoms: Vec<Atom>,
}

impl TryFrom<RawMeasure> for StepMeasure {
    type Error = Error;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        StepMeasure::new(raw.cells, raw.atoms)
    }
}

impl StepMeasure {
    /// Validates widths (positive, summing to 1) and values (nonnegative),
    /// then merges adjacent cells with equal values.
    pub fn new(cells: Vec<Cell>, mut atoms: Vec<Atom>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::invalid("a step measure needs at least one cell"));
        }
        for c in &cells {
            if !(c.w > 0.0 && c.w.is_finite()) {
                return Err(Error::invalid(format!("cell width {} must be positive", c.w)));
            }
            if !(c.v >= 0.0 && c.v.is_finite()) {
                return Err(Error::invalid(format!("cell value {} must be nonnegative", c.v)));
            }
        }
        let total: f64 = cells.iter().map(|c| c.w).sum();
        if (total - 1.0).abs() > WIDTH_TOL * (cells.len() as f64).max(1.0) {
            return Err(Error::invalid(format!("cell widths sum to {total}, expected 1")));
        }
        for a in &atoms {
            if !((0.0..=1.0).contains(&a.x) && a.m >= 0.0 && a.m.is_finite()) {
                return Err(Error::invalid(format!("atom at {} with mass {} is invalid", a.x, a.m)));
            }
        }
        atoms.retain(|a| a.m > 0.0);
        atoms.sort_by(|a, b| a.x.total_cmp(&b.x));
        let mut merged: Vec<Cell> = Vec::with_capacity(cells.len());
        for c in cells {
            match merged.last_mut() {
                Some(last) if (last.v - c.v).abs() <= MERGE_TOL => last.w += c.w,
                _ => merged.push(c),
            }
        }
        Ok(StepMeasure { cells: merged, atoms })
    }

    /// Equal-width cells with the given values.
    pub fn uniform_grid(values: &[f64]) -> Result<Self> {
        let w = 1.0 / values.len() as f64;
        Self::new(values.iter().map(|&v| Cell { w, v }).collect(), Vec::new())
    }

    pub fn constant(v: f64) -> Result<Self> {
        Self::new(vec![Cell { w: 1.0, v }], Vec::new())
    }

    /// Density 1 on `[0, rho)` and 0 afterwards.
    pub fn step(rho: f64) -> Result<Self> {
        let mut cells = Vec::new();
        if rho > 0.0 {
            cells.push(Cell { w: rho, v: 1.0 });
        }
        if rho < 1.0 {
            cells.push(Cell { w: 1.0 - rho, v: 0.0 });
        }
        Self::new(cells, Vec::new())
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn has_atoms(&self) -> bool {
        !self.atoms.is_empty()
    }

    /// Density bounded by 1 and no atoms.
    pub fn is_sublebesgue(&self) -> bool {
        self.atoms.is_empty() && self.cells.iter().all(|c| c.v <= 1.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.cells.iter().map(|c| c.w * c.v).sum::<f64>() + self.atoms.iter().map(|a| a.m).sum::<f64>()
    }

    /// Cell edges `0 = e_0 < ... < e_K = 1`.
    pub fn edges(&self) -> Vec<f64> {
        let mut e = Vec::with_capacity(self.cells.len() + 1);
        let mut x = 0.0;
        e.push(0.0);
        for c in &self.cells {
            x += c.w;
            e.push(x);
        }
        *e.last_mut().unwrap() = 1.0;
        e
    }

    pub fn distribution(&self) -> DistributionFunction {
        let edges = self.edges();
        let mut cum = Vec::with_capacity(edges.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for c in &self.cells {
            acc += c.w * c.v;
            cum.push(acc);
        }
        DistributionFunction {
            edges,
            cumulative: cum,
            slopes: self.cells.iter().map(|c| c.v).collect(),
            jumps: self.atoms.iter().map(|a| (a.x, a.m)).collect(),
        }
    }

    /// Density value at `x`, right-continuous.
    pub fn value_at(&self, x: f64) -> f64 {
        let edges = self.edges();
        let i = match edges.binary_search_by(|e| e.total_cmp(&x)) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        self.cells[i.min(self.cells.len() - 1)].v
    }

    /// The measure with density `1 - f(1 - x)`: reversal combined with 0/1 flip.
    pub fn reflect_complement(&self) -> Result<Self> {
        let cells = self
            .cells
            .iter()
            .rev()
            .map(|c| Cell { w: c.w, v: 1.0 - c.v })
            .collect();
        Self::new(cells, Vec::new())
    }

    /// `int x^n f(x) dx` plus atom contributions.
    pub fn moment(&self, n: u32) -> f64 {
        let edges = self.edges();
        let k = (n + 1) as i32;
        let cont: f64 = self
            .cells
            .iter()
            .zip(edges.windows(2))
            .map(|(c, e)| c.v * (e[1].powi(k) - e[0].powi(k)) / k as f64)
            .sum();
        cont + self.atoms.iter().map(|a| a.m * a.x.powi(n as i32)).sum::<f64>()
    }

    /// CSV with columns `x,F,f` on `grid + 1` equally spaced points.
    pub fn curve_csv(&self, grid: usize) -> String {
        let dist = self.distribution();
        let mut out = String::from("x,F,f\n");
        for i in 0..=grid {
            let x = i as f64 / grid as f64;
            out.push_str(&format!(
                "{},{},{}\n",
                fmt12(x),
                fmt12(dist.eval(x)),
                fmt12(self.value_at(x))
            ));
        }
        out
    }

    /// SVG plot of the density on `[0, 1] x [0, 1]`; atoms drawn as spikes.
    pub fn svg(&self) -> String {
        let (w, h) = (400.0, 300.0);
        let edges = self.edges();
        let mut pts = Vec::with_capacity(2 * self.cells.len());
        for (c, e) in self.cells.iter().zip(edges.windows(2)) {
            pts.push(format!("{:.2},{:.2}", e[0] * w, (1.0 - c.v) * h));
            pts.push(format!("{:.2},{:.2}", e[1] * w, (1.0 - c.v) * h));
        }
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"-10 -10 {} {}\">\n<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"none\" stroke=\"#ccc\"/>\n<polyline points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n",
            w + 20.0,
            h + 20.0,
            w + 20.0,
            h + 20.0,
            pts.join(" ")
        );
        for a in &self.atoms {
            out.push_str(&format!(
                "<line x1=\"{x:.2}\" y1=\"{h}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"red\" stroke-width=\"2\"/>\n",
                (1.0 - a.m) * h,
                x = a.x * w
            ));
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Formats with 12 significant digits, the toolkit's output convention.
pub fn fmt12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{:.*e}", 11, x);
    let v: f64 = s.parse().unwrap();
    if v.abs() < 1e-5 || v.abs() >= 1e15 {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Piecewise-linear distribution function with jumps at atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionFunction {
    edges: Vec<f64>,
    cumulative: Vec<f64>,
    slopes: Vec<f64>,
    jumps: Vec<(f64, f64)>,
}

impl DistributionFunction {
    fn continuous_part(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let i = match self.edges.binary_search_by(|e| e.total_cmp(&x)) {
            Ok(i) => return self.cumulative[i],
            Err(i) => i - 1,
        };
        self.cumulative[i] + self.slopes[i] * (x - self.edges[i])
    }

    fn jump_mass(&self, x: f64, inclusive: bool) -> f64 {
        self.jumps
            .iter()
            .filter(|(p, _)| if inclusive { *p <= x } else { *p < x })
            .map(|(_, m)| m)
            .sum()
    }

    /// `F(x) = mu([0, x])`.
    pub fn eval(&self, x: f64) -> f64 {
        self.continuous_part(x) + self.jump_mass(x, true)
    }

    /// Left limit `F(x-)`.
    pub fn eval_left(&self, x: f64) -> f64 {
        self.continuous_part(x) + self.jump_mass(x, false)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.edges.clone();
        b.extend(self.jumps.iter().map(|j| j.0));
        b
    }

    /// Smallest `x` with `F(x) >= y` (the inverse distribution function).
    pub fn inverse(&self, y: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        if self.eval(0.0) >= y {
            return 0.0;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) >= y {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// Integral of `|d|` over `[0, len]` for `d` linear from `d0` to `d1`.
fn abs_linear_integral(d0: f64, d1: f64, len: f64) -> f64 {
    if d0 * d1 >= 0.0 {
        0.5 * (d0.abs() + d1.abs()) * len
    } else {
        // split at the crossing
        let t = d0 / (d0 - d1);
        0.5 * len * (d0.abs() * t + d1.abs() * (1.0 - t))
    }
}

/// `d_W(mu1, mu2) = int_0^1 |F_1 - F_2| dx`, exact for step measures.
pub fn wasserstein(mu1: &StepMeasure, mu2: &StepMeasure) -> f64 {
    let f1 = mu1.distribution();
    let f2 = mu2.distribution();
    let mut grid = f1.breakpoints();
    grid.extend(f2.breakpoints());
    grid.retain(|x| (0.0..=1.0).contains(x));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid.windows(2)
        .map(|ab| {
            let (a, b) = (ab[0], ab[1]);
            let d0 = f1.eval(a) - f2.eval(a);
            let d1 = f1.eval_left(b) - f2.eval_left(b);
            abs_linear_integral(d0, d1, b - a)
        })
        .sum()
}

/// Sublebesgue measure of a word: `n` cells of width `1/n` with value `x_i`.
pub fn measure_of_word(host: &BinaryWord) -> Result<StepMeasure> {
    if host.is_empty() {
        return Err(Error::invalid("cannot build a measure from the empty word"));
    }
    let values: Vec<f64> = host.bits().iter().map(|&b| b as f64).collect();
    StepMeasure::uniform_grid(&values)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn letter_weight(letter: u8, v: f64) -> f64 {
    if letter == 1 {
        v
    } else {
        1.0 - v
    }
}

/// Exact limiting density of `pattern` for a piecewise-constant density
/// given by `(width, value)` pairs. A run of `c` consecutive letters placed in
/// one cell of width `h` contributes `h^c / c!` times the letter weights.
pub fn density_on_cells(pattern: &[u8], cells: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let k = pattern.len();
    let mut dp = [0.0f64; MAX_PATTERN_LEN + 1];
    dp[0] = 1.0;
    for (h, v) in cells {
        let prev = dp;
        for j in 0..k {
            if prev[j] == 0.0 {
                continue;
            }
            let mut acc = prev[j];
            for c in 1..=(k - j) {
                acc *= letter_weight(pattern[j + c - 1], v) * h / c as f64;
                if acc == 0.0 {
                    break;
                }
                dp[j + c] += acc;
            }
        }
    }
    factorial(k) * dp[k]
}

/// Limiting pattern density `k! int_{x_1<...<x_k} prod g_i(x_i)` of a sublebesgue measure.
pub fn density_of_measure(pattern: &BinaryWord, mu: &StepMeasure) -> Result<f64> {
    if mu.has_atoms() {
        return Err(Error::invalid("pattern densities are undefined for measures with atoms"));
    }
    if pattern.is_empty() || pattern.len() > MAX_PATTERN_LEN {
        return Err(Error::invalid(format!(
            "pattern length must lie in 1..={MAX_PATTERN_LEN}"
        )));
    }
    Ok(density_on_cells(pattern.bits(), mu.cells().iter().map(|c| (c.w, c.v))))
}

/// Density and its gradient with respect to each cell value, by a
/// forward/backward sweep over the cells.
pub fn density_gradient(pattern: &[u8], widths: &[f64], values: &[f64]) -> (f64, Vec<f64>) {
    let k = pattern.len();
    let n = widths.len();
    let kf = factorial(k);
    // transition weight for a run pattern[j..j+c] inside cell (h, v)
    let run = |j: usize, c: usize, h: f64, v: f64| -> f64 {
        let mut acc = 1.0;
        for t in 0..c {
            acc *= letter_weight(pattern[j + t], v) * h / (t + 1) as f64;
        }
        acc
    };
    let run_dv = |j: usize, c: usize, h: f64, v: f64| -> f64 {
        let mut total = 0.0;
        for skip in 0..c {
            let mut acc = 1.0;
            for t in 0..c {
                let g = if t == skip {
                    if pattern[j + t] == 1 {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    letter_weight(pattern[j + t], v)
                };
                acc *= g * h / (t + 1) as f64;
            }
            total += acc;
        }
        total
    };
    let mut fwd = vec![[0.0f64; MAX_PATTERN_LEN + 1]; n + 1];
    fwd[0][0] = 1.0;
    for i in 0..n {
        let mut next = fwd[i];
        for j in 0..k {
            if fwd[i][j] == 0.0 {
                continue;
            }
            for c in 1..=(k - j) {
                next[j + c] += fwd[i][j] * run(j, c, widths[i], values[i]);
            }
        }
        fwd[i + 1] = next;
    }
    let mut bwd = vec![[0.0f64; MAX_PATTERN_LEN + 1]; n + 1];
    bwd[n][k] = 1.0;
    for i in (0..n).rev() {
        let mut cur = bwd[i + 1];
        for j in 0..k {
            for c in 1..=(k - j) {
                cur[j] += run(j, c, widths[i], values[i]) * bwd[i + 1][j + c];
            }
        }
        bwd[i] = cur;
    }
    let grad = (0..n)
        .map(|i| {
            let mut g = 0.0;
            for j in 0..k {
                if fwd[i][j] == 0.0 {
                    continue;
                }
                for c in 1..=(k - j) {
                    g += fwd[i][j] * run_dv(j, c, widths[i], values[i]) * bwd[i + 1][j + c];
                }
            }
            kf * g
        })
        .collect();
    (kf * fwd[n][k], grad)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub n: u32,
    pub moment: f64,
    pub pattern_sum: f64,
    pub pass: bool,
}

/// Checks `m_n = (1/(n+1)) sum_{|w| = n} rho_{w1}` for `n = 0..=n_max`.
pub fn moments_identity_check(mu: &StepMeasure, n_max: u32) -> Result<Vec<MomentCheck>> {
    if n_max > 6 {
        return Err(Error::invalid("n_max must be at most 6"));
    }
    if mu.has_atoms() {
        return Err(Error::invalid("moment identity needs a measure without atoms"));
    }
    (0..=n_max)
        .map(|n| {
            let moment = mu.moment(n);
            let sum: f64 = BinaryWord::all_of_len(n as usize)
                .map(|w| density_of_measure(&w.concat(&BinaryWord::repeat_symbol(1, 1)), mu))
                .sum::<Result<f64>>()?;
            let pattern_sum = sum / (n + 1) as f64;
            Ok(MomentCheck {
                n,
                moment,
                pattern_sum,
                pass: (moment - pattern_sum).abs() <= 1e-9,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub wasserstein: f64,
    /// `|rho_w(X_n) - rho_w(mu)|`, one per pattern.
    pub density_gaps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Every column is nonincreasing along the host sequence up to `tol`.
    pub decreasing: bool,
    pub tol: f64,
}

/// Distances and density gaps between each host and the limit measure.
pub fn word_convergence_check(
    hosts: &[BinaryWord],
    mu: &StepMeasure,
    patterns: &[BinaryWord],
    tol: f64,
) -> Result<ConvergenceReport> {
    let limits: Vec<f64> = patterns
        .iter()
        .map(|p| density_of_measure(p, mu))
        .collect::<Result<_>>()?;
    let rows: Vec<ConvergenceRow> = hosts
        .iter()
        .map(|x| {
            let gaps = patterns
                .iter()
                .zip(&limits)
                .map(|(p, lim)| Ok((patterns::density(p, x)? - lim).abs()))
                .collect::<Result<Vec<f64>>>()?;
            Ok(ConvergenceRow {
                n: x.len(),
                wasserstein: wasserstein(&measure_of_word(x)?, mu),
                density_gaps: gaps,
            })
        })
        .collect::<Result<_>>()?;
    let decreasing = rows.windows(2).all(|r| {
        r[1].wasserstein <= r[0].wasserstein + tol
            && r[1]
                .density_gaps
                .iter()
                .zip(&r[0].density_gaps)
                .all(|(b, a)| *b <= a + tol)
    });
    Ok(ConvergenceReport { rows, decreasing, tol })
}

/// Deterministic word of length `n` whose ones follow `F`: position `i`
/// holds a one when `round(n F(i/n))` increases there.
pub fn round_word(mu: &StepMeasure, n: usize) -> BinaryWord {
    let dist = mu.distribution();
    let mut prev = 0i64;
    BinaryWord::from_bools((1..=n).map(|i| {
        let cur = (dist.eval(i as f64 / n as f64) * n as f64).round() as i64;
        let bit = cur > prev;
        prev = cur;
        bit
    }))
}

/// Independent symbols with `P(x_i = 1) = f` at the cell midpoint.
pub fn sample_word<R: Rng + ?Sized>(mu: &StepMeasure, n: usize, rng: &mut R) -> BinaryWord {
    BinaryWord::from_bools((0..n).map(|i| {
        let x = (i as f64 + 0.5) / n as f64;
        rng.random::<f64>() < mu.value_at(x)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::density_by_quadrature;
    use crate::word::w;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cells(v: &[(f64, f64)]) -> StepMeasure {
        StepMeasure::new(v.iter().map(|&(w, v)| Cell { w, v }).collect(), vec![]).unwrap()
    }

    #[test]
    fn word_measures() {
        let m = measure_of_word(&w("10")).unwrap();
        assert_eq!(m.cells(), &[Cell { w: 0.5, v: 1.0 }, Cell { w: 0.5, v: 0.0 }]);
        let m = measure_of_word(&w("0100101")).unwrap();
        assert_eq!(m.cells().len(), 6); // "00" merges
        assert!((m.total_mass() - 3.0 / 7.0).abs() < 1e-15);
        let m = measure_of_word(&w("1111")).unwrap();
        assert_eq!(m.cells().len(), 1);
        assert!((m.distribution().eval(0.3) - 0.3).abs() < 1e-15);
        assert!(measure_of_word(&BinaryWord::default()).is_err());
    }

    #[test]
    fn validation() {
        assert!(StepMeasure::new(vec![Cell { w: 0.5, v: 0.2 }], vec![]).is_err());
        assert!(StepMeasure::new(vec![Cell { w: 1.0, v: -0.1 }], vec![]).is_err());
        let json = r#"{"cells":[{"w":0.5,"v":1.0},{"w":0.5,"v":0.0}],"atoms":[]}"#;
        let m: StepMeasure = serde_json::from_str(json).unwrap();
        assert_eq!(m.cells().len(), 2);
        let bad = r#"{"cells":[{"w":0.7,"v":1.0}]}"#;
        assert!(serde_json::from_str::<StepMeasure>(bad).is_err());
    }

    #[test]
    fn wasserstein_examples() {
        let a = cells(&[(0.5, 1.0), (0.5, 0.0)]);
        let b = cells(&[(0.5, 0.0), (0.5, 1.0)]);
        assert_eq!(wasserstein(&a, &a), 0.0);
        assert!((wasserstein(&a, &b) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn wasserstein_matches_riemann_sum() {
        // alternating words 1010... approach the constant density 1/2
        let half = StepMeasure::constant(0.5).unwrap();
        let mut prev = f64::INFINITY;
        for k in [1usize, 2, 4, 8, 16] {
            let host = BinaryWord::from_bools((0..2 * k).map(|i| i % 2 == 0));
            let b = measure_of_word(&host).unwrap();
            let exact = wasserstein(&half, &b);
            let (fa, fb) = (half.distribution(), b.distribution());
            let n = 1_000_000;
            let riemann: f64 = (0..n)
                .map(|i| {
                    let x = (i as f64 + 0.5) / n as f64;
                    (fa.eval(x) - fb.eval(x)).abs()
                })
                .sum::<f64>()
                / n as f64;
            assert!((exact - riemann).abs() < 1e-10, "{exact} vs {riemann}");
            assert!(exact < prev);
            prev = exact;
        }
    }

    #[test]
    fn wasserstein_with_atoms_and_crossings() {
        let a = StepMeasure::new(vec![Cell { w: 1.0, v: 0.0 }], vec![Atom { x: 0.5, m: 1.0 }]).unwrap();
        let b = StepMeasure::constant(1.0).unwrap();
        // |1{x>=1/2} - x| integrates to 1/4
        assert!((wasserstein(&a, &b) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn density_examples() {
        let mu = cells(&[(0.3, 0.9), (0.7, 0.2)]);
        let rho1 = density_of_measure(&w("1"), &mu).unwrap();
        assert!((rho1 - mu.distribution().eval(1.0)).abs() < 1e-15);
        let rho = 0.37;
        let step = StepMeasure::step(rho).unwrap();
        let d = density_of_measure(&w("10"), &step).unwrap();
        assert!((d - 2.0 * rho * (1.0 - rho)).abs() < 1e-15);
        let half = StepMeasure::constant(0.5).unwrap();
        assert!((density_of_measure(&w("1010"), &half).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        let atomic = StepMeasure::new(vec![Cell { w: 1.0, v: 0.0 }], vec![Atom { x: 1.0, m: 0.5 }]).unwrap();
        assert!(density_of_measure(&w("1"), &atomic).is_err());
    }

    #[test]
    fn dp_agrees_with_quadrature() {
        let mu = cells(&[(0.2, 0.9), (0.35, 0.1), (0.15, 0.6), (0.3, 0.35)]);
        for k in 1..=3 {
            for p in BinaryWord::all_of_len(k) {
                let dp = density_of_measure(&p, &mu).unwrap();
                let q = density_by_quadrature(&p, &mu);
                assert!((dp - q).abs() < 1e-9, "{p}: {dp} vs {q}");
            }
        }
    }

    #[test]
    fn densities_sum_to_one() {
        let mu = cells(&[(0.25, 0.7), (0.5, 0.3), (0.25, 1.0)]);
        for k in 1..=6 {
            let s: f64 = BinaryWord::all_of_len(k)
                .map(|p| density_of_measure(&p, &mu).unwrap())
                .sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reflect_complement_symmetry() {
        let mu = cells(&[(0.25, 0.7), (0.5, 0.3), (0.25, 1.0)]);
        let r = mu.reflect_complement().unwrap();
        for p in ["10", "110", "1010", "01101"] {
            let p = w(p);
            let a = density_of_measure(&p, &mu).unwrap();
            let b = density_of_measure(&p.complement().reversed(), &r).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let widths = [0.2, 0.3, 0.1, 0.4];
        let values = [0.3, 0.8, 0.5, 0.1];
        let pat = w("1010");
        let (rho, grad) = density_gradient(pat.bits(), &widths, &values);
        let direct = density_on_cells(pat.bits(), widths.iter().copied().zip(values.iter().copied()));
        assert!((rho - direct).abs() < 1e-15);
        for i in 0..4 {
            let h = 1e-6;
            let mut up = values;
            let mut dn = values;
            up[i] += h;
            dn[i] -= h;
            let fd = (density_on_cells(pat.bits(), widths.iter().copied().zip(up))
                - density_on_cells(pat.bits(), widths.iter().copied().zip(dn)))
                / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-8, "{i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn moment_examples() {
        let half = StepMeasure::constant(0.5).unwrap();
        let r = moments_identity_check(&half, 1).unwrap();
        assert!((r[1].moment - 0.25).abs() < 1e-15 && r[1].pass);
        let ind = StepMeasure::step(0.5).unwrap();
        let r = moments_identity_check(&ind, 1).unwrap();
        assert!((r[1].moment - 0.125).abs() < 1e-15 && r[1].pass);
        assert!((r[0].moment - 0.5).abs() < 1e-15 && r[0].pass);
        let mu = cells(&[(0.25, 0.7), (0.5, 0.3), (0.25, 1.0)]);
        assert!(moments_identity_check(&mu, 6).unwrap().iter().all(|c| c.pass));
        assert!(moments_identity_check(&mu, 7).is_err());
    }

    #[test]
    fn convergence_of_rounded_words() {
        let half = StepMeasure::constant(0.5).unwrap();
        let hosts: Vec<BinaryWord> = [10, 40, 160, 640].iter().map(|&n| round_word(&half, n)).collect();
        let rep = word_convergence_check(&hosts, &half, &[w("10")], 1e-12).unwrap();
        assert!(rep.decreasing);
        assert!(rep.rows.last().unwrap().density_gaps[0] < 1e-2);

        let ones = StepMeasure::constant(1.0).unwrap();
        let hosts: Vec<BinaryWord> = [3, 7, 20].iter().map(|&n| BinaryWord::repeat_symbol(1, n)).collect();
        let rep = word_convergence_check(&hosts, &ones, &[w("1")], 0.0).unwrap();
        assert!(rep.rows.iter().all(|r| r.wasserstein < 1e-14));
    }

    #[test]
    fn iid_samples_converge_at_root_n() {
        let mu = cells(&[(0.4, 0.8), (0.6, 0.3)]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ratios = Vec::new();
        for n in [100usize, 1000, 10000] {
            let reps = 20;
            let mean: f64 = (0..reps)
                .map(|_| wasserstein(&measure_of_word(&sample_word(&mu, n, &mut rng)).unwrap(), &mu))
                .sum::<f64>()
                / reps as f64;
            ratios.push(mean * (n as f64).sqrt());
        }
        // d_W * sqrt(n) stays of order one
        assert!(ratios.iter().all(|&r| r > 0.05 && r < 2.0), "{ratios:?}");
    }

    #[test]
    fn csv_curve() {
        let mu = StepMeasure::step(0.5).unwrap();
        let csv = mu.curve_csv(4);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,F,f");
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[3], "0.5,0.5,0");
    }

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt12(4.0), "4");
        assert_eq!(fmt12(5.551115123125783e-17), "5.55111512313e-17");
    }
}
