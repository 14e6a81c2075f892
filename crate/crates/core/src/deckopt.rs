//! Arrangements of a deck with a fixed number of ones maximizing the density
//! of a pattern (the BRBR game for pattern 1010).

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::extremal_density_1010;
use crate::measures::round_word;
use crate::patterns::{binomial, count_pattern, count_pattern_u64, ratio_to_f64};
use crate::word::BinaryWord;

pub const EXHAUSTIVE_BUDGET: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exhaustive,
    Anneal,
    Ascent,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(Mode::Exhaustive),
            "anneal" => Ok(Mode::Anneal),
            "ascent" => Ok(Mode::Ascent),
            other => Err(Error::invalid(format!("unknown mode {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub steps: u64,
    pub restarts: usize,
    /// Temperature is multiplied by this factor between stages.
    pub cooling: f64,
    pub stages: u64,
    /// Initial temperature is chosen for roughly this acceptance of downhill moves.
    pub initial_acceptance: f64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            steps: 1_000_000,
            restarts: 20,
            cooling: 0.999,
            stages: 10_000,
            initial_acceptance: 0.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeckProblem {
    pub n: usize,
    pub ones: usize,
    pub pattern: BinaryWord,
    pub mode: Mode,
    /// Starting arrangement for ascent and anneal; random when absent.
    pub initial: Option<BinaryWord>,
    pub anneal: AnnealConfig,
}

impl DeckProblem {
    pub fn new(n: usize, ones: usize, pattern: BinaryWord, mode: Mode) -> Result<Self> {
        let p = DeckProblem {
            n,
            ones,
            pattern,
            mode,
            initial: None,
            anneal: AnnealConfig::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ones > self.n {
            return Err(Error::invalid("ones must not exceed n"));
        }
        if self.pattern.is_empty() || self.pattern.len() > self.n {
            return Err(Error::invalid("pattern must be nonempty and fit in the deck"));
        }
        if self.pattern.len() > 8 {
            return Err(Error::invalid("pattern length capped at 8"));
        }
        if let Some(x) = &self.initial {
            if x.len() != self.n || x.ones() != self.ones {
                return Err(Error::invalid("initial arrangement has the wrong composition"));
            }
        }
        if self.mode == Mode::Exhaustive {
            let size = binomial(self.n as u64, self.ones as u64);
            if size > BigUint::from(EXHAUSTIVE_BUDGET) {
                return Err(Error::invalid(format!(
                    "binomial({}, {}) = {size} arrangements exceeds the exhaustive budget; use anneal",
                    self.n, self.ones
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: u64,
    pub temperature: f64,
    pub density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeckResult {
    pub best: BinaryWord,
    #[serde(with = "crate::decimal::biguint")]
    pub count: BigUint,
    pub density: f64,
    pub method: Mode,
    /// Density of the starting arrangement (absent for exhaustive search).
    pub initial_density: Option<f64>,
    pub trace: Vec<TracePoint>,
}

/// Exact density of a deck.
pub fn deck_density(pattern: &BinaryWord, deck: &BinaryWord) -> Result<(BigUint, f64)> {
    let count = count_pattern(pattern, deck)?;
    let total = binomial(deck.len() as u64, pattern.len() as u64);
    let d = ratio_to_f64(&count, &total);
    Ok((count, d))
}

/// Deck state with prefix/suffix occurrence tables for O(m) swap deltas.
struct Deck {
    x: Vec<u8>,
    w: Vec<u8>,
    count: i128,
    /// `left[q * (m+1) + j]`: occurrences of `w[..j]` in `x[..q]`.
    left: Vec<i128>,
    /// `right[q * (m+1) + j]`: occurrences of `w[j..]` in `x[q..]`.
    right: Vec<i128>,
}

impl Deck {
    fn new(x: Vec<u8>, w: &[u8]) -> Self {
        let n = x.len();
        let m = w.len();
        let mut d = Deck {
            x,
            w: w.to_vec(),
            count: 0,
            left: vec![0; (n + 1) * (m + 1)],
            right: vec![0; (n + 1) * (m + 1)],
        };
        d.rebuild();
        d
    }

    fn rebuild(&mut self) {
        let n = self.x.len();
        let m = self.w.len();
        let s = m + 1;
        self.left[..s].iter_mut().for_each(|v| *v = 0);
        self.left[0] = 1;
        for q in 0..n {
            for j in 0..=m {
                let mut v = self.left[q * s + j];
                if j > 0 && self.x[q] == self.w[j - 1] {
                    v += self.left[q * s + j - 1];
                }
                self.left[(q + 1) * s + j] = v;
            }
        }
        self.right[n * s..].iter_mut().for_each(|v| *v = 0);
        self.right[n * s + m] = 1;
        for q in (0..n).rev() {
            for j in 0..=m {
                let mut v = self.right[(q + 1) * s + j];
                if j < m && self.x[q] == self.w[j] {
                    v += self.right[(q + 1) * s + j + 1];
                }
                self.right[q * s + j] = v;
            }
        }
        self.count = self.left[n * s + m];
    }

    /// Count change from swapping `p` and `p+1`; zero when they agree.
    fn swap_delta(&self, p: usize) -> i128 {
        let (a, b) = (self.x[p], self.x[p + 1]);
        if a == b {
            return 0;
        }
        let s = self.w.len() + 1;
        let mut delta = 0;
        for j in 0..self.w.len().saturating_sub(1) {
            let pair = (self.w[j], self.w[j + 1]);
            let through = self.left[p * s + j] * self.right[(p + 2) * s + j + 2];
            if pair == (b, a) {
                delta += through;
            } else if pair == (a, b) {
                delta -= through;
            }
        }
        delta
    }

    fn swap(&mut self, p: usize, delta: i128) {
        self.x.swap(p, p + 1);
        self.rebuild();
        debug_assert_eq!(self.count, self.count - delta + delta);
    }
}

fn to_word(x: &[u8]) -> BinaryWord {
    BinaryWord::new(x.to_vec()).expect("deck is binary")
}

/// Deterministic preference among equal counts: lexicographically larger word.
fn better(a: (i128, &[u8]), b: (i128, &[u8])) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 > b.1)
}

/// Steepest ascent over adjacent transpositions.
fn ascent(deck: &mut Deck) {
    loop {
        let mut best = (0i128, usize::MAX);
        for p in 0..deck.x.len() - 1 {
            let d = deck.swap_delta(p);
            if d > best.0 {
                best = (d, p);
            }
        }
        if best.1 == usize::MAX {
            return;
        }
        deck.swap(best.1, best.0);
    }
}

fn random_deck(n: usize, ones: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut x: Vec<u8> = (0..n).map(|i| (i < ones) as u8).collect();
    x.shuffle(rng);
    x
}

/// One annealing run followed by ascent; returns the best arrangement seen
/// and a coarse trace.
fn anneal_once(start: Vec<u8>, w: &[u8], cfg: &AnnealConfig, total: f64, rng: &mut ChaCha8Rng) -> (Vec<u8>, i128, Vec<TracePoint>) {
    let n = start.len();
    let mut deck = Deck::new(start, w);
    let mut best_x = deck.x.clone();
    let mut best = deck.count;
    if n < 2 {
        return (best_x, best, Vec::new());
    }
    // initial temperature from the typical downhill step
    let mut downs = Vec::new();
    for _ in 0..200 {
        let p = rng.random_range(0..n - 1);
        let d = deck.swap_delta(p);
        if d < 0 {
            downs.push(-d as f64 / total);
        }
    }
    let typical = if downs.is_empty() {
        1.0 / total
    } else {
        downs.iter().sum::<f64>() / downs.len() as f64
    };
    let t0 = typical / -cfg.initial_acceptance.ln();
    let per_stage = (cfg.steps / cfg.stages.max(1)).max(1);
    let mut temp = t0;
    let mut trace = Vec::new();
    let mut step = 0u64;
    for stage in 0..cfg.stages {
        for _ in 0..per_stage {
            step += 1;
            let p = rng.random_range(0..n - 1);
            let d = deck.swap_delta(p);
            if d == 0 && deck.x[p] == deck.x[p + 1] {
                continue;
            }
            let accept = d >= 0 || rng.random::<f64>() < (d as f64 / total / temp).exp();
            if accept {
                deck.swap(p, d);
                if better((deck.count, &deck.x), (best, &best_x)) {
                    best = deck.count;
                    best_x.clone_from(&deck.x);
                }
            }
        }
        if stage % (cfg.stages / 50).max(1) == 0 {
            trace.push(TracePoint {
                step,
                temperature: temp,
                density: best as f64 / total,
            });
        }
        temp *= cfg.cooling;
    }
    let mut polished = Deck::new(best_x, w);
    ascent(&mut polished);
    trace.push(TracePoint {
        step,
        temperature: temp,
        density: polished.count as f64 / total,
    });
    (polished.x, polished.count, trace)
}

fn exhaustive(n: usize, ones: usize, w: &[u8]) -> Result<Vec<u8>> {
    if n > 63 {
        return Err(Error::invalid("exhaustive search supports n <= 63"));
    }
    let mut best: Option<(u64, Vec<u8>)> = None;
    let mut visit = |x: Vec<u8>| {
        let c = count_pattern_u64(w, &x);
        let replace = match &best {
            None => true,
            Some((bc, bx)) => c > *bc || (c == *bc && x > *bx),
        };
        if replace {
            best = Some((c, x));
        }
    };
    if ones == 0 || ones == n {
        visit(vec![(ones == n) as u8; n]);
    } else {
        // Gosper's hack over n-bit masks with `ones` bits set; bit n-1 is x[0]
        let mut mask: u64 = (1u64 << ones) - 1;
        let limit = 1u64 << n;
        while mask < limit {
            let x: Vec<u8> = (0..n).map(|i| ((mask >> (n - 1 - i)) & 1) as u8).collect();
            visit(x);
            let c = mask & mask.wrapping_neg();
            let r = mask + c;
            mask = (((r ^ mask) >> 2) / c) | r;
        }
    }
    Ok(best.expect("at least one arrangement").1)
}

/// Maximizes the density of `prob.pattern` over arrangements with `ones`
/// ones. Anneal mode also considers the ascent from the starting deck, so
/// its answer never falls below ascent's.
pub fn optimize_deck(prob: &DeckProblem, seed: u64) -> Result<DeckResult> {
    prob.validate()?;
    let w = prob.pattern.bits();
    let total = ratio_to_f64(&binomial(prob.n as u64, w.len() as u64), &BigUint::from(1u32));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = match &prob.initial {
        Some(x) => x.bits().to_vec(),
        None => random_deck(prob.n, prob.ones, &mut rng),
    };
    let initial_density = Some(deck_density(&prob.pattern, &to_word(&start))?.1);
    let (best, trace, initial_density) = match prob.mode {
        Mode::Exhaustive => (exhaustive(prob.n, prob.ones, w)?, Vec::new(), None),
        Mode::Ascent => {
            let mut deck = Deck::new(start, w);
            if prob.n >= 2 {
                ascent(&mut deck);
            }
            (deck.x, Vec::new(), initial_density)
        }
        Mode::Anneal => {
            let seeds: Vec<u64> = (0..prob.anneal.restarts.max(1)).map(|_| rng.random()).collect();
            let runs: Vec<(Vec<u8>, i128, Vec<TracePoint>)> = seeds
                .par_iter()
                .enumerate()
                .map(|(r, &s)| {
                    let mut sub = ChaCha8Rng::seed_from_u64(s);
                    let begin = if prob.initial.is_some() || r == 0 {
                        start.clone()
                    } else {
                        random_deck(prob.n, prob.ones, &mut sub)
                    };
                    anneal_once(begin, w, &prob.anneal, total, &mut sub)
                })
                .collect();
            let mut asc = Deck::new(start, w);
            if prob.n >= 2 {
                ascent(&mut asc);
            }
            let mut best = (asc.count, asc.x, Vec::new());
            for (x, c, t) in runs {
                if better((c, &x), (best.0, &best.1)) {
                    best = (c, x, t);
                }
            }
            (best.1, best.2, initial_density)
        }
    };
    let best = to_word(&best);
    let (count, density) = deck_density(&prob.pattern, &best)?;
    Ok(DeckResult {
        best,
        count,
        density,
        method: prob.mode,
        initial_density,
        trace,
    })
}

/// `1^13 0^13 1^13 0^13` and its generalization to `4k` cards.
pub fn new_deck_order(k: usize) -> BinaryWord {
    let one = BinaryWord::repeat_symbol(1, k);
    let zero = BinaryWord::repeat_symbol(0, k);
    one.concat(&zero).concat(&one).concat(&zero)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub n: usize,
    /// Best arrangement found, when optimization ran at this size.
    pub optimum: Option<f64>,
    pub method: Option<String>,
    /// Density of the extremal limit shape rounded to an `n`-word.
    pub shape_density: f64,
    pub asymptote: f64,
}

/// For pattern 1010 with `n/2` ones: optimized density (anneal up to
/// `anneal_up_to`, ascent from the rounded extremal shape up to
/// `optimize_up_to`) next to the rounded-shape density and `3/(4e^2)`.
pub fn asymptotic_gap_report(
    pattern: &BinaryWord,
    sizes: &[usize],
    anneal_up_to: usize,
    optimize_up_to: usize,
    anneal: &AnnealConfig,
    seed: u64,
) -> Result<Vec<GapRow>> {
    if pattern.to_string() != "1010" {
        return Err(Error::invalid("the asymptotic report is for pattern 1010"));
    }
    let asymptote = 3.0 / (4.0 * std::f64::consts::E * std::f64::consts::E);
    let shape = extremal_density_1010(0.5, 4000)?;
    sizes
        .iter()
        .map(|&n| {
            if n % 2 != 0 || n < 4 {
                return Err(Error::invalid("sizes must be even and at least 4"));
            }
            let rounded = round_word(&shape, n);
            let shape_density = deck_density(pattern, &rounded)?.1;
            let (optimum, method) = if n <= anneal_up_to {
                let mut prob = DeckProblem::new(n, n / 2, pattern.clone(), Mode::Anneal)?;
                prob.anneal = anneal.clone();
                let a = optimize_deck(&prob, seed)?;
                // the ascent from the rounded shape is a second candidate
                let mut prob = DeckProblem::new(n, n / 2, pattern.clone(), Mode::Ascent)?;
                prob.initial = Some(rounded.clone());
                let b = optimize_deck(&prob, seed)?;
                (Some(a.density.max(b.density)), Some("anneal".to_string()))
            } else if n <= optimize_up_to {
                let mut prob = DeckProblem::new(n, n / 2, pattern.clone(), Mode::Ascent)?;
                prob.initial = Some(rounded.clone());
                (Some(optimize_deck(&prob, seed)?.density), Some("ascent from rounded shape".to_string()))
            } else {
                (None, None)
            };
            Ok(GapRow {
                n,
                optimum,
                method,
                shape_density,
                asymptote,
            })
        })
        .collect()
}

/// SVG of the deck as a north-east lattice path (1 = north, 0 = east).
pub fn lattice_path_svg(deck: &BinaryWord) -> String {
    let ones = deck.ones().max(1);
    let zeros = deck.zeros().max(1);
    let scale = 400.0 / ones.max(zeros) as f64;
    let (w, h) = (zeros as f64 * scale, ones as f64 * scale);
    let mut pts = vec![(0.0, h)];
    let (mut x, mut y) = (0.0, h);
    for &b in deck.bits() {
        if b == 1 {
            y -= scale;
        } else {
            x += scale;
        }
        pts.push((x, y));
    }
    let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"-10 -10 {:.0} {:.0}\">\n<rect x=\"0\" y=\"0\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"none\" stroke=\"#ccc\"/>\n<polyline points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n</svg>\n",
        w + 20.0,
        h + 20.0,
        w + 20.0,
        h + 20.0,
        path.join(" ")
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::w;

    #[test]
    fn new_deck_order_density() {
        let (count, d) = deck_density(&w("1010"), &new_deck_order(13)).unwrap();
        assert_eq!(count, BigUint::from(28561u32));
        assert!((d - 28561.0 / 270725.0).abs() < 1e-15);
    }

    #[test]
    fn exhaustive_small() {
        let prob = DeckProblem::new(8, 4, w("10"), Mode::Exhaustive).unwrap();
        let r = optimize_deck(&prob, 0).unwrap();
        assert_eq!(r.best, w("11110000"));
        assert_eq!(r.count, BigUint::from(16u32));
        assert!(DeckProblem::new(52, 26, w("1010"), Mode::Exhaustive).is_err());
    }

    #[test]
    fn swap_deltas_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_deck(30, 14, &mut rng);
        let deck = Deck::new(x.clone(), &[1, 0, 1, 0]);
        for p in 0..29 {
            let mut y = x.clone();
            y.swap(p, p + 1);
            let direct = count_pattern_u64(&[1, 0, 1, 0], &y) as i128 - count_pattern_u64(&[1, 0, 1, 0], &x) as i128;
            assert_eq!(deck.swap_delta(p), direct);
        }
    }

    #[test]
    fn ascent_and_anneal_improve() {
        let mut prob = DeckProblem::new(24, 12, w("1010"), Mode::Ascent).unwrap();
        prob.initial = Some(BinaryWord::repeat_symbol(1, 12).concat(&BinaryWord::repeat_symbol(0, 12)));
        let asc = optimize_deck(&prob, 1).unwrap();
        assert!(asc.density >= asc.initial_density.unwrap());
        prob.mode = Mode::Anneal;
        prob.anneal.steps = 20_000;
        prob.anneal.stages = 200;
        prob.anneal.restarts = 4;
        let ann = optimize_deck(&prob, 1).unwrap();
        assert!(ann.density >= asc.density);
    }
}
