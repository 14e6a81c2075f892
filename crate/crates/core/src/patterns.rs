//! Exact subsequence counts on finite binary words, densities, the algebraic
//! relations among short pattern counts, and numeric independence tests over
//! block-structured hosts.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::word::{BinaryWord, MAX_PATTERN_LEN};

/// Number of occurrences of `pattern` as a (not necessarily consecutive)
/// subsequence of `host`.
pub fn count_pattern(pattern: &BinaryWord, host: &BinaryWord) -> Result<BigUint> {
    if pattern.is_empty() {
        return Err(Error::invalid("pattern must be nonempty"));
    }
    let pat = pattern.bits();
    let m = pat.len();
    // ways[j] = occurrences of pat[..j] in the prefix scanned so far
    let mut ways = vec![BigUint::zero(); m + 1];
    ways[0] = BigUint::one();
    for &x in host.bits() {
        for j in (1..=m).rev() {
            if pat[j - 1] == x && !ways[j - 1].is_zero() {
                let add = ways[j - 1].clone();
                ways[j] += add;
            }
        }
    }
    Ok(ways.pop().unwrap())
}

/// Same dynamic program in machine integers; callers must keep
/// `binomial(n, m)` below `u64::MAX`.
pub(crate) fn count_pattern_u64(pattern: &[u8], host: &[u8]) -> u64 {
    let m = pattern.len();
    let mut ways = [0u64; MAX_PATTERN_LEN + 1];
    ways[0] = 1;
    for &x in host {
        for j in (1..=m).rev() {
            if pattern[j - 1] == x {
                ways[j] += ways[j - 1];
            }
        }
    }
    ways[m]
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Binomial coefficient `a choose c` extended to real `a` through the falling factorial.
pub fn real_choose(a: f64, c: usize) -> f64 {
    let mut acc = 1.0;
    for t in 0..c {
        acc *= (a - t as f64) / (t + 1) as f64;
    }
    acc
}

pub(crate) fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    match (num.to_f64(), den.to_f64()) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() => a / b,
        _ => {
            // Scale both down so the quotient survives the conversion.
            let shift = den.bits().saturating_sub(900);
            let a = (num >> shift).to_f64().unwrap_or(f64::INFINITY);
            let b = (den >> shift).to_f64().unwrap_or(f64::INFINITY);
            a / b
        }
    }
}

/// Pattern density `N_w(X) / binomial(n, m)`.
pub fn density(pattern: &BinaryWord, host: &BinaryWord) -> Result<f64> {
    if pattern.len() > host.len() {
        return Err(Error::invalid(format!(
            "pattern length {} exceeds host length {}",
            pattern.len(),
            host.len()
        )));
    }
    let count = count_pattern(pattern, host)?;
    let total = binomial(host.len() as u64, pattern.len() as u64);
    Ok(ratio_to_f64(&count, &total))
}

/// Counts for every pattern of length `1..=max_len`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternCountVector {
    pub host_len: usize,
    #[serde(with = "crate::decimal::map")]
    pub entries: BTreeMap<BinaryWord, BigUint>,
}

impl PatternCountVector {
    pub fn get(&self, pattern: &BinaryWord) -> Option<&BigUint> {
        self.entries.get(pattern)
    }

    /// Lookup by string literal; panics when the pattern was not counted.
    pub fn n(&self, pattern: &str) -> &BigUint {
        let key: BinaryWord = pattern.parse().expect("malformed pattern");
        self.entries
            .get(&key)
            .unwrap_or_else(|| panic!("pattern {pattern} not in count vector"))
    }
}

/// All pattern counts up to `max_len` in one pass: when symbol `b` is read,
/// every pattern ending in `b` gains the current count of its prefix.
pub fn count_all(host: &BinaryWord, max_len: usize) -> Result<PatternCountVector> {
    if !(1..=MAX_PATTERN_LEN).contains(&max_len) {
        return Err(Error::invalid(format!(
            "max_len must lie in 1..={MAX_PATTERN_LEN}, got {max_len}"
        )));
    }
    // Layer l holds the 2^l patterns of length l indexed by their binary value.
    let mut layers: Vec<Vec<BigUint>> = (0..=max_len)
        .map(|l| vec![BigUint::zero(); 1 << l])
        .collect();
    layers[0][0] = BigUint::one();
    for &b in host.bits() {
        for l in (1..=max_len).rev() {
            let (lower, upper) = layers.split_at_mut(l);
            let prev = &lower[l - 1];
            for (code, slot) in upper[0].iter_mut().enumerate() {
                if (code & 1) as u8 == b {
                    let p = &prev[code >> 1];
                    if !p.is_zero() {
                        *slot += p;
                    }
                }
            }
        }
    }
    let mut entries = BTreeMap::new();
    for (l, layer) in layers.into_iter().enumerate().skip(1) {
        for (code, c) in layer.into_iter().enumerate() {
            entries.insert(BinaryWord::from_index(code as u64, l), c);
        }
    }
    Ok(PatternCountVector {
        host_len: host.len(),
        entries,
    })
}

// ---------------------------------------------------------------------------
// Algebraic relations

#[derive(Clone, Debug, PartialEq)]
enum Factor {
    Count(BinaryWord),
    Choose(BinaryWord, u64),
    Len,
}

#[derive(Clone, Debug, PartialEq)]
struct Term {
    coeff: i64,
    factors: Vec<Factor>,
}

#[derive(Clone, Debug, PartialEq)]
struct Relation {
    name: &'static str,
    lhs: Vec<Term>,
    rhs: Vec<Term>,
}

fn nw(s: &str) -> Factor {
    Factor::Count(s.parse().unwrap())
}

fn ch(s: &str, k: u64) -> Factor {
    Factor::Choose(s.parse().unwrap(), k)
}

fn term(coeff: i64, factors: Vec<Factor>) -> Term {
    Term { coeff, factors }
}

fn single(s: &str) -> Vec<Term> {
    vec![term(1, vec![nw(s)])]
}

fn sum(words: &[&str]) -> Vec<Term> {
    words.iter().map(|s| term(1, vec![nw(s)])).collect()
}

fn weighted(items: &[(i64, &str)]) -> Vec<Term> {
    items.iter().map(|&(c, s)| term(c, vec![nw(s)])).collect()
}

impl Factor {
    fn complement(&self) -> Factor {
        match self {
            Factor::Count(w) => Factor::Count(w.complement()),
            Factor::Choose(w, k) => Factor::Choose(w.complement(), *k),
            Factor::Len => Factor::Len,
        }
    }

    fn eval(&self, counts: &PatternCountVector) -> BigInt {
        match self {
            Factor::Len => BigInt::from(counts.host_len),
            Factor::Count(w) => BigInt::from(counts.get(w).cloned().unwrap_or_default()),
            Factor::Choose(w, k) => {
                let n = counts.get(w).and_then(|c| c.to_u64()).unwrap_or(0);
                BigInt::from(binomial(n, *k))
            }
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::Count(w) => write!(f, "N{w}"),
            Factor::Choose(w, k) => write!(f, "C(N{w},{k})"),
            Factor::Len => f.write_str("n"),
        }
    }
}

fn display_side(terms: &[Term]) -> String {
    terms
        .iter()
        .map(|t| {
            let body = t
                .factors
                .iter()
                .map(|f| f.to_string())
                .collect::<Vec<_>>()
                .join("*");
            match t.coeff {
                1 => body,
                -1 => format!("-{body}"),
                c => format!("{c}*{body}"),
            }
        })
        .collect::<Vec<_>>()
        .join(" + ")
        .replace("+ -", "- ")
}

fn eval_side(terms: &[Term], counts: &PatternCountVector) -> BigInt {
    terms
        .iter()
        .map(|t| {
            t.factors
                .iter()
                .fold(BigInt::from(t.coeff), |acc, f| acc * f.eval(counts))
        })
        .sum()
}

fn complement_terms(terms: &[Term]) -> Vec<Term> {
    terms
        .iter()
        .map(|t| term(t.coeff, t.factors.iter().map(Factor::complement).collect()))
        .collect()
}

fn relation(name: &'static str, lhs: Vec<Term>, rhs: Vec<Term>) -> Relation {
    Relation { name, lhs, rhs }
}

/// Every identity among counts of patterns of length at most four that the
/// relation checker evaluates, grouped by family.
fn relation_catalogue() -> Vec<Relation> {
    let mut out = Vec::new();
    out.push(relation(
        "length-1",
        sum(&["0", "1"]),
        vec![term(1, vec![Factor::Len])],
    ));

    // length 2
    out.push(relation("length-2", single("00"), vec![term(1, vec![ch("0", 2)])]));
    out.push(relation(
        "length-2",
        sum(&["01", "10"]),
        vec![term(1, vec![nw("0"), nw("1")])],
    ));
    out.push(relation("length-2", single("11"), vec![term(1, vec![ch("1", 2)])]));

    // length 3, linear
    out.push(relation("length-3 linear", single("000"), vec![term(1, vec![ch("0", 3)])]));
    out.push(relation(
        "length-3 linear",
        sum(&["001", "010", "100"]),
        vec![term(1, vec![ch("0", 2), nw("1")])],
    ));
    out.push(relation(
        "length-3 linear",
        sum(&["110", "101", "011"]),
        vec![term(1, vec![nw("0"), ch("1", 2)])],
    ));
    out.push(relation("length-3 linear", single("111"), vec![term(1, vec![ch("1", 3)])]));

    // N0*N10 family and complements
    let n0n10 = relation(
        "N0*N10 family",
        vec![term(1, vec![nw("0"), nw("10")])],
        weighted(&[(1, "010"), (2, "100"), (1, "10")]),
    );
    let n0n01 = relation(
        "N0*N10 family",
        vec![term(1, vec![nw("0"), nw("01")])],
        weighted(&[(1, "010"), (2, "001"), (1, "01")]),
    );
    for r in [n0n10, n0n01] {
        out.push(complemented(&r));
        out.push(r);
    }

    // length 4, linear: sum over words of weight k
    for k in 0..=4u64 {
        let words: Vec<String> = BinaryWord::all_of_len(4)
            .filter(|w| w.ones() as u64 == k)
            .map(|w| w.to_string())
            .collect();
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        out.push(relation(
            "length-4 linear",
            sum(&refs),
            vec![term(1, vec![ch("0", 4 - k), ch("1", k)])],
        ));
    }

    // N0 * N_xyz relations and their complements
    let n0_rel = |w3: &str, rhs: &[(i64, &str)]| {
        relation(
            "N0*Nxyz",
            vec![term(1, vec![nw("0"), nw(w3)])],
            weighted(rhs),
        )
    };
    let triple_rel = [
        n0_rel("001", &[(3, "0001"), (1, "0010"), (2, "001")]),
        n0_rel("010", &[(2, "0010"), (2, "0100"), (2, "010")]),
        n0_rel("100", &[(3, "1000"), (1, "0100"), (2, "100")]),
        n0_rel("011", &[(2, "0011"), (1, "0101"), (1, "0110"), (1, "011")]),
        n0_rel("101", &[(1, "0101"), (2, "1001"), (1, "1010"), (1, "101")]),
        n0_rel("110", &[(1, "0110"), (1, "1010"), (2, "1100"), (1, "110")]),
    ];
    for r in triple_rel {
        out.push(complemented(&r));
        out.push(r);
    }

    // quadratic
    let sq = relation(
        "N10^2",
        vec![term(1, vec![nw("10"), nw("10")])],
        weighted(&[(2, "1010"), (4, "1100"), (2, "110"), (2, "100"), (1, "10")]),
    );
    out.push(complemented(&sq));
    out.push(sq);

    let n1001 = relation(
        "N1001 identity",
        single("1001"),
        vec![
            term(1, vec![nw("1"), nw("100")]),
            term(1, vec![nw("110")]),
            term(-1, vec![ch("10", 2)]),
        ],
    );
    out.push(complemented(&n1001));
    out.push(n1001);
    out
}

fn complemented(r: &Relation) -> Relation {
    Relation {
        name: r.name,
        lhs: complement_terms(&r.lhs),
        rhs: complement_terms(&r.rhs),
    }
}

/// One evaluated identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationCheck {
    pub relation: String,
    #[serde(with = "crate::decimal::bigint")]
    pub lhs: BigInt,
    #[serde(with = "crate::decimal::bigint")]
    pub rhs: BigInt,
    pub pass: bool,
}

/// Evaluates the catalogue of count identities on `host`. Every entry is a
/// theorem, so a failure indicates a counting bug.
pub fn check_relations(host: &BinaryWord) -> Vec<RelationCheck> {
    let counts = count_all(host, 4).expect("max_len 4 is in range");
    relation_catalogue()
        .into_iter()
        .map(|r| {
            let lhs = eval_side(&r.lhs, &counts);
            let rhs = eval_side(&r.rhs, &counts);
            RelationCheck {
                relation: format!("{}: {} = {}", r.name, display_side(&r.lhs), display_side(&r.rhs)),
                pass: lhs == rhs,
                lhs,
                rhs,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Block-structured hosts

/// Host of the form `1^{a_1} 0^{a_2} 1^{a_3} ...` with real block lengths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSequence {
    lengths: Vec<f64>,
}

impl BlockSequence {
    pub fn new(lengths: Vec<f64>) -> Result<Self> {
        if let Some(a) = lengths.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(Error::invalid(format!("block length {a} must be finite and nonnegative")));
        }
        Ok(BlockSequence { lengths })
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Symbol of block `i` (0-based): blocks alternate starting with ones.
    pub fn symbol(i: usize) -> u8 {
        if i.is_multiple_of(2) {
            1
        } else {
            0
        }
    }

    /// Expands integer block lengths into a word; `None` if some length is fractional.
    pub fn expand(&self) -> Option<BinaryWord> {
        let mut bits = Vec::new();
        for (i, &a) in self.lengths.iter().enumerate() {
            if a.fract() != 0.0 {
                return None;
            }
            bits.extend(std::iter::repeat_n(Self::symbol(i), a as usize));
        }
        Some(BinaryWord::new(bits).unwrap())
    }

    /// Seeded generic point: distinct lengths drawn uniformly from [0.5, 3.5].
    pub fn generic(count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BlockSequence {
            lengths: (0..count).map(|_| rng.random_range(0.5..3.5)).collect(),
        }
    }

    fn is_generic(&self) -> bool {
        let mut sorted = self.lengths.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.iter().all(|&a| a > 0.0) && sorted.windows(2).all(|w| w[1] - w[0] > 1e-9)
    }
}

/// `N_pattern` of a block host as a polynomial in the block lengths: letters
/// are distributed over blocks in order, and a run of `c` letters placed
/// inside a block of length `a` contributes `a choose c`.
pub fn block_counts_polynomial(pattern: &BinaryWord, blocks: &BlockSequence) -> Result<f64> {
    if pattern.is_empty() || pattern.len() > MAX_PATTERN_LEN {
        return Err(Error::invalid(format!(
            "pattern length must lie in 1..={MAX_PATTERN_LEN}"
        )));
    }
    Ok(block_poly_raw(pattern.bits(), blocks.lengths()))
}

fn block_poly_raw(pat: &[u8], lengths: &[f64]) -> f64 {
    let m = pat.len();
    let mut ways = [0.0f64; MAX_PATTERN_LEN + 1];
    ways[0] = 1.0;
    for (i, &a) in lengths.iter().enumerate() {
        let s = BlockSequence::symbol(i);
        let prev = ways;
        for j in 0..m {
            if prev[j] == 0.0 {
                continue;
            }
            let mut c = 1;
            while j + c <= m && pat[j + c - 1] == s {
                ways[j + c] += prev[j] * real_choose(a, c);
                c += 1;
            }
        }
    }
    ways[m]
}

/// Tunables for the numeric rank test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankConfig {
    /// Central-difference step, relative to each block length.
    pub fd_step: f64,
    /// Singular values below `rank_tol * sigma_max` count as zero.
    pub rank_tol: f64,
    /// Restrict perturbations to the hyperplane of constant total length,
    /// i.e. count independence at fixed host length.
    pub fixed_length: bool,
}

impl Default for RankConfig {
    fn default() -> Self {
        RankConfig {
            fd_step: 1e-5,
            rank_tol: 1e-8,
            fixed_length: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub point: Vec<f64>,
    /// Set when the block point has repeated or zero lengths; the rank may be
    /// underestimated there.
    pub degenerate_point: bool,
}

fn jacobian(patterns: &[BinaryWord], blocks: &BlockSequence, fd_step: f64) -> DMatrix<f64> {
    let a = blocks.lengths();
    let mut jac = DMatrix::zeros(patterns.len(), a.len());
    let mut plus = a.to_vec();
    let mut minus = a.to_vec();
    for j in 0..a.len() {
        let h = fd_step * a[j].abs().max(1e-3);
        plus[j] = a[j] + h;
        minus[j] = a[j] - h;
        for (i, p) in patterns.iter().enumerate() {
            jac[(i, j)] = (block_poly_raw(p.bits(), &plus) - block_poly_raw(p.bits(), &minus)) / (2.0 * h);
        }
        plus[j] = a[j];
        minus[j] = a[j];
    }
    jac
}

/// Orthonormal basis (as columns) of the hyperplane `sum x_i = 0`.
fn zero_sum_basis(dim: usize) -> DMatrix<f64> {
    let mut basis = DMatrix::zeros(dim, dim.saturating_sub(1));
    // Helmert contrasts
    for k in 1..dim {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            basis[(i, k - 1)] = 1.0 / norm;
        }
        basis[(k, k - 1)] = -(k as f64) / norm;
    }
    basis
}

/// Numeric rank of the Jacobian of `(N_p)_{p in patterns}` with respect to
/// the block lengths at `blocks`.
pub fn independence_rank(
    patterns: &[BinaryWord],
    blocks: &BlockSequence,
    config: &RankConfig,
) -> Result<RankReport> {
    if patterns.is_empty() {
        return Err(Error::invalid("need at least one pattern"));
    }
    if let Some(p) = patterns.iter().find(|p| p.is_empty() || p.len() > MAX_PATTERN_LEN) {
        return Err(Error::invalid(format!("pattern {p} has unsupported length")));
    }
    if blocks.lengths().is_empty() {
        return Err(Error::invalid("need at least one block"));
    }
    let mut jac = jacobian(patterns, blocks, config.fd_step);
    if config.fixed_length {
        jac = &jac * zero_sum_basis(blocks.lengths().len());
    }
    // counts of long patterns dwarf short ones; unit rows keep the relative
    // threshold meaningful without changing the rank
    for mut row in jac.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    let mut sv: Vec<f64> = jac.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let top = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| top > 0.0 && s > config.rank_tol * top).count();
    Ok(RankReport {
        rank,
        singular_values: sv,
        point: blocks.lengths().to_vec(),
        degenerate_point: !blocks.is_generic(),
    })
}

/// Greedily extends `base` by candidates that raise the numeric rank.
/// Returns the accepted candidates in order.
pub fn greedy_independent_extension(
    base: &[BinaryWord],
    candidates: &[BinaryWord],
    blocks: &BlockSequence,
    config: &RankConfig,
) -> Result<Vec<BinaryWord>> {
    let mut current: Vec<BinaryWord> = base.to_vec();
    let mut rank = if current.is_empty() {
        0
    } else {
        independence_rank(&current, blocks, config)?.rank
    };
    let mut accepted = Vec::new();
    for c in candidates {
        current.push(c.clone());
        let r = independence_rank(&current, blocks, config)?.rank;
        if r > rank {
            rank = r;
            accepted.push(c.clone());
        } else {
            current.pop();
        }
    }
    Ok(accepted)
}

/// Conjectured number of algebraically independent counts among patterns of
/// length at most `k`: `sum_{j=1}^{k} binomial(j-1, floor((j-1)/2))`.
pub fn conjectured_independent_count(k: u64) -> u64 {
    (1..=k)
        .map(|j| binomial(j - 1, (j - 1) / 2).to_u64().unwrap())
        .sum()
}
