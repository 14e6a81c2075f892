//! Unitriangular integer matrices whose first row lists the counts of the
//! prefixes of a pattern, and exact minor scans for total nonnegativity.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patterns::count_pattern;
use crate::word::BinaryWord;

pub const MAX_DIM: usize = 8;

/// Assignment of the superdiagonal slots `(i, i+1)` to a generator: slot `i`
/// is 1 in `M_{mask[i]}` and 0 in the other generator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    mask: Vec<u8>,
}

impl GeneratorSpec {
    pub fn new(mask: Vec<u8>) -> Result<Self> {
        if mask.is_empty() {
            return Err(Error::invalid("mask must be nonempty (d >= 2)"));
        }
        if mask.len() >= MAX_DIM {
            return Err(Error::invalid(format!("dimension capped at {MAX_DIM}")));
        }
        if mask.iter().any(|&b| b > 1) {
            return Err(Error::invalid("mask bits must be 0 or 1"));
        }
        Ok(GeneratorSpec { mask })
    }

    pub fn from_word(mask: &BinaryWord) -> Result<Self> {
        Self::new(mask.bits().to_vec())
    }

    pub fn dim(&self) -> usize {
        self.mask.len() + 1
    }

    pub fn mask(&self) -> &[u8] {
        &self.mask
    }

    /// All masks of dimension `d`.
    pub fn all(d: usize) -> impl Iterator<Item = GeneratorSpec> {
        BinaryWord::all_of_len(d - 1).map(|w| GeneratorSpec { mask: w.bits().to_vec() })
    }
}

/// Square integer matrix stored row-major; unitriangular when built from
/// generators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitriangularMatrix {
    d: usize,
    #[serde(with = "crate::decimal::bigint_matrix")]
    rows: Vec<Vec<BigInt>>,
}

impl UnitriangularMatrix {
    pub fn identity(d: usize) -> Self {
        let rows = (0..d)
            .map(|i| (0..d).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
            .collect();
        UnitriangularMatrix { d, rows }
    }

    /// Checks shape, unit diagonal and zero lower triangle.
    pub fn from_rows(rows: Vec<Vec<BigInt>>) -> Result<Self> {
        let d = rows.len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::invalid("matrix must be square"));
            }
            for (j, x) in r.iter().enumerate() {
                let ok = match i.cmp(&j) {
                    std::cmp::Ordering::Equal => x.is_one(),
                    std::cmp::Ordering::Greater => x.is_zero(),
                    std::cmp::Ordering::Less => true,
                };
                if !ok {
                    return Err(Error::invalid("matrix must be upper unitriangular"));
                }
            }
        }
        Ok(UnitriangularMatrix { d, rows })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn rows(&self) -> &[Vec<BigInt>] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.rows[i][j]
    }

    pub fn first_row(&self) -> &[BigInt] {
        &self.rows[0]
    }

    pub fn upper_right(&self) -> &BigInt {
        &self.rows[0][self.d - 1]
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.d, other.d);
        let d = self.d;
        let mut rows = vec![vec![BigInt::zero(); d]; d];
        for i in 0..d {
            for k in i..d {
                if self.rows[i][k].is_zero() {
                    continue;
                }
                for j in k..d {
                    rows[i][j] += &self.rows[i][k] * &other.rows[k][j];
                }
            }
        }
        UnitriangularMatrix { d, rows }
    }

    /// Right multiplication by the generator `M_symbol`, in place.
    fn push_generator(&mut self, mask: &[u8], symbol: u8) {
        // column j+1 += column j for every slot owned by `symbol`; slots are
        // processed right to left so each uses the old column j
        for j in (0..mask.len()).rev() {
            if mask[j] == symbol {
                for i in 0..=j {
                    let add = self.rows[i][j].clone();
                    self.rows[i][j + 1] += add;
                }
            }
        }
    }
}

/// The generator `M_symbol` itself.
pub fn generator(spec: &GeneratorSpec, symbol: u8) -> UnitriangularMatrix {
    let mut m = UnitriangularMatrix::identity(spec.dim());
    for (j, &b) in spec.mask.iter().enumerate() {
        if b == symbol {
            m.rows[j][j + 1] = BigInt::one();
        }
    }
    m
}

/// `M_X = M_{x_1} M_{x_2} ... M_{x_n}`.
pub fn matrix_of_word(spec: &GeneratorSpec, host: &BinaryWord) -> UnitriangularMatrix {
    let mut m = UnitriangularMatrix::identity(spec.dim());
    for &s in host.bits() {
        m.push_generator(&spec.mask, s);
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstRowReport {
    #[serde(with = "crate::decimal::bigint_vec")]
    pub first_row: Vec<BigInt>,
    #[serde(with = "crate::decimal::bigint_vec")]
    pub counts: Vec<BigInt>,
    pub pass: bool,
}

/// Compares the first row of `M_X` with `(1, N_{a_1}, N_{a_1 a_2}, ...)`.
pub fn first_row_equals_counts(spec: &GeneratorSpec, host: &BinaryWord) -> FirstRowReport {
    let m = matrix_of_word(spec, host);
    let mut counts = vec![BigInt::one()];
    for len in 1..spec.dim() {
        let prefix = BinaryWord::new(spec.mask[..len].to_vec()).expect("mask bits are binary");
        let n = count_pattern(&prefix, host).expect("prefix is nonempty");
        counts.push(BigInt::from(n));
    }
    let first_row = m.first_row().to_vec();
    let pass = first_row == counts;
    FirstRowReport { first_row, counts, pass }
}

/// Determinant by fraction-free (Bareiss) elimination.
pub fn determinant(mut a: Vec<Vec<BigInt>>) -> BigInt {
    let n = a.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = 1;
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
                a[i][j] = v;
            }
        }
        prev = a[k][k].clone();
    }
    let det = a[n - 1][n - 1].clone();
    if sign < 0 {
        -det
    } else {
        det
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// The minor on the given rows and columns.
pub fn minor(m: &UnitriangularMatrix, rows: &[usize], cols: &[usize]) -> BigInt {
    let sub = rows
        .iter()
        .map(|&i| cols.iter().map(|&j| m.rows[i][j].clone()).collect())
        .collect();
    determinant(sub)
}

/// Minimum over all `order x order` minors.
pub fn min_minor(m: &UnitriangularMatrix, order: usize) -> Result<BigInt> {
    if order == 0 || order > m.d {
        return Err(Error::invalid(format!("order {order} outside [1, {}]", m.d)));
    }
    let sets = subsets(m.d, order);
    let mut best: Option<BigInt> = None;
    for r in &sets {
        for c in &sets {
            let v = minor(m, r, c);
            if best.as_ref().is_none_or(|b| v < *b) {
                best = Some(v);
            }
        }
    }
    Ok(best.expect("at least one subset"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinorScan {
    pub order: usize,
    #[serde(with = "crate::decimal::bigint")]
    pub min: BigInt,
}

/// Minimum minor for every order `1..=d`.
pub fn minor_scan(m: &UnitriangularMatrix) -> Vec<MinorScan> {
    (1..=m.d)
        .map(|order| MinorScan {
            order,
            min: min_minor(m, order).expect("order in range"),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::w;

    fn ints(rows: &[&[i64]]) -> Vec<Vec<BigInt>> {
        rows.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect()
    }

    #[test]
    fn standard_heisenberg_example() {
        let spec = GeneratorSpec::new(vec![0, 1]).unwrap();
        let m = matrix_of_word(&spec, &w("01101"));
        assert_eq!(m.rows(), ints(&[&[1, 2, 4], &[0, 1, 3], &[0, 0, 1]]).as_slice());
        let direct = [0u8, 1, 1, 0, 1]
            .iter()
            .fold(UnitriangularMatrix::identity(3), |acc, &s| acc.mul(&generator(&spec, s)));
        assert_eq!(m, direct);
    }

    #[test]
    fn first_rows() {
        let spec = GeneratorSpec::new(vec![0, 1, 0]).unwrap();
        let m = matrix_of_word(&spec, &w("0110"));
        assert_eq!(m.first_row(), ints(&[&[1, 2, 2, 2]])[0].as_slice());
        assert!(first_row_equals_counts(&spec, &w("0110")).pass);
        let spec = GeneratorSpec::new(vec![1]).unwrap();
        let r = first_row_equals_counts(&spec, &w("10110"));
        assert_eq!(r.first_row, ints(&[&[1, 3]])[0]);
        assert_eq!(matrix_of_word(&spec, &BinaryWord::new(vec![]).unwrap()), UnitriangularMatrix::identity(2));
    }

    #[test]
    fn determinants() {
        assert_eq!(determinant(ints(&[&[2, 1], &[1, 3]])), BigInt::from(5));
        assert_eq!(determinant(ints(&[&[0, 1], &[1, 0]])), BigInt::from(-1));
        assert_eq!(determinant(ints(&[&[1, 2, 3], &[4, 5, 6], &[7, 8, 10]])), BigInt::from(-3));
        assert_eq!(determinant(ints(&[&[1, 2], &[2, 4]])), BigInt::zero());
    }

    #[test]
    fn identity_minors() {
        let id = UnitriangularMatrix::identity(4);
        assert_eq!(min_minor(&id, 2).unwrap(), BigInt::zero());
        assert_eq!(minor(&id, &[0, 2], &[0, 2]), BigInt::one());
        assert!(min_minor(&id, 0).is_err());
        assert!(min_minor(&id, 5).is_err());
    }

    #[test]
    fn lgv_minor_is_nonnegative() {
        let spec = GeneratorSpec::new(vec![0, 1, 0]).unwrap();
        let m = matrix_of_word(&spec, &w("0110"));
        let ur = minor(&m, &[0, 1, 2], &[1, 2, 3]);
        assert!(ur >= BigInt::zero());
        assert!(min_minor(&m, 3).unwrap() >= BigInt::zero());
    }
}
