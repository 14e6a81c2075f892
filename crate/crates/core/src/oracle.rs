//! Reference implementations used to cross-check the production paths.
//! They share no code with the dynamic programs they verify.

use crate::measures::StepMeasure;
use crate::quad::gk15;
use crate::word::BinaryWord;

/// Counts occurrences of `pattern` by visiting every index subset of size
/// `m` in lexicographic order.
pub fn brute_force_count(pattern: &BinaryWord, host: &BinaryWord) -> u64 {
    let m = pattern.len();
    let n = host.len();
    if m == 0 || m > n {
        return 0;
    }
    let (p, x) = (pattern.bits(), host.bits());
    let mut idx: Vec<usize> = (0..m).collect();
    let mut count = 0;
    loop {
        if idx.iter().zip(p).all(|(&i, &b)| x[i] == b) {
            count += 1;
        }
        // advance to the next combination
        let mut i = m;
        loop {
            if i == 0 {
                return count;
            }
            i -= 1;
            if idx[i] < n - m + i {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..m {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Pattern density of a step measure by nested Gauss–Kronrod quadrature over
/// the ordered simplex, split at cell edges so every panel integrand is a
/// polynomial. Intended for patterns of length at most 3.
pub fn density_by_quadrature(pattern: &BinaryWord, mu: &StepMeasure) -> f64 {
    let edges = mu.edges();
    let g = |letter: u8, x: f64| {
        let v = mu.value_at(x);
        if letter == 1 {
            v
        } else {
            1.0 - v
        }
    };
    // tail(j, x) = int_x^1 g_j(y) tail(j+1, y) dy
    fn tail(j: usize, x: f64, bits: &[u8], edges: &[f64], g: &dyn Fn(u8, f64) -> f64) -> f64 {
        if j == bits.len() {
            return 1.0;
        }
        let mut total = 0.0;
        let mut lo = x;
        for &e in edges.iter().filter(|&&e| e > x) {
            let integrand = |y: f64| g(bits[j], y) * tail(j + 1, y, bits, edges, g);
            total += gk15(&integrand, lo, e).0;
            lo = e;
        }
        total
    }
    let k = pattern.len();
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    fact * tail(0, 0.0, pattern.bits(), &edges, &g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::w;

    #[test]
    fn brute_force_small_cases() {
        assert_eq!(brute_force_count(&w("10"), &w("0100101")), 4);
        assert_eq!(brute_force_count(&w("01"), &w("01011")), 5);
        assert_eq!(brute_force_count(&w("111"), &w("11")), 0);
        assert_eq!(brute_force_count(&w("11"), &w("1111")), 6);
    }
}
