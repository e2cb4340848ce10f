//! Exhaustive reference solver for small instances.

use alloc::vec::Vec;

use super::WeightMatrix;
use crate::{Error, Matrix, Result};

const MAX_ORACLE_SIZE: usize = 8;

/// Sum of `W[i][perm[i]]`.
pub fn objective_of(w: &Matrix, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| w[(i, j)]).sum()
}

pub fn is_permutation(perm: &[usize]) -> bool {
    let mut seen = alloc::vec![false; perm.len()];
    for &j in perm {
        if j >= perm.len() || seen[j] {
            return false;
        }
        seen[j] = true;
    }
    true
}

/// Best agent→task permutation by enumerating all `n!` candidates in
/// lexicographic order; the first maximizer wins ties.
pub fn oracle_solve(w: &WeightMatrix) -> Result<(Vec<usize>, f64)> {
    let n = w.size();
    if n > MAX_ORACLE_SIZE {
        return Err(Error::OracleTooLarge(n));
    }
    if !w.is_square() {
        return Err(Error::ShapeMismatch("oracle needs a square weight matrix".into()));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_value = objective_of(&w.values, &perm);
    while next_permutation(&mut perm) {
        let value = objective_of(&w.values, &perm);
        if value > best_value {
            best_value = value;
            best.copy_from_slice(&perm);
        }
    }
    Ok((best, best_value))
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}
