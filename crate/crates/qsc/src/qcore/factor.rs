//! Labeled tensor factors and multi-index bookkeeping.
//!
//! A Hilbert space is described by an ordered list of factors; the flat
//! basis index is row-major with the first-listed factor most significant.
//! All modules inherit this convention.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One tensor factor: a label and its dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub label: String,
    pub dim: usize,
}

impl Factor {
    pub fn new(label: impl Into<String>, dim: usize) -> Self {
        Factor { label: label.into(), dim }
    }
}

/// Total dimension of a factor list.
pub fn total_dim(factors: &[Factor]) -> usize {
    factors.iter().map(|f| f.dim).product()
}

/// Check labels are unique and dims positive.
pub fn validate_factors(factors: &[Factor]) -> Result<()> {
    for (i, f) in factors.iter().enumerate() {
        if f.dim == 0 {
            return Err(Error::FactorMismatch(format!("factor `{}` has dim 0", f.label)));
        }
        if factors[..i].iter().any(|g| g.label == f.label) {
            return Err(Error::DuplicateLabel(f.label.clone()));
        }
    }
    Ok(())
}

/// Position of a label in a factor list.
pub fn position(factors: &[Factor], label: &str) -> Result<usize> {
    factors
        .iter()
        .position(|f| f.label == label)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))
}

/// Row-major strides: `stride[j] = prod(dims[j+1..])`.
pub fn strides(factors: &[Factor]) -> Vec<usize> {
    let n = factors.len();
    let mut s = vec![1usize; n];
    for j in (0..n.saturating_sub(1)).rev() {
        s[j] = s[j + 1] * factors[j + 1].dim;
    }
    s
}

/// Enumerate the flat offsets contributed by a subset of factor positions.
///
/// Returns one offset per joint assignment of the selected positions
/// (row-major over the selected positions in the order given), with all
/// other positions held at digit 0. Flat indices of full assignments are
/// sums of offsets from complementary subsets.
pub fn subset_offsets(factors: &[Factor], positions: &[usize]) -> Vec<usize> {
    let st = strides(factors);
    let dims: Vec<usize> = positions.iter().map(|&p| factors[p].dim).collect();
    let count: usize = dims.iter().product();
    let mut out = Vec::with_capacity(count);
    let mut digits = vec![0usize; positions.len()];
    for _ in 0..count {
        let off: usize = digits
            .iter()
            .zip(positions)
            .map(|(&d, &p)| d * st[p])
            .sum();
        out.push(off);
        // increment row-major (last digit fastest)
        for k in (0..digits.len()).rev() {
            digits[k] += 1;
            if digits[k] < dims[k] {
                break;
            }
            digits[k] = 0;
        }
    }
    out
}

/// Flat-index remap for a permutation of factors.
///
/// `perm[k]` is the position in the OLD list of the factor that sits at
/// position `k` in the NEW list. Returns `map` with `map[old_flat] =
/// new_flat`.
pub fn permutation_index_map(factors: &[Factor], perm: &[usize]) -> Vec<usize> {
    let n = factors.len();
    assert_eq!(perm.len(), n);
    let new_factors: Vec<Factor> = perm.iter().map(|&p| factors[p].clone()).collect();
    let new_strides = strides(&new_factors);
    let dim = total_dim(factors);
    let mut map = vec![0usize; dim];
    let mut digits = vec![0usize; n];
    for flat in 0..dim {
        let mut nf = 0usize;
        for k in 0..n {
            nf += digits[perm[k]] * new_strides[k];
        }
        map[flat] = nf;
        for k in (0..n).rev() {
            digits[k] += 1;
            if digits[k] < factors[k].dim {
                break;
            }
            digits[k] = 0;
        }
    }
    map
}
