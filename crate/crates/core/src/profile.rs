//! Subsystem dimensions and the row-major linearisation of multi-indices.
//!
//! Indices are zero-based throughout: a multi-index `(i_1, …, i_d)` has
//! `0 ≤ i_k < N_k` and maps to `Σ_k i_k · ∏_{l>k} N_l`, so that `|i_1, …, i_d⟩`
//! is the standard Kronecker-product basis vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DimensionProfile {
    dims: Vec<usize>,
}

impl DimensionProfile {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Domain("dimension profile must not be empty".into()));
        }
        if dims.contains(&0) {
            return Err(Error::Domain(format!(
                "every dimension must be positive, got {dims:?}"
            )));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_subsystems(&self) -> usize {
        self.dims.len()
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    /// Subsystems that carry the block structure of a structured factor (all but the last).
    pub fn levels(&self) -> &[usize] {
        &self.dims[..self.dims.len() - 1]
    }

    /// The trailing "carrier" subsystem whose operators form the blocks of a structured factor.
    pub fn carrier(&self) -> usize {
        *self.dims.last().expect("profile is non-empty")
    }

    /// Number of carrier-sized blocks along each side, `∏ levels`.
    pub fn num_blocks(&self) -> usize {
        self.levels().iter().product()
    }

    pub fn linear_index(&self, alpha: &[usize]) -> Result<usize> {
        linear_index(&self.dims, alpha)
    }

    pub fn multi_index(&self, n: usize) -> Result<Vec<usize>> {
        multi_index(&self.dims, n)
    }
}

impl std::fmt::Display for DimensionProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join("⊗"))
    }
}

/// Row-major position of `alpha` within `dims`.
pub fn linear_index(dims: &[usize], alpha: &[usize]) -> Result<usize> {
    if alpha.len() != dims.len() {
        return Err(Error::Domain(format!(
            "multi-index {alpha:?} has {} entries, profile has {}",
            alpha.len(),
            dims.len()
        )));
    }
    let mut n = 0;
    for (&i, &dim) in alpha.iter().zip(dims) {
        if i >= dim {
            return Err(Error::Domain(format!(
                "index {alpha:?} out of range for {dims:?}"
            )));
        }
        n = n * dim + i;
    }
    Ok(n)
}

/// Inverse of [`linear_index`].
pub fn multi_index(dims: &[usize], n: usize) -> Result<Vec<usize>> {
    let total: usize = dims.iter().product();
    if n >= total {
        return Err(Error::Domain(format!(
            "linear index {n} out of range for {dims:?}"
        )));
    }
    Ok(unchecked_multi_index(dims, n))
}

pub(crate) fn unchecked_multi_index(dims: &[usize], mut n: usize) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = n % dims[k];
        n /= dims[k];
    }
    out
}

pub(crate) fn unchecked_linear_index(dims: &[usize], alpha: &[usize]) -> usize {
    alpha.iter().zip(dims).fold(0, |n, (&i, &d)| n * d + i)
}
