//! Upper-triangular factorisations `ρ = X†X` and the nested `S · X_α` block structure.
//!
//! With the last subsystem of the profile taken as the carrier (dimension `N₀`)
//! and the others as levels `(N_1, …, N_d)`, `X` is partitioned into `N₀ × N₀`
//! blocks indexed by level multi-indices `α, β`. A structured factor has
//!
//! ```text
//! X[α, β] = S¹_{α,j_1} S²_{α,j_2} ⋯ S^d_{α,j_d} X_α        (β = (j_1, …, j_d))
//! ```
//!
//! with `S^p_{α,j} = 1` when `j = i_p` and `S^p_{α,j} = 0` when `j < i_p`.
//! Storing one `S^p` per full multi-index `α` makes every intermediate-level
//! `S` block-diagonal over the deeper indices automatically.

use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, block, frobenius, identity, pinv, real, set_block, zeros, CMatrix};
use crate::profile::{unchecked_linear_index, unchecked_multi_index, DimensionProfile};

/// Pseudo-inverse cutoff (relative to `σ_max`) used when solving `S · X_α = X[α, β]`.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Pivots below this fraction of the largest diagonal entry are treated as zero.
pub const PIVOT_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorSource {
    /// Entrywise Cholesky factor of the state followed by least-squares `S` recovery.
    Canonical,
    /// Factor provided together with its `S` data (e.g. by a generator).
    Supplied,
}

/// Upper-triangular Cholesky factor `X` with `ρ = X†X`.
///
/// Rows belonging to (numerically) zero pivots are set to zero, so the routine
/// also factors positive semidefinite matrices.
pub fn block_cholesky(rho: &DensityMatrix, tol: f64) -> Result<CMatrix> {
    let v = rho.validity();
    if !v.is_hermitian(tol) {
        return Err(Error::NotHermitian {
            residual: v.hermiticity_residual,
        });
    }
    if !v.is_psd(tol) {
        return Err(Error::NotPsd {
            min_eigenvalue: v.min_eigenvalue,
        });
    }
    Ok(cholesky_upper(rho.matrix()))
}

pub(crate) fn cholesky_upper(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let h = (m + m.adjoint()) * real(0.5);
    let max_diag = (0..n).fold(0.0f64, |a, i| a.max(h[(i, i)].re));
    let threshold = PIVOT_THRESHOLD * max_diag;
    let mut x = zeros(n, n);
    for k in 0..n {
        let mut pivot = h[(k, k)].re;
        for i in 0..k {
            pivot -= x[(i, k)].norm_sqr();
        }
        if pivot <= threshold || pivot <= 0.0 {
            continue;
        }
        let root = pivot.sqrt();
        x[(k, k)] = real(root);
        for j in k + 1..n {
            let mut acc = h[(k, j)];
            for i in 0..k {
                acc -= x[(i, k)].conj() * x[(i, j)];
            }
            x[(k, j)] = acc / root;
        }
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredFactor {
    profile: DimensionProfile,
    x: CMatrix,
    /// `smats[α][p][j]`, each `N₀ × N₀`.
    smats: Vec<Vec<Vec<CMatrix>>>,
    max_residual: f64,
    worst_block: Option<(usize, usize)>,
    tol: f64,
    source: FactorSource,
}

impl StructuredFactor {
    /// Combines an explicit `X` with explicit `S` data and measures how well they agree.
    ///
    /// `smats[α][p][j]` must be provided for every level `p` and every `j`; entries
    /// fixed by the structure (`j ≤ i_p`) are overwritten with `1` or `0`.
    pub fn from_parts(
        profile: DimensionProfile,
        x: CMatrix,
        mut smats: Vec<Vec<Vec<CMatrix>>>,
        source: FactorSource,
        tol: f64,
    ) -> Result<Self> {
        let n = profile.total();
        if x.shape() != (n, n) {
            return Err(Error::Shape(format!(
                "factor {:?} does not match profile {profile}",
                x.shape()
            )));
        }
        if profile.num_subsystems() < 2 {
            return Err(Error::Domain(
                "structured factors need at least one level and a carrier".into(),
            ));
        }
        let levels = profile.levels().to_vec();
        let n0 = profile.carrier();
        if smats.len() != profile.num_blocks() {
            return Err(Error::Shape(format!(
                "expected S data for {} blocks, got {}",
                profile.num_blocks(),
                smats.len()
            )));
        }
        for (a, per_alpha) in smats.iter_mut().enumerate() {
            let alpha = unchecked_multi_index(&levels, a);
            if per_alpha.len() != levels.len() {
                return Err(Error::Shape(format!(
                    "block {a}: expected {} levels of S data",
                    levels.len()
                )));
            }
            for (p, per_level) in per_alpha.iter_mut().enumerate() {
                if per_level.len() != levels[p] {
                    return Err(Error::Shape(format!(
                        "block {a}, level {p}: expected {} S matrices",
                        levels[p]
                    )));
                }
                for (j, s) in per_level.iter_mut().enumerate() {
                    if s.shape() != (n0, n0) {
                        return Err(Error::Shape(format!(
                            "S matrix at ({a},{p},{j}) has shape {:?}",
                            s.shape()
                        )));
                    }
                    if j == alpha[p] {
                        *s = identity(n0);
                    } else if j < alpha[p] {
                        *s = zeros(n0, n0);
                    }
                }
            }
        }
        let mut f = Self {
            profile,
            x,
            smats,
            max_residual: 0.0,
            worst_block: None,
            tol,
            source,
        };
        f.measure_residuals();
        Ok(f)
    }

    /// Builds `X` from diagonal blocks `X_α` and a generator for the free `S^p_{α,j}` (`j > i_p`).
    pub fn assemble<F>(
        profile: DimensionProfile,
        x_blocks: &[CMatrix],
        mut upper: F,
        tol: f64,
    ) -> Result<Self>
    where
        F: FnMut(&[usize], usize, usize) -> CMatrix,
    {
        if profile.num_subsystems() < 2 {
            return Err(Error::Domain(
                "structured factors need at least one level and a carrier".into(),
            ));
        }
        let levels = profile.levels().to_vec();
        let n0 = profile.carrier();
        let nb = profile.num_blocks();
        if x_blocks.len() != nb {
            return Err(Error::Shape(format!(
                "expected {nb} diagonal blocks, got {}",
                x_blocks.len()
            )));
        }
        let mut smats = Vec::with_capacity(nb);
        for a in 0..nb {
            let alpha = unchecked_multi_index(&levels, a);
            let per_alpha: Vec<Vec<CMatrix>> = (0..levels.len())
                .map(|p| {
                    (0..levels[p])
                        .map(|j| match j.cmp(&alpha[p]) {
                            std::cmp::Ordering::Less => zeros(n0, n0),
                            std::cmp::Ordering::Equal => identity(n0),
                            std::cmp::Ordering::Greater => upper(&alpha, p, j),
                        })
                        .collect()
                })
                .collect();
            smats.push(per_alpha);
        }
        let mut x = zeros(profile.total(), profile.total());
        for a in 0..nb {
            if x_blocks[a].shape() != (n0, n0) {
                return Err(Error::Shape(format!(
                    "diagonal block {a} has shape {:?}",
                    x_blocks[a].shape()
                )));
            }
            for b in 0..nb {
                if let Some(p) = structured_product(&smats[a], &levels, a, b) {
                    set_block(&mut x, a, b, &(p * &x_blocks[a]));
                }
            }
        }
        Self::from_parts(profile, x, smats, FactorSource::Supplied, tol)
    }

    pub fn profile(&self) -> &DimensionProfile {
        &self.profile
    }

    pub fn x(&self) -> &CMatrix {
        &self.x
    }

    pub fn source(&self) -> FactorSource {
        self.source
    }

    pub fn levels(&self) -> &[usize] {
        self.profile.levels()
    }

    pub fn carrier(&self) -> usize {
        self.profile.carrier()
    }

    pub fn num_blocks(&self) -> usize {
        self.profile.num_blocks()
    }

    pub fn alpha(&self, a: usize) -> Vec<usize> {
        unchecked_multi_index(self.levels(), a)
    }

    pub fn alpha_index(&self, alpha: &[usize]) -> usize {
        unchecked_linear_index(self.levels(), alpha)
    }

    /// `S^p_{α,j}` for the block with linear index `a`.
    pub fn s(&self, a: usize, p: usize, j: usize) -> &CMatrix {
        &self.smats[a][p][j]
    }

    pub fn smats(&self) -> &[Vec<Vec<CMatrix>>] {
        &self.smats
    }

    pub fn x_block(&self, a: usize, b: usize) -> CMatrix {
        block(&self.x, a, b, self.carrier())
    }

    /// Diagonal block `X_α`.
    pub fn x_alpha(&self, a: usize) -> CMatrix {
        self.x_block(a, a)
    }

    /// Diagonal block `X_{α_n}` of the level-`n` partition, `α_n = prefix` (`1 ≤ n ≤ d`).
    pub fn level_block(&self, prefix: &[usize]) -> CMatrix {
        let n = prefix.len();
        let levels = self.levels();
        let tail: usize = levels[n..].iter().product::<usize>() * self.carrier();
        let start = unchecked_linear_index(&levels[..n], prefix) * tail;
        self.x.view((start, start), (tail, tail)).into_owned()
    }

    /// `∏_{p<n} S^p_{α_n, j_p}` for `α_n = prefix`, `β_n = betas`, block-diagonal over the deeper indices.
    pub fn level_product(&self, prefix: &[usize], betas: &[usize]) -> CMatrix {
        let n = prefix.len();
        let levels = self.levels();
        let tail_dims = &levels[n..];
        let tails: usize = tail_dims.iter().product();
        let blocks: Vec<CMatrix> = (0..tails)
            .map(|t| {
                let mut alpha = prefix.to_vec();
                alpha.extend(unchecked_multi_index(tail_dims, t));
                let a = unchecked_linear_index(levels, &alpha);
                let mut prod = identity(self.carrier());
                for (p, &j) in betas.iter().enumerate() {
                    prod *= &self.smats[a][p][j];
                }
                prod
            })
            .collect();
        linalg::block_diag(&blocks)
    }

    pub fn gram(&self) -> CMatrix {
        self.x.adjoint() * &self.x
    }

    /// Largest block reconstruction residual `‖S⋯S X_α − X[α,β]‖_F`, relative to `‖X‖_F`.
    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    pub fn worst_block(&self) -> Option<(usize, usize)> {
        self.worst_block
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// Whether every block of `X` is reproduced by the `S · X_α` structure within tolerance.
    pub fn is_representable(&self) -> bool {
        self.max_residual <= self.tol
    }

    /// Scaled copy representing `c · X†X` (`c > 0`); `S` data is unchanged.
    pub fn scaled(&self, c: f64) -> Self {
        let mut f = self.clone();
        f.x *= real(c.sqrt());
        f
    }

    /// Re-reads `X` under a different profile with the same total dimension, recovering `S` by least squares.
    pub fn reread(&self, profile: DimensionProfile) -> Result<Self> {
        extract_structured_factor(self.x.clone(), profile, self.tol)
    }

    fn measure_residuals(&mut self) {
        let levels = self.levels().to_vec();
        let nb = self.num_blocks();
        let norm = frobenius(&self.x).max(f64::MIN_POSITIVE);
        let mut worst = 0.0;
        let mut worst_block = None;
        for a in 0..nb {
            let xa = self.x_alpha(a);
            for b in 0..nb {
                let actual = self.x_block(a, b);
                let expected = match structured_product(&self.smats[a], &levels, a, b) {
                    Some(p) => p * &xa,
                    None => zeros(actual.nrows(), actual.ncols()),
                };
                let r = frobenius(&(expected - actual)) / norm;
                if r > worst {
                    worst = r;
                    worst_block = Some((a, b));
                }
            }
        }
        self.max_residual = worst;
        self.worst_block = worst_block;
    }
}

/// `∏_p S^p_{α,j_p}` for block `(a, b)`, or `None` when the structure forces the block to zero.
fn structured_product(
    per_alpha: &[Vec<CMatrix>],
    levels: &[usize],
    a: usize,
    b: usize,
) -> Option<CMatrix> {
    let alpha = unchecked_multi_index(levels, a);
    let beta = unchecked_multi_index(levels, b);
    if alpha.iter().zip(&beta).any(|(i, j)| j < i) {
        return None;
    }
    let n0 = per_alpha[0][0].nrows();
    let mut prod = identity(n0);
    for (p, &j) in beta.iter().enumerate() {
        if j != alpha[p] {
            prod *= &per_alpha[p][j];
        }
    }
    Some(prod)
}

/// Recovers the `S^p_{α,j}` of `X` by minimum-norm least squares `S = X[α, α(p→j)] · X_α⁺`
/// and records how well the resulting structure reproduces every block.
pub fn extract_structured_factor(
    x: CMatrix,
    profile: DimensionProfile,
    tol: f64,
) -> Result<StructuredFactor> {
    if profile.num_subsystems() < 2 {
        return Err(Error::Domain(
            "structured factors need at least one level and a carrier".into(),
        ));
    }
    let levels = profile.levels().to_vec();
    let n0 = profile.carrier();
    let nb = profile.num_blocks();
    if x.shape() != (profile.total(), profile.total()) {
        return Err(Error::Shape(format!(
            "factor {:?} does not match profile {profile}",
            x.shape()
        )));
    }
    let mut smats = Vec::with_capacity(nb);
    for a in 0..nb {
        let alpha = unchecked_multi_index(&levels, a);
        let xa_pinv = pinv(&block(&x, a, a, n0), PINV_CUTOFF);
        let per_alpha: Vec<Vec<CMatrix>> = (0..levels.len())
            .map(|p| {
                (0..levels[p])
                    .map(|j| {
                        if j <= alpha[p] {
                            return zeros(n0, n0);
                        }
                        let mut beta = alpha.clone();
                        beta[p] = j;
                        let b = unchecked_linear_index(&levels, &beta);
                        block(&x, a, b, n0) * &xa_pinv
                    })
                    .collect()
            })
            .collect();
        smats.push(per_alpha);
    }
    StructuredFactor::from_parts(profile, x, smats, FactorSource::Canonical, tol)
}

/// Canonical structured factor of `rho`: Cholesky factor plus least-squares `S` recovery.
pub fn canonical_factor(rho: &DensityMatrix, tol: f64) -> Result<StructuredFactor> {
    let x = block_cholesky(rho, tol)?;
    extract_structured_factor(x, rho.profile().clone(), tol)
}

/// The `2 ⊗ d` view `X = (X₁ SX₁; 0 X₂)` together with the Gram blocks `ρ = (A B; B† D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoByDBlocks {
    pub x1: CMatrix,
    pub x2: CMatrix,
    pub s: CMatrix,
    pub a: CMatrix,
    pub b: CMatrix,
    pub d: CMatrix,
    pub representable: bool,
    pub residual: f64,
}

impl TwoByDBlocks {
    pub fn from_factor(f: &StructuredFactor) -> Result<Self> {
        let dims = f.profile().dims();
        if dims.len() != 2 || dims[0] != 2 {
            return Err(Error::Domain(format!(
                "expected a 2⊗d profile, got {}",
                f.profile()
            )));
        }
        let n = dims[1];
        let gram = f.gram();
        Ok(Self {
            x1: f.x_alpha(0),
            x2: f.x_alpha(1),
            s: f.s(0, 0, 1).clone(),
            a: block(&gram, 0, 0, n),
            b: block(&gram, 0, 1, n),
            d: block(&gram, 1, 1, n),
            representable: f.is_representable(),
            residual: f.max_residual(),
        })
    }

    pub fn dim(&self) -> usize {
        self.x1.nrows()
    }

    /// `W = (X₁  S X₁)`, the first block row of `X`.
    pub fn first_row(&self) -> CMatrix {
        let n = self.dim();
        let mut w = zeros(n, 2 * n);
        w.view_mut((0, 0), (n, n)).copy_from(&self.x1);
        w.view_mut((0, n), (n, n)).copy_from(&(&self.s * &self.x1));
        w
    }
}

/// `2 ⊗ d` blocks of the canonical factor, with `A`, `B`, `D` read from `rho` itself.
pub fn two_by_d_blocks(rho: &DensityMatrix, tol: f64) -> Result<TwoByDBlocks> {
    let dims = rho.dims();
    if dims.len() != 2 || dims[0] != 2 {
        return Err(Error::Domain(format!(
            "expected a 2⊗d profile, got {}",
            rho.profile()
        )));
    }
    let f = canonical_factor(rho, tol)?;
    let mut blocks = TwoByDBlocks::from_factor(&f)?;
    let n = dims[1];
    blocks.a = block(rho.matrix(), 0, 0, n);
    blocks.b = block(rho.matrix(), 0, 1, n);
    blocks.d = block(rho.matrix(), 1, 1, n);
    Ok(blocks)
}

/// `‖X†X − ρ‖_F / ‖ρ‖_F` (zero when both vanish).
pub fn reconstruction_residual(x: &CMatrix, rho: &CMatrix) -> f64 {
    let r = frobenius(&(x.adjoint() * x - rho));
    let n = frobenius(rho);
    if n == 0.0 {
        r
    } else {
        r / n
    }
}
