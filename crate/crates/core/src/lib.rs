//! Strong positive-partial-transpose (SPPT) analysis of multipartite density matrices.
//!
//! The crate factors a state as `ρ = X†X` with the nested upper block-triangular
//! structure `X[α, β] = S¹_{α,j_1} ⋯ S^d_{α,j_d} X_α`, evaluates the SPPT and
//! super-SPPT (SSPPT) conditions on that structure, builds explicit separable
//! decompositions of SSPPT states, and implements the `2 ⊗ d` separability
//! criteria together with product-vector and edge-state searches.

pub mod criteria;
pub mod decomposition;
pub mod density;
pub mod error;
pub mod factor;
pub mod linalg;
pub mod poly;
pub mod product;
pub mod profile;
pub mod random;
pub mod simdiag;
pub mod sppt;
pub mod states;

pub use density::{is_ppt, partial_transpose, DensityMatrix, PptReport};
pub use error::{Error, Result};
pub use factor::{
    block_cholesky, canonical_factor, extract_structured_factor, two_by_d_blocks, FactorSource,
    StructuredFactor, TwoByDBlocks,
};
pub use linalg::{CMatrix, CVector, C64, DEFAULT_TOL};
pub use profile::{linear_index, multi_index, DimensionProfile};
pub use sppt::{Definition, Outcome, SpptVerdict};
