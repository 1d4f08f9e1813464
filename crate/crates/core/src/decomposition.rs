//! Explicit separable decompositions of SSPPT states.
//!
//! For each row block `α` the family `{S^p_{α,j}}` is diagonalised by one
//! unitary `U_α`. In `X̃ = diag(U_α†) X` every row then reads
//! `(y¹ ⊗ ⋯ ⊗ y^d) ⊗ a` with `y^p_j = λ^p_{α,k,j}`, and since `ρ = X̃†X̃`
//! the conjugated rows give the product terms.

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::factor::StructuredFactor;
use crate::linalg::{
    fix_phase, frobenius, identity, kron_all, real, zeros, CMatrix, CVector, ONE, ZERO,
};
use crate::profile::DimensionProfile;
use crate::simdiag::{simultaneous_diagonalize, SpectralBundle};
use crate::sppt::{ssppt_22n, ssppt_multipartite, SpptVerdict};

/// Rows of `X̃` with norm at most this fraction of `‖X‖_F` carry no weight and are dropped.
pub const ROW_DROP: f64 = 1e-12;

/// Seed of the random combinations used by the joint diagonalisations.
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct ProductTerm {
    pub weight: f64,
    /// Normalised ket factors, one per subsystem, first nonzero entry real and positive.
    pub factors: Vec<CVector>,
}

impl ProductTerm {
    pub fn ket(&self) -> CVector {
        kron_all(&self.factors)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparableDecomposition {
    pub profile: DimensionProfile,
    pub terms: Vec<ProductTerm>,
}

impl SeparableDecomposition {
    /// `Σ λ_i |x_i⟩⟨x_i|`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.profile.total();
        let mut m = zeros(n, n);
        for t in &self.terms {
            let v = t.ket();
            m += (&v * v.adjoint()) * real(t.weight);
        }
        m
    }

    pub fn weight_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionCheck {
    /// `‖Σ λ_i |x_i⟩⟨x_i| − ρ‖_F`.
    pub reconstruction_residual: f64,
    /// Largest `|‖f‖ − 1|` over all factors, plus any factor-length mismatch reported as 1.
    pub factor_residual: f64,
    pub weight_sum: f64,
    pub trace: f64,
    pub min_weight: f64,
    pub passes: bool,
}

/// Checks a decomposition against `rho`.
pub fn verify_decomposition(
    dec: &SeparableDecomposition,
    rho: &DensityMatrix,
    tol: f64,
) -> DecompositionCheck {
    let trace = rho.trace();
    if dec.profile.dims() != rho.dims() {
        return DecompositionCheck {
            reconstruction_residual: f64::INFINITY,
            factor_residual: 1.0,
            weight_sum: dec.weight_sum(),
            trace,
            min_weight: dec
                .terms
                .iter()
                .map(|t| t.weight)
                .fold(f64::INFINITY, f64::min),
            passes: false,
        };
    }
    let mut factor_residual = 0.0f64;
    for t in &dec.terms {
        if t.factors.len() != dec.profile.num_subsystems() {
            factor_residual = factor_residual.max(1.0);
            continue;
        }
        for (f, &d) in t.factors.iter().zip(dec.profile.dims()) {
            let r = if f.len() == d {
                (f.norm() - 1.0).abs()
            } else {
                1.0
            };
            factor_residual = factor_residual.max(r);
        }
    }
    let reconstruction_residual = if factor_residual >= 1.0 {
        f64::INFINITY
    } else {
        frobenius(&(dec.reconstruct() - rho.matrix()))
    };
    let weight_sum = dec.weight_sum();
    let min_weight = dec
        .terms
        .iter()
        .map(|t| t.weight)
        .fold(f64::INFINITY, f64::min);
    let passes = reconstruction_residual <= tol
        && factor_residual <= tol
        && (weight_sum - trace).abs() <= tol
        && (dec.terms.is_empty() || min_weight >= 0.0);
    DecompositionCheck {
        reconstruction_residual,
        factor_residual,
        weight_sum,
        trace,
        min_weight,
        passes,
    }
}

fn refuse(v: &SpptVerdict) -> Error {
    Error::NotSsppt {
        witness: v
            .witness
            .clone()
            .unwrap_or_else(|| "factor structure".into()),
        residual: v.max_residual.unwrap_or(v.factor_residual),
    }
}

/// Per-block spectral data: `bundles[α]` diagonalises `{S^p_{α,j} : j > i_p}` (absent when that set is empty).
pub fn spectral_bundles(
    f: &StructuredFactor,
    tol: f64,
    seed: u64,
) -> Result<Vec<Option<SpectralBundle>>> {
    let levels = f.levels().to_vec();
    (0..f.num_blocks())
        .map(|a| {
            let alpha = f.alpha(a);
            let mats: Vec<CMatrix> = (0..levels.len())
                .flat_map(|p| (alpha[p] + 1..levels[p]).map(move |j| (p, j)))
                .map(|(p, j)| f.s(a, p, j).clone())
                .collect();
            if mats.is_empty() {
                Ok(None)
            } else {
                simultaneous_diagonalize(&mats, tol, seed.wrapping_add(a as u64)).map(Some)
            }
        })
        .collect()
}

pub fn separable_decomposition_ssppt(
    f: &StructuredFactor,
    tol: f64,
) -> Result<SeparableDecomposition> {
    separable_decomposition_seeded(f, tol, DEFAULT_SEED)
}

pub fn separable_decomposition_seeded(
    f: &StructuredFactor,
    tol: f64,
    seed: u64,
) -> Result<SeparableDecomposition> {
    let verdict = ssppt_multipartite(f, tol)?;
    if !verdict.holds {
        return Err(refuse(&verdict));
    }
    let bundles = spectral_bundles(f, tol, seed)?;
    let levels = f.levels().to_vec();
    let n0 = f.carrier();
    let x_norm = frobenius(f.x());
    let mut rows = Vec::new();
    for (a, bundle) in bundles.iter().enumerate() {
        let alpha = f.alpha(a);
        let u = bundle
            .as_ref()
            .map_or_else(|| identity(n0), |b| b.unitary.clone());
        // Row block α of X̃ = U_α† X.
        let start = a * n0;
        let block_row = u.adjoint() * f.x().rows(start, n0);
        let carrier = u.adjoint() * f.x_alpha(a);
        for k in 0..n0 {
            let mut factors = Vec::with_capacity(levels.len() + 1);
            for (p, &np) in levels.iter().enumerate() {
                factors.push(CVector::from_fn(np, |j, _| match j.cmp(&alpha[p]) {
                    std::cmp::Ordering::Less => ZERO,
                    std::cmp::Ordering::Equal => ONE,
                    std::cmp::Ordering::Greater => {
                        let b = bundle.as_ref().expect("free S matrices were diagonalised");
                        b.diagonals[family_index(&alpha, &levels, p, j)][k]
                    }
                }));
            }
            factors.push(carrier.row(k).transpose());
            rows.push(Row {
                factors,
                actual: block_row.row(k).transpose(),
            });
        }
    }
    assemble_terms(f.profile(), rows, x_norm, tol)
}

/// Position of `S^p_{α,j}` in the family handed to the joint diagonalisation.
fn family_index(alpha: &[usize], levels: &[usize], p: usize, j: usize) -> usize {
    let before: usize = (0..p).map(|q| levels[q] - alpha[q] - 1).sum();
    before + (j - alpha[p] - 1)
}

/// A row of `X̃` together with its predicted product factors (bra side).
struct Row {
    factors: Vec<CVector>,
    actual: CVector,
}

fn assemble_terms(
    profile: &DimensionProfile,
    rows: Vec<Row>,
    x_norm: f64,
    tol: f64,
) -> Result<SeparableDecomposition> {
    let scale = x_norm.max(f64::MIN_POSITIVE);
    let mut terms = Vec::new();
    for row in rows {
        let predicted = kron_all(&row.factors);
        let r = (&predicted - &row.actual).norm() / scale;
        if r > tol {
            return Err(Error::Consistency(format!(
                "row of the rotated factor is not the predicted product (residual {r:.3e})"
            )));
        }
        let norm = row.actual.norm();
        if norm <= ROW_DROP * scale {
            continue;
        }
        let mut factors = Vec::with_capacity(row.factors.len());
        let mut weight = 1.0;
        for f in row.factors {
            let n = f.norm();
            weight *= n * n;
            let mut ket = f.map(|z| z.conj()) / real(n);
            fix_phase(&mut ket, 1e-12);
            factors.push(ket);
        }
        terms.push(ProductTerm { weight, factors });
    }
    Ok(SeparableDecomposition {
        profile: profile.clone(),
        terms,
    })
}

/// The `2 ⊗ 2 ⊗ N` construction: `S₁, T₁` share one eigenbasis `U`, while `S₂` and `T₂`
/// are diagonalised separately (by `V₁`, `V₂`); `ρ = Σ C_i†C_i` with product blocks `C_i`.
pub fn separable_decomposition_22n(
    f: &StructuredFactor,
    tol: f64,
) -> Result<SeparableDecomposition> {
    let verdict = ssppt_22n(f, tol)?;
    if !verdict.holds {
        return Err(refuse(&verdict));
    }
    let n = f.carrier();
    let s1 = f.s(0, 0, 1).clone();
    let t1 = f.s(0, 1, 1).clone();
    let s2 = f.s(1, 0, 1).clone();
    let t2 = f.s(2, 1, 1).clone();
    let u = simultaneous_diagonalize(&[s1, t1], tol, DEFAULT_SEED)?;
    let v1 = simultaneous_diagonalize(&[s2], tol, DEFAULT_SEED)?;
    let v2 = simultaneous_diagonalize(&[t2], tol, DEFAULT_SEED)?;
    let pair = |a: crate::linalg::C64, b: crate::linalg::C64| CVector::from_vec(vec![a, b]);
    let mut rows = Vec::new();
    let specs: [(usize, Option<&SpectralBundle>); 4] =
        [(0, Some(&u)), (1, Some(&v1)), (2, Some(&v2)), (3, None)];
    for (a, bundle) in specs {
        let g = bundle.map_or_else(|| identity(n), |b| b.unitary.clone());
        let tilde = g.adjoint() * f.x_alpha(a);
        let block_row = g.adjoint() * f.x().rows(a * n, n);
        for k in 0..n {
            let (first, second) = match a {
                0 => {
                    let b = bundle.unwrap();
                    (pair(ONE, b.diagonals[0][k]), pair(ONE, b.diagonals[1][k]))
                }
                1 => (pair(ONE, bundle.unwrap().diagonals[0][k]), pair(ZERO, ONE)),
                2 => (pair(ZERO, ONE), pair(ONE, bundle.unwrap().diagonals[0][k])),
                _ => (pair(ZERO, ONE), pair(ZERO, ONE)),
            };
            rows.push(Row {
                factors: vec![first, second, tilde.row(k).transpose()],
                actual: block_row.row(k).transpose(),
            });
        }
    }
    assemble_terms(f.profile(), rows, frobenius(f.x()), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{
        ha_state, random_canonical_22n, random_ssppt, random_ssppt_with, SspptOptions,
    };

    fn check(f: &StructuredFactor, rho: &DensityMatrix, dec: &SeparableDecomposition) {
        let c = verify_decomposition(dec, rho, 1e-8);
        assert!(c.passes, "{c:?}");
        assert!(dec.terms.len() <= f.num_blocks() * f.carrier());
    }

    #[test]
    fn random_ssppt_states_decompose() {
        for (dims, seed) in [
            (vec![2, 2], 1),
            (vec![3, 2], 2),
            (vec![2, 2, 2], 3),
            (vec![2, 3, 2], 4),
            (vec![2, 2, 2, 2], 5),
        ] {
            let g = random_ssppt(&dims, seed).unwrap();
            let f = g.factor.unwrap();
            let dec = separable_decomposition_ssppt(&f, 1e-8).unwrap();
            check(&f, &g.rho, &dec);
        }
    }

    #[test]
    fn rank_deficient_state_drops_zero_rows() {
        let opts = SspptOptions {
            active: Some(vec![false, true, true, false]),
            ..Default::default()
        };
        let g = random_ssppt_with(&[2, 2, 2], 8, &opts).unwrap();
        let f = g.factor.unwrap();
        let dec = separable_decomposition_ssppt(&f, 1e-8).unwrap();
        assert_eq!(dec.terms.len(), 4);
        check(&f, &g.rho, &dec);
    }

    #[test]
    fn two_by_two_by_n_construction() {
        let g = random_canonical_22n(3, 6).unwrap();
        let f = g.factor.unwrap();
        let dec = separable_decomposition_22n(&f, 1e-8).unwrap();
        check(&f, &g.rho, &dec);
    }

    #[test]
    fn non_ssppt_factor_is_refused() {
        let g = ha_state(0.5).unwrap();
        let err = separable_decomposition_ssppt(g.factor.as_ref().unwrap(), 1e-8).unwrap_err();
        assert!(matches!(err, Error::NotSsppt { .. }));
    }

    #[test]
    fn tampered_decomposition_fails_verification() {
        let g = random_ssppt(&[2, 2], 1).unwrap();
        let mut dec = separable_decomposition_ssppt(g.factor.as_ref().unwrap(), 1e-8).unwrap();
        dec.terms[0].weight *= 1.01;
        assert!(!verify_decomposition(&dec, &g.rho, 1e-8).passes);
    }
}
