//! Density matrices, partial transposes and the PPT test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, ZERO};
use crate::profile::{unchecked_linear_index, unchecked_multi_index, DimensionProfile};

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
    profile: DimensionProfile,
}

/// Residuals describing how far a matrix is from a valid density matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Validity {
    pub hermiticity_residual: f64,
    pub min_eigenvalue: f64,
    pub trace_re: f64,
    pub trace_im: f64,
    pub scale: f64,
}

impl Validity {
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual <= tol * self.scale.max(f64::MIN_POSITIVE)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue >= -tol * self.scale
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.trace_re - 1.0).abs() <= tol && self.trace_im.abs() <= tol
    }
}

impl DensityMatrix {
    /// Wraps `matrix` after checking it is square and matches the profile; no PSD check.
    pub fn new(matrix: CMatrix, profile: DimensionProfile) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Shape(format!(
                "density matrix must be square, got {:?}",
                matrix.shape()
            )));
        }
        if matrix.nrows() != profile.total() {
            return Err(Error::Shape(format!(
                "matrix side {} does not match profile {} (product {})",
                matrix.nrows(),
                profile,
                profile.total()
            )));
        }
        Ok(Self { matrix, profile })
    }

    pub fn from_dims(matrix: CMatrix, dims: &[usize]) -> Result<Self> {
        Self::new(matrix, DimensionProfile::new(dims.to_vec())?)
    }

    /// As [`new`](Self::new), additionally requiring Hermiticity and PSD within `tol` relative to the max-norm.
    pub fn checked(matrix: CMatrix, profile: DimensionProfile, tol: f64) -> Result<Self> {
        let rho = Self::new(matrix, profile)?;
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
        Ok(rho)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn profile(&self) -> &DimensionProfile {
        &self.profile
    }

    pub fn dims(&self) -> &[usize] {
        self.profile.dims()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn validity(&self) -> Validity {
        let tr = self.matrix.trace();
        Validity {
            hermiticity_residual: linalg::hermiticity_residual(&self.matrix),
            min_eigenvalue: linalg::min_eigenvalue(&self.matrix),
            trace_re: tr.re,
            trace_im: tr.im,
            scale: linalg::max_abs(&self.matrix),
        }
    }

    /// Copy rescaled to unit trace (unchanged when the trace vanishes).
    pub fn normalized(&self) -> Self {
        let t = self.trace();
        if t == 0.0 {
            return self.clone();
        }
        Self {
            matrix: &self.matrix / linalg::real(t),
            profile: self.profile.clone(),
        }
    }

    pub fn partial_transpose(&self, subsystems: &[usize]) -> Result<Self> {
        Ok(Self {
            matrix: partial_transpose(&self.matrix, self.dims(), subsystems)?,
            profile: self.profile.clone(),
        })
    }

    /// `Γ_k`: transpose of the first `k` subsystems.
    pub fn gamma(&self, k: usize) -> Result<Self> {
        let subsystems: Vec<usize> = (0..k).collect();
        self.partial_transpose(&subsystems)
    }

    pub fn rank(&self, tol: f64) -> usize {
        linalg::numeric_rank(&self.matrix, tol)
    }

    /// Reduced state on the subsystems listed in `keep` (in increasing order).
    pub fn partial_trace_keep(&self, keep: &[usize]) -> Result<Self> {
        let dims = self.dims();
        if keep.iter().any(|&k| k >= dims.len()) || keep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(format!("invalid subsystem list {keep:?}")));
        }
        let kept_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
        let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
        let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
        let m: usize = kept_dims.iter().product();
        let t: usize = traced_dims.iter().product();
        let mut out = CMatrix::zeros(m, m);
        let mut full_a = vec![0; dims.len()];
        let mut full_b = vec![0; dims.len()];
        for a in 0..m {
            let ka = unchecked_multi_index(&kept_dims, a);
            for b in 0..m {
                let kb = unchecked_multi_index(&kept_dims, b);
                let mut acc = ZERO;
                for s in 0..t {
                    let ts = unchecked_multi_index(&traced_dims, s);
                    for (pos, &k) in keep.iter().enumerate() {
                        full_a[k] = ka[pos];
                        full_b[k] = kb[pos];
                    }
                    for (pos, &k) in traced.iter().enumerate() {
                        full_a[k] = ts[pos];
                        full_b[k] = ts[pos];
                    }
                    acc += self.matrix[(
                        unchecked_linear_index(dims, &full_a),
                        unchecked_linear_index(dims, &full_b),
                    )];
                }
                out[(a, b)] = acc;
            }
        }
        Self::from_dims(out, &kept_dims)
    }
}

/// Transposes the tensor factors listed in `subsystems` (zero-based).
///
/// Entry `(α, β)` of the result is entry `(α', β')` of `m`, where `α'` and `β'`
/// exchange the components of `α` and `β` that belong to `subsystems`.
pub fn partial_transpose(m: &CMatrix, dims: &[usize], subsystems: &[usize]) -> Result<CMatrix> {
    let n: usize = dims.iter().product();
    if m.shape() != (n, n) {
        return Err(Error::Shape(format!(
            "matrix {:?} does not match dims {dims:?}",
            m.shape()
        )));
    }
    let mut mask = vec![false; dims.len()];
    for &k in subsystems {
        if k >= dims.len() {
            return Err(Error::Domain(format!(
                "subsystem {k} out of range for {} subsystems",
                dims.len()
            )));
        }
        mask[k] = true;
    }
    let indices: Vec<Vec<usize>> = (0..n).map(|i| unchecked_multi_index(dims, i)).collect();
    let mut out = CMatrix::zeros(n, n);
    let mut a2 = vec![0; dims.len()];
    let mut b2 = vec![0; dims.len()];
    for a in 0..n {
        for b in 0..n {
            for k in 0..dims.len() {
                if mask[k] {
                    a2[k] = indices[b][k];
                    b2[k] = indices[a][k];
                } else {
                    a2[k] = indices[a][k];
                    b2[k] = indices[b][k];
                }
            }
            out[(a, b)] = m[(
                unchecked_linear_index(dims, &a2),
                unchecked_linear_index(dims, &b2),
            )];
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetEigenvalue {
    pub subsystems: Vec<usize>,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PptReport {
    pub is_ppt: bool,
    pub min_eigenvalue: f64,
    pub worst_subset: Vec<usize>,
    pub subsets: Vec<SubsetEigenvalue>,
    pub tolerance: f64,
}

/// Positivity under every partial transpose.
///
/// A subset and its complement give globally transposed (isospectral) matrices,
/// so only the `2^{d-1} − 1` nonempty subsets omitting the last subsystem are checked.
/// `tol` is relative to the max-norm of `rho`.
pub fn is_ppt(rho: &DensityMatrix, tol: f64) -> Result<PptReport> {
    let v = rho.validity();
    if !v.is_hermitian(tol) {
        return Err(Error::NotHermitian {
            residual: v.hermiticity_residual,
        });
    }
    let d = rho.profile().num_subsystems();
    let threshold = -tol * v.scale;
    let mut subsets = Vec::new();
    for mask in 1usize..(1 << (d - 1)) {
        let subset: Vec<usize> = (0..d - 1).filter(|k| mask & (1 << k) != 0).collect();
        let pt = partial_transpose(rho.matrix(), rho.dims(), &subset)?;
        subsets.push(SubsetEigenvalue {
            subsystems: subset,
            min_eigenvalue: linalg::min_eigenvalue(&pt),
        });
    }
    let (min_eigenvalue, worst_subset) = subsets
        .iter()
        .min_by(|a, b| a.min_eigenvalue.total_cmp(&b.min_eigenvalue))
        .map(|s| (s.min_eigenvalue, s.subsystems.clone()))
        .unwrap_or((v.min_eigenvalue, Vec::new()));
    Ok(PptReport {
        is_ppt: subsets.iter().all(|s| s.min_eigenvalue >= threshold),
        min_eigenvalue,
        worst_subset,
        subsets,
        tolerance: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, frobenius, real, ONE};

    fn bell() -> DensityMatrix {
        let mut m = CMatrix::zeros(4, 4);
        for &(i, j) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            m[(i, j)] = real(0.5);
        }
        DensityMatrix::from_dims(m, &[2, 2]).unwrap()
    }

    #[test]
    fn empty_subset_is_identity_and_full_subset_is_transpose() {
        let m = CMatrix::from_fn(12, 12, |i, j| c((i * 12 + j) as f64, i as f64 - j as f64));
        let dims = [2, 3, 2];
        assert_eq!(partial_transpose(&m, &dims, &[]).unwrap(), m);
        assert_eq!(
            partial_transpose(&m, &dims, &[0, 1, 2]).unwrap(),
            m.transpose()
        );
    }

    #[test]
    fn bell_state_is_not_ppt() {
        let r = is_ppt(&bell(), 1e-9).unwrap();
        assert!(!r.is_ppt);
        assert!((r.min_eigenvalue + 0.5).abs() < 1e-12);
        assert_eq!(r.worst_subset, vec![0]);
    }

    #[test]
    fn product_state_is_ppt() {
        let a = CMatrix::from_row_slice(2, 2, &[real(0.7), c(0.1, 0.2), c(0.1, -0.2), real(0.3)]);
        let b = CMatrix::from_row_slice(2, 2, &[real(0.4), c(0.0, 0.1), c(0.0, -0.1), real(0.6)]);
        let rho = DensityMatrix::from_dims(a.kronecker(&b), &[2, 2]).unwrap();
        assert!(is_ppt(&rho, 1e-9).unwrap().is_ppt);
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let mut m = CMatrix::identity(4, 4);
        m[(0, 1)] = ONE;
        let rho = DensityMatrix::from_dims(m, &[2, 2]).unwrap();
        assert!(matches!(
            is_ppt(&rho, 1e-9),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn partial_trace_of_product() {
        let a = CMatrix::from_row_slice(2, 2, &[real(0.7), c(0.1, 0.2), c(0.1, -0.2), real(0.3)]);
        let b = CMatrix::from_row_slice(
            3,
            3,
            &[
                real(0.5),
                ZERO,
                c(0.1, 0.0),
                ZERO,
                real(0.25),
                ZERO,
                c(0.1, 0.0),
                ZERO,
                real(0.25),
            ],
        );
        let rho = DensityMatrix::from_dims(a.kronecker(&b), &[2, 3]).unwrap();
        assert!(frobenius(&(rho.partial_trace_keep(&[0]).unwrap().into_matrix() - &a)) < 1e-15);
        assert!(frobenius(&(rho.partial_trace_keep(&[1]).unwrap().into_matrix() - &b)) < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(DensityMatrix::from_dims(CMatrix::identity(5, 5), &[2, 2]).is_err());
    }
}
