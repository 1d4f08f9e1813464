//! Dense complex matrix helpers shared by every other module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Default relative tolerance for Hermiticity, PSD and rank decisions.
pub const DEFAULT_TOL: f64 = 1e-9;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMatrix {
    CMatrix::zeros(r, c)
}

pub fn diag(entries: &[C64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_column_slice(entries))
}

/// `AB - BA`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() || a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "commutator needs equal square matrices, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a * b - b * a)
}

/// Commutator without shape checks, for internal callers that already know the shapes agree.
pub(crate) fn comm(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    let mut out = CVector::zeros(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i * b.len() + j] = x * y;
        }
    }
    out
}

pub fn kron_all(vs: &[CVector]) -> CVector {
    let mut out = CVector::from_element(1, ONE);
    for v in vs {
        out = kron_vec(&out, v);
    }
    out
}

/// `‖M − M†‖_F`.
pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    frobenius(&(m - m.adjoint()))
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * real(0.5)
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn eigenvalues_hermitian(m: &CMatrix) -> Vec<f64> {
    hermitian_eigen(m).0
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    eigenvalues_hermitian(m).first().copied().unwrap_or(0.0)
}

/// Singular values sorted descending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Number of singular values above `tol · σ_max`.
pub fn numeric_rank(m: &CMatrix, tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&x| x > tol * top).count(),
        _ => 0,
    }
}

/// Full SVD `M = U Σ V†` with square `U`, `V` and singular values sorted descending.
pub struct FullSvd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

pub fn full_svd(m: &CMatrix) -> FullSvd {
    let (r, c) = m.shape();
    let n = r.max(c).max(1);
    let mut padded = zeros(n, n);
    padded.view_mut((0, 0), (r, c)).copy_from(m);
    let svd = padded.svd(true, true);
    let u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v_t requested").adjoint();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut uu = zeros(n, n);
    let mut vv = zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, &i) in order.iter().enumerate() {
        uu.set_column(k, &u.column(i));
        vv.set_column(k, &v.column(i));
        s.push(svd.singular_values[i]);
    }
    FullSvd {
        u: uu.rows(0, r).into_owned(),
        s: s.into_iter().take(r.min(c)).collect(),
        v: vv.rows(0, c).into_owned(),
    }
}

/// Orthonormal basis (as columns) of the right null space of `m`:
/// directions whose singular value is at most `tol · σ_max`.
pub fn null_space(m: &CMatrix, tol: f64) -> CMatrix {
    let c = m.ncols();
    if m.nrows() == 0 {
        return identity(c);
    }
    let svd = full_svd(m);
    let top = svd.s.first().copied().unwrap_or(0.0);
    let rank = if top > 0.0 {
        svd.s.iter().filter(|&&x| x > tol * top).count()
    } else {
        0
    };
    svd.v.columns(rank, c - rank).into_owned()
}

/// Orthonormal basis (as columns) of the column space of `m`.
pub fn column_space(m: &CMatrix, tol: f64) -> CMatrix {
    if m.ncols() == 0 {
        return zeros(m.nrows(), 0);
    }
    let svd = full_svd(m);
    let top = svd.s.first().copied().unwrap_or(0.0);
    let rank = if top > 0.0 {
        svd.s.iter().filter(|&&x| x > tol * top).count()
    } else {
        0
    };
    svd.u.columns(0, rank).into_owned()
}

/// Orthonormal eigenbasis of the range of a Hermitian PSD matrix (eigenvalues above `tol · λ_max`).
pub fn psd_range(m: &CMatrix, tol: f64) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let top = vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let keep: Vec<usize> = (0..vals.len())
        .filter(|&i| top > 0.0 && vals[i] > tol * top)
        .collect();
    let mut out = zeros(m.nrows(), keep.len());
    for (k, &i) in keep.iter().enumerate() {
        out.set_column(k, &vecs.column(i));
    }
    out
}

/// Moore–Penrose pseudo-inverse with singular values below `cutoff · σ_max` discarded.
pub fn pinv(m: &CMatrix, cutoff: f64) -> CMatrix {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return zeros(c, r);
    }
    let svd = full_svd(m);
    let top = svd.s.first().copied().unwrap_or(0.0);
    let mut out = zeros(c, r);
    for (k, &s) in svd.s.iter().enumerate() {
        if top > 0.0 && s > cutoff * top {
            let vk = svd.v.column(k);
            let uk = svd.u.column(k);
            out += (vk * uk.adjoint()) * real(1.0 / s);
        }
    }
    out
}

/// Distance of unit-normalised `v` from the subspace spanned by the orthonormal columns of `basis`.
pub fn subspace_residual(basis: &CMatrix, v: &CVector) -> f64 {
    let n = v.norm();
    if n == 0.0 {
        return 0.0;
    }
    let u = v / real(n);
    if basis.ncols() == 0 {
        return 1.0;
    }
    let proj = basis * (basis.adjoint() * &u);
    (u - proj).norm()
}

/// Scale so that the first entry with modulus above `tol` is real and positive.
pub fn fix_phase(v: &mut CVector, tol: f64) {
    if let Some(z) = v.iter().find(|z| z.norm() > tol).copied() {
        let phase = z.conj() / real(z.norm());
        *v *= phase;
    }
}

/// Block `(r, c)` of size `size × size` in a matrix partitioned into equal square blocks.
pub fn block(m: &CMatrix, r: usize, c: usize, size: usize) -> CMatrix {
    m.view((r * size, c * size), (size, size)).into_owned()
}

pub fn set_block(m: &mut CMatrix, r: usize, c: usize, b: &CMatrix) {
    let (h, w) = b.shape();
    m.view_mut((r * h, c * w), (h, w)).copy_from(b);
}

/// Block-diagonal matrix from square blocks.
pub fn block_diag(blocks: &[CMatrix]) -> CMatrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), b.shape()).copy_from(b);
        off += b.nrows();
    }
    out
}

/// Principal square root of a Hermitian PSD matrix (negative eigenvalues clipped).
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let d: Vec<C64> = vals.iter().map(|&v| real(v.max(0.0).sqrt())).collect();
    &vecs * diag(&d) * vecs.adjoint()
}

/// Determinant via nalgebra's LU.
pub fn det(m: &CMatrix) -> C64 {
    if m.nrows() == 0 {
        return ONE;
    }
    m.clone().determinant()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    fn pauli_y() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO])
    }

    fn pauli_z() -> CMatrix {
        diag(&[ONE, real(-1.0)])
    }

    #[test]
    fn commutator_of_matrix_with_itself_vanishes() {
        let a = CMatrix::from_fn(3, 3, |i, j| c(i as f64 + 0.5, j as f64 - 1.0));
        assert_eq!(frobenius(&commutator(&a, &a).unwrap()), 0.0);
    }

    #[test]
    fn diagonal_matrices_commute() {
        let a = diag(&[real(1.0), real(2.0)]);
        let b = diag(&[real(3.0), real(4.0)]);
        assert_eq!(frobenius(&commutator(&a, &b).unwrap()), 0.0);
    }

    #[test]
    fn pauli_commutator_is_two_i_sigma_y() {
        // [σx, σz] = σxσz − σzσx = −2iσy, computed entrywise from the 2×2 products.
        let cm = commutator(&pauli_x(), &pauli_z()).unwrap();
        let expected = pauli_y() * c(0.0, -2.0);
        assert!(frobenius(&(&cm - expected)) < 1e-15);
        assert!((frobenius(&cm) - 2.0 * frobenius(&pauli_y())).abs() < 1e-15);
    }

    #[test]
    fn commutator_rejects_shape_mismatch() {
        assert!(commutator(&identity(2), &identity(3)).is_err());
    }

    #[test]
    fn ranks_of_trivial_matrices() {
        assert_eq!(numeric_rank(&zeros(4, 4), DEFAULT_TOL), 0);
        for n in 1..6 {
            assert_eq!(numeric_rank(&identity(n), DEFAULT_TOL), n);
        }
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = CMatrix::from_row_slice(1, 3, &[ONE, ONE, ZERO]);
        let ns = null_space(&m, 1e-12);
        assert_eq!(ns.ncols(), 2);
        assert!(frobenius(&(&m * &ns)) < 1e-14);
    }

    #[test]
    fn pinv_of_singular_diagonal() {
        let m = diag(&[real(2.0), ZERO]);
        let p = pinv(&m, 1e-10);
        assert!(frobenius(&(p - diag(&[real(0.5), ZERO]))) < 1e-15);
    }
}
