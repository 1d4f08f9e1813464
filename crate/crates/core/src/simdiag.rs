//! Joint unitary diagonalisation of commuting normal matrices.

use crate::error::{Error, Result};
use crate::linalg::{
    c, comm, frobenius, hermitian_eigen, identity, spectral_norm, zeros, CMatrix, C64,
};
use crate::random::{self, Rng};

/// Relative eigenvalue gap separating clusters of the random Hermitian combination.
pub const CLUSTER_GAP: f64 = 1e-8;

const MAX_DEPTH: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBundle {
    /// Common eigenbasis as columns: `M_i = U diag(λ_i) U†`.
    pub unitary: CMatrix,
    /// `diagonals[i][k]` is the eigenvalue of input `i` on column `k` of `unitary`.
    pub diagonals: Vec<Vec<C64>>,
    /// Largest off-diagonal Frobenius norm of `U† M_i U`, relative to `max(1, ‖M_i‖)`.
    pub off_diagonal_residual: f64,
}

impl SpectralBundle {
    pub fn diagonal(&self, i: usize) -> CMatrix {
        crate::linalg::diag(&self.diagonals[i])
    }
}

/// Largest normalised `‖[M_i, M_j]‖`, `‖[M_i, M_j†]‖` over all pairs (including `i = j`).
pub fn commutation_residual(mats: &[CMatrix]) -> (f64, Option<(usize, usize)>) {
    let mut worst = 0.0;
    let mut pair = None;
    for i in 0..mats.len() {
        for j in i..mats.len() {
            let scale = 1f64.max(spectral_norm(&mats[i]) * spectral_norm(&mats[j]));
            let r = frobenius(&comm(&mats[i], &mats[j]))
                .max(frobenius(&comm(&mats[i], &mats[j].adjoint())))
                / scale;
            if r > worst {
                worst = r;
                pair = Some((i, j));
            }
        }
    }
    (worst, pair)
}

/// One unitary diagonalising every input.
///
/// A random real combination of the Hermitian and anti-Hermitian parts is
/// diagonalised; eigenvalue clusters that the inputs do not act on as scalars
/// are split again with fresh coefficients.
pub fn simultaneous_diagonalize(mats: &[CMatrix], tol: f64, seed: u64) -> Result<SpectralBundle> {
    let n = match mats.first() {
        Some(m) => m.nrows(),
        None => return Err(Error::Domain("no matrices to diagonalise".into())),
    };
    for (i, m) in mats.iter().enumerate() {
        if m.shape() != (n, n) {
            return Err(Error::Shape(format!(
                "matrix {i} has shape {:?}, expected {n}×{n}",
                m.shape()
            )));
        }
    }
    let (residual, pair) = commutation_residual(mats);
    if residual > tol {
        let (first, second) = pair.expect("positive residual has a pair");
        return Err(Error::NotCommuting {
            first,
            second,
            residual,
        });
    }
    let mut rng = random::rng(seed);
    let unitary = refine(mats, identity(n), &mut rng, 0);
    let mut diagonals = Vec::with_capacity(mats.len());
    let mut off = 0.0f64;
    for m in mats {
        let d = unitary.adjoint() * m * &unitary;
        let entries: Vec<C64> = (0..n).map(|k| d[(k, k)]).collect();
        let mut rest = d.clone();
        for k in 0..n {
            rest[(k, k)] = c(0.0, 0.0);
        }
        off = off.max(frobenius(&rest) / 1f64.max(spectral_norm(m)));
        diagonals.push(entries);
    }
    if off > tol.max(1e-10) {
        return Err(Error::Consistency(format!(
            "joint diagonalisation left off-diagonal residual {off:.3e}"
        )));
    }
    Ok(SpectralBundle {
        unitary,
        diagonals,
        off_diagonal_residual: off,
    })
}

/// Returns an orthonormal basis of span(`basis`) made of joint eigenvectors.
fn refine(mats: &[CMatrix], basis: CMatrix, rng: &mut Rng, depth: usize) -> CMatrix {
    let k = basis.ncols();
    if k <= 1 {
        return basis;
    }
    let restricted: Vec<CMatrix> = mats.iter().map(|m| basis.adjoint() * m * &basis).collect();
    if restricted.iter().all(is_scalar) || depth >= MAX_DEPTH {
        return basis;
    }
    let mut h = zeros(k, k);
    for m in &restricted {
        let herm = (m + m.adjoint()) * c(0.5, 0.0);
        let anti = (m - m.adjoint()) * c(0.0, -0.5);
        h += herm * c(random::normal(rng), 0.0) + anti * c(random::normal(rng), 0.0);
    }
    let (vals, vecs) = hermitian_eigen(&h);
    let spread = (vals[k - 1] - vals[0]).abs().max(1.0);
    let mut out = zeros(basis.nrows(), k);
    let mut start = 0;
    let mut col = 0;
    while start < k {
        let mut end = start + 1;
        while end < k && vals[end] - vals[end - 1] <= CLUSTER_GAP * spread {
            end += 1;
        }
        let sub = &basis * vecs.columns(start, end - start);
        let sub = if end - start > 1 {
            refine(mats, sub, rng, depth + 1)
        } else {
            sub
        };
        out.columns_mut(col, sub.ncols()).copy_from(&sub);
        col += sub.ncols();
        start = end;
    }
    out
}

fn is_scalar(m: &CMatrix) -> bool {
    let k = m.nrows();
    let mean = m.trace() / c(k as f64, 0.0);
    frobenius(&(m - identity(k) * mean)) <= 1e-12 * 1f64.max(frobenius(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, real};
    use crate::random::{complex_normal, random_unitary};

    #[test]
    fn diagonal_input_keeps_standard_basis() {
        let m = diag(&[real(1.0), real(2.0), real(3.0)]);
        let b = simultaneous_diagonalize(std::slice::from_ref(&m), 1e-10, 0).unwrap();
        assert!(b.off_diagonal_residual < 1e-14);
        for k in 0..3 {
            let col = b.unitary.column(k);
            assert!((col.iter().map(|z| z.norm()).fold(0.0, f64::max) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pauli_z_with_degenerate_partner() {
        let z = diag(&[real(1.0), real(-1.0)]);
        let d = diag(&[real(2.0), real(3.0)]);
        let b = simultaneous_diagonalize(&[z, d], 1e-10, 1).unwrap();
        assert!(b.off_diagonal_residual < 1e-14);
    }

    #[test]
    fn recovers_shared_eigenbasis_with_degeneracies() {
        let mut rng = random::rng(9);
        let v = random_unitary(&mut rng, 5);
        // The first input is degenerate; only the second splits the 3-dimensional eigenspace.
        let d1: Vec<C64> = vec![real(1.0), real(1.0), real(1.0), c(0.0, 2.0), c(0.0, 2.0)];
        let d2: Vec<C64> = (0..5).map(|_| complex_normal(&mut rng)).collect();
        let m1 = &v * diag(&d1) * v.adjoint();
        let m2 = &v * diag(&d2) * v.adjoint();
        let b = simultaneous_diagonalize(&[m1, m2], 1e-10, 4).unwrap();
        assert!(b.off_diagonal_residual <= 1e-10);
        let mut got: Vec<(f64, f64)> = b.diagonals[1].iter().map(|z| (z.re, z.im)).collect();
        let mut want: Vec<(f64, f64)> = d2.iter().map(|z| (z.re, z.im)).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, w) in got.iter().zip(&want) {
            assert!((g.0 - w.0).abs() < 1e-10 && (g.1 - w.1).abs() < 1e-10);
        }
        assert!(frobenius(&(b.unitary.adjoint() * &b.unitary - identity(5))) < 1e-12);
    }

    #[test]
    fn rejects_non_commuting_pair() {
        let x = CMatrix::from_row_slice(2, 2, &[real(0.0), real(1.0), real(1.0), real(0.0)]);
        let z = diag(&[real(1.0), real(-1.0)]);
        match simultaneous_diagonalize(&[x, z], 1e-10, 0) {
            Err(Error::NotCommuting {
                first: 0,
                second: 1,
                ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_non_normal_matrix() {
        let mut n = CMatrix::zeros(2, 2);
        n[(0, 1)] = real(1.0);
        assert!(matches!(
            simultaneous_diagonalize(&[n], 1e-10, 0),
            Err(Error::NotCommuting {
                first: 0,
                second: 0,
                ..
            })
        ));
    }
}
