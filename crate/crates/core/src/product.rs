//! Product-vector factorisation and product vectors in subspaces of `C² ⊗ C^d`.

use crate::error::{Error, Result};
use crate::linalg::{
    column_space, fix_phase, full_svd, kron_all, null_space, real, subspace_residual, CMatrix,
    CVector, C64, ONE, ZERO,
};
use crate::poly::interpolate_unit_circle;
use crate::random;

#[derive(Debug, Clone, PartialEq)]
pub struct ProductFactors {
    /// Whether every cut has `σ₂ ≤ tol · σ₁`.
    pub is_product: bool,
    /// `v ≈ coefficient · (f₁ ⊗ ⋯ ⊗ f_n)`.
    pub coefficient: C64,
    /// Unit factors with the first nonzero entry real and positive.
    pub factors: Vec<CVector>,
    /// Largest `σ₂/σ₁` over the sequential cuts.
    pub schmidt_ratio: f64,
    /// `‖v − coefficient · ⊗f‖ / ‖v‖`.
    pub residual: f64,
}

/// Splits `v` one subsystem at a time by best rank-one approximation.
pub fn product_vector_factorize(v: &CVector, dims: &[usize], tol: f64) -> Result<ProductFactors> {
    let total: usize = dims.iter().product();
    if v.len() != total || dims.is_empty() {
        return Err(Error::Shape(format!(
            "vector of length {} does not match dims {dims:?}",
            v.len()
        )));
    }
    let norm = v.norm();
    if norm == 0.0 {
        return Err(Error::Domain(
            "the zero vector has no product factors".into(),
        ));
    }
    let mut rest = v.clone();
    let mut factors = Vec::with_capacity(dims.len());
    let mut ratio = 0.0f64;
    for &d in &dims[..dims.len() - 1] {
        let cols = rest.len() / d;
        let m = CMatrix::from_fn(d, cols, |i, j| rest[i * cols + j]);
        let svd = full_svd(&m);
        let s1 = svd.s[0];
        let s2 = svd.s.get(1).copied().unwrap_or(0.0);
        ratio = ratio.max(if s1 > 0.0 { s2 / s1 } else { 0.0 });
        let mut u = svd.u.column(0).into_owned();
        fix_phase(&mut u, 1e-14);
        // Remainder ⟨u| v: the best rank-one approximation is u ⊗ (u† M).
        rest = (u.adjoint() * &m).transpose();
        factors.push(u);
    }
    let last_norm = rest.norm();
    let mut last = if last_norm > 0.0 {
        rest / real(last_norm)
    } else {
        rest
    };
    fix_phase(&mut last, 1e-14);
    factors.push(last);
    let prod = kron_all(&factors);
    let coefficient = prod.dotc(v);
    let residual = (v - &prod * coefficient).norm() / norm;
    Ok(ProductFactors {
        is_product: ratio <= tol,
        coefficient,
        factors,
        schmidt_ratio: ratio,
        residual,
    })
}

/// Projective parameter of `x = (1, t)`; `None` stands for `t = ∞`, i.e. `x = (0, 1)`.
pub type Parameter = Option<C64>;

/// Unit qubit vector for a parameter.
pub fn qubit(t: Parameter) -> CVector {
    match t {
        Some(t) => {
            let n = (1.0 + t.norm_sqr()).sqrt();
            CVector::from_vec(vec![real(1.0 / n), t / real(n)])
        }
        None => CVector::from_vec(vec![ZERO, ONE]),
    }
}

/// Chordal distance between two points of the Riemann sphere.
pub fn chordal_distance(a: Parameter, b: Parameter) -> f64 {
    match (a, b) {
        (None, None) => 0.0,
        (Some(t), None) | (None, Some(t)) => 1.0 / (1.0 + t.norm_sqr()).sqrt(),
        (Some(s), Some(t)) => {
            (s - t).norm() / ((1.0 + s.norm_sqr()).sqrt() * (1.0 + t.norm_sqr()).sqrt())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductVectorHit {
    pub t: Parameter,
    pub x: CVector,
    pub y: CVector,
    /// Distance of `x ⊗ y` from the subspace.
    pub residual: f64,
    /// Dimension of `{y : x ⊗ y ∈ V}`.
    pub kernel_dim: usize,
}

impl ProductVectorHit {
    pub fn vector(&self) -> CVector {
        kron_all(&[self.x.clone(), self.y.clone()])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductSearch {
    pub hits: Vec<ProductVectorHit>,
    /// Every `x` admits some `y`, so the product vectors form a continuum.
    pub continuum: bool,
}

/// Pencil `M(t) = A + tB` with `(A + tB) y = 0` exactly when `(1,t) ⊗ y ⊥ W`, `W` the rows given.
#[derive(Debug, Clone)]
pub struct Pencil {
    pub a: CMatrix,
    pub b: CMatrix,
}

impl Pencil {
    /// From the rows `w_i† ∈ (C² ⊗ C^d)*` of a constraint matrix (`w_i` spanning a complement).
    pub fn from_constraints(w: &CMatrix, d: usize) -> Self {
        Self {
            a: w.columns(0, d).into_owned(),
            b: w.columns(d, d).into_owned(),
        }
    }

    /// `x₀ A + x₁ B` for a unit `x`.
    pub fn at(&self, t: Parameter) -> CMatrix {
        let x = qubit(t);
        &self.a * x[0] + &self.b * x[1]
    }
}

/// Smallest singular value and the corresponding right singular vector(s) below `tol`.
pub(crate) fn kernel(m: &CMatrix, tol: f64) -> (f64, CMatrix) {
    let d = m.ncols();
    if m.nrows() < d {
        let svd = full_svd(m);
        let keep = svd.s.iter().filter(|&&s| s > tol).count();
        return (0.0, svd.v.columns(keep, d - keep).into_owned());
    }
    let svd = full_svd(m);
    let smin = svd.s[d - 1];
    let keep = svd.s.iter().filter(|&&s| s > tol).count();
    (smin, svd.v.columns(keep, d - keep).into_owned())
}

/// Candidate parameters where `R M(t)` is singular, found from `det(R M(t))` and refined by Newton steps.
pub(crate) fn determinant_roots(pencil: &Pencil, seed: u64) -> (Vec<Parameter>, bool) {
    let (m, d) = pencil.a.shape();
    let r = if m == d {
        CMatrix::identity(d, d)
    } else {
        random::gaussian_matrix(&mut random::rng(seed), d, m)
    };
    let ra = &r * &pencil.a;
    let rb = &r * &pencil.b;
    let det_at = |t: C64| (&ra + &rb * t).determinant();
    let det_rec = |s: C64| (&ra * s + &rb).determinant();
    let p = interpolate_unit_circle(d, det_at);
    let scale: f64 = (0..d)
        .map(|i| ra.row(i).norm().max(rb.row(i).norm()))
        .product::<f64>()
        .max(f64::MIN_POSITIVE);
    if p.vanishes(1e-10 * scale) {
        return (Vec::new(), true);
    }
    let dp = p.derivative();
    let q = p.reversed();
    let dq = q.derivative();
    let mut out: Vec<Parameter> = Vec::new();
    for root in p.roots() {
        let t = if root.norm() <= 1.0 {
            Some(newton(root, det_at, |z| dp.eval(z)))
        } else {
            let s = newton(ONE / root, det_rec, |z| dq.eval(z));
            if s.norm() < 1e-300 {
                None
            } else {
                Some(ONE / s)
            }
        };
        out.push(t);
    }
    (out, false)
}

fn newton<F: Fn(C64) -> C64, G: Fn(C64) -> C64>(mut z: C64, f: F, df: G) -> C64 {
    for _ in 0..12 {
        let d = df(z);
        if d.norm() == 0.0 {
            break;
        }
        let step = f(z) / d;
        if !step.re.is_finite() || !step.im.is_finite() || step.norm() > 1.0 {
            break;
        }
        z -= step;
        if step.norm() <= 1e-16 * (1.0 + z.norm()) {
            break;
        }
    }
    z
}

/// Adds `t` unless a parameter within chordal distance `1e-6` is already present.
pub(crate) fn push_unique(list: &mut Vec<Parameter>, t: Parameter) -> bool {
    let fresh = list.iter().all(|&s| chordal_distance(s, t) > 1e-6);
    if fresh {
        list.push(t);
    }
    fresh
}

/// All product vectors `x ⊗ y` in `V = span(basis) ⊆ C² ⊗ C^d`, up to scale.
pub fn product_vectors_in_range_2xd(basis: &[CVector], tol: f64) -> Result<ProductSearch> {
    let Some(first) = basis.first() else {
        return Ok(ProductSearch {
            hits: Vec::new(),
            continuum: false,
        });
    };
    let n = first.len();
    if n % 2 != 0 || basis.iter().any(|v| v.len() != n) {
        return Err(Error::Shape(
            "basis vectors must share an even length 2d".into(),
        ));
    }
    let d = n / 2;
    let v = CMatrix::from_columns(basis);
    let q = column_space(&v, 1e-10);
    // Rows of W†: the constraints ⟨w_i, x ⊗ y⟩ = 0.
    let w = null_space(&q.adjoint(), 1e-10).adjoint();
    let pencil = Pencil::from_constraints(&w, d);
    let (mut params, continuum) = if w.nrows() < d {
        (Vec::new(), true)
    } else {
        determinant_roots(&pencil, 0x5eed)
    };
    if continuum {
        // Every x has a partner y; report a few representatives.
        params = CONTINUUM_PROBES.iter().map(|&t| Some(real(t))).collect();
    }
    params.push(None);
    let mut seen = Vec::new();
    let mut hits = Vec::new();
    for t in params {
        if let Some(hit) = hit_at(&pencil, &q, t, tol) {
            if push_unique(&mut seen, t) {
                hits.push(hit);
            }
        }
    }
    Ok(ProductSearch { hits, continuum })
}

/// Parameters sampled as representatives when the product vectors form a continuum.
const CONTINUUM_PROBES: [f64; 2] = [0.0, 1.0];

fn hit_at(pencil: &Pencil, q: &CMatrix, t: Parameter, tol: f64) -> Option<ProductVectorHit> {
    let (smin, ker) = kernel(&pencil.at(t), tol);
    if smin > tol || ker.ncols() == 0 {
        return None;
    }
    let x = qubit(t);
    let mut y = ker.column(0).into_owned();
    fix_phase(&mut y, 1e-14);
    let residual = subspace_residual(q, &kron_all(&[x.clone(), y.clone()]));
    Some(ProductVectorHit {
        t,
        x,
        y,
        residual,
        kernel_dim: ker.ncols(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron_vec;
    use crate::random::{gaussian_vector, rng};

    fn e(n: usize, i: usize) -> CVector {
        let mut v = CVector::zeros(n);
        v[i] = ONE;
        v
    }

    #[test]
    fn bell_vector_is_entangled() {
        let v = (e(4, 0) + e(4, 3)) / real(2f64.sqrt());
        let f = product_vector_factorize(&v, &[2, 2], 1e-8).unwrap();
        assert!(!f.is_product);
        assert!((f.schmidt_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn basis_product_splits_into_basis_vectors() {
        let v = kron_all(&[e(2, 0), e(2, 1), e(2, 0)]);
        let f = product_vector_factorize(&v, &[2, 2, 2], 1e-8).unwrap();
        assert!(f.is_product);
        for (got, want) in f.factors.iter().zip([e(2, 0), e(2, 1), e(2, 0)]) {
            assert!((got - want).norm() < 1e-15);
        }
        assert!((f.coefficient - ONE).norm() < 1e-15);
    }

    #[test]
    fn random_product_reconstructs() {
        let mut r = rng(5);
        let parts: Vec<CVector> = [3, 2, 4]
            .iter()
            .map(|&n| gaussian_vector(&mut r, n))
            .collect();
        let v = kron_all(&parts);
        let f = product_vector_factorize(&v, &[3, 2, 4], 1e-8).unwrap();
        assert!(f.is_product && f.residual < 1e-14);
    }

    #[test]
    fn two_basis_products_in_2x2() {
        let basis = [kron_vec(&e(2, 0), &e(2, 0)), kron_vec(&e(2, 1), &e(2, 1))];
        let s = product_vectors_in_range_2xd(&basis, 1e-8).unwrap();
        assert!(!s.continuum);
        assert_eq!(s.hits.len(), 2);
        assert!(s.hits.iter().any(|h| h.t.is_some_and(|t| t.norm() < 1e-12)));
        assert!(s.hits.iter().any(|h| h.t.is_none()));
    }

    #[test]
    fn seeded_products_are_recovered() {
        let mut r = rng(17);
        for d in 2..=6 {
            for k in 1..=d {
                let seeds: Vec<(CVector, CVector)> = (0..k)
                    .map(|_| (gaussian_vector(&mut r, 2), gaussian_vector(&mut r, d)))
                    .collect();
                let basis: Vec<CVector> = seeds.iter().map(|(x, y)| kron_vec(x, y)).collect();
                let s = product_vectors_in_range_2xd(&basis, 1e-8).unwrap();
                assert!(!s.continuum);
                for (x, _) in &seeds {
                    let t = Some(x[1] / x[0]);
                    assert!(
                        s.hits.iter().any(|h| chordal_distance(h.t, t) < 1e-8),
                        "d={d} k={k}"
                    );
                }
                assert!(s.hits.iter().all(|h| h.residual < 1e-8));
            }
        }
    }

    #[test]
    fn full_space_is_a_continuum_with_representatives() {
        let basis: Vec<CVector> = (0..4).map(|i| e(4, i)).collect();
        let s = product_vectors_in_range_2xd(&basis, 1e-8).unwrap();
        assert!(s.continuum);
        assert_eq!(s.hits.len(), 3);
    }

    #[test]
    fn chordal_distance_handles_infinity() {
        assert_eq!(chordal_distance(None, None), 0.0);
        assert!((chordal_distance(Some(ZERO), None) - 1.0).abs() < 1e-15);
    }
}
