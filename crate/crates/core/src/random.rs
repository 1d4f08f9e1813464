//! Seeded randomness shared by the generators and the numerical routines.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{c, CMatrix, CVector};

/// Identifier of the generator behind [`rng`], recorded in state metadata.
pub const RNG_ALGORITHM: &str = "chacha8";

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Standard complex Gaussian (`E|z|² = 1`).
pub fn complex_normal(rng: &mut Rng) -> crate::linalg::C64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    c(s * normal(rng), s * normal(rng))
}

pub fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize) -> CMatrix {
    // Filled row by row so the draw order does not depend on storage layout.
    let mut m = CMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = complex_normal(rng);
        }
    }
    m
}

pub fn gaussian_vector(rng: &mut Rng, n: usize) -> CVector {
    CVector::from_iterator(n, (0..n).map(|_| complex_normal(rng)))
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary(rng: &mut Rng, n: usize) -> CMatrix {
    let g = gaussian_matrix(rng, n, n);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            c(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Uniform draw from `[lo, hi)`.
pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    use rand::Rng as _;
    rng.random_range(lo..hi)
}
