//! Complex polynomials fitted from samples, with companion-matrix roots.

use std::f64::consts::PI;

use crate::linalg::{c, CMatrix, C64, ZERO};

/// Coefficients below this fraction of the largest one are treated as zero when trimming.
pub const TRIM: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    /// Ascending powers: `coeffs[k]` multiplies `t^k`.
    pub coeffs: Vec<C64>,
}

impl Poly {
    pub fn new(coeffs: Vec<C64>) -> Self {
        Self { coeffs }
    }

    pub fn eval(&self, t: C64) -> C64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &a| acc * t + a)
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &a)| a * c(k as f64, 0.0))
                .collect(),
        )
    }

    /// Coefficients in descending order, i.e. the polynomial `t^n p(1/t)`.
    pub fn reversed(&self) -> Poly {
        Poly::new(self.coeffs.iter().rev().copied().collect())
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |a, z| a.max(z.norm()))
    }

    /// Whether every coefficient is at most `tol` in modulus.
    pub fn vanishes(&self, tol: f64) -> bool {
        self.max_coeff() <= tol
    }

    /// Copy without leading coefficients below `TRIM` relative to the largest.
    pub fn trimmed(&self) -> Poly {
        let top = self.max_coeff();
        let mut coeffs = self.coeffs.clone();
        while coeffs.len() > 1 && coeffs.last().is_some_and(|z| z.norm() <= TRIM * top) {
            coeffs.pop();
        }
        Poly::new(coeffs)
    }

    pub fn degree(&self) -> usize {
        self.trimmed().coeffs.len().saturating_sub(1)
    }

    /// Roots of the trimmed polynomial as eigenvalues of its companion matrix.
    pub fn roots(&self) -> Vec<C64> {
        let p = self.trimmed();
        let n = p.coeffs.len().saturating_sub(1);
        if n == 0 {
            return Vec::new();
        }
        let lead = p.coeffs[n];
        let mut comp = CMatrix::zeros(n, n);
        for i in 1..n {
            comp[(i, i - 1)] = c(1.0, 0.0);
        }
        for i in 0..n {
            comp[(i, n - 1)] = -p.coeffs[i] / lead;
        }
        comp.schur()
            .eigenvalues()
            .map(|v| v.iter().copied().collect())
            .unwrap_or_default()
    }
}

/// Points `exp(2πik/m)`, `k = 0..m`.
pub fn unit_circle(m: usize) -> Vec<C64> {
    (0..m)
        .map(|k| C64::from_polar(1.0, 2.0 * PI * k as f64 / m as f64))
        .collect()
}

/// Interpolates a polynomial of degree at most `degree` from its values on `degree + 1` unit-circle points.
pub fn interpolate_unit_circle<F: FnMut(C64) -> C64>(degree: usize, mut f: F) -> Poly {
    let m = degree + 1;
    let pts = unit_circle(m);
    let vals: Vec<C64> = pts.iter().map(|&z| f(z)).collect();
    let coeffs = (0..m)
        .map(|j| {
            let mut acc = ZERO;
            for (k, &v) in vals.iter().enumerate() {
                acc += v * C64::from_polar(1.0, -2.0 * PI * (j * k % m) as f64 / m as f64);
            }
            acc / c(m as f64, 0.0)
        })
        .collect();
    Poly::new(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_roots(roots: &[C64]) -> Poly {
        let mut coeffs = vec![c(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![ZERO; coeffs.len() + 1];
            for (k, &a) in coeffs.iter().enumerate() {
                next[k + 1] += a;
                next[k] -= a * r;
            }
            coeffs = next;
        }
        Poly::new(coeffs)
    }

    #[test]
    fn interpolation_is_exact_for_low_degree() {
        let p = Poly::new(vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 3.0)]);
        let q = interpolate_unit_circle(4, |t| p.eval(t));
        for k in 0..5 {
            let want = p.coeffs.get(k).copied().unwrap_or(ZERO);
            assert!((q.coeffs[k] - want).norm() < 1e-14);
        }
        assert_eq!(q.degree(), 2);
    }

    #[test]
    fn companion_roots() {
        let roots = [c(0.5, -1.0), c(2.0, 0.0), c(-3.0, 0.25)];
        let mut got = from_roots(&roots).roots();
        assert_eq!(got.len(), 3);
        for r in roots {
            let (i, d) = got
                .iter()
                .enumerate()
                .map(|(i, z)| (i, (z - r).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(d < 1e-12, "{r} missed by {d}");
            got.remove(i);
        }
    }

    #[test]
    fn derivative_and_reverse() {
        let p = Poly::new(vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]);
        assert_eq!(p.derivative().coeffs, vec![c(2.0, 0.0), c(6.0, 0.0)]);
        assert_eq!(p.reversed().coeffs[0], c(3.0, 0.0));
    }
}
