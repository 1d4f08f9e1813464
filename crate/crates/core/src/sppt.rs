//! SPPT and SSPPT predicates evaluated on a [`StructuredFactor`].
//!
//! Every defining equation is reduced to a Frobenius norm divided by a
//! homogeneous scale (the `‖X_α‖²_F` weights and the spectral norms of the
//! `S` products involved), so verdicts do not change under `ρ ↦ cρ`.
//! Equations are enumerated in a fixed lexicographic order; the witness is the
//! label of the worst one.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::density::partial_transpose;
use crate::error::{Error, Result};
use crate::factor::{FactorSource, StructuredFactor};
use crate::linalg::{comm, frobenius, identity, set_block, spectral_norm, zeros, CMatrix};
use crate::profile::{unchecked_multi_index, DimensionProfile};

/// Default tolerance on normalised equation residuals.
pub const VERDICT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Definition {
    SpptBipartite,
    SspptBipartite,
    #[serde(rename = "sppt-2x2xn")]
    Sppt22N,
    #[serde(rename = "ssppt-2x2xn")]
    Ssppt22N,
    SpptTripartite,
    SspptTripartite,
    SpptMultipartite,
    SspptMultipartite,
    SpptLegacy,
    SspptLegacy,
}

impl Definition {
    pub fn id(self) -> &'static str {
        match self {
            Definition::SpptBipartite => "sppt-bipartite",
            Definition::SspptBipartite => "ssppt-bipartite",
            Definition::Sppt22N => "sppt-2x2xn",
            Definition::Ssppt22N => "ssppt-2x2xn",
            Definition::SpptTripartite => "sppt-tripartite",
            Definition::SspptTripartite => "ssppt-tripartite",
            Definition::SpptMultipartite => "sppt-multipartite",
            Definition::SspptMultipartite => "ssppt-multipartite",
            Definition::SpptLegacy => "sppt-legacy",
            Definition::SspptLegacy => "ssppt-legacy",
        }
    }

    pub fn is_super(self) -> bool {
        matches!(
            self,
            Definition::SspptBipartite
                | Definition::Ssppt22N
                | Definition::SspptTripartite
                | Definition::SspptMultipartite
                | Definition::SspptLegacy
        )
    }
}

impl fmt::Display for Definition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Holds,
    Violated,
    /// The factor does not have the required `S · X_α` structure, so the equations are not defined.
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpptVerdict {
    pub definition: Definition,
    pub outcome: Outcome,
    pub holds: bool,
    /// Largest normalised equation residual; absent when the factor lacks the structure.
    pub max_residual: Option<f64>,
    pub equation_count: usize,
    pub witness: Option<String>,
    pub tolerance: f64,
    pub factor_source: FactorSource,
    pub factor_residual: f64,
    /// `max_n ‖Y_n†Y_n − ρ^{Γ_n}‖_F / ‖ρ‖_F` for the partially conjugated factors, where computed.
    pub gram_residual: Option<f64>,
    pub note: Option<String>,
}

impl SpptVerdict {
    fn indeterminate(definition: Definition, f: &StructuredFactor, tol: f64) -> Self {
        Self {
            definition,
            outcome: Outcome::Indeterminate,
            holds: false,
            max_residual: None,
            equation_count: 0,
            witness: f
                .worst_block()
                .map(|(a, b)| format!("block ({a},{b}) not reproduced by the S·X structure")),
            tolerance: tol,
            factor_source: f.source(),
            factor_residual: f.max_residual(),
            gram_residual: None,
            note: None,
        }
    }
}

/// Running maximum over normalised equation residuals.
struct Equations {
    count: usize,
    worst: f64,
    witness: Option<String>,
}

impl Equations {
    fn new() -> Self {
        Self {
            count: 0,
            worst: 0.0,
            witness: None,
        }
    }

    fn push(&mut self, residual: f64, label: impl FnOnce() -> String) {
        self.count += 1;
        if residual > self.worst || self.witness.is_none() {
            if residual > self.worst {
                self.worst = residual;
            }
            self.witness = Some(label());
        }
    }

    fn finish(self, definition: Definition, f: &StructuredFactor, tol: f64) -> SpptVerdict {
        let holds = self.worst <= tol;
        SpptVerdict {
            definition,
            outcome: if holds {
                Outcome::Holds
            } else {
                Outcome::Violated
            },
            holds,
            max_residual: Some(self.worst),
            equation_count: self.count,
            witness: if self.worst > 0.0 { self.witness } else { None },
            tolerance: tol,
            factor_source: f.source(),
            factor_residual: f.max_residual(),
            gram_residual: None,
            note: None,
        }
    }
}

/// Accumulates `Σ X†[P, P'†]X` together with its scale `Σ ‖X‖²_F · max(1, ‖P‖‖P'‖)`.
struct WeightedSum {
    sum: Option<CMatrix>,
    scale: f64,
}

impl WeightedSum {
    fn new() -> Self {
        Self {
            sum: None,
            scale: 0.0,
        }
    }

    fn add(&mut self, x: &CMatrix, p: &CMatrix, q: &CMatrix) {
        let term = x.adjoint() * comm(p, &q.adjoint()) * x;
        let w = frobenius(x).powi(2) * 1f64.max(spectral_norm(p) * spectral_norm(q));
        self.scale += w;
        self.sum = Some(match self.sum.take() {
            Some(s) => s + term,
            None => term,
        });
    }

    fn residual(&self) -> f64 {
        match &self.sum {
            Some(s) if self.scale > 0.0 => frobenius(s) / self.scale,
            _ => 0.0,
        }
    }
}

/// `‖[P, Q†]‖_F / max(1, ‖P‖‖Q‖)`.
fn commutator_residual(p: &CMatrix, q: &CMatrix) -> f64 {
    frobenius(&comm(p, &q.adjoint())) / 1f64.max(spectral_norm(p) * spectral_norm(q))
}

fn fmt_index(idx: &[usize]) -> String {
    let parts: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
    format!("({})", parts.join(","))
}

fn require_subsystems(f: &StructuredFactor, n: usize, what: &str) -> Result<()> {
    if f.profile().num_subsystems() != n {
        return Err(Error::Domain(format!(
            "{what} needs {n} subsystems, got profile {}",
            f.profile()
        )));
    }
    Ok(())
}

/// Factor `Y_n` with blocks `(α_n, β_n)` equal to `(∏_{p≤n} S^p_{α_n,j_p})† X_{α_n}`;
/// the state is SPPT at level `n` exactly when `Y_n†Y_n = ρ^{Γ_n}`.
pub fn gamma_factor(f: &StructuredFactor, n: usize) -> CMatrix {
    let levels = f.levels();
    let head = &levels[..n];
    let count: usize = head.iter().product();
    let size = f.profile().total() / count;
    let mut y = zeros(f.profile().total(), f.profile().total());
    for a in 0..count {
        let prefix = unchecked_multi_index(head, a);
        let xa = f.level_block(&prefix);
        for b in 0..count {
            let beta = unchecked_multi_index(head, b);
            if beta.iter().zip(&prefix).any(|(j, i)| j < i) {
                continue;
            }
            let p = f.level_product(&prefix, &beta);
            set_block(&mut y, a, b, &(p.adjoint() * &xa));
        }
    }
    debug_assert_eq!(y.nrows(), count * size);
    y
}

/// `‖Y_n†Y_n − ρ^{Γ_n}‖_F / ‖ρ‖_F` with `ρ = X†X` and `Γ_n` the transpose of the first `n` subsystems.
pub fn gamma_residual(f: &StructuredFactor, n: usize) -> f64 {
    let rho = f.gram();
    let subsystems: Vec<usize> = (0..n).collect();
    let pt =
        partial_transpose(&rho, f.profile().dims(), &subsystems).expect("profile matches factor");
    let y = gamma_factor(f, n);
    let norm = frobenius(&rho);
    let r = frobenius(&(y.adjoint() * &y - pt));
    if norm > 0.0 {
        r / norm
    } else {
        r
    }
}

fn max_gamma_residual(f: &StructuredFactor) -> f64 {
    (1..=f.levels().len())
        .map(|n| gamma_residual(f, n))
        .fold(0.0, f64::max)
}

/// `Σ_k X_k†[S_kj†, S_ki]X_k = 0` for `i ≤ j`.
pub fn sppt_bipartite(f: &StructuredFactor, tol: f64) -> Result<SpptVerdict> {
    require_subsystems(f, 2, "the bipartite test")?;
    if !f.is_representable() {
        return Ok(SpptVerdict::indeterminate(
            Definition::SpptBipartite,
            f,
            tol,
        ));
    }
    let n1 = f.levels()[0];
    let xs: Vec<CMatrix> = (0..n1).map(|k| f.x_alpha(k)).collect();
    let mut eqs = Equations::new();
    for i in 0..n1 {
        for j in i..n1 {
            let mut sum = WeightedSum::new();
            for (k, xk) in xs.iter().enumerate().take(i + 1) {
                // [S_kj†, S_ki] = −[S_ki, S_kj†]
                sum.add(xk, f.s(k, 0, i), f.s(k, 0, j));
            }
            eqs.push(sum.residual(), || format!("i={i}, j={j}"));
        }
    }
    let mut v = eqs.finish(Definition::SpptBipartite, f, tol);
    v.gram_residual = Some(gamma_residual(f, 1));
    Ok(v)
}

/// `[S_kj†, S_ki] = 0` for all `k` and `i ≤ j`.
pub fn ssppt_bipartite(f: &StructuredFactor, tol: f64) -> Result<SpptVerdict> {
    require_subsystems(f, 2, "the bipartite test")?;
    if !f.is_representable() {
        return Ok(SpptVerdict::indeterminate(
            Definition::SspptBipartite,
            f,
            tol,
        ));
    }
    let n1 = f.levels()[0];
    let mut eqs = Equations::new();
    for k in 0..n1 {
        for i in k..n1 {
            for j in i..n1 {
                let r = commutator_residual(f.s(k, 0, i), f.s(k, 0, j));
                eqs.push(r, || format!("k={k}, i={i}, j={j}"));
            }
        }
    }
    Ok(eqs.finish(Definition::SspptBipartite, f, tol))
}

/// Blocks of a `2 ⊗ 2 ⊗ N` factor in the `Y_ij`, `S_i`, `T_i` naming.
struct Blocks22N {
    y11: CMatrix,
    y12: CMatrix,
    y21: CMatrix,
    s1: CMatrix,
    s2: CMatrix,
    t1: CMatrix,
    t2: CMatrix,
}

impl Blocks22N {
    fn new(f: &StructuredFactor) -> Result<Self> {
        let dims = f.profile().dims();
        if dims.len() != 3 || dims[0] != 2 || dims[1] != 2 {
            return Err(Error::Domain(format!(
                "expected a 2⊗2⊗N profile, got {}",
                f.profile()
            )));
        }
        Ok(Self {
            y11: f.x_alpha(0),
            y12: f.x_alpha(1),
            y21: f.x_alpha(2),
            s1: f.s(0, 0, 1).clone(),
            t1: f.s(0, 1, 1).clone(),
            s2: f.s(1, 0, 1).clone(),
            t2: f.s(2, 1, 1).clone(),
        })
    }
}

/// The eight `2 ⊗ 2 ⊗ N` SPPT equations, written out in the `Y`, `S`, `T` blocks.
pub fn sppt_22n(f: &StructuredFactor, tol: f64) -> Result<SpptVerdict> {
    let b = Blocks22N::new(f)?;
    if !f.is_representable() {
        return Ok(SpptVerdict::indeterminate(Definition::Sppt22N, f, tol));
    }
    let s1t1 = &b.s1 * &b.t1;
    let mut eqs = Equations::new();
    let single = |x: &CMatrix, p: &CMatrix, q: &CMatrix| {
        let mut s = WeightedSum::new();
        s.add(x, p, q);
        s.residual()
    };
    eqs.push(single(&b.y11, &b.t1, &b.t1), || "Y11†[T1,T1†]Y11".into());
    eqs.push(single(&b.y11, &b.s1, &b.s1), || "Y11†[S1,S1†]Y11".into());
    eqs.push(single(&b.y11, &b.t1, &b.s1), || "Y11†[T1,S1†]Y11".into());
    eqs.push(single(&b.y11, &b.s1, &s1t1), || {
        "Y11†[S1,(S1T1)†]Y11".into()
    });
    eqs.push(single(&b.y11, &b.t1, &s1t1), || {
        "Y11†[T1,(S1T1)†]Y11".into()
    });
    let mut diag = WeightedSum::new();
    diag.add(&b.y11, &s1t1, &s1t1);
    diag.add(&b.y12, &b.s2, &b.s2);
    diag.add(&b.y21, &b.t2, &b.t2);
    eqs.push(diag.residual(), || {
        "Y11†[S1T1,(S1T1)†]Y11 + Y12†[S2,S2†]Y12 + Y21†[T2,T2†]Y21".into()
    });
    // Level-1 equations involving the off-diagonal block T1·Y11 of X_1.
    let c1 = comm(&b.s1, &b.s1.adjoint());
    let c2 = comm(&b.s2, &b.s2.adjoint());
    let s1n = spectral_norm(&b.s1).powi(2).max(1.0);
    let s2n = spectral_norm(&b.s2).powi(2).max(1.0);
    let t1n = spectral_norm(&b.t1).max(1.0);
    let y11n = frobenius(&b.y11).powi(2);
    let r7 = {
        let m = b.y11.adjoint() * &c1 * &b.t1 * &b.y11;
        let scale = y11n * s1n * t1n;
        if scale > 0.0 {
            frobenius(&m) / scale
        } else {
            0.0
        }
    };
    eqs.push(r7, || "Y11†[S1,S1†]T1Y11".into());
    let r8 = {
        let m = b.y11.adjoint() * b.t1.adjoint() * &c1 * &b.t1 * &b.y11
            + b.y12.adjoint() * &c2 * &b.y12;
        let scale = y11n * s1n * t1n * t1n + frobenius(&b.y12).powi(2) * s2n;
        if scale > 0.0 {
            frobenius(&m) / scale
        } else {
            0.0
        }
    };
    eqs.push(r8, || "Y11†T1†[S1,S1†]T1Y11 + Y12†[S2,S2†]Y12".into());
    let mut v = eqs.finish(Definition::Sppt22N, f, tol);
    v.gram_residual = Some(max_gamma_residual(f));
    Ok(v)
}

/// `S_i`, `T_i` normal and `[S1, T1†] = 0`.
pub fn ssppt_22n(f: &StructuredFactor, tol: f64) -> Result<SpptVerdict> {
    let b = Blocks22N::new(f)?;
    if !f.is_representable() {
        return Ok(SpptVerdict::indeterminate(Definition::Ssppt22N, f, tol));
    }
    let mut eqs = Equations::new();
    eqs.push(commutator_residual(&b.s1, &b.s1), || "[S1,S1†]".into());
    eqs.push(commutator_residual(&b.s2, &b.s2), || "[S2,S2†]".into());
    eqs.push(commutator_residual(&b.t1, &b.t1), || "[T1,T1†]".into());
    eqs.push(commutator_residual(&b.t2, &b.t2), || "[T2,T2†]".into());
    eqs.push(commutator_residual(&b.s1, &b.t1), || "[S1,T1†]".into());
    Ok(eqs.finish(Definition::Ssppt22N, f, tol))
}

/// Both tripartite equation families: the `A₁ : A₂A₃` cut with block-diagonal `S_ip`,
/// and the `A₁A₂ : A₃` cut with the products `S^{ij}_k S^{i}_{kl}`.
pub fn sppt_tripartite(f: &StructuredFactor, tol: f64) -> Result<SpptVerdict> {
    require_subsystems(f, 3, "the tripartite test")?;
    if !f.is_representable() {
        return Ok(SpptVerdict::indeterminate(
            Definition::SpptTripartite,
            f,
            tol,
        ));
    }
    let (n1, n2) = (f.levels()[0], f.levels()[1]);
    let mut eqs = Equations::new();
    for p in 0..n1 {
        for q in p..n1 {
            let mut sum = WeightedSum::new();
            for i in 0..=p {
                sum.add(
                    &f.level_block(&[i]),
                    &f.level_product(&[i], &[p]),
                    &f.level_product(&[i], &[q]),
                );
            }
            eqs.push(sum.residual(), || format!("first cut: p={p}, q={q}"));
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n1).flat_map(|j| (0..n2).map(move |l| (j, l))).collect();
    for (u, &(j, l)) in pairs.iter().enumerate() {
        for &(jp, lp) in &pairs[u..] {
            let mut sum = WeightedSum::new();
            for i in 0..n1 {
                for k in 0..n2 {
                    let a = f.alpha_index(&[i, k]);
                    let left = f.s(a, 0, j) * f.s(a, 1, l);
                    let right = f.s(a, 0, jp) * f.s(a, 1, lp);
                    sum.add(&f.x_alpha(a), &left, &right);
                }
            }
            eqs.push(sum.residual(), || {
                format!("second cut: (j,l)=({j},{l}), (j',l')=({jp},{lp})")
            });
        }
    }
    let mut v = eqs.finish(Definition::SpptTripartite, f, tol);
    v.gram_residual = Some(max_gamma_residual(f));
    Ok(v)
}

pub fn ssppt_tripartite(f: &StructuredFactor, tol: f64) -> Result<SpptVerdict> {
    require_subsystems(f, 3, "the tripartite test")?;
    if !f.is_representable() {
        return Ok(SpptVerdict::indeterminate(
            Definition::SspptTripartite,
            f,
            tol,
        ));
    }
    let (n1, n2) = (f.levels()[0], f.levels()[1]);
    let mut eqs = Equations::new();
    for i in 0..n1 {
        for p in i..n1 {
            for q in p..n1 {
                let r =
                    commutator_residual(&f.level_product(&[i], &[p]), &f.level_product(&[i], &[q]));
                eqs.push(r, || format!("first cut: i={i}, p={p}, q={q}"));
            }
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n1).flat_map(|j| (0..n2).map(move |l| (j, l))).collect();
    for i in 0..n1 {
        for k in 0..n2 {
            let a = f.alpha_index(&[i, k]);
            for (u, &(j, l)) in pairs.iter().enumerate() {
                for &(jp, lp) in &pairs[u..] {
                    let left = f.s(a, 0, j) * f.s(a, 1, l);
                    let right = f.s(a, 0, jp) * f.s(a, 1, lp);
                    let r = commutator_residual(&left, &right);
                    eqs.push(r, || {
                        format!("second cut: (i,k)=({i},{k}), (j,l)=({j},{l}), (j',l')=({jp},{lp})")
                    });
                }
            }
        }
    }
    Ok(eqs.finish(Definition::SspptTripartite, f, tol))
}

/// For every level `n` and `β_n ≤ β'_n`:
/// `Σ_{α_n} X_{α_n}†[∏_{p≤n} S^p_{α_n,j_p}, (∏_{p≤n} S^p_{α_n,j'_p})†]X_{α_n} = 0`.
pub fn sppt_multipartite(f: &StructuredFactor, tol: f64) -> Result<SpptVerdict> {
    if !f.is_representable() {
        return Ok(SpptVerdict::indeterminate(
            Definition::SpptMultipartite,
            f,
            tol,
        ));
    }
    let levels = f.levels().to_vec();
    let mut eqs = Equations::new();
    for n in 1..=levels.len() {
        let head = &levels[..n];
        let count: usize = head.iter().product();
        let prefixes: Vec<Vec<usize>> =
            (0..count).map(|a| unchecked_multi_index(head, a)).collect();
        let blocks: Vec<CMatrix> = prefixes.iter().map(|p| f.level_block(p)).collect();
        for b in 0..count {
            for bp in b..count {
                let (beta, betap) = (&prefixes[b], &prefixes[bp]);
                let mut sum = WeightedSum::new();
                for (prefix, xa) in prefixes.iter().zip(&blocks) {
                    let below = |x: &Vec<usize>| x.iter().zip(prefix).any(|(j, i)| j < i);
                    if below(beta) || below(betap) {
                        continue;
                    }
                    sum.add(
                        xa,
                        &f.level_product(prefix, beta),
                        &f.level_product(prefix, betap),
                    );
                }
                eqs.push(sum.residual(), || {
                    format!(
                        "level {n}, beta {}, beta' {}",
                        fmt_index(beta),
                        fmt_index(betap)
                    )
                });
            }
        }
    }
    let mut v = eqs.finish(Definition::SpptMultipartite, f, tol);
    v.gram_residual = Some(max_gamma_residual(f));
    Ok(v)
}

/// `[∏_{p≤n} S^p_{α,j_p}, (∏_{p≤n} S^p_{α,j'_p})†] = 0` for every `α`, level `n` and `β_n ≤ β'_n`.
pub fn ssppt_multipartite(f: &StructuredFactor, tol: f64) -> Result<SpptVerdict> {
    if !f.is_representable() {
        return Ok(SpptVerdict::indeterminate(
            Definition::SspptMultipartite,
            f,
            tol,
        ));
    }
    let levels = f.levels().to_vec();
    let n0 = f.carrier();
    let mut eqs = Equations::new();
    for a in 0..f.num_blocks() {
        let alpha = f.alpha(a);
        for n in 1..=levels.len() {
            let head = &levels[..n];
            let count: usize = head.iter().product();
            let products: Vec<Option<(Vec<usize>, CMatrix)>> = (0..count)
                .map(|b| {
                    let beta = unchecked_multi_index(head, b);
                    if beta.iter().zip(&alpha).any(|(j, i)| j < i) {
                        return None;
                    }
                    let mut prod = identity(n0);
                    for (p, &j) in beta.iter().enumerate() {
                        prod *= f.s(a, p, j);
                    }
                    Some((beta, prod))
                })
                .collect();
            for (u, pu) in products.iter().enumerate() {
                let Some((beta, p)) = pu else { continue };
                for (beta_p, q) in products[u..].iter().flatten() {
                    let r = commutator_residual(p, q);
                    eqs.push(r, || {
                        format!(
                            "alpha {}, level {n}, beta {}, beta' {}",
                            fmt_index(&alpha),
                            fmt_index(beta),
                            fmt_index(beta_p)
                        )
                    });
                }
            }
        }
    }
    Ok(eqs.finish(Definition::SspptMultipartite, f, tol))
}

const LEGACY_NOTE: &str = "legacy definition: factor re-read with the first two subsystems merged; equations summed over all row blocks for each column pair";

/// Accepts a tripartite factor, or one already written over the merged profile.
fn legacy_factor(f: &StructuredFactor) -> Result<StructuredFactor> {
    if f.profile().num_subsystems() == 2 {
        return Ok(f.clone());
    }
    require_subsystems(f, 3, "the legacy test")?;
    let dims = f.profile().dims();
    f.reread(DimensionProfile::new(vec![dims[0] * dims[1], dims[2]])?)
}

/// SPPT in the older tripartite sense, which only constrains the `A₁A₂ : A₃` cut.
pub fn sppt_yuzhao(f: &StructuredFactor, tol: f64) -> Result<SpptVerdict> {
    let flat = legacy_factor(f)?;
    let mut v = sppt_bipartite(&flat, tol)?;
    v.definition = Definition::SpptLegacy;
    v.note = Some(LEGACY_NOTE.into());
    Ok(v)
}

pub fn ssppt_yuzhao(f: &StructuredFactor, tol: f64) -> Result<SpptVerdict> {
    let flat = legacy_factor(f)?;
    let mut v = ssppt_bipartite(&flat, tol)?;
    v.definition = Definition::SspptLegacy;
    v.note = Some(LEGACY_NOTE.into());
    Ok(v)
}

/// The SPPT/SSPPT pair matching the profile: bipartite, `2 ⊗ 2 ⊗ N`, tripartite, or the general form.
pub fn applicable_tests(f: &StructuredFactor, tol: f64) -> Result<Vec<SpptVerdict>> {
    let dims = f.profile().dims();
    let mut out = Vec::new();
    match dims.len() {
        2 => {
            out.push(sppt_bipartite(f, tol)?);
            out.push(ssppt_bipartite(f, tol)?);
        }
        3 => {
            if dims[0] == 2 && dims[1] == 2 {
                out.push(sppt_22n(f, tol)?);
                out.push(ssppt_22n(f, tol)?);
            }
            out.push(sppt_tripartite(f, tol)?);
            out.push(ssppt_tripartite(f, tol)?);
        }
        _ => {}
    }
    out.push(sppt_multipartite(f, tol)?);
    out.push(ssppt_multipartite(f, tol)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::DensityMatrix;
    use crate::factor::canonical_factor;
    use crate::linalg::{diag, real};

    fn bell() -> DensityMatrix {
        let mut m = CMatrix::zeros(4, 4);
        for &(i, j) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            m[(i, j)] = real(0.5);
        }
        DensityMatrix::from_dims(m, &[2, 2]).unwrap()
    }

    #[test]
    fn diagonal_state_is_ssppt() {
        let d: Vec<_> = [0.1, 0.2, 0.3, 0.15, 0.05, 0.2]
            .iter()
            .map(|&x| real(x))
            .collect();
        let rho = DensityMatrix::from_dims(diag(&d), &[2, 3]).unwrap();
        let f = canonical_factor(&rho, 1e-9).unwrap();
        for v in applicable_tests(&f, VERDICT_TOL).unwrap() {
            assert!(v.holds, "{v:?}");
            assert_eq!(v.max_residual, Some(0.0));
        }
    }

    #[test]
    fn bell_state_has_no_structured_factor() {
        let f = canonical_factor(&bell(), 1e-9).unwrap();
        let v = sppt_bipartite(&f, VERDICT_TOL).unwrap();
        assert_eq!(v.outcome, Outcome::Indeterminate);
        assert!(!v.holds);
    }

    fn non_normal_factor(scale: f64) -> StructuredFactor {
        let profile = DimensionProfile::new(vec![2, 2]).unwrap();
        let mut s = CMatrix::zeros(2, 2);
        s[(0, 1)] = real(1.0);
        let blocks = [identity(2) * real(scale), identity(2) * real(0.1 * scale)];
        StructuredFactor::assemble(profile, &blocks, |_, _, _| s.clone(), 1e-9).unwrap()
    }

    #[test]
    fn non_normal_s_violates_sppt() {
        let f = non_normal_factor(1.0);
        let v = sppt_bipartite(&f, VERDICT_TOL).unwrap();
        assert_eq!(v.outcome, Outcome::Violated);
        assert_eq!(v.witness.as_deref(), Some("i=1, j=1"));
        assert!(v.gram_residual.unwrap() > 0.1);
        assert!(!ssppt_bipartite(&f, VERDICT_TOL).unwrap().holds);
    }

    #[test]
    fn verdict_is_scale_invariant() {
        let a = sppt_multipartite(&non_normal_factor(1.0), VERDICT_TOL).unwrap();
        let b = sppt_multipartite(&non_normal_factor(1e-3), VERDICT_TOL).unwrap();
        let (a, b) = (a.max_residual.unwrap(), b.max_residual.unwrap());
        assert!(a > 0.1);
        assert!((a - b).abs() < 1e-12);
    }
}
