//! Named states and randomised families with their ground-truth factors.
//!
//! Every generator returns a trace-one state. When the construction comes with a
//! structured factor, that factor is rescaled to the normalised state and kept
//! alongside the expected verdicts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::factor::{cholesky_upper, StructuredFactor};
use crate::linalg::{
    diag, frobenius, identity, kron_all, min_eigenvalue, psd_sqrt, real, zeros, CMatrix, CVector,
    C64, ONE, ZERO,
};
use crate::profile::DimensionProfile;
use crate::random::{
    self, complex_normal, gaussian_matrix, gaussian_vector, random_unitary, uniform, Rng,
    RNG_ALGORITHM,
};
use crate::simdiag::commutation_residual;

/// Tolerance for generator preconditions (commutation, PSD, weights).
pub const PRECONDITION_TOL: f64 = 1e-9;

/// Verdicts a generator guarantees by construction (`None` when not determined).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expected {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ppt: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sppt: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssppt: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub legacy_ssppt: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separable: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub generator: String,
    pub params: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rng: Option<String>,
    /// Trace of the Gram form `X†X` before normalisation.
    pub unnormalized_trace: f64,
    pub expected: Expected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedState {
    pub rho: DensityMatrix,
    /// Factor of the normalised state used in the construction.
    pub factor: Option<StructuredFactor>,
    pub truth: GroundTruth,
}

impl GeneratedState {
    pub fn profile(&self) -> &DimensionProfile {
        self.rho.profile()
    }
}

struct Builder {
    generator: &'static str,
    params: BTreeMap<String, String>,
    seed: Option<u64>,
    expected: Expected,
}

impl Builder {
    fn new(generator: &'static str) -> Self {
        Self {
            generator,
            params: BTreeMap::new(),
            seed: None,
            expected: Expected::default(),
        }
    }

    fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self.params.insert("seed".into(), seed.to_string());
        self
    }

    fn expect(mut self, e: Expected) -> Self {
        self.expected = e;
        self
    }

    fn truth(self, trace: f64) -> GroundTruth {
        GroundTruth {
            generator: self.generator.to_string(),
            params: self.params,
            seed: self.seed,
            rng: self.seed.map(|_| RNG_ALGORITHM.to_string()),
            unnormalized_trace: trace,
            expected: self.expected,
        }
    }

    /// Normalises the Gram matrix of `factor` and keeps the rescaled factor.
    fn build_from_factor(self, factor: StructuredFactor) -> Result<GeneratedState> {
        let gram = factor.gram();
        let trace = gram.trace().re;
        if trace <= 0.0 {
            return Err(Error::Domain(
                "construction produced the zero matrix".into(),
            ));
        }
        let matrix = hermitize(gram / real(trace));
        let rho = DensityMatrix::new(matrix, factor.profile().clone())?;
        Ok(GeneratedState {
            rho,
            factor: Some(factor.scaled(1.0 / trace)),
            truth: self.truth(trace),
        })
    }

    fn build_from_matrix(self, m: CMatrix, profile: DimensionProfile) -> Result<GeneratedState> {
        let trace = m.trace().re;
        if trace <= 0.0 {
            return Err(Error::Domain(
                "construction produced the zero matrix".into(),
            ));
        }
        let rho = DensityMatrix::new(hermitize(m / real(trace)), profile)?;
        Ok(GeneratedState {
            rho,
            factor: None,
            truth: self.truth(trace),
        })
    }
}

/// Exact Hermitian symmetrisation so generated files are Hermitian to the last bit.
fn hermitize(m: CMatrix) -> CMatrix {
    let n = m.nrows();
    let mut out = m;
    for i in 0..n {
        out[(i, i)] = real(out[(i, i)].re);
        for j in i + 1..n {
            let z = (out[(i, j)] + out[(j, i)].conj()) * 0.5;
            out[(i, j)] = z;
            out[(j, i)] = z.conj();
        }
    }
    out
}

fn profile(dims: &[usize]) -> Result<DimensionProfile> {
    DimensionProfile::new(dims.to_vec())
}

/// The `S` matrix of the `2 ⊗ 5` SPPT entangled example.
pub fn ha_s_matrix(b: f64) -> CMatrix {
    let beta1 = ((1.0 - b) / (2.0 * b)).sqrt();
    let beta2 = ((1.0 + b) / (2.0 * b)).sqrt();
    let mut s = zeros(5, 5);
    s[(0, 1)] = ONE;
    s[(0, 4)] = real(beta1);
    s[(1, 2)] = ONE;
    s[(2, 3)] = ONE;
    s[(3, 4)] = real(beta2);
    s[(4, 0)] = real(beta2);
    s[(4, 3)] = real(beta1);
    s
}

/// `2 ⊗ 5` SPPT entangled state: `X₁ = 1₄ ⊕ 0`, `X₂ = 0`, `S` from [`ha_s_matrix`].
pub fn ha_state(b: f64) -> Result<GeneratedState> {
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::Domain(format!("b must lie in (0, 1), got {b}")));
    }
    let x1 = diag(&[ONE, ONE, ONE, ONE, ZERO]);
    let s = ha_s_matrix(b);
    let f = StructuredFactor::assemble(
        profile(&[2, 5])?,
        &[x1, zeros(5, 5)],
        |_, _, _| s.clone(),
        PRECONDITION_TOL,
    )?;
    Builder::new("ha")
        .param("b", b)
        .expect(Expected {
            ppt: Some(true),
            sppt: Some(true),
            ssppt: Some(false),
            separable: Some(false),
            ..Default::default()
        })
        .build_from_factor(f)
}

/// `ρ ∝ |v⟩⟨v|`, `v = e₀ + e₆` on `2 ⊗ 2 ⊗ 2`: SSPPT under the legacy definition but not PPT.
///
/// The attached factor uses the merged profile `4 ⊗ 2` of the legacy definition.
pub fn yuzhao_counterexample() -> Result<GeneratedState> {
    let x11 = diag(&[ONE, ZERO]);
    let flat = profile(&[4, 2])?;
    let blocks = [x11, zeros(2, 2), zeros(2, 2), zeros(2, 2)];
    // Block (0,3) equals X₁₁, which forces S_{0,3} = 1 on the range of X₁₁.
    let f = StructuredFactor::assemble(
        flat,
        &blocks,
        |alpha, _, j| {
            if alpha[0] == 0 && j == 3 {
                identity(2)
            } else {
                zeros(2, 2)
            }
        },
        PRECONDITION_TOL,
    )?;
    let trace = f.gram().trace().re;
    let rho = DensityMatrix::new(hermitize(f.gram() / real(trace)), profile(&[2, 2, 2])?)?;
    let truth = Builder::new("yuzhao")
        .expect(Expected {
            ppt: Some(false),
            sppt: Some(false),
            ssppt: Some(false),
            legacy_ssppt: Some(true),
            separable: Some(false),
            rank: Some(1),
        })
        .truth(trace);
    Ok(GeneratedState {
        rho,
        factor: Some(f.scaled(1.0 / trace)),
        truth,
    })
}

/// `ρ = Σ_α p_α |α⟩⟨α| ⊗ ρ_α` over the level multi-indices `α`, with `X_α = √p_α · chol(ρ_α)` and all free `S = 0`.
pub fn cq_state(dims: &[usize], weights: &[f64], blocks: &[CMatrix]) -> Result<GeneratedState> {
    let prof = profile(dims)?;
    if prof.num_subsystems() < 2 {
        return Err(Error::Domain(
            "a CQ state needs at least two subsystems".into(),
        ));
    }
    let nb = prof.num_blocks();
    let n0 = prof.carrier();
    if weights.len() != nb || blocks.len() != nb {
        return Err(Error::Shape(format!("expected {nb} weights and blocks")));
    }
    if weights.iter().any(|&p| p < 0.0 || !p.is_finite())
        || (weights.iter().sum::<f64>() - 1.0).abs() > PRECONDITION_TOL
    {
        return Err(Error::Domain(
            "weights must be nonnegative and sum to 1".into(),
        ));
    }
    let mut xs = Vec::with_capacity(nb);
    for (i, (b, &p)) in blocks.iter().zip(weights).enumerate() {
        if b.shape() != (n0, n0) {
            return Err(Error::Shape(format!("block {i} has shape {:?}", b.shape())));
        }
        if (b.trace().re - 1.0).abs() > PRECONDITION_TOL || min_eigenvalue(b) < -PRECONDITION_TOL {
            return Err(Error::Domain(format!("block {i} is not a density matrix")));
        }
        xs.push(cholesky_upper(b) * real(p.sqrt()));
    }
    let f =
        StructuredFactor::assemble(prof.clone(), &xs, |_, _, _| zeros(n0, n0), PRECONDITION_TOL)?;
    Builder::new("cq")
        .param("dims", join(dims))
        .expect(Expected {
            ppt: Some(true),
            sppt: Some(true),
            ssppt: Some(true),
            separable: Some(true),
            ..Default::default()
        })
        .build_from_factor(f)
}

/// Random CQ state: Dirichlet-like weights and random full-rank blocks.
pub fn random_cq_state(dims: &[usize], seed: u64) -> Result<GeneratedState> {
    let prof = profile(dims)?;
    let mut rng = random::rng(seed);
    let nb = prof.num_blocks();
    let n0 = prof.carrier();
    let raw: Vec<f64> = (0..nb).map(|_| uniform(&mut rng, 0.05, 1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let blocks: Vec<CMatrix> = (0..nb).map(|_| random_density(&mut rng, n0)).collect();
    let mut g = cq_state(dims, &weights, &blocks)?;
    g.truth.generator = "cq".into();
    g.truth.seed = Some(seed);
    g.truth.rng = Some(RNG_ALGORITHM.into());
    g.truth.params.insert("seed".into(), seed.to_string());
    Ok(g)
}

fn random_density(rng: &mut Rng, n: usize) -> CMatrix {
    let g = gaussian_matrix(rng, n, n);
    let m = g.adjoint() * &g;
    let t = m.trace();
    hermitize(m / t)
}

fn check_family(mats: &[CMatrix], what: &str) -> Result<()> {
    let (residual, pair) = commutation_residual(mats);
    if residual > PRECONDITION_TOL {
        let (first, second) = pair.expect("positive residual has a pair");
        return Err(Error::Domain(format!(
            "{what}: matrices {first} and {second} are not commuting normal matrices (residual {residual:.3e})"
        )));
    }
    Ok(())
}

/// `ρ = √D (1, B, C, CB)† (1, B, C, CB) √D` on `2 ⊗ 2 ⊗ N`, i.e. `Y₁₁ = √D`, `T₁ = B`, `S₁ = C` and all other blocks zero.
pub fn canonical_22n(b: &CMatrix, c_mat: &CMatrix, d: &CMatrix) -> Result<GeneratedState> {
    let n = d.nrows();
    if b.shape() != (n, n) || c_mat.shape() != (n, n) || d.shape() != (n, n) {
        return Err(Error::Shape(
            "B, C and D must be square of equal size".into(),
        ));
    }
    check_family(&[b.clone(), c_mat.clone()], "B, C")?;
    if min_eigenvalue(d) < -PRECONDITION_TOL * 1f64.max(frobenius(d)) {
        return Err(Error::Domain("D is not positive semidefinite".into()));
    }
    let sqrt_d = psd_sqrt(d);
    let blocks = [sqrt_d.clone(), zeros(n, n), zeros(n, n), zeros(n, n)];
    let f = StructuredFactor::assemble(
        profile(&[2, 2, n])?,
        &blocks,
        |alpha, p, _| {
            if alpha == [0, 0] {
                if p == 0 {
                    c_mat.clone()
                } else {
                    b.clone()
                }
            } else {
                zeros(n, n)
            }
        },
        PRECONDITION_TOL,
    )?;
    let rank = crate::linalg::numeric_rank(d, 1e-10);
    Builder::new("canonical-22n")
        .param("n", n)
        .expect(Expected {
            ppt: Some(true),
            sppt: Some(true),
            ssppt: Some(true),
            separable: Some(true),
            rank: Some(rank),
            ..Default::default()
        })
        .build_from_factor(f)
}

/// Random commuting normal `B`, `C` sharing an eigenbasis and a positive definite `D`.
pub fn random_canonical_22n(n: usize, seed: u64) -> Result<GeneratedState> {
    let mut rng = random::rng(seed);
    let u = random_unitary(&mut rng, n);
    let lb: Vec<C64> = (0..n).map(|_| complex_normal(&mut rng)).collect();
    let lc: Vec<C64> = (0..n).map(|_| complex_normal(&mut rng)).collect();
    let b = &u * diag(&lb) * u.adjoint();
    let cm = &u * diag(&lc) * u.adjoint();
    let g = gaussian_matrix(&mut rng, n, n);
    let d = g.adjoint() * &g + identity(n) * real(0.1);
    let mut out = canonical_22n(&b, &cm, &d)?;
    out.truth.seed = Some(seed);
    out.truth.rng = Some(RNG_ALGORITHM.into());
    out.truth.params.insert("seed".into(), seed.to_string());
    Ok(out)
}

/// `ρ = T†T` with `T[β] = D¹_{j₁} ⋯ D^d_{j_d}`: `X_{α₀} = 1` at `α₀ = (0, …, 0)` and `S^p_{α₀,j} = D^p_j`.
///
/// `families[p]` lists `D^p_0 = 1, D^p_1, …`; all matrices must be mutually commuting and normal.
pub fn canonical_multipartite(dims: &[usize], families: &[Vec<CMatrix>]) -> Result<GeneratedState> {
    let prof = profile(dims)?;
    let levels = prof.levels().to_vec();
    let n0 = prof.carrier();
    if families.len() != levels.len() {
        return Err(Error::Shape(format!("expected {} families", levels.len())));
    }
    let mut all = Vec::new();
    for (p, fam) in families.iter().enumerate() {
        if fam.len() != levels[p] || fam.iter().any(|m| m.shape() != (n0, n0)) {
            return Err(Error::Shape(format!(
                "family {p} must hold {} matrices of size {n0}",
                levels[p]
            )));
        }
        if frobenius(&(&fam[0] - identity(n0))) > PRECONDITION_TOL {
            return Err(Error::Domain(format!(
                "family {p} must start with the identity"
            )));
        }
        all.extend(fam.iter().skip(1).cloned());
    }
    if !all.is_empty() {
        check_family(&all, "D matrices")?;
    }
    let nb = prof.num_blocks();
    let mut blocks = vec![zeros(n0, n0); nb];
    blocks[0] = identity(n0);
    let f = StructuredFactor::assemble(
        prof,
        &blocks,
        |alpha, p, j| {
            if alpha.iter().all(|&i| i == 0) {
                families[p][j].clone()
            } else {
                zeros(n0, n0)
            }
        },
        PRECONDITION_TOL,
    )?;
    Builder::new("canonical-multipartite")
        .param("dims", join(dims))
        .expect(Expected {
            ppt: Some(true),
            sppt: Some(true),
            ssppt: Some(true),
            separable: Some(true),
            rank: Some(n0),
            ..Default::default()
        })
        .build_from_factor(f)
}

pub fn random_canonical_multipartite(dims: &[usize], seed: u64) -> Result<GeneratedState> {
    let prof = profile(dims)?;
    let n0 = prof.carrier();
    let mut rng = random::rng(seed);
    let u = random_unitary(&mut rng, n0);
    let families: Vec<Vec<CMatrix>> = prof
        .levels()
        .iter()
        .map(|&np| {
            (0..np)
                .map(|j| {
                    if j == 0 {
                        identity(n0)
                    } else {
                        let l: Vec<C64> = (0..n0).map(|_| complex_normal(&mut rng)).collect();
                        &u * diag(&l) * u.adjoint()
                    }
                })
                .collect()
        })
        .collect();
    let mut out = canonical_multipartite(dims, &families)?;
    out.truth.seed = Some(seed);
    out.truth.rng = Some(RNG_ALGORITHM.into());
    out.truth.params.insert("seed".into(), seed.to_string());
    Ok(out)
}

/// `ρ = |v⟩⟨v| / ⟨v|v⟩`.
pub fn pure_state(v: &CVector, dims: &[usize]) -> Result<GeneratedState> {
    let prof = profile(dims)?;
    if v.len() != prof.total() {
        return Err(Error::Shape(format!(
            "vector of length {} does not match {prof}",
            v.len()
        )));
    }
    Builder::new("pure")
        .param("dims", join(dims))
        .build_from_matrix(v * v.adjoint(), prof)
}

/// Factor of `|f₁ ⊗ ⋯ ⊗ f_d ⊗ f₀⟩⟨⋯|` (the last entry of `factors` on the carrier).
///
/// With `w_p = conj(f_p)` and `α*` the first nonzero index of each `w_p`, the only
/// nonzero diagonal block `X_{α*}` has first row `∏ w_{p,i_p} · w₀`, and
/// `S^p_{α*,j} = diag(w_{p,j}/w_{p,i_p}, 0, …, 0)`.
pub fn pure_product_sppt_factor(factors: &[CVector]) -> Result<StructuredFactor> {
    if factors.len() < 2 {
        return Err(Error::Domain(
            "need at least one level factor and a carrier factor".into(),
        ));
    }
    let dims: Vec<usize> = factors.iter().map(|f| f.len()).collect();
    let prof = profile(&dims)?;
    let levels = prof.levels().to_vec();
    let n0 = prof.carrier();
    let w: Vec<CVector> = factors.iter().map(|f| f.map(|z| z.conj())).collect();
    let mut star = Vec::with_capacity(levels.len());
    for (p, wp) in w[..levels.len()].iter().enumerate() {
        match wp.iter().position(|z| z.norm() > 0.0) {
            Some(i) => star.push(i),
            None => return Err(Error::Domain(format!("factor {p} is zero"))),
        }
    }
    if w[levels.len()].norm() == 0.0 {
        return Err(Error::Domain("carrier factor is zero".into()));
    }
    let lead: C64 = star.iter().enumerate().map(|(p, &i)| w[p][i]).product();
    let mut blocks = vec![zeros(n0, n0); prof.num_blocks()];
    let a_star = crate::profile::linear_index(&levels, &star)?;
    for k in 0..n0 {
        blocks[a_star][(0, k)] = lead * w[levels.len()][k];
    }
    StructuredFactor::assemble(
        prof,
        &blocks,
        |alpha, p, j| {
            let mut s = zeros(n0, n0);
            if alpha == star.as_slice() {
                s[(0, 0)] = w[p][j] / w[p][star[p]];
            }
            s
        },
        PRECONDITION_TOL,
    )
}

/// Pure product state with the factor from [`pure_product_sppt_factor`].
pub fn pure_product_state(factors: &[CVector]) -> Result<GeneratedState> {
    let f = pure_product_sppt_factor(factors)?;
    let dims: Vec<usize> = factors.iter().map(|f| f.len()).collect();
    Builder::new("pure-product")
        .param("dims", join(&dims))
        .expect(Expected {
            ppt: Some(true),
            sppt: Some(true),
            ssppt: Some(true),
            separable: Some(true),
            rank: Some(1),
            ..Default::default()
        })
        .build_from_factor(f)
}

pub fn random_pure_product(dims: &[usize], seed: u64) -> Result<GeneratedState> {
    let mut rng = random::rng(seed);
    let factors: Vec<CVector> = dims.iter().map(|&d| gaussian_vector(&mut rng, d)).collect();
    let mut out = pure_product_state(&factors)?;
    out.truth.seed = Some(seed);
    out.truth.rng = Some(RNG_ALGORITHM.into());
    out.truth.params.insert("seed".into(), seed.to_string());
    Ok(out)
}

/// `(|00⟩ + |11⟩)/√2`.
pub fn bell() -> Result<GeneratedState> {
    let mut v = CVector::zeros(4);
    v[0] = ONE;
    v[3] = ONE;
    let mut g = pure_state(&v, &[2, 2])?;
    g.truth.generator = "bell".into();
    g.truth.expected = Expected {
        ppt: Some(false),
        sppt: Some(false),
        ssppt: Some(false),
        separable: Some(false),
        rank: Some(1),
        ..Default::default()
    };
    Ok(g)
}

/// `(|0…0⟩ + |1…1⟩)/√2` on `n ≥ 2` qubits.
pub fn ghz(n: usize) -> Result<GeneratedState> {
    if n < 2 {
        return Err(Error::Domain("GHZ needs at least two qubits".into()));
    }
    let dims = vec![2; n];
    let total = 1usize << n;
    let mut v = CVector::zeros(total);
    v[0] = ONE;
    v[total - 1] = ONE;
    let mut g = pure_state(&v, &dims)?;
    g.truth.generator = "ghz".into();
    g.truth.params.insert("n".into(), n.to_string());
    g.truth.expected = Expected {
        ppt: Some(false),
        sppt: Some(false),
        ssppt: Some(false),
        separable: Some(false),
        rank: Some(1),
        ..Default::default()
    };
    Ok(g)
}

/// `1 / dim`.
pub fn maximally_mixed(dims: &[usize]) -> Result<GeneratedState> {
    let prof = profile(dims)?;
    let n = prof.total();
    let f = StructuredFactor::assemble(
        prof.clone(),
        &vec![identity(prof.carrier()); prof.num_blocks()],
        |_, _, _| zeros(prof.carrier(), prof.carrier()),
        PRECONDITION_TOL,
    )?;
    Builder::new("maximally-mixed")
        .param("dims", join(dims))
        .expect(Expected {
            ppt: Some(true),
            sppt: Some(true),
            ssppt: Some(true),
            separable: Some(true),
            rank: Some(n),
            ..Default::default()
        })
        .build_from_factor(f)
}

#[derive(Debug, Clone, Default)]
pub struct SspptOptions {
    /// Blocks `α` whose `X_α` is nonzero (all when `None`).
    pub active: Option<Vec<bool>>,
    /// Rank of each `X_α` (its trailing rows are zeroed); full when `None`.
    pub ranks: Option<Vec<usize>>,
}

/// SSPPT by construction: per block `α`, `S^p_{α,j} = U_α Λ^p_{α,j} U_α†` with one random unitary
/// and random diagonals, and `X_α` upper triangular with positive diagonal (so the canonical
/// factor reproduces it). A reduced rank `k` uses `X_α = U_α R` with `R` keeping `k` rows.
pub fn random_ssppt(dims: &[usize], seed: u64) -> Result<GeneratedState> {
    random_ssppt_with(dims, seed, &SspptOptions::default())
}

pub fn random_ssppt_with(dims: &[usize], seed: u64, opts: &SspptOptions) -> Result<GeneratedState> {
    let prof = profile(dims)?;
    if prof.num_subsystems() < 2 {
        return Err(Error::Domain("need at least two subsystems".into()));
    }
    let nb = prof.num_blocks();
    let n0 = prof.carrier();
    let levels = prof.levels().to_vec();
    let active = opts.active.clone().unwrap_or_else(|| vec![true; nb]);
    if active.len() != nb || !active.iter().any(|&a| a) {
        return Err(Error::Domain(format!(
            "active mask must have {nb} entries with at least one set"
        )));
    }
    let ranks: Vec<usize> = match &opts.ranks {
        Some(r) if r.len() != nb || r.iter().any(|&k| k > n0) => {
            return Err(Error::Domain(format!(
                "ranks must have {nb} entries, each at most {n0}"
            )));
        }
        Some(r) => r
            .iter()
            .zip(&active)
            .map(|(&k, &a)| if a { k } else { 0 })
            .collect(),
        None => active.iter().map(|&a| if a { n0 } else { 0 }).collect(),
    };
    if ranks.iter().all(|&k| k == 0) {
        return Err(Error::Domain("every block has rank zero".into()));
    }
    let mut rng = random::rng(seed);
    let mut xs = Vec::with_capacity(nb);
    let mut smats: Vec<Vec<Vec<CMatrix>>> = Vec::with_capacity(nb);
    for &rank in &ranks {
        let u = random_unitary(&mut rng, n0);
        let per_level: Vec<Vec<CMatrix>> = levels
            .iter()
            .map(|&np| {
                (0..np)
                    .map(|_| {
                        let l: Vec<C64> = (0..n0).map(|_| complex_normal(&mut rng) * 0.8).collect();
                        &u * diag(&l) * u.adjoint()
                    })
                    .collect()
            })
            .collect();
        smats.push(per_level);
        let mut x = random_upper(&mut rng, n0);
        if rank < n0 {
            // Truncate in the eigenbasis of the S family so the whole block row keeps rank `rank`.
            x.rows_mut(rank, n0 - rank).fill(ZERO);
            x = &u * x;
        }
        xs.push(x);
    }
    let f = StructuredFactor::assemble(
        prof.clone(),
        &xs,
        |alpha, p, j| smats[prof_index(&levels, alpha)][p][j].clone(),
        PRECONDITION_TOL,
    )?;
    let rank = ranks.iter().sum();
    let mut b = Builder::new("random-ssppt")
        .param("dims", join(dims))
        .seed(seed)
        .expect(Expected {
            ppt: Some(true),
            sppt: Some(true),
            ssppt: Some(true),
            separable: Some(true),
            rank: Some(rank),
            ..Default::default()
        });
    if opts.active.is_some() {
        let mask: String = active.iter().map(|&a| if a { '1' } else { '0' }).collect();
        b = b.param("active", mask);
    }
    if opts.ranks.is_some() {
        b = b.param("ranks", join(&ranks));
    }
    b.build_from_factor(f)
}

fn prof_index(levels: &[usize], alpha: &[usize]) -> usize {
    alpha
        .iter()
        .zip(levels)
        .fold(0, |acc, (&i, &n)| acc * n + i)
}

/// Upper-triangular matrix with diagonal in `[0.5, 1.5)` and Gaussian entries above it.
fn random_upper(rng: &mut Rng, n: usize) -> CMatrix {
    let mut m = zeros(n, n);
    for i in 0..n {
        m[(i, i)] = real(uniform(rng, 0.5, 1.5));
        for j in i + 1..n {
            m[(i, j)] = complex_normal(rng) * 0.5;
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SKind {
    /// `σ_max(S) < 1`, generally not normal.
    Contractive,
    /// Normal `S` with spectral radius above 1.
    Normal,
}

impl std::str::FromStr for SKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contractive" => Ok(SKind::Contractive),
            "normal" => Ok(SKind::Normal),
            other => Err(Error::Domain(format!("unknown S kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for SKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SKind::Contractive => "contractive",
            SKind::Normal => "normal",
        })
    }
}

/// SPPT state on `2 ⊗ d` with `rank X₁ = r`.
///
/// `X₁ = V [X₀; 0]` and `S = V (S₀ ⊕ K) V†` with `S₀` normal, so `X₁†[S, S†]X₁ = 0`
/// while `K` may be arbitrary. The factor is rotated to upper-triangular form.
pub fn random_sppt_2xd(d: usize, kind: SKind, rank_x1: usize, seed: u64) -> Result<GeneratedState> {
    if d < 2 || rank_x1 == 0 || rank_x1 > d {
        return Err(Error::Domain(format!(
            "need d ≥ 2 and 1 ≤ rank ≤ d, got d={d}, rank={rank_x1}"
        )));
    }
    let mut rng = random::rng(seed);
    let r = rank_x1;
    let v = random_unitary(&mut rng, d);
    let w = random_unitary(&mut rng, r);
    let eig: Vec<C64> = (0..r)
        .map(|_| {
            let z = complex_normal(&mut rng);
            match kind {
                SKind::Contractive => z / real(z.norm()) * uniform(&mut rng, 0.1, 0.9),
                SKind::Normal => z / real(z.norm()) * uniform(&mut rng, 1.2, 2.5),
            }
        })
        .collect();
    let s0 = &w * diag(&eig) * w.adjoint();
    let mut core = zeros(d, d);
    core.view_mut((0, 0), (r, r)).copy_from(&s0);
    if r < d {
        let k = gaussian_matrix(&mut rng, d - r, d - r);
        let k = match kind {
            SKind::Contractive => {
                let n = crate::linalg::spectral_norm(&k);
                k * real(0.8 / n.max(1e-12))
            }
            SKind::Normal => {
                let u = random_unitary(&mut rng, d - r);
                let l: Vec<C64> = (0..d - r).map(|_| complex_normal(&mut rng) * 2.0).collect();
                &u * diag(&l) * u.adjoint()
            }
        };
        core.view_mut((r, r), (d - r, d - r)).copy_from(&k);
    }
    let s = &v * core * v.adjoint();
    let mut x0 = zeros(d, d);
    x0.view_mut((0, 0), (r, d))
        .copy_from(&gaussian_matrix(&mut rng, r, d));
    let x1 = &v * x0;
    let x2 = random_upper(&mut rng, d) * real(0.5);
    // Triangularise the first block row: X₁ = Q R, so (R, Q†SQ) describes the same state.
    let (q, rmat) = triangularize(&x1);
    let s_rot = q.adjoint() * &s * &q;
    let f = StructuredFactor::assemble(
        profile(&[2, d])?,
        &[rmat, x2],
        |_, _, _| s_rot.clone(),
        PRECONDITION_TOL,
    )?;
    Builder::new("random-sppt-2xd")
        .param("d", d)
        .param("kind", kind)
        .param("rank_x1", r)
        .seed(seed)
        .expect(Expected {
            ppt: Some(true),
            sppt: Some(true),
            separable: Some(true),
            ..Default::default()
        })
        .build_from_factor(f)
}

/// `m = Q R` with `R` upper triangular with real nonnegative diagonal where possible.
fn triangularize(m: &CMatrix) -> (CMatrix, CMatrix) {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    let n = r.nrows();
    for i in 0..n {
        let d = r[(i, i)];
        if d.norm() > 0.0 {
            let ph = d / real(d.norm());
            for j in 0..r.ncols() {
                r[(i, j)] /= ph;
            }
            for k in 0..q.nrows() {
                q[(k, i)] *= ph;
            }
        }
    }
    (q, r)
}

/// SPPT state on `2 ⊗ d` with `A − D` positive definite: invertible `X₁`, normal `S` with
/// `‖S‖ ≤ 0.7` and a small `X₂`. Without normality of `S` the state need not even be PPT.
pub fn random_a_greater_d(d: usize, seed: u64) -> Result<GeneratedState> {
    if d < 2 {
        return Err(Error::Domain("need d ≥ 2".into()));
    }
    let mut rng = random::rng(seed);
    for _ in 0..100 {
        let x1 = identity(d) + strict_upper(&mut rng, d) * real(0.3);
        let u = random_unitary(&mut rng, d);
        let l: Vec<C64> = (0..d).map(|_| complex_normal(&mut rng)).collect();
        let top = l.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-12);
        let s = &u * diag(&l) * u.adjoint() * real(0.7 / top);
        let x2 = random_upper(&mut rng, d) * real(0.2);
        let a = x1.adjoint() * &x1;
        let dm = x1.adjoint() * s.adjoint() * &s * &x1 + x2.adjoint() * &x2;
        if min_eigenvalue(&(a - dm)) <= 1e-3 {
            continue;
        }
        let f = StructuredFactor::assemble(
            profile(&[2, d])?,
            &[x1, x2],
            |_, _, _| s.clone(),
            PRECONDITION_TOL,
        )?;
        return Builder::new("a-greater-d")
            .param("d", d)
            .seed(seed)
            .expect(Expected {
                ppt: Some(true),
                sppt: Some(true),
                ssppt: Some(true),
                separable: Some(true),
                ..Default::default()
            })
            .build_from_factor(f);
    }
    Err(Error::Consistency(
        "no draw with A > D in 100 attempts".into(),
    ))
}

fn strict_upper(rng: &mut Rng, n: usize) -> CMatrix {
    let mut m = zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            m[(i, j)] = complex_normal(rng);
        }
    }
    m
}

fn join(dims: &[usize]) -> String {
    dims.iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// `|x⟩ = ⊗ parts`, for building test vectors.
pub fn product_ket(parts: &[CVector]) -> CVector {
    kron_all(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::canonical_factor;
    use crate::sppt::{
        sppt_bipartite, sppt_multipartite, ssppt_bipartite, ssppt_multipartite, ssppt_yuzhao,
    };

    #[test]
    fn ha_raw_trace_and_supplied_factor() {
        let g = ha_state(0.5).unwrap();
        assert!((g.truth.unnormalized_trace - 9.0).abs() < 1e-12);
        let f = g.factor.as_ref().unwrap();
        assert!(sppt_bipartite(f, 1e-8).unwrap().holds);
        assert!(!ssppt_bipartite(f, 1e-8).unwrap().holds);
        // The canonical factor compresses S and loses the SPPT structure.
        let canon = canonical_factor(&g.rho, 1e-9).unwrap();
        assert!(!sppt_bipartite(&canon, 1e-8).unwrap().holds);
    }

    #[test]
    fn ha_rejects_out_of_range_parameter() {
        assert!(matches!(ha_state(1.0), Err(Error::Domain(_))));
        assert!(matches!(ha_state(0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn yuzhao_is_legacy_ssppt_but_not_ppt() {
        let g = yuzhao_counterexample().unwrap();
        assert!(!crate::density::is_ppt(&g.rho, 1e-9).unwrap().is_ppt);
        assert!(
            ssppt_yuzhao(g.factor.as_ref().unwrap(), 1e-8)
                .unwrap()
                .holds
        );
        let canon = canonical_factor(&g.rho, 1e-9).unwrap();
        assert!(!canon.is_representable());
        assert!(ssppt_yuzhao(&canon, 1e-8).unwrap().holds);
    }

    #[test]
    fn random_ssppt_canonical_factor_matches_truth() {
        let g = random_ssppt(&[2, 3, 2], 7).unwrap();
        let canon = canonical_factor(&g.rho, 1e-9).unwrap();
        let truth = g.factor.as_ref().unwrap();
        assert!(crate::linalg::frobenius(&(canon.x() - truth.x())) < 1e-9);
        assert!(ssppt_multipartite(&canon, 1e-8).unwrap().holds);
    }

    #[test]
    fn rank_deficient_ssppt_has_expected_rank() {
        let opts = SspptOptions {
            active: Some(vec![true, false, false, true]),
            ..Default::default()
        };
        let g = random_ssppt_with(&[2, 2, 2], 3, &opts).unwrap();
        assert_eq!(g.rho.rank(1e-9), 4);
        let canon = canonical_factor(&g.rho, 1e-9).unwrap();
        assert!(canon.is_representable());
        assert!(ssppt_multipartite(&canon, 1e-8).unwrap().holds);
    }

    #[test]
    fn cq_and_canonical_families_are_ssppt() {
        for g in [
            random_cq_state(&[3, 2], 1).unwrap(),
            random_canonical_22n(3, 2).unwrap(),
            random_canonical_multipartite(&[2, 3, 2], 4).unwrap(),
            random_pure_product(&[2, 3, 2], 5).unwrap(),
            maximally_mixed(&[2, 2]).unwrap(),
        ] {
            let f = g.factor.as_ref().unwrap();
            assert!(f.is_representable(), "{}", g.truth.generator);
            assert!(
                ssppt_multipartite(f, 1e-8).unwrap().holds,
                "{}",
                g.truth.generator
            );
            assert!((g.rho.trace() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn canonical_22n_rejects_non_commuting_inputs() {
        let mut b = zeros(2, 2);
        b[(0, 1)] = ONE;
        let err = canonical_22n(&b, &identity(2), &identity(2)).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn random_sppt_2xd_both_kinds_are_sppt() {
        for kind in [SKind::Contractive, SKind::Normal] {
            for r in 1..=5 {
                let g = random_sppt_2xd(5, kind, r, 11).unwrap();
                let f = g.factor.as_ref().unwrap();
                assert!(f.is_representable());
                assert!(sppt_multipartite(f, 1e-8).unwrap().holds, "{kind} rank {r}");
                let canon = canonical_factor(&g.rho, 1e-9).unwrap();
                assert!(
                    sppt_bipartite(&canon, 1e-8).unwrap().holds,
                    "{kind} rank {r} canonical"
                );
            }
        }
    }

    #[test]
    fn seeded_generators_repeat() {
        let a = random_ssppt(&[3, 3], 9).unwrap();
        let b = random_ssppt(&[3, 3], 9).unwrap();
        assert_eq!(a.rho.matrix(), b.rho.matrix());
        assert_eq!(a.truth.rng.as_deref(), Some("chacha8"));
    }
}
