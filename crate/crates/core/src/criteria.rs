//! Sufficient separability conditions for `2 ⊗ d` SPPT states, edge-state detection,
//! the `2 ⊗ 5` classification and the rank-4 product-vector analysis.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::density::{partial_transpose, DensityMatrix};
use crate::error::{Error, Result};
use crate::factor::{canonical_factor, StructuredFactor, TwoByDBlocks};
use crate::linalg::{
    column_space, comm, frobenius, identity, kron, kron_all, min_eigenvalue, null_space,
    numeric_rank, psd_range, real, spectral_norm, subspace_residual, CMatrix, CVector, C64, ONE,
};
use crate::poly::{interpolate_unit_circle, unit_circle};
use crate::product::{
    kernel, product_vector_factorize, product_vectors_in_range_2xd, qubit, Parameter, Pencil,
};
use crate::random;
use crate::sppt::sppt_bipartite;

/// Strict positivity margin (relative to the trace) for `A − D` and the relaxed condition.
pub const POSITIVITY_MARGIN: f64 = 1e-10;
/// Relative cutoff for numeric ranks and ranges.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conclusion {
    Separable,
    Entangled,
    Undetermined,
}

impl std::fmt::Display for Conclusion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Conclusion::Separable => "separable",
            Conclusion::Entangled => "entangled",
            Conclusion::Undetermined => "undetermined",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub criterion: String,
    pub conclusion: Conclusion,
    pub evidence: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, f64>,
    /// Product vectors backing the conclusion (kets in the full space).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub product_vectors: Vec<Vec<C64>>,
}

impl CriterionResult {
    fn new(criterion: &str, conclusion: Conclusion, evidence: impl Into<String>) -> Self {
        Self {
            criterion: criterion.to_string(),
            conclusion,
            evidence: evidence.into(),
            values: BTreeMap::new(),
            product_vectors: Vec::new(),
        }
    }

    fn value(mut self, key: &str, v: f64) -> Self {
        if v.is_finite() {
            self.values.insert(key.to_string(), v);
        }
        self
    }

    fn vector(mut self, v: &CVector) -> Self {
        self.product_vectors.push(v.iter().copied().collect());
        self
    }

    pub fn is_separable(&self) -> bool {
        self.conclusion == Conclusion::Separable
    }
}

/// Criterion ids of the `2 ⊗ d` battery, in evaluation order.
pub const BATTERY: [&str; 7] = [
    "dimension",
    "full-rank-x1",
    "contractive",
    "normal",
    "range-inclusion",
    "a-greater-than-d",
    "relaxed-a-d",
];

/// `‖X₁†[S, S†]X₁‖_F`, scaled like the bipartite SPPT equations.
fn sppt_residual_2xd(b: &TwoByDBlocks) -> f64 {
    let scale = (frobenius(&b.x1).powi(2) + frobenius(&b.x2).powi(2))
        * 1f64.max(spectral_norm(&b.s).powi(2));
    if scale == 0.0 {
        return 0.0;
    }
    frobenius(&(b.x1.adjoint() * comm(&b.s, &b.s.adjoint()) * &b.x1)) / scale
}

/// `‖M − QQ†M‖_F / ‖M‖_F`.
fn outside(q: &CMatrix, m: &CMatrix) -> f64 {
    let n = frobenius(m);
    if n == 0.0 {
        return 0.0;
    }
    frobenius(&(m - q * (q.adjoint() * m))) / n
}

/// Evaluates every criterion. All of them presuppose the SPPT condition and report
/// "undetermined" without it; `A > D` alone does not even imply PPT.
pub fn criterion_battery_2xd(blocks: &TwoByDBlocks, tol: f64) -> Result<Vec<CriterionResult>> {
    let d = blocks.dim();
    if blocks.x2.shape() != (d, d) || blocks.s.shape() != (d, d) || blocks.a.shape() != (d, d) {
        return Err(Error::Shape("inconsistent 2⊗d blocks".into()));
    }
    let sppt_res = sppt_residual_2xd(blocks);
    let sppt_ok = blocks.representable && sppt_res <= tol;
    let gate = |id: &str| {
        let why = if blocks.representable {
            format!("needs X₁†[S,S†]X₁ = 0; residual {sppt_res:.3e}")
        } else {
            format!(
                "factor lacks the S·X structure (residual {:.3e})",
                blocks.residual
            )
        };
        CriterionResult::new(id, Conclusion::Undetermined, why).value("sppt_residual", sppt_res)
    };
    let verdict = |ok: bool| {
        if ok {
            Conclusion::Separable
        } else {
            Conclusion::Undetermined
        }
    };
    let mut out = Vec::with_capacity(BATTERY.len());

    out.push(if sppt_ok {
        CriterionResult::new("dimension", verdict(d <= 4), format!("d = {d}")).value("d", d as f64)
    } else {
        gate("dimension")
    });

    let rank = numeric_rank(&blocks.x1, RANK_TOL);
    out.push(if sppt_ok {
        CriterionResult::new(
            "full-rank-x1",
            verdict(rank == d),
            format!("rank X₁ = {rank} of {d}"),
        )
        .value("rank_x1", rank as f64)
    } else {
        gate("full-rank-x1")
    });

    let smax = spectral_norm(&blocks.s);
    out.push(if sppt_ok {
        CriterionResult::new(
            "contractive",
            verdict(smax <= 1.0 + tol),
            format!("σ_max(S) = {smax:.6}"),
        )
        .value("sigma_max", smax)
    } else {
        gate("contractive")
    });

    let normality = frobenius(&comm(&blocks.s, &blocks.s.adjoint())) / 1f64.max(smax * smax);
    out.push(if sppt_ok {
        CriterionResult::new(
            "normal",
            verdict(normality <= tol),
            format!("‖[S,S†]‖ = {normality:.3e}"),
        )
        .value("commutator", normality)
    } else {
        gate("normal")
    });

    let q = column_space(&blocks.x1, RANK_TOL);
    let (r_s, r_sd) = (outside(&q, &blocks.s), outside(&q, &blocks.s.adjoint()));
    out.push(if sppt_ok {
        CriterionResult::new(
            "range-inclusion",
            verdict(r_s <= tol || r_sd <= tol),
            format!("Im(S) off Im(X₁) by {r_s:.3e}, Im(S†) by {r_sd:.3e}"),
        )
        .value("image_s", r_s)
        .value("image_s_dagger", r_sd)
    } else {
        gate("range-inclusion")
    });

    let trace = (blocks.a.trace() + blocks.d.trace())
        .re
        .max(f64::MIN_POSITIVE);
    let margin = POSITIVITY_MARGIN * trace;
    let ad = min_eigenvalue(&(&blocks.a - &blocks.d));
    out.push(if sppt_ok {
        CriterionResult::new(
            "a-greater-than-d",
            verdict(ad > margin),
            format!("λ_min(A − D) = {ad:.3e}"),
        )
        .value("min_eigenvalue", ad)
    } else {
        gate("a-greater-than-d").value("min_eigenvalue", ad)
    });

    let x1 = &blocks.x1;
    let relaxed = x1.adjoint() * x1 - x1.adjoint() * blocks.s.adjoint() * &blocks.s * x1;
    let rl = min_eigenvalue(&relaxed);
    out.push(if sppt_ok {
        CriterionResult::new(
            "relaxed-a-d",
            verdict(rl > margin),
            format!("λ_min(X₁†X₁ − X₁†S†SX₁) = {rl:.3e}"),
        )
        .value("min_eigenvalue", rl)
    } else {
        gate("relaxed-a-d").value("min_eigenvalue", rl)
    });
    Ok(out)
}

/// First separable criterion of the battery, or "undetermined".
pub fn battery_summary(results: &[CriterionResult]) -> CriterionResult {
    match results.iter().find(|r| r.is_separable()) {
        Some(r) => {
            let mut s = CriterionResult::new(
                "battery",
                Conclusion::Separable,
                format!("criterion {} holds", r.criterion),
            );
            s.values = r.values.clone();
            s
        }
        None => CriterionResult::new(
            "battery",
            Conclusion::Undetermined,
            "no sufficient criterion applies",
        ),
    }
}

/// Product pair `x ⊗ y ∈ R(σ)` with `x̄ ⊗ y ∈ R(σ^{T₁})`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWitness {
    pub x: CVector,
    pub y: CVector,
    pub range_residual: f64,
    pub pt_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeMethod {
    /// Both ranges are everything on the local support.
    Trivial,
    /// Finitely many product vectors in `R(σ)`, each checked.
    RangeHits,
    /// Finitely many product vectors in `R(σ^{T₁})`, each checked.
    PtRangeHits,
    /// Kernel of one pencil spanned by cofactors; compatibility reduced to one polynomial.
    Cofactor,
    /// Sampled parameters with local minimisation; not exhaustive.
    ProbeGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeReport {
    /// `Some(true)` edge, `Some(false)` witness found, `None` inconclusive.
    pub edge: Option<bool>,
    pub method: EdgeMethod,
    pub rank: usize,
    pub rank_pt: usize,
    /// Rank of `Tr_A σ`.
    pub local_rank: usize,
    pub candidates: usize,
    pub witness: Option<EdgeWitness>,
    /// Smallest `σ_min` of the joint constraint matrix over the candidates.
    pub closest: f64,
}

impl EdgeReport {
    pub fn result(&self) -> CriterionResult {
        let (conclusion, evidence) = match self.edge {
            Some(true) => (
                Conclusion::Entangled,
                "edge state: no compatible product pair".to_string(),
            ),
            Some(false) => (
                Conclusion::Undetermined,
                "not an edge state: compatible product pair found".to_string(),
            ),
            None => (
                Conclusion::Undetermined,
                "edge test inconclusive".to_string(),
            ),
        };
        let mut r = CriterionResult::new(
            "edge-state",
            conclusion,
            format!("{evidence} ({:?})", self.method),
        )
        .value("rank", self.rank as f64)
        .value("rank_pt", self.rank_pt as f64)
        .value("local_rank", self.local_rank as f64)
        .value("candidates", self.candidates as f64)
        .value("closest", self.closest);
        if let Some(w) = &self.witness {
            r = r
                .value("range_residual", w.range_residual)
                .value("pt_residual", w.pt_residual)
                .vector(&kron_all(&[w.x.clone(), w.y.clone()]))
                .vector(&kron_all(&[w.x.map(|z| z.conj()), w.y.clone()]));
        }
        r
    }
}

/// Ranges of `σ` and `σ^{T₁}` written on `C² ⊗ Q`, `Q` the range of `Tr_A σ`.
struct EdgeProblem {
    lift: CMatrix,
    range: CMatrix,
    range_pt: CMatrix,
    p1: Pencil,
    p2: Pencil,
    m1: usize,
    m2: usize,
    r: usize,
}

impl EdgeProblem {
    fn joint(&self, t: Parameter) -> CMatrix {
        let a = self.p1.at(t);
        let b = self.p2.at(t.map(|z| z.conj()));
        let mut j = CMatrix::zeros(a.nrows() + b.nrows(), self.r);
        j.view_mut((0, 0), a.shape()).copy_from(&a);
        j.view_mut((a.nrows(), 0), b.shape()).copy_from(&b);
        j
    }

    fn smin(&self, t: Parameter) -> f64 {
        if self.m1 + self.m2 < self.r {
            return 0.0;
        }
        kernel(&self.joint(t), 0.0).0
    }

    fn witness(&self, t: Parameter, tol: f64) -> Option<EdgeWitness> {
        let (smin, ker) = kernel(&self.joint(t), tol);
        if smin > tol || ker.ncols() == 0 {
            return None;
        }
        let x = qubit(t);
        let yl = ker.column(0).into_owned();
        let y = &self.lift * yl;
        let range_residual = subspace_residual(&self.range, &kron_all(&[x.clone(), y.clone()]));
        let pt_residual =
            subspace_residual(&self.range_pt, &kron_all(&[x.map(|z| z.conj()), y.clone()]));
        (range_residual <= tol && pt_residual <= tol).then_some(EdgeWitness {
            x,
            y,
            range_residual,
            pt_residual,
        })
    }
}

/// Decides whether a `2 ⊗ d` state is an edge state.
pub fn edge_analysis(sigma: &DensityMatrix, tol: f64) -> Result<EdgeReport> {
    let dims = sigma.dims();
    if dims.len() != 2 || dims[0] != 2 {
        return Err(Error::Domain(format!(
            "edge test needs a 2⊗d profile, got {}",
            sigma.profile()
        )));
    }
    let m = sigma.matrix();
    let pt = partial_transpose(m, dims, &[0])?;
    let range = psd_range(m, RANK_TOL);
    let range_pt = psd_range(&pt, RANK_TOL);
    let local = psd_range(sigma.partial_trace_keep(&[1])?.matrix(), RANK_TOL);
    let r = local.ncols();
    let lift2 = kron(&identity(2), &local);
    let reduce = |basis: &CMatrix| column_space(&(lift2.adjoint() * basis), RANK_TOL);
    let (red1, red2) = (reduce(&range), reduce(&range_pt));
    let complement = |q: &CMatrix| null_space(&q.adjoint(), RANK_TOL).adjoint();
    let (w1, w2) = (complement(&red1), complement(&red2));
    let problem = EdgeProblem {
        lift: local,
        range: range.clone(),
        range_pt: range_pt.clone(),
        p1: Pencil::from_constraints(&w1, r),
        p2: Pencil::from_constraints(&w2, r),
        m1: w1.nrows(),
        m2: w2.nrows(),
        r,
    };
    let mut report = EdgeReport {
        edge: None,
        method: EdgeMethod::ProbeGrid,
        rank: range.ncols(),
        rank_pt: range_pt.ncols(),
        local_rank: r,
        candidates: 0,
        witness: None,
        closest: f64::INFINITY,
    };
    let columns = |q: &CMatrix| {
        q.column_iter()
            .map(|c| c.into_owned())
            .collect::<Vec<CVector>>()
    };

    let exhaustive: Option<(EdgeMethod, Vec<Parameter>)> = if problem.m1 + problem.m2 < r {
        Some((EdgeMethod::Trivial, vec![Some(C64::new(0.0, 0.0))]))
    } else if problem.m1 >= r {
        let s = product_vectors_in_range_2xd(&columns(&red1), tol)?;
        (!s.continuum).then(|| (EdgeMethod::RangeHits, s.hits.iter().map(|h| h.t).collect()))
    } else if problem.m2 >= r {
        let s = product_vectors_in_range_2xd(&columns(&red2), tol)?;
        (!s.continuum).then(|| {
            (
                EdgeMethod::PtRangeHits,
                s.hits.iter().map(|h| h.t.map(|z| z.conj())).collect(),
            )
        })
    } else if problem.m1 + 1 == r && problem.m2 >= 2 {
        cofactor_candidates(&problem.p1, &problem.p2, r).map(|ts| (EdgeMethod::Cofactor, ts))
    } else if problem.m2 + 1 == r && problem.m1 >= 2 {
        cofactor_candidates(&problem.p2, &problem.p1, r).map(|ts| {
            (
                EdgeMethod::Cofactor,
                ts.into_iter().map(|t| t.map(|z| z.conj())).collect(),
            )
        })
    } else {
        None
    };

    if let Some((method, mut params)) = exhaustive {
        report.method = method;
        params.push(None);
        report.candidates = params.len();
        for t in params {
            report.closest = report.closest.min(problem.smin(t));
            let found = problem.witness(t, tol).or_else(|| {
                // Root finding may leave a near miss; polish it on σ_min itself.
                (problem.smin(t) < 1e-4)
                    .then(|| polish(&problem, t))
                    .and_then(|t| problem.witness(t, tol))
            });
            if let Some(w) = found {
                report.edge = Some(false);
                report.witness = Some(w);
                return Ok(report);
            }
        }
        report.edge = Some(true);
        return Ok(report);
    }

    // Not exhaustive: probe and polish, and only a hit is conclusive.
    let mut probes: Vec<(f64, Parameter)> = probe_grid()
        .into_iter()
        .map(|t| (problem.smin(t), t))
        .collect();
    probes.sort_by(|a, b| a.0.total_cmp(&b.0));
    report.candidates = probes.len();
    for &(_, t) in probes.iter().take(8) {
        let t = polish(&problem, t);
        report.closest = report.closest.min(problem.smin(t));
        if let Some(w) = problem.witness(t, tol) {
            report.edge = Some(false);
            report.witness = Some(w);
            return Ok(report);
        }
    }
    Ok(report)
}

pub fn is_edge_state(sigma: &DensityMatrix, tol: f64) -> Result<CriterionResult> {
    Ok(edge_analysis(sigma, tol)?.result())
}

/// Candidate parameters when `M₁(t)` has `r − 1` rows: its kernel is spanned by the signed
/// maximal minors `y(t)`, and `M₂(t̄) y(t) = 0` forces `A₂y ∥ B₂y`, a polynomial condition
/// `H(t) = 0` of degree at most `2r − 2`. Returns `None` when `H` vanishes identically.
fn cofactor_candidates(p1: &Pencil, p2: &Pencil, r: usize) -> Option<Vec<Parameter>> {
    let mut rng = random::rng(0xed9e);
    let m2 = p2.a.nrows();
    let a = random::gaussian_vector(&mut rng, m2);
    let b = random::gaussian_vector(&mut rng, m2);
    let cofactors = |t: C64| -> CVector {
        let m = &p1.a + &p1.b * t;
        CVector::from_fn(r, |k, _| {
            let minor = m.clone().remove_column(k);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            minor.determinant() * sign
        })
    };
    let parts = |t: C64| {
        let y = cofactors(t);
        let f = &p2.a * &y;
        let g = &p2.b * &y;
        (a.dotc(&f), b.dotc(&g), b.dotc(&f), a.dotc(&g))
    };
    let h = |t: C64| {
        let (af, bg, bf, ag) = parts(t);
        af * bg - bf * ag
    };
    let degree = 2 * r - 2;
    let poly = interpolate_unit_circle(degree, h);
    let scale = unit_circle(degree + 1)
        .into_iter()
        .map(|t| {
            let (af, bg, bf, ag) = parts(t);
            af.norm() * bg.norm() + bf.norm() * ag.norm()
        })
        .fold(0.0f64, f64::max);
    if scale == 0.0 || poly.vanishes(1e-10 * scale) {
        return None;
    }
    let poly = poly.trimmed();
    Some(poly.roots().into_iter().map(Some).collect())
}

fn probe_grid() -> Vec<Parameter> {
    let mut out = vec![None, Some(C64::new(0.0, 0.0))];
    for &radius in &[0.25, 0.5, 1.0, 2.0, 4.0] {
        for k in 0..12 {
            out.push(Some(C64::from_polar(
                radius,
                std::f64::consts::PI * k as f64 / 6.0,
            )));
        }
    }
    out
}

/// Local minimisation of `σ_min(J(t))` by Nelder–Mead, in `t` or `1/t` depending on `|t|`.
fn polish(problem: &EdgeProblem, t: Parameter) -> Parameter {
    let inverted = t.is_none_or(|z| z.norm() > 1.0);
    let start = match t {
        None => C64::new(0.0, 0.0),
        Some(z) if inverted => ONE / z,
        Some(z) => z,
    };
    let to_param = |p: [f64; 2]| -> Parameter {
        let z = C64::new(p[0], p[1]);
        if inverted {
            if z.norm() < 1e-300 {
                None
            } else {
                Some(ONE / z)
            }
        } else {
            Some(z)
        }
    };
    let best = nelder_mead(
        |p| problem.smin(to_param(p)),
        [start.re, start.im],
        0.05,
        400,
    );
    let polished = to_param(best);
    if problem.smin(polished) <= problem.smin(t) {
        polished
    } else {
        t
    }
}

fn nelder_mead<F: Fn([f64; 2]) -> f64>(
    f: F,
    x0: [f64; 2],
    step: f64,
    iterations: usize,
) -> [f64; 2] {
    let mut simplex = [x0, [x0[0] + step, x0[1]], [x0[0], x0[1] + step]];
    let mut values = simplex.map(&f);
    for _ in 0..iterations {
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);
        let spread = (simplex[2][0] - simplex[0][0]).abs() + (simplex[2][1] - simplex[0][1]).abs();
        if spread < 1e-15 {
            break;
        }
        let centroid = [
            (simplex[0][0] + simplex[1][0]) / 2.0,
            (simplex[0][1] + simplex[1][1]) / 2.0,
        ];
        let along = |c: f64| {
            [
                centroid[0] + c * (simplex[2][0] - centroid[0]),
                centroid[1] + c * (simplex[2][1] - centroid[1]),
            ]
        };
        let reflected = along(-1.0);
        let fr = f(reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f(expanded);
            (simplex[2], values[2]) = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr < values[1] {
            (simplex[2], values[2]) = (reflected, fr);
        } else {
            let contracted = along(0.5);
            let fc = f(contracted);
            if fc < values[2] {
                (simplex[2], values[2]) = (contracted, fc);
            } else {
                for i in 1..3 {
                    simplex[i] = [
                        (simplex[i][0] + simplex[0][0]) / 2.0,
                        (simplex[i][1] + simplex[0][1]) / 2.0,
                    ];
                    values[i] = f(simplex[i]);
                }
            }
        }
    }
    let best = (0..3)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    simplex[best]
}

/// Outcome of the `2 ⊗ 5` decision tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoByFive {
    pub result: CriterionResult,
    pub rank_x1: Option<usize>,
    /// `(rank σ, rank σ^{T₁})` for `σ = W†W`, `W = (X₁ SX₁)`.
    pub birank: Option<(usize, usize)>,
    pub edge: Option<EdgeReport>,
}

/// `σ = W†W / tr` for the first block row `W = (X₁ SX₁)`.
pub fn sigma_from_blocks(blocks: &TwoByDBlocks) -> Result<DensityMatrix> {
    let w = blocks.first_row();
    let s = w.adjoint() * &w;
    let t = s.trace().re;
    if t <= 0.0 {
        return Err(Error::Domain("X₁ vanishes, so σ = 0".into()));
    }
    DensityMatrix::from_dims(s / real(t), &[2, blocks.dim()])
}

/// Separable unless `rank X₁ = 4`, birank `(5, 5)` and `σ` an edge state; never "entangled".
pub fn classify_2x5_sppt(f: &StructuredFactor, tol: f64) -> Result<TwoByFive> {
    let dims = f.profile().dims();
    if dims != [2, 5] {
        return Err(Error::Domain(format!(
            "the 2⊗5 classification needs profile 2⊗5, got {}",
            f.profile()
        )));
    }
    let id = "classify-2x5";
    let mut out = TwoByFive {
        result: CriterionResult::new(id, Conclusion::Undetermined, ""),
        rank_x1: None,
        birank: None,
        edge: None,
    };
    let v = sppt_bipartite(f, tol)?;
    if !v.holds {
        out.result.evidence = "SPPT condition does not hold for this factor".into();
        return Ok(out);
    }
    let blocks = TwoByDBlocks::from_factor(f)?;
    let rank = numeric_rank(&blocks.x1, RANK_TOL);
    out.rank_x1 = Some(rank);
    let sep = |evidence: String| {
        CriterionResult::new(id, Conclusion::Separable, evidence).value("rank_x1", rank as f64)
    };
    if rank == 5 {
        out.result = sep("rank X₁ = 5".into());
        return Ok(out);
    }
    if rank <= 3 {
        out.result = sep(format!("σ is a PPT state supported on 2⊗{rank}"));
        return Ok(out);
    }
    let sigma = sigma_from_blocks(&blocks)?;
    let pt = partial_transpose(sigma.matrix(), sigma.dims(), &[0])?;
    let birank = (
        psd_range(sigma.matrix(), RANK_TOL).ncols(),
        psd_range(&pt, RANK_TOL).ncols(),
    );
    out.birank = Some(birank);
    if birank != (5, 5) {
        out.result = sep(format!("rank X₁ = 4 and birank(σ) = {birank:?}"))
            .value("rank_sigma", birank.0 as f64)
            .value("rank_sigma_pt", birank.1 as f64);
        return Ok(out);
    }
    let edge = edge_analysis(&sigma, tol)?;
    out.result = match edge.edge {
        Some(false) => sep("rank X₁ = 4, birank (5,5), σ is not an edge state".into()),
        Some(true) => CriterionResult::new(
            id,
            Conclusion::Undetermined,
            "exceptional case: rank X₁ = 4, birank (5,5), σ is an edge state",
        ),
        None => CriterionResult::new(
            id,
            Conclusion::Undetermined,
            "rank X₁ = 4, birank (5,5), edge test inconclusive",
        ),
    }
    .value("rank_x1", rank as f64)
    .value("rank_sigma", 5.0)
    .value("rank_sigma_pt", 5.0);
    out.edge = Some(edge);
    Ok(out)
}

/// Exhibits a product vector in the range of a rank-4 SPPT state, following the case analysis
/// on the block rows of the factor for `2 ⊗ 2 ⊗ N` and `3 ⊗ 3`.
///
/// Uses the canonical factor when `factor` is `None`.
pub fn rank4_analysis(
    rho: &DensityMatrix,
    factor: Option<&StructuredFactor>,
    tol: f64,
) -> Result<CriterionResult> {
    let id = "rank-4";
    let range = psd_range(rho.matrix(), RANK_TOL);
    let rank = range.ncols();
    if rank > 4 {
        return Err(Error::Domain(format!("rank {rank} exceeds 4")));
    }
    let dims = rho.dims().to_vec();
    if rank == 0 {
        return Err(Error::Domain("zero matrix".into()));
    }
    if rank == 1 {
        let v = range.column(0).into_owned();
        let pf = product_vector_factorize(&v, &dims, tol)?;
        let conclusion = if pf.is_product {
            Conclusion::Separable
        } else {
            Conclusion::Entangled
        };
        let what = if pf.is_product {
            "pure product state"
        } else {
            "pure state is not a product"
        };
        return Ok(CriterionResult::new(id, conclusion, what)
            .value("schmidt_ratio", pf.schmidt_ratio)
            .vector(&v));
    }
    if rank <= 3 {
        return Ok(CriterionResult::new(
            id,
            Conclusion::Separable,
            format!("PPT state of rank {rank}"),
        )
        .value("rank", rank as f64));
    }
    let owned;
    let f = match factor {
        Some(f) => f,
        None => {
            owned = canonical_factor(rho, RANK_TOL)?;
            &owned
        }
    };
    let x = f.x();
    let cases: Vec<(&str, usize, Vec<usize>)> = match dims.as_slice() {
        [2, 2, _] => vec![
            ("Y₂₂ ≠ 0", 3, vec![3]),
            ("block row (1,0)", 2, vec![2, 3]),
            ("block row (0,1)", 1, vec![1, 3]),
        ],
        [3, 3] => vec![("X₃ ≠ 0", 2, vec![2]), ("block row 1", 1, vec![1, 2])],
        _ => {
            return Ok(CriterionResult::new(
                id,
                Conclusion::Separable,
                format!("SPPT state of rank 4 on {}", rho.profile()),
            )
            .value("rank", 4.0));
        }
    };
    let n0 = f.carrier();
    for (label, row_block, cols) in cases {
        let Some(v) = witness_from_block_row(x, n0, row_block, &cols, tol)? else {
            continue;
        };
        let pf = product_vector_factorize(&v, &dims, tol)?;
        let membership = subspace_residual(&range, &v);
        if pf.is_product && pf.residual <= tol && membership <= tol {
            return Ok(CriterionResult::new(
                id,
                Conclusion::Separable,
                format!("product vector in range ({label})"),
            )
            .value("membership_residual", membership)
            .value("product_residual", pf.residual)
            .vector(&(&v / real(v.norm()))));
        }
    }
    Ok(CriterionResult::new(
        id,
        Conclusion::Undetermined,
        "no product vector found in the factor's block rows",
    ))
}

/// A product vector in the span of the conjugated rows of block row `row_block`, whose support
/// lies in the column blocks `cols` (one block, or two read as a qubit).
fn witness_from_block_row(
    x: &CMatrix,
    n0: usize,
    row_block: usize,
    cols: &[usize],
    tol: f64,
) -> Result<Option<CVector>> {
    let total = x.ncols();
    let scale = frobenius(x);
    let mut halves: Vec<Vec<CVector>> = Vec::new();
    for k in 0..n0 {
        let v: CVector = x.row(row_block * n0 + k).adjoint();
        let n = v.norm();
        if n <= 1e-12 * scale {
            continue;
        }
        let parts: Vec<CVector> = cols
            .iter()
            .map(|&c| v.rows(c * n0, n0).into_owned())
            .collect();
        let mut rest = v.clone();
        for &c in cols {
            rest.rows_mut(c * n0, n0).fill(C64::new(0.0, 0.0));
        }
        if rest.norm() > tol * n {
            return Ok(None);
        }
        halves.push(parts);
    }
    if halves.is_empty() {
        return Ok(None);
    }
    let embed = |x_coeffs: &[C64], y: &CVector| {
        let mut full = CVector::zeros(total);
        for (&c, &xc) in cols.iter().zip(x_coeffs) {
            full.rows_mut(c * n0, n0).copy_from(&(y * xc));
        }
        full
    };
    if cols.len() == 1 {
        return Ok(Some(embed(&[ONE], &halves[0][0])));
    }
    // Reduce the carrier to the span actually used, then search C² ⊗ C^k.
    let all: Vec<CVector> = halves.iter().flatten().cloned().collect();
    let span = column_space(&CMatrix::from_columns(&all), RANK_TOL);
    let k = span.ncols();
    let basis: Vec<CVector> = halves
        .iter()
        .map(|p| {
            let mut v = CVector::zeros(2 * k);
            v.rows_mut(0, k).copy_from(&(span.adjoint() * &p[0]));
            v.rows_mut(k, k).copy_from(&(span.adjoint() * &p[1]));
            v
        })
        .collect();
    let search = product_vectors_in_range_2xd(&basis, tol)?;
    Ok(search
        .hits
        .iter()
        .filter(|h| h.residual <= tol)
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
        .map(|h| embed(&[h.x[0], h.x[1]], &(&span * &h.y))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::is_ppt;
    use crate::linalg::kron_vec;
    use crate::random::{gaussian_vector, rng};
    use crate::states::{
        ha_state, random_a_greater_d, random_sppt_2xd, random_ssppt_with, SKind, SspptOptions,
    };

    fn ha() -> (DensityMatrix, StructuredFactor) {
        let g = ha_state(0.5).unwrap();
        (g.rho, g.factor.unwrap())
    }

    #[test]
    fn ha_battery_is_undetermined() {
        let (_, f) = ha();
        let blocks = TwoByDBlocks::from_factor(&f).unwrap();
        let results = criterion_battery_2xd(&blocks, 1e-8).unwrap();
        assert_eq!(
            results
                .iter()
                .map(|r| r.criterion.as_str())
                .collect::<Vec<_>>(),
            BATTERY
        );
        assert!(results.iter().all(|r| !r.is_separable()), "{results:#?}");
        assert_eq!(
            battery_summary(&results).conclusion,
            Conclusion::Undetermined
        );
    }

    #[test]
    fn ha_sigma_is_an_edge_state() {
        let (rho, f) = ha();
        let blocks = TwoByDBlocks::from_factor(&f).unwrap();
        let sigma = sigma_from_blocks(&blocks).unwrap();
        // X₂ = 0, so σ is the state itself.
        assert!(frobenius(&(sigma.matrix() - rho.matrix())) < 1e-14);
        let e = edge_analysis(&sigma, 1e-8).unwrap();
        assert_eq!((e.rank, e.rank_pt, e.local_rank), (5, 5, 4));
        assert_eq!(e.method, EdgeMethod::Cofactor);
        assert_eq!(e.edge, Some(true), "{e:?}");
        assert!(e.closest > 1e-4);
    }

    #[test]
    fn ha_is_the_exceptional_case() {
        let (_, f) = ha();
        let c = classify_2x5_sppt(&f, 1e-8).unwrap();
        assert_eq!(c.rank_x1, Some(4));
        assert_eq!(c.birank, Some((5, 5)));
        assert_eq!(c.result.conclusion, Conclusion::Undetermined);
        assert!(c.result.evidence.contains("exceptional"));
    }

    #[test]
    fn pure_product_is_not_edge() {
        let mut r = rng(3);
        let v = kron_vec(&gaussian_vector(&mut r, 2), &gaussian_vector(&mut r, 3));
        let sigma =
            DensityMatrix::from_dims(&v * v.adjoint() / real(v.norm_squared()), &[2, 3]).unwrap();
        let e = edge_analysis(&sigma, 1e-8).unwrap();
        assert_eq!(e.edge, Some(false));
        let w = e.witness.unwrap();
        assert!(w.range_residual <= 1e-8 && w.pt_residual <= 1e-8);
    }

    #[test]
    fn separable_mixture_is_not_edge() {
        let mut r = rng(4);
        let mut m = CMatrix::zeros(8, 8);
        for _ in 0..5 {
            let v = kron_vec(&gaussian_vector(&mut r, 2), &gaussian_vector(&mut r, 4));
            m += &v * v.adjoint();
        }
        let t = m.trace();
        let sigma = DensityMatrix::from_dims(m / t, &[2, 4]).unwrap();
        let e = edge_analysis(&sigma, 1e-8).unwrap();
        assert_eq!(e.edge, Some(false), "{e:?}");
    }

    #[test]
    fn contractive_and_normal_states_are_separable() {
        for (i, kind) in [SKind::Contractive, SKind::Normal].into_iter().enumerate() {
            for d in 3..=6 {
                for rank in [1, d / 2, d - 1, d] {
                    let g = random_sppt_2xd(d, kind, rank.max(1), (100 * i + 10 * d + rank) as u64)
                        .unwrap();
                    let blocks = TwoByDBlocks::from_factor(g.factor.as_ref().unwrap()).unwrap();
                    let s = battery_summary(&criterion_battery_2xd(&blocks, 1e-8).unwrap());
                    assert!(s.is_separable(), "{kind} d={d} rank={rank}");
                    assert!(is_ppt(&g.rho, 1e-9).unwrap().is_ppt);
                }
            }
        }
    }

    #[test]
    fn a_greater_than_d_fires() {
        for seed in 0..5 {
            let g = random_a_greater_d(5, seed).unwrap();
            let blocks = crate::factor::two_by_d_blocks(&g.rho, 1e-9).unwrap();
            let results = criterion_battery_2xd(&blocks, 1e-8).unwrap();
            assert!(results[5].is_separable(), "{:?}", results[5]);
        }
    }

    #[test]
    fn a_greater_than_d_without_sppt_is_not_enough() {
        // Generic S: A − D is positive definite, yet the partial transpose is not positive.
        let mut rng = crate::random::rng(11);
        let d = 3;
        let x1 = identity(d)
            + CMatrix::from_fn(d, d, |i, j| {
                if j > i {
                    crate::random::complex_normal(&mut rng) * 0.3
                } else {
                    crate::linalg::ZERO
                }
            });
        let k = crate::random::gaussian_matrix(&mut rng, d, d);
        let s = &k * real(0.7 / spectral_norm(&k));
        let x2 = identity(d) * real(0.1);
        let f = StructuredFactor::assemble(
            crate::profile::DimensionProfile::new(vec![2, d]).unwrap(),
            &[x1, x2],
            |_, _, _| s.clone(),
            1e-9,
        )
        .unwrap();
        let rho = DensityMatrix::from_dims(f.gram(), &[2, d]).unwrap();
        let blocks = TwoByDBlocks::from_factor(&f).unwrap();
        assert!(min_eigenvalue(&(&blocks.a - &blocks.d)) > 0.0);
        assert!(!crate::density::is_ppt(&rho, 1e-9).unwrap().is_ppt);
        let results = criterion_battery_2xd(&blocks, 1e-8).unwrap();
        assert!(results.iter().all(|r| !r.is_separable()), "{results:?}");
    }

    #[test]
    fn full_rank_2x5_is_separable() {
        let g = random_sppt_2xd(5, SKind::Normal, 5, 1).unwrap();
        let c = classify_2x5_sppt(g.factor.as_ref().unwrap(), 1e-8).unwrap();
        assert!(c.result.is_separable());
    }

    #[test]
    fn low_rank_2x5_is_separable() {
        let g = random_sppt_2xd(5, SKind::Contractive, 3, 2).unwrap();
        let c = classify_2x5_sppt(g.factor.as_ref().unwrap(), 1e-8).unwrap();
        assert!(c.result.is_separable());
        assert_eq!(c.rank_x1, Some(3));
    }

    #[test]
    fn rank4_222_finds_product_vectors_in_every_branch() {
        let masks = [
            [true, false, false, true],
            [true, true, false, false],
            [true, false, true, false],
            [false, true, true, false],
            [false, false, true, true],
            [false, true, false, true],
        ];
        for (i, m) in masks.iter().enumerate() {
            let g = random_ssppt_with(
                &[2, 2, 2],
                i as u64,
                &SspptOptions {
                    active: Some(m.to_vec()),
                    ..Default::default()
                },
            )
            .unwrap();
            let r = rank4_analysis(&g.rho, None, 1e-8).unwrap();
            assert!(r.is_separable(), "{m:?}: {r:?}");
            assert!(r.values["membership_residual"] <= 1e-8);
        }
    }

    #[test]
    fn rank4_rejects_higher_rank_and_handles_pure_states() {
        let g = crate::states::random_ssppt(&[2, 2, 2], 1).unwrap();
        assert!(matches!(
            rank4_analysis(&g.rho, None, 1e-8),
            Err(Error::Domain(_))
        ));
        let bell = crate::states::bell().unwrap();
        assert_eq!(
            rank4_analysis(&bell.rho, None, 1e-8).unwrap().conclusion,
            Conclusion::Entangled
        );
        let p = crate::states::random_pure_product(&[2, 3], 2).unwrap();
        let r = rank4_analysis(&p.rho, None, 1e-8).unwrap();
        assert!(r.is_separable() && r.product_vectors.len() == 1);
    }

    #[test]
    fn rank4_3x3_covers_both_branches() {
        for (seed, ranks) in [
            [3, 1, 0],
            [2, 2, 0],
            [1, 3, 0],
            [0, 2, 2],
            [1, 1, 2],
            [2, 0, 2],
        ]
        .into_iter()
        .enumerate()
        {
            let opts = SspptOptions {
                ranks: Some(ranks.to_vec()),
                ..Default::default()
            };
            let g = random_ssppt_with(&[3, 3], seed as u64, &opts).unwrap();
            assert_eq!(g.rho.rank(1e-10), 4);
            let r = rank4_analysis(&g.rho, None, 1e-8).unwrap();
            assert!(r.is_separable(), "{ranks:?}: {r:?}");
            assert!(r.values["membership_residual"] <= 1e-8);
        }
    }
}
