//! The classification pipeline and its report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sppt::criteria::{
    battery_summary, classify_2x5_sppt, criterion_battery_2xd, edge_analysis, rank4_analysis,
    Conclusion, CriterionResult, EdgeMethod, EdgeReport, RANK_TOL,
};
use sppt::decomposition::{
    separable_decomposition_seeded, verify_decomposition, SeparableDecomposition,
};
use sppt::density::{PptReport, Validity};
use sppt::factor::reconstruction_residual;
use sppt::linalg::psd_range;
use sppt::sppt::{applicable_tests, sppt_yuzhao, ssppt_yuzhao};
use sppt::{
    canonical_factor, is_ppt, DensityMatrix, FactorSource, SpptVerdict, StructuredFactor,
    TwoByDBlocks,
};

use crate::format::StateFile;
use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub tolerance: f64,
    pub legacy: bool,
    pub seed: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            legacy: false,
            seed: sppt::decomposition::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub sha256: String,
    pub dims: Vec<usize>,
    pub normalized_flag: bool,
    /// Trace of the matrix as stored.
    pub trace: f64,
    pub generator: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSummary {
    pub source: FactorSource,
    pub dims: Vec<usize>,
    pub representable: bool,
    /// Largest relative mismatch between `X` and its `S · X_α` reconstruction.
    pub structure_residual: f64,
    pub worst_block: Option<(usize, usize)>,
    /// `‖X†X − ρ‖_F / ‖ρ‖_F`.
    pub state_residual: f64,
    pub used: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSummary {
    pub edge: Option<bool>,
    pub method: EdgeMethod,
    pub rank: usize,
    pub rank_pt: usize,
    pub local_rank: usize,
    pub candidates: usize,
    pub closest: Option<f64>,
    pub result: CriterionResult,
}

impl From<&EdgeReport> for EdgeSummary {
    fn from(e: &EdgeReport) -> Self {
        Self {
            edge: e.edge,
            method: e.method,
            rank: e.rank,
            rank_pt: e.rank_pt,
            local_rank: e.local_rank,
            candidates: e.candidates,
            closest: e.closest.is_finite().then_some(e.closest),
            result: e.result(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub factor: FactorSource,
    pub results: Vec<CriterionResult>,
    pub summary: CriterionResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoByFiveReport {
    pub factor: FactorSource,
    pub result: CriterionResult,
    pub rank_x1: Option<usize>,
    pub birank: Option<(usize, usize)>,
    pub edge: Option<EdgeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSummary {
    pub factor: FactorSource,
    pub terms: usize,
    pub reconstruction_residual: f64,
    pub factor_residual: f64,
    pub weight_sum: f64,
    pub passes: bool,
}

/// Headline answers with the stage that settled each one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub ppt: bool,
    pub sppt: bool,
    pub ssppt: bool,
    pub legacy_ssppt: Option<bool>,
    pub separable: Option<bool>,
    pub rank: usize,
    pub basis: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub input: InputInfo,
    pub settings: Settings,
    pub validity: Validity,
    pub ppt: PptReport,
    pub factors: Vec<FactorSummary>,
    pub tests: Vec<SpptVerdict>,
    pub legacy: Vec<SpptVerdict>,
    pub decomposition: Option<DecompositionSummary>,
    pub battery: Option<BatteryReport>,
    pub two_by_five: Option<TwoByFiveReport>,
    pub edge: Option<EdgeSummary>,
    pub rank4: Option<CriterionResult>,
    pub verdicts: Verdicts,
    /// Wall-clock milliseconds per stage; the only field that varies between runs.
    pub timing_ms: BTreeMap<String, f64>,
}

/// A parsed state ready for the pipeline.
pub struct Loaded {
    pub rho: DensityMatrix,
    pub supplied: Option<StructuredFactor>,
    pub info: InputInfo,
    pub validity: Validity,
}

/// Validates the file contents and normalises the state (and its factor) when needed.
pub fn load(bytes: &[u8], tol: f64) -> Result<Loaded, Failure> {
    let file = StateFile::parse(bytes)?;
    let raw = file.density()?;
    let v = raw.validity();
    if !v.is_hermitian(tol) {
        return Err(Failure::InvalidState(format!(
            "not Hermitian (residual {:.3e})",
            v.hermiticity_residual
        )));
    }
    if !v.is_psd(tol) {
        return Err(Failure::InvalidState(format!(
            "not positive semidefinite (min eigenvalue {:.3e})",
            v.min_eigenvalue
        )));
    }
    if v.trace_re <= 0.0 {
        return Err(Failure::InvalidState("trace is not positive".into()));
    }
    if file.normalized && !v.is_normalized(tol) {
        return Err(Failure::InvalidState(format!(
            "marked normalized but trace is {:.12}",
            v.trace_re
        )));
    }
    let trace = v.trace_re;
    let rho = if file.normalized {
        raw
    } else {
        raw.normalized()
    };
    let supplied = match &file.meta.factor {
        Some(data) => {
            let f = data.to_factor(tol)?;
            if f.profile().total() != rho.profile().total() {
                return Err(Failure::Dimension(format!(
                    "factor profile {} does not fit state profile {}",
                    f.profile(),
                    rho.profile()
                )));
            }
            Some(if file.normalized {
                f
            } else {
                f.scaled(1.0 / trace)
            })
        }
        None => None,
    };
    let info = InputInfo {
        sha256: crate::format::sha256_hex(bytes),
        dims: file.dims.clone(),
        normalized_flag: file.normalized,
        trace,
        generator: file.meta.generator.clone(),
    };
    let validity = rho.validity();
    Ok(Loaded {
        rho,
        supplied,
        info,
        validity,
    })
}

struct Timer {
    times: BTreeMap<String, f64>,
    last: Instant,
}

impl Timer {
    fn new() -> Self {
        Self {
            times: BTreeMap::new(),
            last: Instant::now(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.times
            .insert(stage.into(), (now - self.last).as_secs_f64() * 1e3);
        self.last = now;
    }
}

fn holds_any(tests: &[SpptVerdict], source: FactorSource, super_: bool) -> bool {
    tests
        .iter()
        .any(|v| v.factor_source == source && v.definition.is_super() == super_ && v.holds)
}

/// Runs the full pipeline on a loaded state.
pub fn classify(input: &Loaded, settings: Settings) -> Result<ClassificationReport, Failure> {
    let tol = settings.tolerance;
    let rho = &input.rho;
    let mut timer = Timer::new();
    let mut basis = BTreeMap::new();

    let ppt = is_ppt(rho, tol).map_err(Failure::from_core)?;
    let ppt_holds = ppt.is_ppt;
    let rank = psd_range(rho.matrix(), RANK_TOL).ncols();
    timer.lap("ppt");

    let canonical = canonical_factor(rho, tol).map_err(Failure::from_core)?;
    let mut factors = vec![summarise(&canonical, rho, true, None)];
    let mut candidates: Vec<&StructuredFactor> = vec![&canonical];
    let mut legacy_factors: Vec<&StructuredFactor> = vec![&canonical];
    if let Some(f) = &input.supplied {
        let residual = reconstruction_residual(f.x(), rho.matrix());
        let same_profile = f.profile() == rho.profile();
        let note = if residual > tol {
            Some("does not reproduce the state; ignored".to_string())
        } else if !same_profile {
            Some(format!(
                "written for profile {}; used by the legacy tests only",
                f.profile()
            ))
        } else {
            None
        };
        let used = residual <= tol && (same_profile || settings.legacy);
        factors.push(summarise(f, rho, used, note));
        if residual <= tol {
            if same_profile {
                candidates.push(f);
            }
            legacy_factors.push(f);
        }
    }
    timer.lap("factor");

    let mut tests = Vec::new();
    if rho.profile().num_subsystems() >= 2 {
        for f in &candidates {
            tests.extend(applicable_tests(f, tol).map_err(Failure::from_core)?);
        }
    }
    let mut legacy = Vec::new();
    if settings.legacy {
        for f in &legacy_factors {
            let n = f.profile().num_subsystems();
            if n == 3 || (n == 2 && rho.profile().num_subsystems() == 3) {
                legacy.push(sppt_yuzhao(f, tol).map_err(Failure::from_core)?);
                legacy.push(ssppt_yuzhao(f, tol).map_err(Failure::from_core)?);
            }
        }
    }
    timer.lap("sppt");

    let sppt_factor = candidates
        .iter()
        .copied()
        .find(|f| holds_any(&tests, f.source(), false));
    let ssppt_factor = candidates
        .iter()
        .copied()
        .find(|f| holds_any(&tests, f.source(), true));
    let sppt = ppt.is_ppt && sppt_factor.is_some();
    let ssppt = ppt.is_ppt && ssppt_factor.is_some();
    basis.insert(
        "ppt".into(),
        format!(
            "min eigenvalue {:.3e} over subsets {:?}",
            ppt.min_eigenvalue, ppt.worst_subset
        ),
    );
    basis.insert(
        "sppt".into(),
        match sppt_factor {
            Some(f) if sppt => format!("{:?} factor", f.source()).to_lowercase(),
            _ if !ppt.is_ppt => "not PPT".into(),
            _ => "no available factor satisfies the conditions".into(),
        },
    );
    basis.insert(
        "ssppt".into(),
        match ssppt_factor {
            Some(f) if ssppt => format!("{:?} factor", f.source()).to_lowercase(),
            _ if !ppt.is_ppt => "not PPT".into(),
            _ => "no available factor satisfies the conditions".into(),
        },
    );
    let legacy_ssppt = settings
        .legacy
        .then(|| legacy.iter().any(|v| v.definition.is_super() && v.holds));

    let mut decomposition = None;
    if let (true, Some(f)) = (ssppt, ssppt_factor) {
        let dec =
            separable_decomposition_seeded(f, tol, settings.seed).map_err(Failure::from_core)?;
        decomposition = Some(decomposition_summary(&dec, rho, f.source(), tol));
    }
    timer.lap("decomposition");

    let two_by_d = rho.dims().len() == 2 && rho.dims()[0] == 2;
    let mut battery = None;
    if two_by_d {
        let f = sppt_factor.unwrap_or(&canonical);
        let mut blocks = TwoByDBlocks::from_factor(f).map_err(Failure::from_core)?;
        if f.source() == FactorSource::Canonical {
            blocks = sppt::two_by_d_blocks(rho, tol).map_err(Failure::from_core)?;
        }
        let results = criterion_battery_2xd(&blocks, tol).map_err(Failure::from_core)?;
        let summary = battery_summary(&results);
        battery = Some(BatteryReport {
            factor: f.source(),
            results,
            summary,
        });
    }
    timer.lap("battery");

    let mut two_by_five = None;
    if let (true, Some(f)) = (rho.dims() == [2, 5] && sppt, sppt_factor) {
        let out = classify_2x5_sppt(f, tol).map_err(Failure::from_core)?;
        two_by_five = Some(TwoByFiveReport {
            factor: f.source(),
            result: out.result,
            rank_x1: out.rank_x1,
            birank: out.birank,
            edge: out.edge.as_ref().map(EdgeSummary::from),
        });
    }
    timer.lap("two_by_five");

    let mut rank4 = None;
    if ppt.is_ppt && (rank <= 3 || (rank == 4 && sppt)) {
        rank4 = Some(rank4_analysis(rho, sppt_factor, tol).map_err(Failure::from_core)?);
    }
    timer.lap("rank4");

    let separable_by = |r: &Option<CriterionResult>| {
        r.as_ref()
            .is_some_and(|r| r.conclusion == Conclusion::Separable)
    };
    let mut separable = None;
    if !ppt.is_ppt {
        separable = Some(false);
        basis.insert("separable".into(), "not PPT".into());
    } else if decomposition.as_ref().is_some_and(|d| d.passes) {
        separable = Some(true);
        basis.insert("separable".into(), "verified SSPPT decomposition".into());
    } else if separable_by(&battery.as_ref().map(|b| b.summary.clone())) {
        separable = Some(true);
        basis.insert(
            "separable".into(),
            battery.as_ref().unwrap().summary.evidence.clone(),
        );
    } else if separable_by(&two_by_five.as_ref().map(|t| t.result.clone())) {
        separable = Some(true);
        basis.insert(
            "separable".into(),
            two_by_five.as_ref().unwrap().result.evidence.clone(),
        );
    } else if separable_by(&rank4) {
        separable = Some(true);
        basis.insert("separable".into(), rank4.as_ref().unwrap().evidence.clone());
    }

    // Range criterion on the state itself, when nothing above settled it.
    let mut edge = None;
    if two_by_d && ppt.is_ppt && separable.is_none() {
        let report = edge_analysis(rho, tol).map_err(Failure::from_core)?;
        if report.edge == Some(true) {
            separable = Some(false);
            basis.insert("separable".into(), "edge state (range criterion)".into());
        }
        edge = Some(EdgeSummary::from(&report));
    }
    timer.lap("edge");
    if separable.is_none() {
        basis.insert(
            "separable".into(),
            "undetermined by the implemented criteria".into(),
        );
    }

    Ok(ClassificationReport {
        input: input.info.clone(),
        settings,
        validity: input.validity,
        ppt,
        factors,
        tests,
        legacy,
        decomposition,
        battery,
        two_by_five,
        edge,
        rank4,
        verdicts: Verdicts {
            ppt: ppt_holds,
            sppt,
            ssppt,
            legacy_ssppt,
            separable,
            rank,
            basis,
        },
        timing_ms: timer.times,
    })
}

fn summarise(
    f: &StructuredFactor,
    rho: &DensityMatrix,
    used: bool,
    note: Option<String>,
) -> FactorSummary {
    FactorSummary {
        source: f.source(),
        dims: f.profile().dims().to_vec(),
        representable: f.is_representable(),
        structure_residual: f.max_residual(),
        worst_block: f.worst_block(),
        state_residual: reconstruction_residual(f.x(), rho.matrix()),
        used,
        note,
    }
}

pub fn decomposition_summary(
    dec: &SeparableDecomposition,
    rho: &DensityMatrix,
    source: FactorSource,
    tol: f64,
) -> DecompositionSummary {
    let check = verify_decomposition(dec, rho, tol);
    DecompositionSummary {
        factor: source,
        terms: dec.terms.len(),
        reconstruction_residual: check.reconstruction_residual,
        factor_residual: check.factor_residual,
        weight_sum: check.weight_sum,
        passes: check.passes,
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn residual(r: Option<f64>) -> String {
    r.map_or_else(|| "n/a".into(), |r| format!("{r:.3e}"))
}

impl ClassificationReport {
    /// Plain-text rendering; contains no timing, so it is reproducible.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let v = &self.verdicts;
        let _ = writeln!(
            s,
            "input   sha256:{}  dims {:?}",
            self.input.sha256, self.input.dims
        );
        if let Some(g) = &self.input.generator {
            let _ = writeln!(s, "        generator {g}");
        }
        let _ = writeln!(
            s,
            "state   trace {:.12}  hermiticity {:.3e}  min eigenvalue {:.3e}  rank {}",
            self.input.trace,
            self.validity.hermiticity_residual,
            self.validity.min_eigenvalue,
            v.rank
        );
        let _ = writeln!(
            s,
            "tol     {:e}  seed {}  legacy {}",
            self.settings.tolerance, self.settings.seed, self.settings.legacy
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "PPT         {}  ({})", yes_no(v.ppt), v.basis["ppt"]);
        for sub in &self.ppt.subsets {
            let _ = writeln!(
                s,
                "  T{:?}  min eigenvalue {:.6e}",
                sub.subsystems, sub.min_eigenvalue
            );
        }
        let _ = writeln!(s, "SPPT        {}  ({})", yes_no(v.sppt), v.basis["sppt"]);
        let _ = writeln!(s, "SSPPT       {}  ({})", yes_no(v.ssppt), v.basis["ssppt"]);
        if let Some(l) = v.legacy_ssppt {
            let _ = writeln!(s, "legacy SSPPT {}", yes_no(l));
        }
        let sep = match v.separable {
            Some(true) => "yes",
            Some(false) => "no",
            None => "undetermined",
        };
        let _ = writeln!(s, "separable   {sep}  ({})", v.basis["separable"]);
        let _ = writeln!(s);
        let _ = writeln!(s, "factors");
        for f in &self.factors {
            let _ = writeln!(
                s,
                "  {:<9} dims {:?}  representable {}  structure {:.3e}  state {:.3e}{}",
                format!("{:?}", f.source).to_lowercase(),
                f.dims,
                yes_no(f.representable),
                f.structure_residual,
                f.state_residual,
                f.note
                    .as_ref()
                    .map(|n| format!("  ({n})"))
                    .unwrap_or_default()
            );
        }
        let _ = writeln!(s, "tests");
        for t in self.tests.iter().chain(&self.legacy) {
            let _ = writeln!(
                s,
                "  {:<9} {:<19} {:<13} residual {}{}",
                format!("{:?}", t.factor_source).to_lowercase(),
                t.definition.id(),
                format!("{:?}", t.outcome).to_lowercase(),
                residual(t.max_residual),
                t.witness
                    .as_ref()
                    .filter(|_| !t.holds)
                    .map(|w| format!("  worst: {w}"))
                    .unwrap_or_default()
            );
        }
        if let Some(d) = &self.decomposition {
            let _ = writeln!(
                s,
                "decomposition  {} terms  reconstruction {:.3e}  weights {:.12}  {}",
                d.terms,
                d.reconstruction_residual,
                d.weight_sum,
                if d.passes {
                    "verified"
                } else {
                    "FAILED verification"
                }
            );
        }
        if let Some(b) = &self.battery {
            let _ = writeln!(s, "2⊗d battery ({:?} factor)", b.factor);
            for r in &b.results {
                let _ = writeln!(
                    s,
                    "  {:<17} {:<12} {}",
                    r.criterion, r.conclusion, r.evidence
                );
            }
        }
        if let Some(t) = &self.two_by_five {
            let _ = writeln!(
                s,
                "2⊗5 classification  {}: {}",
                t.result.conclusion, t.result.evidence
            );
            if let Some(e) = &t.edge {
                let _ = writeln!(s, "  σ {}", edge_line(e));
            }
        }
        if let Some(e) = &self.edge {
            let _ = writeln!(s, "edge test on ρ  {}", edge_line(e));
        }
        if let Some(r) = &self.rank4 {
            let _ = writeln!(s, "rank ≤ 4 analysis  {}: {}", r.conclusion, r.evidence);
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialise") + "\n"
    }
}

fn edge_line(e: &EdgeSummary) -> String {
    let state = match e.edge {
        Some(true) => "edge",
        Some(false) => "not edge",
        None => "inconclusive",
    };
    format!(
        "{state} via {:?}  birank ({}, {})  candidates {}  closest {}",
        e.method,
        e.rank,
        e.rank_pt,
        e.candidates,
        residual(e.closest)
    )
}
