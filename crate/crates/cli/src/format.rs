//! JSON state files, metadata sidecars and decomposition files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sppt::decomposition::{DecompositionCheck, SeparableDecomposition};
use sppt::states::{GeneratedState, GroundTruth};
use sppt::{CMatrix, DensityMatrix, DimensionProfile, FactorSource, StructuredFactor, C64};

use crate::Failure;

/// Complex entry as `[re, im]`.
pub type Pair = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub dims: Vec<usize>,
    /// Row-major entries.
    pub matrix: Vec<Pair>,
    pub normalized: bool,
    #[serde(default)]
    pub meta: Meta,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub params: std::collections::BTreeMap<String, String>,
    /// Structured factor of the (normalised) state, when the producer knows one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<FactorData>,
}

/// `X` and the full `S` data `s[α][p][j]`, matrices row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorData {
    /// Profile the factor is written for; may merge subsystems of the state profile.
    pub dims: Vec<usize>,
    pub x: Vec<Pair>,
    pub s: Vec<Vec<Vec<Vec<Pair>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub state_file: String,
    pub sha256: String,
    pub truth: GroundTruth,
}

pub fn to_pairs(m: &CMatrix) -> Vec<Pair> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            out.push([z.re, z.im]);
        }
    }
    out
}

pub fn from_pairs(n: usize, pairs: &[Pair]) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| {
        let [re, im] = pairs[i * n + j];
        C64::new(re, im)
    })
}

pub fn vector_pairs(v: &[C64]) -> Vec<Pair> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

impl FactorData {
    pub fn from_factor(f: &StructuredFactor) -> Self {
        Self {
            dims: f.profile().dims().to_vec(),
            x: to_pairs(f.x()),
            s: f.smats()
                .iter()
                .map(|per_alpha| {
                    per_alpha
                        .iter()
                        .map(|per_level| per_level.iter().map(to_pairs).collect())
                        .collect()
                })
                .collect(),
        }
    }

    pub fn to_factor(&self, tol: f64) -> Result<StructuredFactor, Failure> {
        let profile = DimensionProfile::new(self.dims.clone())
            .map_err(|e| Failure::Dimension(format!("factor: {e}")))?;
        let n = profile.total();
        let n0 = profile.carrier();
        if self.x.len() != n * n {
            return Err(Failure::Dimension(format!(
                "factor has {} entries, profile needs {}",
                self.x.len(),
                n * n
            )));
        }
        let mut smats = Vec::with_capacity(self.s.len());
        for per_alpha in &self.s {
            let mut a = Vec::with_capacity(per_alpha.len());
            for per_level in per_alpha {
                let mut l = Vec::with_capacity(per_level.len());
                for s in per_level {
                    if s.len() != n0 * n0 {
                        return Err(Failure::Dimension(format!(
                            "S matrix has {} entries, expected {}",
                            s.len(),
                            n0 * n0
                        )));
                    }
                    l.push(from_pairs(n0, s));
                }
                a.push(l);
            }
            smats.push(a);
        }
        StructuredFactor::from_parts(
            profile,
            from_pairs(n, &self.x),
            smats,
            FactorSource::Supplied,
            tol,
        )
        .map_err(|e| Failure::Dimension(format!("factor: {e}")))
    }
}

impl StateFile {
    pub fn from_generated(g: &GeneratedState) -> Self {
        Self {
            dims: g.rho.dims().to_vec(),
            matrix: to_pairs(g.rho.matrix()),
            normalized: true,
            meta: Meta {
                generator: Some(g.truth.generator.clone()),
                params: g.truth.params.clone(),
                factor: g.factor.as_ref().map(FactorData::from_factor),
            },
        }
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, Failure> {
        serde_json::from_slice(bytes).map_err(|e| Failure::Parse(e.to_string()))
    }

    /// The density matrix as stored (no normalisation, no positivity check).
    pub fn density(&self) -> Result<DensityMatrix, Failure> {
        let profile = DimensionProfile::new(self.dims.clone())
            .map_err(|e| Failure::Dimension(e.to_string()))?;
        let n = profile.total();
        if self.matrix.len() != n * n {
            return Err(Failure::Dimension(format!(
                "dims {:?} need {} entries, matrix has {}",
                self.dims,
                n * n,
                self.matrix.len()
            )));
        }
        if self.matrix.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Failure::Parse("matrix contains non-finite entries".into()));
        }
        DensityMatrix::new(from_pairs(n, &self.matrix), profile)
            .map_err(|e| Failure::Dimension(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state files serialise") + "\n"
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `state.json` → `state.meta.json`.
pub fn sidecar_path(state: &Path) -> PathBuf {
    let stem = state
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    state.with_file_name(format!("{stem}.meta.json"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermData {
    pub weight: f64,
    pub factors: Vec<Vec<Pair>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionFile {
    pub dims: Vec<usize>,
    pub reconstruction_residual: f64,
    pub factor_residual: f64,
    pub weight_sum: f64,
    pub passes: bool,
    pub factor_source: FactorSource,
    pub terms: Vec<TermData>,
}

impl DecompositionFile {
    pub fn new(
        dec: &SeparableDecomposition,
        check: &DecompositionCheck,
        source: FactorSource,
    ) -> Self {
        Self {
            dims: dec.profile.dims().to_vec(),
            reconstruction_residual: check.reconstruction_residual,
            factor_residual: check.factor_residual,
            weight_sum: check.weight_sum,
            passes: check.passes,
            factor_source: source,
            terms: dec
                .terms
                .iter()
                .map(|t| TermData {
                    weight: t.weight,
                    factors: t
                        .factors
                        .iter()
                        .map(|f| vector_pairs(f.as_slice()))
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_decomposition(&self) -> Result<SeparableDecomposition, Failure> {
        let profile = DimensionProfile::new(self.dims.clone())
            .map_err(|e| Failure::Dimension(e.to_string()))?;
        let terms = self
            .terms
            .iter()
            .map(|t| sppt::decomposition::ProductTerm {
                weight: t.weight,
                factors: t
                    .factors
                    .iter()
                    .map(|f| {
                        sppt::CVector::from_iterator(
                            f.len(),
                            f.iter().map(|&[re, im]| C64::new(re, im)),
                        )
                    })
                    .collect(),
            })
            .collect();
        Ok(SeparableDecomposition { profile, terms })
    }
}
