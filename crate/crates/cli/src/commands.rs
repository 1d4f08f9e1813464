//! The three subcommands, independent of argument parsing.

use std::fs;
use std::path::Path;

use sppt::decomposition::{separable_decomposition_seeded, verify_decomposition};
use sppt::factor::reconstruction_residual;
use sppt::{canonical_factor, FactorSource};

use crate::format::{sha256_hex, sidecar_path, DecompositionFile, Sidecar, StateFile};
use crate::registry::{self, Params};
use crate::report::{classify, load, ClassificationReport, Settings};
use crate::Failure;

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))
}

/// Classifies the state in `input`, optionally writing the JSON report to `json`.
pub fn cmd_classify(
    input: &Path,
    settings: Settings,
    json: Option<&Path>,
) -> Result<ClassificationReport, Failure> {
    let loaded = load(&read(input)?, settings.tolerance)?;
    let report = classify(&loaded, settings)?;
    if let Some(path) = json {
        write(path, &report.to_json())?;
    }
    Ok(report)
}

/// Writes the generated state to `output` and its ground truth to the sidecar next to it.
pub fn cmd_generate(name: &str, params: &Params, output: &Path) -> Result<Sidecar, Failure> {
    let g = registry::generate(name, params)?;
    let text = StateFile::from_generated(&g).to_json();
    write(output, &text)?;
    let sidecar = Sidecar {
        state_file: output
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sha256: sha256_hex(text.as_bytes()),
        truth: g.truth,
    };
    let meta = serde_json::to_string_pretty(&sidecar).expect("sidecars serialise") + "\n";
    write(&sidecar_path(output), &meta)?;
    Ok(sidecar)
}

/// Decomposes an SSPPT state using its canonical factor, falling back to a supplied one.
pub fn cmd_decompose(
    input: &Path,
    output: &Path,
    settings: Settings,
) -> Result<DecompositionFile, Failure> {
    let tol = settings.tolerance;
    let loaded = load(&read(input)?, tol)?;
    let rho = &loaded.rho;
    let canonical = canonical_factor(rho, tol).map_err(Failure::from_core)?;
    let mut attempt = separable_decomposition_seeded(&canonical, tol, settings.seed)
        .map(|d| (d, FactorSource::Canonical));
    if attempt.is_err() {
        if let Some(f) = loaded.supplied.as_ref().filter(|f| {
            f.profile() == rho.profile() && reconstruction_residual(f.x(), rho.matrix()) <= tol
        }) {
            // The supplied factor's S data is what the producer meant, so its verdict is the one to report.
            attempt = separable_decomposition_seeded(f, tol, settings.seed)
                .map(|d| (d, FactorSource::Supplied));
        }
    }
    let (dec, source) = attempt.map_err(Failure::from_core)?;
    let check = verify_decomposition(&dec, rho, tol);
    if !check.passes {
        return Err(Failure::Other(format!(
            "decomposition failed verification (reconstruction residual {:.3e})",
            check.reconstruction_residual
        )));
    }
    let file = DecompositionFile::new(&dec, &check, source);
    write(
        output,
        &(serde_json::to_string_pretty(&file).expect("decompositions serialise") + "\n"),
    )?;
    Ok(file)
}
