//! Resolves ensemble, state and measurement arguments: either a JSON file
//! or a named built-in.

use std::fs;
use std::path::Path;

use qhide::constructions::{self, bell_singlet, WernerParams};
use qhide::discrimination::Povm;
use qhide::{HermitianOperator, StateEnsemble};

use crate::CliError;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {what} file {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{what} file {} is malformed: {e}", path.display())))
}

/// `bell-example1`, `example2:m,n,d`, or a path to ensemble JSON.
///
/// Files are parsed structurally; callers decide whether to validate.
pub fn ensemble(spec: &str, cap: usize) -> Result<StateEnsemble, CliError> {
    if spec == "bell-example1" {
        return Ok(constructions::example1(&bell_singlet())?.ensemble);
    }
    if let Some(params) = spec.strip_prefix("example2:") {
        let params = WernerParams::parse(params)?;
        let ex = constructions::example2(params, cap)?;
        return ex.ensemble.ok_or_else(|| {
            CliError::Input(format!(
                "example2 {params:?} needs dimension ({}^2)^{} beyond the cap {cap}; raise --cap or use the example2 subcommand for reference values",
                params.d, params.m
            ))
        });
    }
    read_json(Path::new(spec), "ensemble")
}

/// Like [`ensemble`], but rejects ensembles that fail validation.
pub fn valid_ensemble(spec: &str, cap: usize) -> Result<StateEnsemble, CliError> {
    let e = ensemble(spec, cap)?;
    e.ensure_valid()?;
    Ok(e)
}

/// `bell`, `random-npt:DxD:SEED`, or a path to operator JSON.
pub fn sigma(spec: &str) -> Result<HermitianOperator, CliError> {
    if spec == "bell" {
        return Ok(bell_singlet());
    }
    if let Some(rest) = spec.strip_prefix("random-npt:") {
        let bad = || CliError::Input(format!("expected random-npt:DxD:SEED, got {spec:?}"));
        let (shape, seed) = rest.split_once(':').ok_or_else(bad)?;
        let (a, b) = shape.split_once('x').ok_or_else(bad)?;
        let a: usize = a.parse().map_err(|_| bad())?;
        let b: usize = b.parse().map_err(|_| bad())?;
        if a != b {
            return Err(CliError::Input(format!(
                "random NPT states need equal local dimensions, got {a}x{b}"
            )));
        }
        let seed: u64 = seed.parse().map_err(|_| bad())?;
        return Ok(constructions::random_npt_state(a, seed)?);
    }
    read_json(Path::new(spec), "state")
}

pub fn povm(path: &Path) -> Result<Povm, CliError> {
    read_json(path, "measurement")
}
