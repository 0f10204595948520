//! JSON state files: `{"dims": [...], "re": [[...]], "im": [[...]]}`.
//!
//! Numbers are written in shortest round-trip form, which reproduces every
//! `f64` exactly on reload.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qmat::{CMatrix, DensityMatrix, QmatError};
use crate::states;

#[derive(Debug, Error)]
pub enum StateFileError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("state file schema error: {0}")]
    Schema(String),
    #[error("state file shape error: {0}")]
    Shape(String),
    #[error("state validation failed: {0}")]
    Validation(#[from] QmatError),
}

impl StateFileError {
    pub fn code(&self) -> &'static str {
        match self {
            StateFileError::Io { .. } => "io",
            StateFileError::Schema(_) => "schema",
            StateFileError::Shape(_) => "schema",
            StateFileError::Validation(e) => match e {
                QmatError::DimsMismatch { .. } | QmatError::InvalidDims(_) => "schema",
                _ => "validation",
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub dims: Vec<usize>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl StateFile {
    pub fn from_density(rho: &DensityMatrix) -> Self {
        let m = rho.matrix();
        let n = m.nrows();
        let re = (0..n)
            .map(|i| (0..n).map(|j| m[(i, j)].re).collect())
            .collect();
        let im = (0..n)
            .map(|i| (0..n).map(|j| m[(i, j)].im).collect())
            .collect();
        StateFile {
            dims: rho.dims().to_vec(),
            re,
            im,
        }
    }

    pub fn to_density(&self) -> Result<DensityMatrix, StateFileError> {
        let n = self.re.len();
        if self.im.len() != n {
            return Err(StateFileError::Shape(format!(
                "re has {n} rows, im has {}",
                self.im.len()
            )));
        }
        for (name, rows) in [("re", &self.re), ("im", &self.im)] {
            if let Some(bad) = rows.iter().position(|r| r.len() != n) {
                return Err(StateFileError::Shape(format!(
                    "{name} row {bad} has {} entries, expected {n}",
                    rows[bad].len()
                )));
            }
        }
        let product: usize = self.dims.iter().product();
        if self.dims.is_empty() || product != n {
            return Err(StateFileError::Shape(format!(
                "dims {:?} do not match a {n}x{n} matrix",
                self.dims
            )));
        }
        let m = CMatrix::from_fn(n, n, |i, j| Complex64::new(self.re[i][j], self.im[i][j]));
        Ok(DensityMatrix::validate(m, &self.dims)?)
    }
}

pub fn parse_state(json: &str) -> Result<DensityMatrix, StateFileError> {
    let file: StateFile =
        serde_json::from_str(json).map_err(|e| StateFileError::Schema(e.to_string()))?;
    file.to_density()
}

pub fn load_state(path: impl AsRef<Path>) -> Result<DensityMatrix, StateFileError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| StateFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_state(&text)
}

pub fn save_state(rho: &DensityMatrix, path: impl AsRef<Path>) -> Result<(), StateFileError> {
    let json = serde_json::to_string_pretty(&StateFile::from_density(rho))
        .map_err(|e| StateFileError::Schema(e.to_string()))?;
    write_atomic(path.as_ref(), json.as_bytes())
}

/// Loads a named reference state (see [`states::named_state`]) or a state file.
pub fn resolve_state(spec: &str) -> Result<DensityMatrix, StateFileError> {
    match states::named_state(spec) {
        Some(result) => Ok(result?),
        None => load_state(spec),
    }
}

/// Writes to a temporary sibling, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StateFileError> {
    let io_err = |source| StateFileError::Io {
        path: path.display().to_string(),
        source,
    };
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(bytes).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rho.json");
        let rho = ensembles::induced_mixed(&[4], 4, &mut ensembles::trial_rng(11, 0)).unwrap();
        save_state(&rho, &path).unwrap();
        let back = load_state(&path).unwrap();
        assert!(back.op().max_abs_diff(rho.op()) < 1e-15);
        assert_eq!(back.dims(), &[4]);
    }

    #[test]
    fn shape_errors() {
        let json =
            r#"{"dims":[2,2],"re":[[1,0,0],[0,0,0],[0,0,0]],"im":[[0,0,0],[0,0,0],[0,0,0]]}"#;
        assert!(matches!(parse_state(json), Err(StateFileError::Shape(_))));
        let ragged = r#"{"dims":[2],"re":[[1,0],[0]],"im":[[0,0],[0,0]]}"#;
        assert!(matches!(parse_state(ragged), Err(StateFileError::Shape(_))));
        let missing = r#"{"dims":[2],"re":[[1,0],[0,0]]}"#;
        assert!(matches!(
            parse_state(missing),
            Err(StateFileError::Schema(_))
        ));
    }

    #[test]
    fn validation_error_names_eigenvalue() {
        let json = r#"{"dims":[2],"re":[[1.5,0],[0,-0.5]],"im":[[0,0],[0,0]]}"#;
        let err = parse_state(json).unwrap_err();
        assert_eq!(err.code(), "validation");
        assert!(err.to_string().contains("-5e-1"), "{err}");
    }

    #[test]
    fn resolve_named_and_missing() {
        assert_eq!(resolve_state("bell").unwrap().dims(), &[2, 2]);
        assert!(matches!(
            resolve_state("/nonexistent/state.json"),
            Err(StateFileError::Io { .. })
        ));
    }
}
