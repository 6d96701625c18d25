//! JSON matrix files, hashed input reads and atomic writes.

use std::io::Write;
use std::path::Path;

use contractivity::linalg::{DiagPosMatrix, GeneralMatrix, SymMatrix};
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// `{"rows", "cols", "data"}` in row-major order, or `{"diag": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixFile {
    Dense {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    },
    Diag {
        diag: Vec<f64>,
    },
}

impl MatrixFile {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let data = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
            .collect();
        MatrixFile::Dense {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn from_diag(d: &DiagPosMatrix) -> Self {
        MatrixFile::Diag {
            diag: d.diag().to_vec(),
        }
    }

    /// Dense matrix after checking the length and finiteness of the data.
    pub fn to_matrix(&self) -> Result<DMatrix<f64>, String> {
        match self {
            MatrixFile::Dense { rows, cols, data } => {
                if data.len() != rows * cols {
                    return Err(format!(
                        "data has {} entries, expected {rows}x{cols}",
                        data.len()
                    ));
                }
                if data.iter().any(|v| !v.is_finite()) {
                    return Err("matrix entries must be finite".into());
                }
                Ok(DMatrix::from_row_slice(*rows, *cols, data))
            }
            MatrixFile::Diag { diag } => {
                if diag.iter().any(|v| !v.is_finite()) {
                    return Err("matrix entries must be finite".into());
                }
                Ok(DMatrix::from_diagonal(
                    &nalgebra::DVector::from_column_slice(diag),
                ))
            }
        }
    }

    pub fn to_sym(&self) -> Result<SymMatrix, String> {
        SymMatrix::new(self.to_matrix()?).map_err(|e| e.to_string())
    }

    pub fn to_diag(&self) -> Result<DiagPosMatrix, String> {
        let m = self.to_matrix()?;
        if m.nrows() != m.ncols() {
            return Err("diagonal matrix must be square".into());
        }
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if i != j && m[(i, j)] != 0.0 {
                    return Err(format!("entry ({i}, {j}) is off the diagonal"));
                }
            }
        }
        DiagPosMatrix::new(m.diagonal().iter().copied().collect()).map_err(|e| e.to_string())
    }

    pub fn to_general(&self) -> Result<GeneralMatrix, String> {
        self.to_matrix()
    }
}

/// Path and SHA-256 of one input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

/// Reads files while recording their hashes for the report.
#[derive(Debug, Default)]
pub struct Inputs {
    records: Vec<InputRecord>,
}

impl Inputs {
    pub fn read_bytes(&mut self, path: &str) -> CliResult<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|source| CliError::Io {
            path: path.to_string(),
            source,
        })?;
        let digest = Sha256::digest(&bytes);
        self.records.push(InputRecord {
            path: path.to_string(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        });
        Ok(bytes)
    }

    pub fn read_json<T: DeserializeOwned>(&mut self, path: &str) -> CliResult<T> {
        let bytes = self.read_bytes(path)?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Parse {
            path: path.to_string(),
            message: e.to_string(),
        })
    }

    pub fn into_records(self) -> Vec<InputRecord> {
        self.records
    }
}

/// Attaches the file name to a matrix conversion failure.
pub fn parse_err(path: &str) -> impl Fn(String) -> CliError + '_ {
    move |message| CliError::Parse {
        path: path.to_string(),
        message,
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &str, bytes: &[u8]) -> CliResult<()> {
    let io = |source| CliError::Io {
        path: path.to_string(),
        source,
    };
    let target = Path::new(path);
    let dir = match target.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.flush().map_err(io)?;
    tmp.persist(target).map_err(|e| io(e.error))?;
    Ok(())
}
