//! File plumbing: content hashes for report provenance, operator loading,
//! and JSON read/write helpers.

use std::fs;
use std::path::Path;

use certbound_core::linalg;
use certbound_core::operator::MatrixOperator;
use certbound_core::{DenseMatrix, DenseVector, Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Identity of one input file: where it came from and what it contained.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FileDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

pub fn digest(role: &str, path: &Path) -> Result<FileDigest> {
    let bytes = fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(FileDigest {
        role: role.to_string(),
        path: path.display().to_string(),
        sha256: sha256_of_bytes(&bytes),
    })
}

pub fn sha256_of_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

/// Shape sidecar for a matricized operator file.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OperatorMeta {
    pub n1: usize,
    pub n2: usize,
    pub m: usize,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: format!("serialization failed: {e}"),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Load a matricized operator (m x n1*n2 CSV, column-major vectorization of
/// the input) together with its shape sidecar.
pub fn read_operator(op_path: &Path, meta_path: &Path) -> Result<(MatrixOperator, OperatorMeta)> {
    let meta: OperatorMeta = read_json(meta_path)?;
    let matricized = linalg::read_matrix_csv(op_path)?;
    if matricized.nrows() != meta.m {
        return Err(Error::Parse {
            path: op_path.to_path_buf(),
            line: 0,
            msg: format!(
                "operator file has {} rows but the sidecar declares m = {}",
                matricized.nrows(),
                meta.m
            ),
        });
    }
    if matricized.ncols() != meta.n1 * meta.n2 {
        return Err(Error::Parse {
            path: op_path.to_path_buf(),
            line: 0,
            msg: format!(
                "operator file has {} columns but the sidecar declares n1*n2 = {}",
                matricized.ncols(),
                meta.n1 * meta.n2
            ),
        });
    }
    let op = MatrixOperator::new(meta.n1, meta.n2, matricized)?;
    Ok((op, meta))
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    linalg::read_matrix_csv(path)
}

pub fn read_vector(path: &Path) -> Result<DenseVector> {
    linalg::read_vector_csv(path)
}

/// Worker count for parallel sections: `CERTBOUND_WORKERS`, default 1.
pub fn workers_from_env() -> Result<usize> {
    match std::env::var("CERTBOUND_WORKERS") {
        Err(_) => Ok(1),
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(w) if w >= 1 => Ok(w),
            _ => Err(Error::Argument(format!(
                "CERTBOUND_WORKERS must be a positive integer, got {raw:?}"
            ))),
        },
    }
}
