//! Versioned JSON envelopes for everything the harness emits. Every report
//! carries the schema version, the exact command line, and content hashes of
//! the input files, so a report is reproducible from itself.

use certbound_core::bounds::matrix::MatrixBoundReport;
use certbound_core::bounds::vector::VectorBoundReport;
use certbound_core::spectral::SpectralCertificate;
use serde::{Deserialize, Serialize};

use crate::files::FileDigest;

pub const SCHEMA_VERSION: u32 = 1;

pub fn argv() -> Vec<String> {
    std::env::args().collect()
}

/// Flag echo for the `spectral` subcommand.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralParams {
    pub quantity: String,
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralReport {
    pub schema_version: u32,
    pub command: String,
    pub argv: Vec<String>,
    pub inputs: Vec<FileDigest>,
    pub params: SpectralParams,
    pub certificate: SpectralCertificate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VectorCertifyReport {
    pub schema_version: u32,
    pub command: String,
    pub argv: Vec<String>,
    pub inputs: Vec<FileDigest>,
    /// Rows of the sensing matrix.
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    /// Residual of the candidate as measured against b.
    pub delta_resid_measured: f64,
    /// Residual bound actually used in the bound (>= measured).
    pub delta_used: f64,
    /// Mode of the restricted-singular-value certificate.
    pub sigma_mode: String,
    /// When the loose column-normalized baseline applies: does the
    /// certified bound improve on it?
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_below_loose: Option<bool>,
    pub report: VectorBoundReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixCertifyReport {
    pub schema_version: u32,
    pub command: String,
    pub argv: Vec<String>,
    pub inputs: Vec<FileDigest>,
    pub n1: usize,
    pub n2: usize,
    /// Number of measurements.
    pub m: usize,
    pub r: usize,
    pub epsilon: f64,
    pub delta_resid_measured: f64,
    pub delta_used: f64,
    /// True when the defect constants were supplied on the command line
    /// rather than probed; the certification is then conditional on them.
    pub constants_supplied: bool,
    pub report: MatrixBoundReport,
}

#[cfg(test)]
mod tests {
    use super::*;
    use certbound_core::spectral::{SpectralCertificate, SpectralQuantity};

    #[test]
    fn spectral_report_round_trips() {
        let report = SpectralReport {
            schema_version: SCHEMA_VERSION,
            command: "spectral".into(),
            argv: vec!["certbound".into(), "spectral".into()],
            inputs: vec![FileDigest {
                role: "matrix".into(),
                path: "A.csv".into(),
                sha256: "00".repeat(32),
            }],
            params: SpectralParams {
                quantity: "sigma-min".into(),
                mode: "exact".into(),
                p: Some(4),
                k: None,
                trials: None,
                seed: None,
                budget: Some(1000),
                n: None,
                t: None,
            },
            certificate: SpectralCertificate::exact(SpectralQuantity::SigmaMinP, 4, 0.25),
        };
        let text = serde_json::to_string_pretty(&report).unwrap();
        assert!(text.contains("\"mode\": \"exact\""));
        assert!(text.contains("\"schema_version\": 1"));
        let back: SpectralReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.certificate.value, 0.25);
        assert_eq!(back.params.p, Some(4));
        assert_eq!(back.inputs[0].sha256.len(), 64);
    }
}
