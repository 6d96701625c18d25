//! Machine-readable command reports.

use contractivity::conditions::{Certificate, ConditionId, Rate};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::files::{InputRecord, MatrixFile};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `(W, P, Q)` of a certificate as matrix files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateJson {
    #[serde(rename = "W")]
    pub w: MatrixFile,
    #[serde(rename = "P")]
    pub p: MatrixFile,
    #[serde(rename = "Q")]
    pub q: MatrixFile,
}

impl CertificateJson {
    pub fn from_certificate(cert: &Certificate) -> Self {
        Self {
            w: MatrixFile::from_matrix(cert.w()),
            p: MatrixFile::from_matrix(cert.p().as_matrix()),
            q: MatrixFile::from_diag(cert.q()),
        }
    }
}

/// Report written by every command. Field order is fixed and maps are
/// sorted, so equal inputs give equal bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub inputs: Vec<InputRecord>,
    pub condition: Option<String>,
    pub rate: Option<f64>,
    pub status: String,
    pub margin: Option<f64>,
    pub certificate: Option<Value>,
    pub diagnostics: Map<String, Value>,
    pub seed: u64,
    pub version: String,
}

impl Report {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            inputs: Vec::new(),
            condition: None,
            rate: None,
            status: String::new(),
            margin: None,
            certificate: None,
            diagnostics: Map::new(),
            seed,
            version: VERSION.to_string(),
        }
    }

    pub fn cell(mut self, cond: ConditionId, rate: Rate) -> Self {
        self.condition = Some(cond.to_string());
        self.rate = Some(rate.value());
        self
    }

    pub fn with_certificate(mut self, cert: &Certificate) -> Self {
        self.condition = Some(cert.cond().to_string());
        self.rate = Some(cert.rate().value());
        self.certificate = Some(
            serde_json::to_value(CertificateJson::from_certificate(cert))
                .expect("matrix files serialize"),
        );
        self
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.diagnostics.insert(
            key.to_string(),
            serde_json::to_value(value).expect("diagnostics serialize"),
        );
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report serializes");
        out.push(b'\n');
        out
    }
}
