//! JSON report types and the run manifest embedded in each of them.

use serde::Serialize;
use sha2::{Digest, Sha256};

use lisa_bounds::graph::ConnectivityClass;
use lisa_bounds::inference::{Flag, Tail, ThresholdMode};
use lisa_bounds::sim::{GraphInfo, StudyReport};
use lisa_bounds::specfun::BetaParams;
use lisa_bounds::{ExclusionReason, Statistic};

/// Everything needed to reproduce a report. Thread counts and output paths
/// are left out so they cannot change the bytes of a report.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub flags: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: &'static str,
    pub bytes: usize,
    pub sha256: String,
}

impl InputDigest {
    pub fn new(role: &'static str, content: &[u8]) -> Self {
        Self {
            role,
            bytes: content.len(),
            sha256: format!("{:x}", Sha256::digest(content)),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VertexReport {
    pub id: String,
    pub index: usize,
    pub degree: usize,
    pub connectivity: ConnectivityClass,
    pub value: Option<f64>,
    pub gamma: f64,
    pub centering: f64,
    pub threshold: f64,
    pub p_beta: Option<f64>,
    pub ln_p_beta: Option<f64>,
    pub p_subgauss: Option<f64>,
    pub ln_p_subgauss: Option<f64>,
    pub p_zscore: Option<f64>,
    pub p_mc: Option<f64>,
    pub p_exhaustive: Option<f64>,
    pub flags: Vec<Flag>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExcludedVertex {
    pub id: String,
    pub index: usize,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, Serialize)]
pub struct LisaReport {
    pub manifest: RunManifest,
    pub graph: GraphInfo,
    pub statistic: Statistic,
    pub k: usize,
    pub tail: Tail,
    pub threshold_mode: ThresholdMode,
    pub vertices: Vec<VertexReport>,
    pub excluded: Vec<ExcludedVertex>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GisaResult {
    pub gamma: f64,
    pub centering: f64,
    pub threshold: f64,
    pub upsilon2: f64,
    pub varpi2: f64,
    pub eta: Vec<f64>,
    pub p_analytic: f64,
    pub ln_p_analytic: f64,
    pub p_emp_beta: Option<f64>,
    pub emp_beta_params: Option<BetaParams>,
    pub r: Option<usize>,
    pub p_mc: Option<f64>,
    pub flags: Vec<Flag>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GisaReport {
    pub manifest: RunManifest,
    pub graph: GraphInfo,
    pub statistic: Statistic,
    pub k: usize,
    pub threshold_mode: ThresholdMode,
    pub result: GisaResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyOutput {
    pub manifest: RunManifest,
    pub study: StudyReport,
}
