//! Experiment orchestration: shift sweeps, intra- and cross-corpus runs,
//! synthetic corpora and result reports.

mod config;
mod data;
mod experiment;
mod report;
mod synth;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::FusionError;
use crate::metrics::MetricError;
use crate::net::{ModelIoError, NetError};
use crate::timeline::DataError;

pub use config::{ExperimentConfig, NetworkChoice, SweepSpec, WindowSeconds};
pub use data::{load_corpus, load_recording, CorpusData, RecordingData};
pub use experiment::{
    cross_corpus_on, evaluate_model, intra_corpus_on, run_cross_corpus, run_intra_corpus,
    run_shift_sweep, shift_sweep_on, IntraOutcome, SweepOutcome,
};
pub use report::{render_report, write_report, FusionGain, ReportFormat, ResultRow, ResultsTable};
pub use synth::{generate_synthetic_corpus, SyntheticCorpusSpec};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Model(#[from] ModelIoError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("feature spaces differ between corpora: {0}")]
    FeatureMismatch(String),
    #[error("results table is empty")]
    EmptyResults,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Process exit code: 1 usage/config, 2 data, 3 training divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_)
            | HarnessError::Net(NetError::InvalidSpec(_) | NetError::InvalidConfig(_)) => 1,
            HarnessError::Net(NetError::Diverged { .. }) => 3,
            _ => 2,
        }
    }
}

/// Input feature set of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Speech,
    Gaze,
    Fused,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Speech, Modality::Gaze, Modality::Fused];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Speech => "speech",
            Modality::Gaze => "gaze",
            Modality::Fused => "fused",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "speech" => Ok(Modality::Speech),
            "gaze" => Ok(Modality::Gaze),
            "fused" | "fusion" => Ok(Modality::Fused),
            other => Err(format!("unknown modality {other:?}")),
        }
    }
}
