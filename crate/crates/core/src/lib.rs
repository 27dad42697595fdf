//! Bimodal speech + eye-gaze continuous affect prediction.
//!
//! The crate is organised along the processing chain:
//!
//! * [`timeline`] – recordings, feature matrices, gaze logs, annotation traces,
//!   corpus manifests and frame/second arithmetic.
//! * [`gaze`] – the 31-dimensional windowed eye-gaze feature set.
//! * [`fusion`] – annotation time-shift, frame-rate shift conversion, feature
//!   concatenation and z-normalisation.
//! * [`net`] – LSTM / BLSTM sequence regression trained with backpropagation
//!   through time.
//! * [`metrics`] – concordance correlation coefficient, Pearson correlation, SSE.
//! * [`harness`] – shift sweeps, intra- and cross-corpus experiments, synthetic
//!   corpora, model persistence and reports.

pub mod fusion;
pub mod gaze;
pub mod harness;
pub mod metrics;
pub mod net;
pub mod timeline;

pub use fusion::{NormStats, ShiftSpec};
pub use gaze::{GazeFeatureConfig, WindowSpec};
pub use metrics::{ccc, pearson, sse, PredictionPair};
pub use net::{LayerKind, LayerSpec, NetworkParams, NetworkSpec, TrainConfig, TrainedModel};
pub use timeline::{
    AnnotationTrace, CorpusManifest, Dimension, FeatureMatrix, FrameRate, GazeFrame, GazeLog,
    Partition,
};
