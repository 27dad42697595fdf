//! Annotation time-shift, feature-level fusion and z-normalisation.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeline::{AnnotationTrace, DataError, FeatureMatrix, FrameRate};

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("shift of {shift} frames does not fit a trace of {len} frames")]
    ShiftTooLarge { shift: usize, len: usize },
    #[error("frame count mismatch {0} vs {1}")]
    FrameCountMismatch(usize, usize),
    #[error("frame rate mismatch {0} vs {1}")]
    FrameRateMismatch(FrameRate, FrameRate),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("feature names do not match the normalisation statistics: {0}")]
    NameMismatch(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// A ground-truth delay in frames, expressed at `source_fps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub frames: usize,
    pub source_fps: FrameRate,
}

impl ShiftSpec {
    pub fn new(frames: usize, source_fps: FrameRate) -> Self {
        Self { frames, source_fps }
    }

    pub fn seconds(&self) -> f64 {
        self.frames as f64 / self.source_fps.fps()
    }
}

/// Moves annotations `k` frames back in time and pads the tail with 0.0:
/// `out[t] = in[t + k]` for `t < N − k`.
pub fn shift_annotations(
    trace: &AnnotationTrace,
    shift: &ShiftSpec,
) -> Result<AnnotationTrace, FusionError> {
    let values = shift_values(trace.values(), shift.frames)?;
    Ok(AnnotationTrace::new(trace.dimension(), values, trace.fps())?)
}

pub fn shift_values(values: &[f64], k: usize) -> Result<Vec<f64>, FusionError> {
    let n = values.len();
    if k >= n {
        return Err(FusionError::ShiftTooLarge { shift: k, len: n });
    }
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&values[k..]);
    out.resize(n, 0.0);
    Ok(out)
}

/// Re-expresses a shift at another frame rate, rounding to the nearest frame,
/// unless an explicit override is given.
pub fn convert_shift(shift: &ShiftSpec, target_fps: FrameRate, override_frames: Option<usize>) -> ShiftSpec {
    let frames = override_frames.unwrap_or_else(|| {
        if shift.source_fps == target_fps {
            shift.frames
        } else {
            (shift.frames as f64 / shift.source_fps.fps() * target_fps.fps()).round() as usize
        }
    });
    ShiftSpec {
        frames,
        source_fps: target_fps,
    }
}

/// Per-frame concatenation `a ++ b`. Names present in both inputs get the
/// modality tag appended (`name_tag`).
pub fn fuse_features(
    a: &FeatureMatrix,
    a_tag: &str,
    b: &FeatureMatrix,
    b_tag: &str,
) -> Result<FeatureMatrix, FusionError> {
    if a.n_frames() != b.n_frames() {
        return Err(FusionError::FrameCountMismatch(a.n_frames(), b.n_frames()));
    }
    if a.fps() != b.fps() {
        return Err(FusionError::FrameRateMismatch(a.fps(), b.fps()));
    }
    let a_names: HashSet<&String> = a.names().iter().collect();
    let b_names: HashSet<&String> = b.names().iter().collect();
    let tag = |n: &String, tag: &str, other: &HashSet<&String>| {
        if other.contains(n) {
            format!("{n}_{tag}")
        } else {
            n.clone()
        }
    };
    let names = a
        .names()
        .iter()
        .map(|n| tag(n, a_tag, &b_names))
        .chain(b.names().iter().map(|n| tag(n, b_tag, &a_names)))
        .collect();
    let rows = a
        .rows()
        .iter()
        .zip(b.rows())
        .map(|(ra, rb)| ra.iter().chain(rb).copied().collect())
        .collect();
    Ok(FeatureMatrix::new(names, rows, a.fps())?)
}

/// Per-feature and target mean/std pooled over all training frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub feature_names: Vec<String>,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

/// Standard deviations below this are replaced by 1.
pub const CONSTANT_FEATURE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormDirection {
    Forward,
    InverseTarget,
}

fn guard(std: f64) -> f64 {
    if std < CONSTANT_FEATURE_EPS {
        1.0
    } else {
        std
    }
}

fn pooled(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (mut n, mut sum) = (0usize, 0.0);
    for v in values.clone() {
        n += 1;
        sum += v;
    }
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

pub fn fit_norm_stats(
    train_features: &[&FeatureMatrix],
    train_targets: &[&[f64]],
) -> Result<NormStats, FusionError> {
    let first = train_features.first().ok_or(FusionError::EmptyTrainingSet)?;
    if train_targets.is_empty() {
        return Err(FusionError::EmptyTrainingSet);
    }
    let names = first.names().to_vec();
    for m in train_features {
        if m.names() != names.as_slice() {
            return Err(FusionError::NameMismatch(
                "training recordings disagree on feature names".into(),
            ));
        }
    }
    let mut feature_means = Vec::with_capacity(names.len());
    let mut feature_stds = Vec::with_capacity(names.len());
    for c in 0..names.len() {
        let col = train_features
            .iter()
            .flat_map(|m| m.rows().iter().map(move |r| r[c]));
        let (mean, std) = pooled(col);
        feature_means.push(mean);
        feature_stds.push(guard(std));
    }
    let (target_mean, target_std) = pooled(train_targets.iter().flat_map(|t| t.iter().copied()));
    Ok(NormStats {
        feature_names: names,
        feature_means,
        feature_stds,
        target_mean,
        target_std: guard(target_std),
    })
}

impl NormStats {
    fn check_names(&self, names: &[String]) -> Result<(), FusionError> {
        if names != self.feature_names.as_slice() {
            let detail = if names.len() != self.feature_names.len() {
                format!("{} features vs {} expected", names.len(), self.feature_names.len())
            } else {
                let i = names
                    .iter()
                    .zip(&self.feature_names)
                    .position(|(a, b)| a != b)
                    .unwrap_or(0);
                format!("column {i} is {:?}, expected {:?}", names[i], self.feature_names[i])
            };
            return Err(FusionError::NameMismatch(detail));
        }
        Ok(())
    }

    /// z-scores every row of `m`.
    pub fn normalize_features(&self, m: &FeatureMatrix) -> Result<Vec<Vec<f64>>, FusionError> {
        self.check_names(m.names())?;
        Ok(m.rows().iter().map(|r| self.normalize_row(r)).collect())
    }

    pub fn normalize_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.feature_means.iter().zip(&self.feature_stds))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn apply_target(&self, values: &[f64], direction: NormDirection) -> Vec<f64> {
        match direction {
            NormDirection::Forward => values
                .iter()
                .map(|y| (y - self.target_mean) / self.target_std)
                .collect(),
            NormDirection::InverseTarget => values
                .iter()
                .map(|y| y * self.target_std + self.target_mean)
                .collect(),
        }
    }

    /// Feature matrix in z-scored form, as a new matrix with the same names.
    pub fn apply_features(&self, m: &FeatureMatrix) -> Result<FeatureMatrix, FusionError> {
        let rows = self.normalize_features(m)?;
        Ok(FeatureMatrix::new(m.names().to_vec(), rows, m.fps())?)
    }
}
