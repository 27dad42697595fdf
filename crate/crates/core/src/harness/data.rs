use crate::fusion::fuse_features;
use crate::gaze::{extract_gaze_features, GazeFeatureConfig, WindowSpec};
use crate::timeline::{
    load_annotation_csv, load_corpus_manifest, load_feature_csv, load_gaze_log_csv,
    CorpusManifest, DataError, Dimension, FeatureMatrix, FrameRate, GazeColumnMap, Partition,
    RecordingEntry,
};

use super::{HarnessError, Modality};

/// One recording with speech features, gaze features for the chosen window
/// and the unshifted annotation trace, all of equal length.
#[derive(Debug, Clone)]
pub struct RecordingData {
    pub id: String,
    pub partition: Partition,
    pub speech: FeatureMatrix,
    pub gaze: FeatureMatrix,
    pub annotation: Vec<f64>,
}

impl RecordingData {
    pub fn fps(&self) -> FrameRate {
        self.speech.fps()
    }

    pub fn n_frames(&self) -> usize {
        self.annotation.len()
    }

    pub fn features(&self, modality: Modality) -> Result<FeatureMatrix, HarnessError> {
        Ok(match modality {
            Modality::Speech => self.speech.clone(),
            Modality::Gaze => self.gaze.clone(),
            Modality::Fused => fuse_features(&self.speech, "speech", &self.gaze, "gaze")?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CorpusData {
    pub name: String,
    pub dimension: Dimension,
    pub recordings: Vec<RecordingData>,
}

impl CorpusData {
    pub fn partition(&self, p: Partition) -> impl Iterator<Item = &RecordingData> {
        self.recordings.iter().filter(move |r| r.partition == p)
    }

    /// Frame rate shared by every recording.
    pub fn fps(&self) -> Result<FrameRate, HarnessError> {
        let first = self
            .recordings
            .first()
            .ok_or_else(|| DataError::Invariant(format!("corpus {:?} is empty", self.name)))?
            .fps();
        if let Some(r) = self.recordings.iter().find(|r| r.fps() != first) {
            return Err(DataError::Invariant(format!(
                "corpus {:?} mixes frame rates ({first} and {} in {})",
                self.name,
                r.fps(),
                r.id
            ))
            .into());
        }
        Ok(first)
    }

    pub fn shortest_recording(&self) -> usize {
        self.recordings.iter().map(|r| r.n_frames()).min().unwrap_or(0)
    }
}

/// Loads one recording: speech feature CSV, raw gaze log (turned into
/// windowed gaze features) and the annotation trace for `dimension`.
pub fn load_recording(
    entry: &RecordingEntry,
    columns: &GazeColumnMap,
    dimension: Dimension,
    window_seconds: f64,
    gaze_config: &GazeFeatureConfig,
) -> Result<RecordingData, HarnessError> {
    let speech = load_feature_csv(&entry.speech, entry.fps)?;
    let log = load_gaze_log_csv(&entry.gaze, entry.fps, columns)?;
    let gaze = extract_gaze_features(&log, &WindowSpec::seconds(window_seconds), gaze_config)?;
    let annotation_path = entry.annotations.get(&dimension).ok_or_else(|| {
        DataError::Invariant(format!("recording {} has no {dimension} annotation", entry.id))
    })?;
    let annotation = load_annotation_csv(annotation_path, dimension, entry.fps)?;
    let (s, g, a) = (speech.n_frames(), gaze.n_frames(), annotation.len());
    if s != g || s != a {
        return Err(DataError::Invariant(format!(
            "recording {}: speech has {s} frames, gaze {g}, {dimension} annotation {a}",
            entry.id
        ))
        .into());
    }
    Ok(RecordingData {
        id: entry.id.clone(),
        partition: entry.partition,
        speech,
        gaze,
        annotation: annotation.values().to_vec(),
    })
}

pub fn load_corpus(
    manifest: &CorpusManifest,
    dimension: Dimension,
    window_seconds: f64,
    gaze_config: &GazeFeatureConfig,
) -> Result<CorpusData, HarnessError> {
    let columns = manifest.column_map()?;
    let recordings = manifest
        .recordings
        .iter()
        .map(|e| {
            log::debug!("loading recording {}", e.id);
            load_recording(e, &columns, dimension, window_seconds, gaze_config)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let corpus = CorpusData {
        name: manifest.corpus_name.clone(),
        dimension,
        recordings,
    };
    corpus.fps()?;
    Ok(corpus)
}

pub(crate) fn load_corpus_path(
    path: &std::path::Path,
    dimension: Dimension,
    window_seconds: f64,
    gaze_config: &GazeFeatureConfig,
) -> Result<CorpusData, HarnessError> {
    let manifest = load_corpus_manifest(path)?;
    load_corpus(&manifest, dimension, window_seconds, gaze_config)
}
