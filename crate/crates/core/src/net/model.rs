//! Trained model bundle and its JSON file format.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{predict, EpochRecord, Layout, NetError, NetworkParams, NetworkSpec, TrainOutcome, GATES};
use crate::fusion::{NormDirection, NormStats};
use crate::timeline::{write_file, Dimension, FeatureMatrix};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub seed: u64,
    pub learning_rate: f64,
    pub corpus: String,
    /// Seconds since the Unix epoch at creation.
    pub timestamp: u64,
    #[serde(default)]
    pub modality: Option<String>,
}

/// A network with everything needed to turn raw feature rows into
/// predictions in annotation units.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: NetworkSpec,
    pub params: NetworkParams,
    pub norm_stats: NormStats,
    pub dimension: Dimension,
    pub shift_frames: usize,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub metadata: ModelMetadata,
}

impl TrainedModel {
    pub fn from_outcome(
        spec: NetworkSpec,
        outcome: TrainOutcome,
        norm_stats: NormStats,
        dimension: Dimension,
        shift_frames: usize,
        metadata: ModelMetadata,
    ) -> Self {
        Self {
            spec,
            params: outcome.params,
            norm_stats,
            dimension,
            shift_frames,
            best_epoch: outcome.best_epoch,
            history: outcome.history,
            metadata,
        }
    }

    /// Normalises `features`, runs the network and maps the outputs back to
    /// annotation units. No noise is injected.
    pub fn predict_trace(&self, features: &FeatureMatrix) -> Result<Vec<f64>, NetError> {
        let inputs = self
            .norm_stats
            .normalize_features(features)
            .map_err(|e| NetError::Data(e.to_string()))?;
        self.predict_normalized(&inputs)
    }

    /// As [`predict_trace`](Self::predict_trace) for already z-scored rows.
    pub fn predict_normalized(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>, NetError> {
        let raw = predict(&self.spec, &self.params, inputs)?;
        Ok(self.norm_stats.apply_target(&raw, NormDirection::InverseTarget))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GateArrays {
    input_weights: Vec<f64>,
    recurrent_weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ReadoutArrays {
    weights: Vec<f64>,
    bias: f64,
}

/// `layers[l][direction][gate]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WeightArrays {
    layers: Vec<BTreeMap<String, BTreeMap<String, GateArrays>>>,
    readout: ReadoutArrays,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    spec: NetworkSpec,
    dimension: Dimension,
    shift_frames: usize,
    norm_stats: NormStats,
    weights: WeightArrays,
    best_epoch: usize,
    history: Vec<EpochRecord>,
    metadata: ModelMetadata,
}

fn direction_name(k: usize) -> &'static str {
    if k == 0 {
        "forward"
    } else {
        "backward"
    }
}

fn export_weights(spec: &NetworkSpec, params: &NetworkParams) -> WeightArrays {
    let layout = Layout::new(spec);
    let v = &params.values;
    let layers = layout
        .layers
        .iter()
        .map(|dirs| {
            dirs.iter()
                .enumerate()
                .map(|(k, d)| {
                    let gates = GATES
                        .iter()
                        .enumerate()
                        .map(|(g, name)| {
                            (
                                name.to_string(),
                                GateArrays {
                                    input_weights: v[d.gate_w(g)].to_vec(),
                                    recurrent_weights: v[d.gate_r(g)].to_vec(),
                                    bias: v[d.gate_b(g)].to_vec(),
                                },
                            )
                        })
                        .collect();
                    (direction_name(k).to_string(), gates)
                })
                .collect()
        })
        .collect();
    WeightArrays {
        layers,
        readout: ReadoutArrays {
            weights: v[layout.readout_w()].to_vec(),
            bias: v[layout.readout_b()],
        },
    }
}

fn import_weights(spec: &NetworkSpec, w: &WeightArrays) -> Result<NetworkParams, String> {
    let layout = Layout::new(spec);
    if w.layers.len() != layout.layers.len() {
        return Err(format!(
            "weights have {} layers, spec has {}",
            w.layers.len(),
            layout.layers.len()
        ));
    }
    let mut params = NetworkParams::zeros(spec);
    let mut put = |range: std::ops::Range<usize>, src: &[f64], what: &str| {
        if src.len() != range.len() {
            return Err(format!("{what}: {} values, expected {}", src.len(), range.len()));
        }
        params.values[range].copy_from_slice(src);
        Ok(())
    };
    for (l, (dirs, arrays)) in layout.layers.iter().zip(&w.layers).enumerate() {
        if arrays.len() != dirs.len() {
            return Err(format!("layer {l}: expected {} directions", dirs.len()));
        }
        for (k, d) in dirs.iter().enumerate() {
            let gates = arrays
                .get(direction_name(k))
                .ok_or_else(|| format!("layer {l}: missing {} direction", direction_name(k)))?;
            for (g, name) in GATES.iter().enumerate() {
                let a = gates
                    .get(*name)
                    .ok_or_else(|| format!("layer {l}: missing gate {name}"))?;
                let what = format!("layer {l} {} {name}", direction_name(k));
                put(d.gate_w(g), &a.input_weights, &what)?;
                put(d.gate_r(g), &a.recurrent_weights, &what)?;
                put(d.gate_b(g), &a.bias, &what)?;
            }
        }
    }
    put(layout.readout_w(), &w.readout.weights, "readout")?;
    put(layout.readout_b()..layout.readout_b() + 1, &[w.readout.bias], "readout bias")?;
    if !params.is_finite() {
        return Err("non-finite weight".into());
    }
    Ok(params)
}

#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error("{0}")]
    Io(String),
    #[error("model file format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("malformed model file: {0}")]
    Schema(String),
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), ModelIoError> {
    let file = ModelFile {
        version: MODEL_FORMAT_VERSION,
        spec: model.spec.clone(),
        dimension: model.dimension,
        shift_frames: model.shift_frames,
        norm_stats: model.norm_stats.clone(),
        weights: export_weights(&model.spec, &model.params),
        best_epoch: model.best_epoch,
        history: model.history.clone(),
        metadata: model.metadata.clone(),
    };
    let json = serde_json::to_string(&file).map_err(|e| ModelIoError::Schema(e.to_string()))?;
    write_file(path, json.as_bytes()).map_err(|e| ModelIoError::Io(e.to_string()))
}

pub fn load_model(path: &Path) -> Result<TrainedModel, ModelIoError> {
    let text = fs::read_to_string(path).map_err(|e| ModelIoError::Io(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| ModelIoError::Schema(e.to_string()))?;
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| ModelIoError::Schema("missing version field".into()))?;
    if version != MODEL_FORMAT_VERSION as u64 {
        return Err(ModelIoError::Version {
            found: version as u32,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| ModelIoError::Schema(e.to_string()))?;
    file.spec
        .validate()
        .map_err(|e| ModelIoError::Schema(e.to_string()))?;
    if file.norm_stats.feature_names.len() != file.spec.input_dim {
        return Err(ModelIoError::Schema(
            "normalisation statistics do not match the input dimension".into(),
        ));
    }
    let params = import_weights(&file.spec, &file.weights).map_err(ModelIoError::Schema)?;
    Ok(TrainedModel {
        spec: file.spec,
        params,
        norm_stats: file.norm_stats,
        dimension: file.dimension,
        shift_frames: file.shift_frames,
        best_epoch: file.best_epoch,
        history: file.history,
        metadata: file.metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_network, LayerKind};
    use crate::timeline::FrameRate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(kind: LayerKind) -> TrainedModel {
        let spec = NetworkSpec::uniform(kind, 3, &[4, 2]);
        let mut params = init_network(&spec, 9).unwrap();
        params.values.iter_mut().enumerate().for_each(|(i, v)| *v += 1e-3 * i as f64 / 7.0);
        TrainedModel {
            spec,
            params,
            norm_stats: NormStats {
                feature_names: vec!["a".into(), "b".into(), "c".into()],
                feature_means: vec![0.1, -0.2, 0.3],
                feature_stds: vec![1.5, 0.7, 2.0],
                target_mean: 0.05,
                target_std: 0.3,
            },
            dimension: Dimension::Valence,
            shift_frames: 78,
            best_epoch: 3,
            history: vec![],
            metadata: ModelMetadata {
                seed: 9,
                learning_rate: 1e-5,
                corpus: "toy".into(),
                timestamp: 0,
                modality: Some("fused".into()),
            },
        }
    }

    fn features(frames: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FeatureMatrix::new(
            vec!["a".into(), "b".into(), "c".into()],
            (0..frames)
                .map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect(),
            FrameRate::new(25.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_preserves_predictions_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        for kind in [LayerKind::Lstm, LayerKind::Blstm] {
            let m = model(kind);
            let p = dir.path().join(format!("{kind}.json"));
            save_model(&m, &p).unwrap();
            let back = load_model(&p).unwrap();
            assert_eq!(back, m);
            for s in 0..10 {
                let f = features(5 + 7 * s as usize, s);
                assert_eq!(m.predict_trace(&f).unwrap(), back.predict_trace(&f).unwrap());
            }
        }
    }

    #[test]
    fn truncated_and_wrong_version_files_fail() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        save_model(&model(LayerKind::Lstm), &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        fs::write(&p, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_model(&p), Err(ModelIoError::Schema(_))));

        let bumped = text.replacen("\"version\":1", "\"version\":2", 1);
        fs::write(&p, bumped).unwrap();
        assert!(matches!(
            load_model(&p),
            Err(ModelIoError::Version { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn zero_model_predicts_target_mean() {
        let mut m = model(LayerKind::Blstm);
        m.params.values.iter_mut().for_each(|v| *v = 0.0);
        let f = FeatureMatrix::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec![0.0; 3]; 8],
            FrameRate::new(25.0).unwrap(),
        )
        .unwrap();
        assert_eq!(m.predict_trace(&f).unwrap(), vec![0.05; 8]);
    }

    #[test]
    fn prediction_length_matches_input() {
        let m = model(LayerKind::Blstm);
        for s in 0..10u64 {
            let n = 1 + (s as usize * 13) % 40;
            assert_eq!(m.predict_trace(&features(n, s)).unwrap().len(), n);
        }
        let wrong = FeatureMatrix::new(vec!["x".into()], vec![vec![0.0]], FrameRate::new(25.0).unwrap()).unwrap();
        assert!(m.predict_trace(&wrong).is_err());
    }
}
