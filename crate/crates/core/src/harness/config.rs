use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HarnessError, Modality};
use crate::gaze::GazeFeatureConfig;
use crate::net::{LayerKind, NetworkSpec, TrainConfig};
use crate::timeline::{frames_for_duration, Dimension, FrameRate};

pub const DEFAULT_SEEDS: [u64; 2] = [1787452436, 123456789];
pub const AROUSAL_LEARNING_RATES: [f64; 5] = [8e-5, 7e-5, 9e-6, 1e-5, 3e-5];
pub const VALENCE_LEARNING_RATES: [f64; 6] = [5e-6, 2e-6, 3e-6, 9e-7, 4e-6, 1e-5];

/// Feature window length per affect dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowSeconds {
    pub arousal: f64,
    pub valence: f64,
}

impl Default for WindowSeconds {
    fn default() -> Self {
        Self {
            arousal: 4.0,
            valence: 6.0,
        }
    }
}

impl WindowSeconds {
    pub fn get(&self, dimension: Dimension) -> f64 {
        match dimension {
            Dimension::Arousal => self.arousal,
            Dimension::Valence => self.valence,
        }
    }
}

/// Annotation shifts tried by a sweep: `anchor + j·stride` for every integer
/// `j` with `|j·stride| < range`, where `range` is `range_seconds` in frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    /// Defaults to 59 frames (arousal) or 78 (valence).
    pub anchor_frames: Option<usize>,
    pub range_seconds: f64,
    pub stride_frames: usize,
    pub modality: Modality,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            anchor_frames: None,
            range_seconds: 1.0,
            stride_frames: 3,
            modality: Modality::Fused,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkChoice {
    pub kind: LayerKind,
    pub sizes: Vec<usize>,
}

impl NetworkChoice {
    pub fn spec(&self, input_dim: usize) -> NetworkSpec {
        NetworkSpec::uniform(self.kind, input_dim, &self.sizes)
    }
}

fn default_modalities() -> Vec<Modality> {
    Modality::ALL.to_vec()
}

fn default_networks() -> Vec<NetworkChoice> {
    vec![
        NetworkChoice {
            kind: LayerKind::Blstm,
            sizes: vec![40, 30],
        },
        NetworkChoice {
            kind: LayerKind::Lstm,
            sizes: vec![80, 60],
        },
    ]
}

fn default_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub train_manifest: PathBuf,
    /// Corpus tested by cross-corpus runs.
    #[serde(default)]
    pub test_manifest: Option<PathBuf>,
    pub dimension: Dimension,
    #[serde(default = "default_modalities")]
    pub modalities: Vec<Modality>,
    #[serde(default)]
    pub window_seconds: WindowSeconds,
    #[serde(default)]
    pub sweep: SweepSpec,
    /// Annotation shift for intra- and cross-corpus runs. Defaults to 69
    /// frames (arousal) or 78 (valence).
    #[serde(default)]
    pub shift_frames: Option<usize>,
    /// Shift used on the cross-corpus test corpus instead of the frame-rate
    /// conversion of `shift_frames` (84 / 96 for a 25 → 30 fps transfer).
    #[serde(default)]
    pub cross_shift_override: Option<usize>,
    #[serde(default = "default_networks")]
    pub networks: Vec<NetworkChoice>,
    /// Defaults to the per-dimension grid.
    #[serde(default)]
    pub learning_rates: Option<Vec<f64>>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Everything except learning rate and seed, which come from the grid.
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub gaze: GazeFeatureConfig,
    /// Cross-corpus runs also train on the test corpus and test on the
    /// training corpus.
    #[serde(default)]
    pub both_directions: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(train_manifest: impl Into<PathBuf>, dimension: Dimension) -> Self {
        Self {
            train_manifest: train_manifest.into(),
            test_manifest: None,
            dimension,
            modalities: default_modalities(),
            window_seconds: WindowSeconds::default(),
            sweep: SweepSpec::default(),
            shift_frames: None,
            cross_shift_override: None,
            networks: default_networks(),
            learning_rates: None,
            seeds: default_seeds(),
            train: TrainConfig::default(),
            gaze: GazeFeatureConfig::default(),
            both_directions: false,
            output_dir: default_output_dir(),
        }
    }

    /// Reads a JSON config. Relative manifest and output paths are resolved
    /// against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: Self = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.train_manifest);
        if let Some(p) = config.test_manifest.as_mut() {
            resolve(p);
        }
        resolve(&mut config.output_dir);
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.modalities.is_empty() {
            return bad("modalities must not be empty");
        }
        if self.networks.is_empty() {
            return bad("networks must not be empty");
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        if self.learning_rates().is_empty() {
            return bad("learning_rates must not be empty");
        }
        if self.learning_rates().iter().any(|lr| !(lr.is_finite() && *lr > 0.0)) {
            return bad("learning rates must be positive");
        }
        for w in [self.window_seconds.arousal, self.window_seconds.valence] {
            if !(w.is_finite() && w > 0.0) {
                return bad("window lengths must be positive");
            }
        }
        if self.sweep.stride_frames == 0 {
            return bad("sweep stride must be at least one frame");
        }
        if !(self.sweep.range_seconds.is_finite() && self.sweep.range_seconds > 0.0) {
            return bad("sweep range must be positive");
        }
        for n in &self.networks {
            n.spec(1).validate()?;
        }
        for lr in self.learning_rates() {
            TrainConfig {
                learning_rate: lr,
                ..self.train
            }
            .validate()?;
        }
        self.gaze.grid.validate().map_err(HarnessError::Config)?;
        Ok(())
    }

    pub fn window(&self) -> f64 {
        self.window_seconds.get(self.dimension)
    }

    pub fn learning_rates(&self) -> Vec<f64> {
        match &self.learning_rates {
            Some(lrs) => lrs.clone(),
            None => match self.dimension {
                Dimension::Arousal => AROUSAL_LEARNING_RATES.to_vec(),
                Dimension::Valence => VALENCE_LEARNING_RATES.to_vec(),
            },
        }
    }

    pub fn sweep_anchor(&self) -> usize {
        self.sweep.anchor_frames.unwrap_or(match self.dimension {
            Dimension::Arousal => 59,
            Dimension::Valence => 78,
        })
    }

    pub fn chosen_shift(&self) -> usize {
        self.shift_frames.unwrap_or(match self.dimension {
            Dimension::Arousal => 69,
            Dimension::Valence => 78,
        })
    }

    /// Shifts of the sweep in ascending order, clipped at 0.
    pub fn sweep_shifts(&self, fps: FrameRate) -> Result<Vec<usize>, HarnessError> {
        let range = frames_for_duration(self.sweep.range_seconds, fps)? as i64;
        let stride = self.sweep.stride_frames as i64;
        let anchor = self.sweep_anchor() as i64;
        let reach = (range - 1) / stride;
        Ok((-reach..=reach)
            .map(|j| anchor + j * stride)
            .filter(|&s| s >= 0)
            .map(|s| s as usize)
            .collect())
    }

    /// The learning-rate × seed grid, in that nesting order.
    pub fn train_grid(&self) -> Vec<TrainConfig> {
        self.learning_rates()
            .into_iter()
            .flat_map(|lr| {
                self.seeds.iter().map(move |&seed| TrainConfig {
                    learning_rate: lr,
                    seed,
                    ..self.train
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fps(f: f64) -> FrameRate {
        FrameRate::new(f).unwrap()
    }

    #[test]
    fn defaults_match_reference_setup() {
        let c = ExperimentConfig::new("m.json", Dimension::Arousal);
        assert_eq!(c.window(), 4.0);
        assert_eq!(c.sweep_anchor(), 59);
        assert_eq!(c.chosen_shift(), 69);
        assert_eq!(c.learning_rates(), AROUSAL_LEARNING_RATES);
        assert_eq!(c.train_grid().len(), 10);
        assert_eq!(c.train.max_epochs, 100);
        assert_eq!(c.train.patience_epochs, 20);
        assert_eq!(c.train.noise_sigma, 0.1);
        let v = ExperimentConfig::new("m.json", Dimension::Valence);
        assert_eq!(v.window(), 6.0);
        assert_eq!(v.sweep_anchor(), 78);
        assert_eq!(v.chosen_shift(), 78);
        assert_eq!(v.learning_rates().len(), 6);
    }

    #[test]
    fn sweep_covers_one_second_each_side() {
        let c = ExperimentConfig::new("m.json", Dimension::Arousal);
        let s = c.sweep_shifts(fps(25.0)).unwrap();
        assert_eq!(s.first(), Some(&35));
        assert_eq!(s.last(), Some(&83));
        assert!(s.iter().all(|x| x.abs_diff(59) < 25));
        assert!(s.windows(2).all(|w| w[1] - w[0] == 3));
        assert!(s.contains(&59));
    }

    #[test]
    fn stride_equal_to_range_is_anchor_only() {
        let mut c = ExperimentConfig::new("m.json", Dimension::Arousal);
        c.sweep.stride_frames = 25;
        assert_eq!(c.sweep_shifts(fps(25.0)).unwrap(), vec![59]);
        c.sweep.stride_frames = 1;
        assert_eq!(c.sweep_shifts(fps(25.0)).unwrap().len(), 49);
    }

    #[test]
    fn sweep_clips_negative_shifts() {
        let mut c = ExperimentConfig::new("m.json", Dimension::Arousal);
        c.sweep.anchor_frames = Some(4);
        let s = c.sweep_shifts(fps(25.0)).unwrap();
        assert_eq!(s[0], 1);
        assert!(s.contains(&4));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let c = ExperimentConfig::new("m.json", Dimension::Valence);
        let json = serde_json::to_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);

        let minimal: ExperimentConfig =
            serde_json::from_str(r#"{"train_manifest": "a.json", "dimension": "arousal"}"#).unwrap();
        assert_eq!(minimal.seeds, DEFAULT_SEEDS);
        assert!(minimal.validate().is_ok());

        let mut empty = minimal.clone();
        empty.seeds.clear();
        assert!(matches!(empty.validate(), Err(HarnessError::Config(_))));
        let mut no_lr = minimal;
        no_lr.learning_rates = Some(vec![]);
        assert!(no_lr.validate().is_err());

        let unknown = serde_json::from_str::<ExperimentConfig>(
            r#"{"train_manifest": "a.json", "dimension": "arousal", "bogus": 1}"#,
        );
        assert!(unknown.is_err());
    }
}
