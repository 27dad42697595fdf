//! Synthetic corpora with a known annotator lag.
//!
//! Every recording is driven by two latent channels:
//!
//! * a fast speech latent `S` (exponentially smoothed white noise, unit
//!   variance), written verbatim as speech feature 0 and mixed with filtered
//!   noise into the remaining speech channels;
//! * a slow gaze latent `G` that moves the horizontal gaze position, on top of
//!   fixation/saccade jitter, blinks and tracking dropouts.
//!
//! The annotation for a dimension is
//! `clip(0.4·(w_s·S(t − L) + w_g·Ĝ(t − L)/0.3)/‖w‖ + noise, −1, 1)`, where `Ĝ`
//! is the mean valid horizontal gaze over the dimension's trailing feature
//! window (exactly the extractor's `h_mean`) and `L` the injected lag.
//! Shifting the annotation back by `L` frames therefore re-aligns it with the
//! features; with `L = 0` and no noise it is a deterministic function of the
//! features.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::WindowSeconds;
use super::HarnessError;
use crate::timeline::{
    frames_for_duration, AnnotationTrace, CorpusManifest, Dimension, FeatureMatrix, FrameRate,
    GazeLog, Partition, RecordingEntry,
};

const SPEECH_SMOOTHING: f64 = 0.3;
const TARGET_SCALE: f64 = 0.4;
/// Typical spread of the gaze latent's contribution to `h`.
const GAZE_SCALE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticCorpusSpec {
    pub name: String,
    pub train_recordings: usize,
    pub validation_recordings: usize,
    pub test_recordings: usize,
    pub frames: usize,
    pub fps: f64,
    /// Annotator reaction delay injected into every annotation trace.
    pub lag_frames: usize,
    /// Standard deviation of the additive annotation noise.
    pub noise: f64,
    pub speech_weight: f64,
    pub gaze_weight: f64,
    pub speech_channels: usize,
    /// Gaze windows used to build each dimension's target.
    pub window_seconds: WindowSeconds,
    pub seed: u64,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        Self {
            name: "synthetic".into(),
            train_recordings: 3,
            validation_recordings: 2,
            test_recordings: 2,
            frames: 1500,
            fps: 25.0,
            lag_frames: 40,
            noise: 0.05,
            speech_weight: 1.0,
            gaze_weight: 1.0,
            speech_channels: 88,
            window_seconds: WindowSeconds::default(),
            seed: 7,
        }
    }
}

impl SyntheticCorpusSpec {
    pub fn validate(&self) -> Result<FrameRate, HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        let fps = FrameRate::new(self.fps)?;
        if self.frames < 2 {
            return bad("recordings need at least two frames");
        }
        if self.lag_frames >= self.frames {
            return bad("lag must be shorter than the recordings");
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return bad("noise level must be ≥ 0");
        }
        if self.speech_channels == 0 {
            return bad("at least one speech channel is required");
        }
        let (ws, wg) = (self.speech_weight, self.gaze_weight);
        if !(ws.is_finite() && wg.is_finite()) || ws.hypot(wg) == 0.0 {
            return bad("latent weights must be finite and not both zero");
        }
        if self.train_recordings + self.validation_recordings + self.test_recordings == 0 {
            return bad("corpus needs at least one recording");
        }
        Ok(fps)
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Exponential smoothing of white noise, rescaled to unit stationary
/// variance and started in the stationary distribution.
fn smoothed_noise(n: usize, alpha: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let stationary_sd = (alpha / (2.0 - alpha)).sqrt();
    let mut e = stationary_sd * normal(rng);
    (0..n)
        .map(|_| {
            e = (1.0 - alpha) * e + alpha * normal(rng);
            e / stationary_sd
        })
        .collect()
}

/// Smooth slow process: smoothed AR(1), standardised over the recording.
fn slow_latent(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let rough = smoothed_noise(n, 0.02, rng);
    let smooth = {
        let mut e = rough[0];
        rough
            .iter()
            .map(|&x| {
                e = 0.9 * e + 0.1 * x;
                e
            })
            .collect::<Vec<_>>()
    };
    let mean = smooth.iter().sum::<f64>() / n as f64;
    let sd = (smooth.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64)
        .sqrt()
        .max(1e-12);
    smooth.iter().map(|x| (x - mean) / sd).collect()
}

/// Runs of `true` starting with probability `rate` per frame, lengths
/// uniform in `lengths`.
fn events(n: usize, rate: f64, lengths: std::ops::RangeInclusive<usize>, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut out = vec![false; n];
    let mut t = 0;
    while t < n {
        if rng.gen_bool(rate) {
            let len = rng.gen_range(lengths.clone());
            out[t..(t + len).min(n)].iter_mut().for_each(|x| *x = true);
            t += len;
        } else {
            t += 1;
        }
    }
    out
}

struct GazeTrack {
    h: Vec<f64>,
    v: Vec<f64>,
    closed: Vec<bool>,
    valid: Vec<bool>,
}

fn gaze_track(n: usize, rng: &mut ChaCha8Rng) -> GazeTrack {
    let g = slow_latent(n, rng);
    let vg = slow_latent(n, rng);
    let closed = events(n, 0.01, 3..=8, rng);
    let dropout = events(n, 0.005, 1..=5, rng);
    let (mut ch, mut cv) = (0.0, 0.0);
    let mut h = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for t in 0..n {
        // saccade to a new fixation target roughly every 10 frames
        if t == 0 || rng.gen_bool(0.1) {
            ch = 0.15 * normal(rng);
            cv = 0.15 * normal(rng);
        }
        let jitter = (0.003 * normal(rng), 0.003 * normal(rng));
        let ok = !dropout[t];
        valid.push(ok);
        if ok {
            h.push((GAZE_SCALE * g[t] + ch + jitter.0).clamp(-1.0, 1.0));
            v.push((GAZE_SCALE * vg[t] + cv + jitter.1).clamp(-1.0, 1.0));
        } else {
            h.push(0.0);
            v.push(0.0);
        }
    }
    GazeTrack { h, v, closed, valid }
}

/// Mean of valid `h` over the trailing window ending at each frame; 0 when
/// the window holds no valid frame.
fn trailing_valid_mean(h: &[f64], valid: &[bool], w: usize) -> Vec<f64> {
    (0..h.len())
        .map(|t| {
            let start = (t + 1).saturating_sub(w);
            let xs: Vec<f64> = (start..=t).filter(|&i| valid[i]).map(|i| h[i]).collect();
            match xs.first() {
                None => 0.0,
                Some(&x0) => x0 + xs.iter().map(|x| x - x0).sum::<f64>() / xs.len() as f64,
            }
        })
        .collect()
}

struct Recording {
    speech: FeatureMatrix,
    gaze: GazeLog,
    annotations: BTreeMap<Dimension, AnnotationTrace>,
}

fn generate_recording(spec: &SyntheticCorpusSpec, fps: FrameRate, stream: u64) -> Result<Recording, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let (n, lag) = (spec.frames, spec.lag_frames);
    let ext = n + lag;

    let s = smoothed_noise(ext, SPEECH_SMOOTHING, &mut rng);
    let track = gaze_track(ext, &mut rng);

    // observed recording = extended frames lag..lag+n
    let mut columns = vec![s[lag..].to_vec()];
    for _ in 1..spec.speech_channels {
        let alpha = rng.gen_range(0.05..0.5);
        let weight = rng.gen_range(-0.5..0.5);
        let noise = smoothed_noise(ext, alpha, &mut rng);
        columns.push((lag..ext).map(|t| weight * s[t] + noise[t]).collect());
    }
    let names = (0..spec.speech_channels).map(|j| format!("speech_{j:03}")).collect();
    let rows = (0..n).map(|t| columns.iter().map(|c| c[t]).collect()).collect();
    let speech = FeatureMatrix::new(names, rows, fps)?;
    let gaze = GazeLog::from_columns(
        &track.h[lag..],
        &track.v[lag..],
        &track.closed[lag..],
        &track.valid[lag..],
        fps,
    )?;

    let norm = spec.speech_weight.hypot(spec.gaze_weight);
    let mut annotations = BTreeMap::new();
    for dimension in Dimension::ALL {
        let w = frames_for_duration(spec.window_seconds.get(dimension), fps)?;
        // the window is evaluated on the observed log so that, without lag,
        // the target is an exact function of the extracted features
        let mut g_hat = vec![0.0; lag];
        g_hat.extend(trailing_valid_mean(&track.h[lag..], &track.valid[lag..], w));
        let pre = trailing_valid_mean(&track.h, &track.valid, w);
        g_hat[..lag].copy_from_slice(&pre[..lag]);
        // annotation at observed frame t reflects extended frame t (= observed t − lag)
        let values = (0..n)
            .map(|t| {
                let mix = (spec.speech_weight * s[t] + spec.gaze_weight * g_hat[t] / GAZE_SCALE) / norm;
                (TARGET_SCALE * mix + spec.noise * normal(&mut rng)).clamp(-1.0, 1.0)
            })
            .collect();
        annotations.insert(dimension, AnnotationTrace::new(dimension, values, fps)?);
    }
    Ok(Recording {
        speech,
        gaze,
        annotations,
    })
}

/// Writes `manifest.json` and per-recording CSVs under `out_dir` and
/// returns the manifest path. Output is a pure function of `spec`.
pub fn generate_synthetic_corpus(spec: &SyntheticCorpusSpec, out_dir: &Path) -> Result<PathBuf, HarnessError> {
    let fps = spec.validate()?;
    let layout = [
        (Partition::Train, spec.train_recordings),
        (Partition::Validation, spec.validation_recordings),
        (Partition::Test, spec.test_recordings),
    ];
    let mut entries = Vec::new();
    let mut stream = 0;
    for (partition, count) in layout {
        for i in 0..count {
            stream += 1;
            let id = format!("{partition}_{:02}", i + 1);
            let rec = generate_recording(spec, fps, stream)?;
            let rel = |kind: &str| PathBuf::from("recordings").join(format!("{id}_{kind}.csv"));
            rec.speech.write_csv(&out_dir.join(rel("speech")))?;
            rec.gaze.write_csv(&out_dir.join(rel("gaze")))?;
            let mut annotations = BTreeMap::new();
            for (dimension, trace) in &rec.annotations {
                let path = rel(dimension.as_str());
                trace.write_csv(&out_dir.join(&path))?;
                annotations.insert(*dimension, path);
            }
            let (speech, gaze) = (rel("speech"), rel("gaze"));
            entries.push(RecordingEntry {
                id,
                partition,
                fps,
                speech,
                gaze,
                annotations,
            });
        }
    }
    let manifest = CorpusManifest {
        corpus_name: spec.name.clone(),
        gaze_columns: None,
        recordings: entries,
    };
    let path = out_dir.join("manifest.json");
    manifest.save(&path)?;
    Ok(path)
}
