//! Windowed eye-gaze affective features.
//!
//! For each frame `t` a 31-value vector is computed over the trailing window
//! `[max(0, t − W + 1), t]`. Only valid frames enter the statistics; a window
//! without valid frames yields all zeros.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::timeline::{self, FeatureMatrix, FrameRate, GazeFrame, GazeLog};

pub const N_FEATURES: usize = 31;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "approach_ratio",
    "approach_time_ms",
    "scanpath_mean",
    "scanpath_std",
    "h_mean",
    "h_iqr12",
    "h_iqr23",
    "h_std",
    "h_skew",
    "h_psd_band1",
    "h_psd_band2",
    "h_psd_band3",
    "h_psd_band4",
    "h_psd_band5",
    "h_zone_std_mean",
    "h_zone_std_std",
    "v_mean",
    "v_iqr12",
    "v_iqr23",
    "v_std",
    "v_skew",
    "v_psd_band1",
    "v_psd_band2",
    "v_psd_band3",
    "v_psd_band4",
    "v_psd_band5",
    "v_zone_std_mean",
    "v_zone_std_std",
    "closure_runlen_mean",
    "closure_runlen_std",
    "closure_runlen_skew",
];

/// DFT bin groups summed into the five spectral bands.
pub const PSD_BIN_GROUPS: [(usize, usize); 5] = [(1, 1), (2, 2), (3, 4), (5, 6), (7, 12)];

const MOMENT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub size_seconds: f64,
    pub step_frames: usize,
}

impl WindowSpec {
    pub fn seconds(size_seconds: f64) -> Self {
        Self {
            size_seconds,
            step_frames: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixation {
    pub start_frame: usize,
    pub end_frame: usize,
    pub centroid_h: f64,
    pub centroid_v: f64,
}

impl Fixation {
    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Rectangular grid of fixation zones over the gaze plane. Points outside
/// the bounds fall into the nearest edge cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneGrid {
    pub rows: usize,
    pub cols: usize,
    pub h_min: f64,
    pub h_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl Default for ZoneGrid {
    fn default() -> Self {
        Self {
            rows: 3,
            cols: 3,
            h_min: -1.0,
            h_max: 1.0,
            v_min: -1.0,
            v_max: 1.0,
        }
    }
}

impl ZoneGrid {
    pub fn validate(&self) -> Result<(), String> {
        if self.rows == 0 || self.cols == 0 {
            return Err("zone grid needs at least one row and column".into());
        }
        if !(self.h_max > self.h_min && self.v_max > self.v_min) {
            return Err("zone grid bounds are degenerate".into());
        }
        Ok(())
    }

    pub fn cell(&self, h: f64, v: f64) -> usize {
        let idx = |x: f64, lo: f64, hi: f64, n: usize| {
            let f = ((x - lo) / (hi - lo) * n as f64).floor();
            if f < 0.0 {
                0
            } else {
                (f as usize).min(n - 1)
            }
        };
        idx(v, self.v_min, self.v_max, self.rows) * self.cols
            + idx(h, self.h_min, self.h_max, self.cols)
    }

    pub fn n_cells(&self) -> usize {
        self.rows * self.cols
    }
}

/// Tunables of the gaze feature extractor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GazeFeatureConfig {
    /// Maximum bounding-box diagonal of a fixation, in gaze units.
    pub dispersion_threshold: f64,
    pub min_fixation_seconds: f64,
    pub grid: ZoneGrid,
}

impl Default for GazeFeatureConfig {
    fn default() -> Self {
        Self {
            dispersion_threshold: 0.05,
            min_fixation_seconds: 0.1,
            grid: ZoneGrid::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Functionals {
    pub mean: f64,
    pub iqr12: f64,
    pub iqr23: f64,
    pub std: f64,
    pub skew: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ZoneSpread {
    pub h_std_mean: f64,
    pub h_std_std: f64,
    pub v_std_mean: f64,
    pub v_std_std: f64,
}

/// Population mean, standard deviation and skewness (0 when m2 < 1e-12).
fn moments(xs: &[f64]) -> (f64, f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = shifted_mean(xs);
    let (mut m2, mut m3) = (0.0, 0.0);
    for x in xs {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if m2 < MOMENT_EPS {
        return (mean, 0.0, 0.0);
    }
    (mean, m2.sqrt(), m3 / m2.powf(1.5))
}

/// Mean taken relative to the first sample, exact for constant series.
fn shifted_mean(xs: &[f64]) -> f64 {
    let x0 = xs[0];
    x0 + xs.iter().map(|x| x - x0).sum::<f64>() / xs.len() as f64
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let (m, s, _) = moments(xs);
    (m, s)
}

/// Linear-interpolated quantile of sorted data at position `p·(N−1)`.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Fraction of frames where the gaze moves toward the straight-ahead origin,
/// and the mean duration (ms) of consecutive approach runs.
pub fn approach_stats(distances: &[f64], fps: FrameRate) -> (f64, f64) {
    if distances.len() < 2 {
        return (0.0, 0.0);
    }
    let mut approach = 0usize;
    let mut runs = Vec::new();
    let mut run = 0usize;
    for w in distances.windows(2) {
        if w[1] < w[0] {
            approach += 1;
            run += 1;
        } else if run > 0 {
            runs.push(run);
            run = 0;
        }
    }
    if run > 0 {
        runs.push(run);
    }
    let ratio = approach as f64 / (distances.len() - 1) as f64;
    let time = if runs.is_empty() {
        0.0
    } else {
        runs.iter().sum::<usize>() as f64 / runs.len() as f64 * fps.frame_ms()
    };
    (ratio, time)
}

/// Dispersion-threshold (I-DT) fixation segmentation. Frame indices refer to
/// positions in `coords`.
pub fn segment_fixations(
    coords: &[(f64, f64)],
    dispersion_threshold: f64,
    min_duration_frames: usize,
) -> Vec<Fixation> {
    let min_len = min_duration_frames.max(1);
    let n = coords.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i + min_len <= n {
        let mut bbox = BBox::new(coords[i]);
        for &c in &coords[i + 1..i + min_len] {
            bbox.add(c);
        }
        if bbox.diagonal() > dispersion_threshold {
            i += 1;
            continue;
        }
        let mut j = i + min_len;
        while j < n {
            let mut grown = bbox;
            grown.add(coords[j]);
            if grown.diagonal() > dispersion_threshold {
                break;
            }
            bbox = grown;
            j += 1;
        }
        let members = &coords[i..j];
        let k = members.len() as f64;
        out.push(Fixation {
            start_frame: i,
            end_frame: j - 1,
            centroid_h: members.iter().map(|c| c.0).sum::<f64>() / k,
            centroid_v: members.iter().map(|c| c.1).sum::<f64>() / k,
        });
        i = j;
    }
    out
}

#[derive(Clone, Copy)]
struct BBox {
    h_lo: f64,
    h_hi: f64,
    v_lo: f64,
    v_hi: f64,
}

impl BBox {
    fn new((h, v): (f64, f64)) -> Self {
        Self {
            h_lo: h,
            h_hi: h,
            v_lo: v,
            v_hi: v,
        }
    }

    fn add(&mut self, (h, v): (f64, f64)) {
        self.h_lo = self.h_lo.min(h);
        self.h_hi = self.h_hi.max(h);
        self.v_lo = self.v_lo.min(v);
        self.v_hi = self.v_hi.max(v);
    }

    fn diagonal(&self) -> f64 {
        (self.h_hi - self.h_lo).hypot(self.v_hi - self.v_lo)
    }
}

/// Mean and population std of distances between consecutive fixation centroids.
pub fn scan_path_stats(fixations: &[Fixation]) -> (f64, f64) {
    if fixations.len() < 2 {
        return (0.0, 0.0);
    }
    let lengths: Vec<f64> = fixations
        .windows(2)
        .map(|w| (w[1].centroid_h - w[0].centroid_h).hypot(w[1].centroid_v - w[0].centroid_v))
        .collect();
    mean_std(&lengths)
}

pub fn coordinate_functionals(series: &[f64]) -> Functionals {
    if series.is_empty() {
        return Functionals::default();
    }
    let (mean, std, skew) = moments(series);
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q2 = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    Functionals {
        mean,
        iqr12: q2 - q1,
        iqr23: q3 - q2,
        std,
        skew,
    }
}

/// Periodogram power summed over the DFT bin groups in [`PSD_BIN_GROUPS`]
/// after mean removal. Bins above `N/2` contribute nothing.
pub fn psd_band_powers(series: &[f64]) -> [f64; 5] {
    let n = series.len();
    let mut bands = [0.0; 5];
    if n < 2 {
        return bands;
    }
    let mean = shifted_mean(series);
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let nyquist = n / 2;
    let omega = 2.0 * std::f64::consts::PI / n as f64;
    for (band, &(lo, hi)) in bands.iter_mut().zip(PSD_BIN_GROUPS.iter()) {
        for k in lo..=hi.min(nyquist) {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, x) in centered.iter().enumerate() {
                // reduce the phase index mod n to keep the angle small
                let phase = omega * ((k * t) % n) as f64;
                re += x * phase.cos();
                im -= x * phase.sin();
            }
            *band += (re * re + im * im) / n as f64;
        }
    }
    bands
}

/// Spread of coordinates inside each occupied fixation zone: per axis, the
/// mean and population std of the per-cell stds over cells with ≥ 2 samples.
pub fn fixation_zone_spread(coords: &[(f64, f64)], grid: &ZoneGrid) -> ZoneSpread {
    let mut cells: Vec<Vec<(f64, f64)>> = vec![Vec::new(); grid.n_cells()];
    for &(h, v) in coords {
        cells[grid.cell(h, v)].push((h, v));
    }
    let mut h_stds = Vec::new();
    let mut v_stds = Vec::new();
    for cell in cells.iter().filter(|c| c.len() >= 2) {
        let hs: Vec<f64> = cell.iter().map(|c| c.0).collect();
        let vs: Vec<f64> = cell.iter().map(|c| c.1).collect();
        h_stds.push(mean_std(&hs).1);
        v_stds.push(mean_std(&vs).1);
    }
    let (h_std_mean, h_std_std) = mean_std(&h_stds);
    let (v_std_mean, v_std_std) = mean_std(&v_stds);
    ZoneSpread {
        h_std_mean,
        h_std_std,
        v_std_mean,
        v_std_std,
    }
}

/// Mean, std and skew of the lengths of consecutive closed-eye runs.
pub fn eye_closure_stats(closed: &[bool]) -> (f64, f64, f64) {
    let mut runs = Vec::new();
    let mut run = 0usize;
    for &c in closed {
        if c {
            run += 1;
        } else if run > 0 {
            runs.push(run as f64);
            run = 0;
        }
    }
    if run > 0 {
        runs.push(run as f64);
    }
    moments(&runs)
}

/// The 31 features for one window of raw frames.
pub fn window_features(
    frames: &[GazeFrame],
    fps: FrameRate,
    config: &GazeFeatureConfig,
) -> [f64; N_FEATURES] {
    let mut out = [0.0; N_FEATURES];
    let valid: Vec<&GazeFrame> = frames.iter().filter(|f| f.valid).collect();
    if valid.is_empty() {
        return out;
    }
    let coords: Vec<(f64, f64)> = valid.iter().map(|f| (f.h, f.v)).collect();
    let hs: Vec<f64> = coords.iter().map(|c| c.0).collect();
    let vs: Vec<f64> = coords.iter().map(|c| c.1).collect();
    let dist: Vec<f64> = coords.iter().map(|c| c.0.hypot(c.1)).collect();
    let closed: Vec<bool> = valid.iter().map(|f| f.eye_closed).collect();

    let (ratio, time) = approach_stats(&dist, fps);
    let min_frames = timeline::frames_for_duration(config.min_fixation_seconds, fps).unwrap_or(1);
    let fixations = segment_fixations(&coords, config.dispersion_threshold, min_frames);
    let (sp_mean, sp_std) = scan_path_stats(&fixations);
    let zones = fixation_zone_spread(&coords, &config.grid);

    out[0] = ratio;
    out[1] = time;
    out[2] = sp_mean;
    out[3] = sp_std;
    let axes = [
        (&hs, zones.h_std_mean, zones.h_std_std),
        (&vs, zones.v_std_mean, zones.v_std_std),
    ];
    for (a, (series, zmean, zstd)) in axes.into_iter().enumerate() {
        let base = 4 + a * 12;
        let f = coordinate_functionals(series);
        out[base] = f.mean;
        out[base + 1] = f.iqr12;
        out[base + 2] = f.iqr23;
        out[base + 3] = f.std;
        out[base + 4] = f.skew;
        out[base + 5..base + 10].copy_from_slice(&psd_band_powers(series));
        out[base + 10] = zmean;
        out[base + 11] = zstd;
    }
    let (cm, cs, ck) = eye_closure_stats(&closed);
    out[28] = cm;
    out[29] = cs;
    out[30] = ck;
    out
}

/// Trailing-window features for every frame of `log`.
///
/// Rows are emitted for every frame; with `step_frames > 1` the last computed
/// vector is held between steps so the output stays frame-aligned.
pub fn extract_gaze_features(
    log: &GazeLog,
    window: &WindowSpec,
    config: &GazeFeatureConfig,
) -> Result<FeatureMatrix, timeline::DataError> {
    if log.is_empty() {
        return Err(timeline::DataError::Invariant("gaze log is empty".into()));
    }
    config
        .grid
        .validate()
        .map_err(timeline::DataError::Invariant)?;
    let fps = log.fps();
    let w = timeline::frames_for_duration(window.size_seconds, fps)?;
    let step = window.step_frames.max(1);
    let frames = log.frames();
    let computed: Vec<[f64; N_FEATURES]> = (0..frames.len())
        .into_par_iter()
        .filter(|t| t % step == 0)
        .map(|t| {
            let start = (t + 1).saturating_sub(w);
            window_features(&frames[start..=t], fps, config)
        })
        .collect();
    let rows = (0..frames.len())
        .map(|t| computed[t / step].to_vec())
        .collect();
    FeatureMatrix::new(
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        rows,
        fps,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn fps25() -> FrameRate {
        FrameRate::new(25.0).unwrap()
    }

    #[test]
    fn names_are_unique_and_31() {
        let set: std::collections::HashSet<_> = FEATURE_NAMES.iter().collect();
        assert_eq!(set.len(), 31);
    }

    #[test]
    fn approach_examples() {
        let dec: Vec<f64> = (0..100).map(|i| 100.0 - i as f64).collect();
        let (r, t) = approach_stats(&dec, fps25());
        assert_eq!(r, 1.0);
        assert_abs_diff_eq!(t, 3960.0, epsilon = 1e-9);

        let inc: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(approach_stats(&inc, fps25()), (0.0, 0.0));

        let (r, t) = approach_stats(&[3.0, 2.0, 3.0, 2.0, 1.0, 2.0], fps25());
        assert_abs_diff_eq!(r, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(t, 60.0, epsilon = 1e-12);

        assert_eq!(approach_stats(&[1.0], fps25()), (0.0, 0.0));
    }

    #[test]
    fn fixation_examples() {
        let same = vec![(0.2, 0.1); 10];
        let fx = segment_fixations(&same, 0.05, 3);
        assert_eq!(fx.len(), 1);
        assert_eq!((fx[0].start_frame, fx[0].end_frame), (0, 9));

        let alt: Vec<(f64, f64)> = (0..10)
            .map(|i| if i % 2 == 0 { (-0.8, 0.0) } else { (0.8, 0.0) })
            .collect();
        assert!(segment_fixations(&alt, 0.05, 3).is_empty());

        let mut two = vec![(0.0, 0.0), (0.01, 0.0), (0.0, 0.01), (0.01, 0.01)];
        two.extend([(0.5, 0.5), (0.52, 0.5), (0.5, 0.52), (0.52, 0.52), (0.51, 0.51)]);
        let fx = segment_fixations(&two, 0.05, 3);
        assert_eq!(fx.len(), 2);
        assert_eq!((fx[0].start_frame, fx[0].end_frame), (0, 3));
        assert_eq!((fx[1].start_frame, fx[1].end_frame), (4, 8));
        assert_abs_diff_eq!(fx[0].centroid_h, 0.005, epsilon = 1e-15);
        assert_abs_diff_eq!(fx[0].centroid_v, 0.005, epsilon = 1e-15);
        assert_abs_diff_eq!(fx[1].centroid_h, 0.51, epsilon = 1e-12);
        assert_abs_diff_eq!(fx[1].centroid_v, 0.51, epsilon = 1e-12);
    }

    fn fix(h: f64, v: f64) -> Fixation {
        Fixation {
            start_frame: 0,
            end_frame: 0,
            centroid_h: h,
            centroid_v: v,
        }
    }

    #[test]
    fn scan_path_examples() {
        assert_eq!(scan_path_stats(&[fix(0.0, 0.0), fix(3.0, 4.0)]), (5.0, 0.0));
        assert_eq!(scan_path_stats(&[fix(1.0, 1.0)]), (0.0, 0.0));
        assert_eq!(scan_path_stats(&[]), (0.0, 0.0));
        let (m, s) = scan_path_stats(&[fix(0.0, 0.0), fix(3.0, 4.0), fix(3.0, 16.0)]);
        assert_abs_diff_eq!(m, 8.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s, 3.5, epsilon = 1e-12);
    }

    #[test]
    fn functionals_examples() {
        let f = coordinate_functionals(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_abs_diff_eq!(f.mean, 3.0);
        assert_abs_diff_eq!(f.iqr12, 1.0);
        assert_abs_diff_eq!(f.iqr23, 1.0);
        assert_abs_diff_eq!(f.std, 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(f.skew, 0.0, epsilon = 1e-15);

        let c = coordinate_functionals(&[0.7; 9]);
        assert_eq!(
            (c.mean, c.iqr12, c.iqr23, c.std, c.skew),
            (0.7, 0.0, 0.0, 0.0, 0.0)
        );
        assert_abs_diff_eq!(coordinate_functionals(&[1.0, 2.0, 3.0]).skew, 0.0);
    }

    #[test]
    fn psd_examples() {
        assert_eq!(psd_band_powers(&[0.3; 50]), [0.0; 5]);

        let n = 100;
        let cosine: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * 2.0 * t as f64 / n as f64).cos())
            .collect();
        let b = psd_band_powers(&cosine);
        let total: f64 = b.iter().sum();
        assert!(b[1] / total > 0.99, "{b:?}");
        // |X_2|^2/N for a unit cosine is N/4
        assert_abs_diff_eq!(b[1], n as f64 / 4.0, epsilon = 1e-9);

        // N = 5 resolves bins 1 and 2 only
        let b = psd_band_powers(&[1.0, -2.0, 0.5, 3.0, -1.0]);
        assert!(b[0] > 0.0 && b[1] > 0.0);
        assert_eq!(&b[2..], &[0.0, 0.0, 0.0]);
        assert_eq!(psd_band_powers(&[1.0]), [0.0; 5]);
    }

    #[test]
    fn zone_spread_examples() {
        let grid = ZoneGrid::default();
        let s = fixation_zone_spread(&[(0.1, 0.1); 5], &grid);
        assert_eq!(s, ZoneSpread::default());

        // bottom-left cell h-std 0.1; top-right cell h-std 0.3 (1.1 clamps into the edge cell)
        let pts = [(-0.9, -0.9), (-0.7, -0.9), (0.5, 0.8), (0.5, 0.8), (1.1, 0.8), (1.1, 0.8)];
        let s = fixation_zone_spread(&pts, &grid);
        assert_abs_diff_eq!(s.h_std_mean, 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(s.h_std_std, 0.1, epsilon = 1e-12);
        assert_eq!((s.v_std_mean, s.v_std_std), (0.0, 0.0));

        let lonely = [(-0.9, -0.9), (0.0, 0.0), (0.9, 0.9)];
        assert_eq!(fixation_zone_spread(&lonely, &grid), ZoneSpread::default());
    }

    #[test]
    fn closure_examples() {
        let f = |v: &[u8]| v.iter().map(|&x| x == 1).collect::<Vec<_>>();
        let (m, s, k) = eye_closure_stats(&f(&[0, 0, 1, 1, 1, 0, 1, 0]));
        assert_abs_diff_eq!(m, 2.0);
        assert_abs_diff_eq!(s, 1.0);
        assert_abs_diff_eq!(k, 0.0);
        assert_eq!(eye_closure_stats(&[false; 6]), (0.0, 0.0, 0.0));
        assert_eq!(eye_closure_stats(&[true; 10]), (10.0, 0.0, 0.0));
    }

    fn log_from(h: &[f64], v: &[f64], closed: &[bool], valid: &[bool]) -> GazeLog {
        GazeLog::from_columns(h, v, closed, valid, fps25()).unwrap()
    }

    #[test]
    fn extraction_shape_and_constant_input() {
        let n = 1000;
        let log = log_from(&vec![0.2; n], &vec![-0.1; n], &vec![false; n], &vec![true; n]);
        let m = extract_gaze_features(&log, &WindowSpec::seconds(4.0), &GazeFeatureConfig::default())
            .unwrap();
        assert_eq!((m.n_frames(), m.n_features()), (1000, 31));
        for row in m.rows() {
            assert!(row.iter().all(|x| x.is_finite()));
            assert_eq!(row[0], 0.0);
            assert_eq!(row[2], 0.0);
            assert!(row[9..14].iter().all(|&x| x == 0.0));
            assert!(row[21..26].iter().all(|&x| x == 0.0));
            assert_eq!(&row[28..], &[0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn all_invalid_window_is_zero() {
        let n = 40;
        let log = log_from(&vec![0.5; n], &vec![0.5; n], &vec![true; n], &vec![false; n]);
        let m = extract_gaze_features(&log, &WindowSpec::seconds(1.0), &GazeFeatureConfig::default())
            .unwrap();
        assert!(m.rows().iter().all(|r| r.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn step_holds_last_vector() {
        let n = 30;
        let h: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin() * 0.5).collect();
        let log = log_from(&h, &h, &vec![false; n], &vec![true; n]);
        let spec = WindowSpec {
            size_seconds: 0.4,
            step_frames: 4,
        };
        let m = extract_gaze_features(&log, &spec, &GazeFeatureConfig::default()).unwrap();
        assert_eq!(m.n_frames(), n);
        assert_eq!(m.rows()[5], m.rows()[4]);
        assert_ne!(m.rows()[8], m.rows()[7]);
    }

    proptest! {
        #[test]
        fn approach_ratio_bounded(d in prop::collection::vec(0.0f64..2.0, 1..80)) {
            let (r, t) = approach_stats(&d, fps25());
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert!(t >= 0.0);
        }

        #[test]
        fn psd_nonnegative_and_shift_invariant(
            x in prop::collection::vec(-1.0f64..1.0, 2..120),
            c in -5.0f64..5.0,
        ) {
            let a = psd_band_powers(&x);
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let b = psd_band_powers(&shifted);
            for (p, q) in a.iter().zip(&b) {
                prop_assert!(*p >= 0.0);
                prop_assert!((p - q).abs() < 1e-9);
            }
        }

        #[test]
        fn order_free_vs_order_sensitive(
            x in prop::collection::vec(-1.0f64..1.0, 3..60),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut perm = x.clone();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = coordinate_functionals(&x);
            let b = coordinate_functionals(&perm);
            prop_assert!((a.mean - b.mean).abs() < 1e-12);
            prop_assert!((a.iqr12 - b.iqr12).abs() < 1e-12);
            prop_assert!((a.iqr23 - b.iqr23).abs() < 1e-12);
            prop_assert!((a.std - b.std).abs() < 1e-12);
            prop_assert!((a.skew - b.skew).abs() < 1e-9);
        }
    }

    #[test]
    fn order_sensitive_stats_change_under_permutation() {
        let d = [3.0, 2.0, 1.0, 0.5, 4.0, 5.0];
        let rev: Vec<f64> = d.iter().rev().cloned().collect();
        assert_ne!(approach_stats(&d, fps25()), approach_stats(&rev, fps25()));

        let fx = [fix(0.0, 0.0), fix(3.0, 4.0), fix(3.0, 16.0)];
        let swapped = [fix(3.0, 4.0), fix(0.0, 0.0), fix(3.0, 16.0)];
        assert_ne!(scan_path_stats(&fx), scan_path_stats(&swapped));
    }
}
