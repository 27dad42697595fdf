//! Recording data model and ingestion.
//!
//! Every per-frame object carries its [`FrameRate`]; conversions between
//! seconds and frames go through [`frames_for_duration`]. Manifests are JSON,
//! data files are CSV.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: schema violation in `{field}`: {message}")]
    Schema {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("duplicate recording id \"{0}\"")]
    DuplicateId(String),
    #[error("`{field}` references missing file {}", path.display())]
    DanglingPath { field: String, path: PathBuf },
    #[error("{}: no frames", path.display())]
    NoFrames { path: PathBuf },
    #[error("{}: row {row} has {found} cells, expected {expected}", path.display())]
    RaggedRow {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{}: non-numeric cell {value:?} at row {row}, column {column}", path.display())]
    NonNumeric {
        path: PathBuf,
        row: usize,
        column: usize,
        value: String,
    },
    #[error("{}: no column for required field `{field}` (looked for {column:?})", path.display())]
    MissingColumn {
        path: PathBuf,
        field: &'static str,
        column: String,
    },
    #[error("{}: frame index is not contiguous, missing frame {missing}", path.display())]
    NonContiguousFrame { path: PathBuf, missing: i64 },
    #[error("{}: value {value} at frame {frame} is outside [-1, 1]", path.display())]
    OutOfRange {
        path: PathBuf,
        frame: usize,
        value: f64,
    },
    #[error("frame rate must be positive and finite, got {0}")]
    InvalidFrameRate(f64),
    #[error("duration must be positive, got {0} s")]
    InvalidDuration(f64),
    #[error("invalid gaze column mapping {0:?}")]
    InvalidColumnMap(String),
    #[error("{0}")]
    Invariant(String),
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

/// Frames per second of a recording.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FrameRate(f64);

impl FrameRate {
    pub fn new(fps: f64) -> Result<Self> {
        if fps.is_finite() && fps > 0.0 {
            Ok(Self(fps))
        } else {
            Err(DataError::InvalidFrameRate(fps))
        }
    }

    pub fn fps(self) -> f64 {
        self.0
    }

    /// Duration of one frame in milliseconds.
    pub fn frame_ms(self) -> f64 {
        1000.0 / self.0
    }
}

impl TryFrom<f64> for FrameRate {
    type Error = DataError;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FrameRate> for f64 {
    fn from(f: FrameRate) -> f64 {
        f.0
    }
}

impl fmt::Display for FrameRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} fps", self.0)
    }
}

/// Number of frames covering `seconds` at `fps`: round half away from zero,
/// never less than one frame.
pub fn frames_for_duration(seconds: f64, fps: FrameRate) -> Result<usize> {
    if !(seconds.is_finite() && seconds > 0.0) {
        return Err(DataError::InvalidDuration(seconds));
    }
    Ok(((seconds * fps.0).round() as usize).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Arousal,
    Valence,
}

impl Dimension {
    pub const ALL: [Dimension; 2] = [Dimension::Arousal, Dimension::Valence];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Arousal => "arousal",
            Dimension::Valence => "valence",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "arousal" | "ar" => Ok(Dimension::Arousal),
            "valence" | "val" => Ok(Dimension::Valence),
            other => Err(format!("unknown dimension {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Validation,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Validation, Partition::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Validation => "validation",
            Partition::Test => "test",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Partition {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Partition::Train),
            "validation" | "val" | "devel" | "dev" => Ok(Partition::Validation),
            "test" => Ok(Partition::Test),
            other => Err(format!("unknown partition {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeFrame {
    pub index: usize,
    pub h: f64,
    pub v: f64,
    pub eye_closed: bool,
    pub valid: bool,
}

/// Per-frame raw gaze angles with eye-closure and tracking-validity flags.
///
/// Invalid frames are kept so that the log stays frame-aligned with the
/// annotations; their coordinates are ignored by feature extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeLog {
    frames: Vec<GazeFrame>,
    fps: FrameRate,
}

impl GazeLog {
    pub fn new(frames: Vec<GazeFrame>, fps: FrameRate) -> Result<Self> {
        for (i, f) in frames.iter().enumerate() {
            if f.index != i {
                return Err(DataError::Invariant(format!(
                    "gaze frame {i} carries index {}",
                    f.index
                )));
            }
            if f.valid && !(f.h.is_finite() && f.v.is_finite()) {
                return Err(DataError::Invariant(format!(
                    "valid gaze frame {i} has non-finite coordinates"
                )));
            }
        }
        Ok(Self { frames, fps })
    }

    /// Builds a log from parallel per-frame columns.
    pub fn from_columns(
        h: &[f64],
        v: &[f64],
        eye_closed: &[bool],
        valid: &[bool],
        fps: FrameRate,
    ) -> Result<Self> {
        let n = h.len();
        if v.len() != n || eye_closed.len() != n || valid.len() != n {
            return Err(DataError::Invariant("gaze columns differ in length".into()));
        }
        let frames = (0..n)
            .map(|i| GazeFrame {
                index: i,
                h: h[i],
                v: v[i],
                eye_closed: eye_closed[i],
                valid: valid[i],
            })
            .collect();
        Self::new(frames, fps)
    }

    pub fn frames(&self) -> &[GazeFrame] {
        &self.frames
    }

    pub fn fps(&self) -> FrameRate {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("frame,h,v,eye_closed,valid\n");
        for f in &self.frames {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                f.index,
                f.h,
                f.v,
                u8::from(f.eye_closed),
                u8::from(f.valid)
            ));
        }
        write_file(path, out.as_bytes())
    }
}

/// Frames × named features at a fixed frame rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
    fps: FrameRate,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>, fps: FrameRate) -> Result<Self> {
        if rows.is_empty() {
            return Err(DataError::Invariant("feature matrix has no frames".into()));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != names.len() {
                return Err(DataError::Invariant(format!(
                    "row {r} has {} entries, expected {}",
                    row.len(),
                    names.len()
                )));
            }
            if let Some(c) = row.iter().position(|x| !x.is_finite()) {
                return Err(DataError::Invariant(format!(
                    "non-finite value at row {r}, column {c}"
                )));
            }
        }
        Ok(Self { names, rows, fps })
    }

    /// A matrix with `frames` rows and no columns.
    pub fn empty(frames: usize, fps: FrameRate) -> Result<Self> {
        Self::new(Vec::new(), vec![Vec::new(); frames], fps)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.rows
    }

    pub fn fps(&self) -> FrameRate {
        self.fps
    }

    pub fn n_frames(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }

    /// CSV text: header of feature names, one row per frame, shortest
    /// round-trip decimal formatting.
    pub fn to_csv_string(&self) -> String {
        let mut out = self.names.join(",");
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for x in row {
                if !first {
                    out.push(',');
                }
                first = false;
                out.push_str(&format_decimal(*x));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_csv_string().as_bytes())
    }
}

/// Per-frame gold-standard values for one emotion dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTrace {
    dimension: Dimension,
    values: Vec<f64>,
    fps: FrameRate,
}

impl AnnotationTrace {
    pub fn new(dimension: Dimension, values: Vec<f64>, fps: FrameRate) -> Result<Self> {
        if values.is_empty() {
            return Err(DataError::Invariant("annotation trace is empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !(-1.0..=1.0).contains(v)) {
            return Err(DataError::Invariant(format!(
                "annotation value {} at frame {i} is outside [-1, 1]",
                values[i]
            )));
        }
        Ok(Self {
            dimension,
            values,
            fps,
        })
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn fps(&self) -> FrameRate {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("value\n");
        for v in &self.values {
            out.push_str(&format_decimal(*v));
            out.push('\n');
        }
        write_file(path, out.as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingEntry {
    pub id: String,
    pub partition: Partition,
    pub fps: FrameRate,
    pub speech: PathBuf,
    pub gaze: PathBuf,
    pub annotations: BTreeMap<Dimension, PathBuf>,
}

/// A corpus: recordings with their partition and data file locations.
/// Relative paths are resolved against the manifest's directory at load time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    #[serde(rename = "corpus")]
    pub corpus_name: String,
    /// Gaze CSV column mapping in `h=<col>,v=<col>,closed=<col>,valid=<col>` form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaze_columns: Option<String>,
    pub recordings: Vec<RecordingEntry>,
}

impl CorpusManifest {
    pub fn partition(&self, p: Partition) -> impl Iterator<Item = &RecordingEntry> {
        self.recordings.iter().filter(move |r| r.partition == p)
    }

    /// Training experiments need recordings in every partition.
    pub fn require_partitions(&self, partitions: &[Partition]) -> Result<()> {
        for &p in partitions {
            if self.partition(p).next().is_none() {
                return Err(DataError::Invariant(format!(
                    "corpus {:?} has no {p} recordings",
                    self.corpus_name
                )));
            }
        }
        Ok(())
    }

    pub fn column_map(&self) -> Result<GazeColumnMap> {
        match &self.gaze_columns {
            Some(s) => s.parse(),
            None => Ok(GazeColumnMap::default()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_file(path, json.as_bytes())
    }
}

pub fn load_corpus_manifest(path: &Path) -> Result<CorpusManifest> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut manifest: CorpusManifest =
        serde_json::from_str(&text).map_err(|e| DataError::Schema {
            path: path.to_path_buf(),
            field: schema_field(&e),
            message: e.to_string(),
        })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let mut seen = HashSet::new();
    for (i, rec) in manifest.recordings.iter_mut().enumerate() {
        if !seen.insert(rec.id.clone()) {
            return Err(DataError::DuplicateId(rec.id.clone()));
        }
        if rec.annotations.is_empty() {
            return Err(DataError::Schema {
                path: path.to_path_buf(),
                field: format!("recordings[{i}].annotations"),
                message: "at least one dimension is required".into(),
            });
        }
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        rec.speech = resolve(&rec.speech);
        rec.gaze = resolve(&rec.gaze);
        for p in rec.annotations.values_mut() {
            *p = resolve(p);
        }
        let check = |field: String, p: &Path| {
            if p.is_file() {
                Ok(())
            } else {
                Err(DataError::DanglingPath {
                    field,
                    path: p.to_path_buf(),
                })
            }
        };
        check(format!("recordings[{i}].speech"), &rec.speech)?;
        check(format!("recordings[{i}].gaze"), &rec.gaze)?;
        for (d, p) in &rec.annotations {
            check(format!("recordings[{i}].annotations.{d}"), p)?;
        }
    }
    if let Some(map) = &manifest.gaze_columns {
        map.parse::<GazeColumnMap>()?;
    }
    Ok(manifest)
}

// serde_json reports "missing field `x`" / "unknown variant `x`"; pull the name out.
fn schema_field(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    if let Some(start) = msg.find('`') {
        if let Some(len) = msg[start + 1..].find('`') {
            return msg[start + 1..start + 1 + len].to_string();
        }
    }
    format!("line {} column {}", e.line(), e.column())
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| DataError::Csv {
            path: path.to_path_buf(),
            source,
        })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> DataError + '_ {
    move |source| DataError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_cell(path: &Path, row: usize, column: usize, cell: &str) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(DataError::NonNumeric {
            path: path.to_path_buf(),
            row,
            column,
            value: cell.to_string(),
        }),
    }
}

/// Loads a per-frame feature CSV (header of names, one row per frame).
/// Row and column indices in errors are zero-based data positions.
pub fn load_feature_csv(path: &Path, fps: FrameRate) -> Result<FeatureMatrix> {
    let mut rdr = csv_reader(path)?;
    let names: Vec<String> = rdr
        .headers()
        .map_err(csv_err(path))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        if rec.len() != names.len() {
            return Err(DataError::RaggedRow {
                path: path.to_path_buf(),
                row: r,
                expected: names.len(),
                found: rec.len(),
            });
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, cell)| parse_cell(path, r, c, cell))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(DataError::NoFrames {
            path: path.to_path_buf(),
        });
    }
    FeatureMatrix::new(names, rows, fps)
}

/// Maps the logical gaze fields onto CSV column names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GazeColumnMap {
    pub h: String,
    pub v: String,
    pub closed: String,
    pub valid: String,
    /// Optional frame-number column; checked for contiguity when present.
    pub frame: Option<String>,
}

impl Default for GazeColumnMap {
    fn default() -> Self {
        Self {
            h: "h".into(),
            v: "v".into(),
            closed: "eye_closed".into(),
            valid: "valid".into(),
            frame: Some("frame".into()),
        }
    }
}

impl GazeColumnMap {
    /// The usual OpenFace export column names.
    pub fn openface() -> Self {
        Self {
            h: "gaze_angle_x".into(),
            v: "gaze_angle_y".into(),
            closed: "AU45_c".into(),
            valid: "success".into(),
            frame: Some("frame".into()),
        }
    }
}

impl FromStr for GazeColumnMap {
    type Err = DataError;

    /// Parses `h=<col>,v=<col>,closed=<col>,valid=<col>[,frame=<col>]`; keys
    /// not given keep their default column names.
    fn from_str(s: &str) -> Result<Self> {
        let mut map = GazeColumnMap::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| DataError::InvalidColumnMap(s.to_string()))?;
            let v = v.trim().to_string();
            if v.is_empty() {
                return Err(DataError::InvalidColumnMap(s.to_string()));
            }
            match k.trim() {
                "h" => map.h = v,
                "v" => map.v = v,
                "closed" | "eye_closed" => map.closed = v,
                "valid" => map.valid = v,
                "frame" => map.frame = Some(v),
                _ => return Err(DataError::InvalidColumnMap(s.to_string())),
            }
        }
        Ok(map)
    }
}

impl fmt::Display for GazeColumnMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "h={},v={},closed={},valid={}",
            self.h, self.v, self.closed, self.valid
        )?;
        if let Some(fr) = &self.frame {
            write!(f, ",frame={fr}")?;
        }
        Ok(())
    }
}

/// Loads a per-frame gaze log. Rows with `valid = 0` are retained. A frame
/// column, when mapped and present, must increase by exactly one per row.
pub fn load_gaze_log_csv(path: &Path, fps: FrameRate, columns: &GazeColumnMap) -> Result<GazeLog> {
    let mut rdr = csv_reader(path)?;
    let header = rdr.headers().map_err(csv_err(path))?.clone();
    let find = |field: &'static str, name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn {
                path: path.to_path_buf(),
                field,
                column: name.to_string(),
            })
    };
    let ih = find("h", &columns.h)?;
    let iv = find("v", &columns.v)?;
    let ic = find("eye_closed", &columns.closed)?;
    let ivalid = find("valid", &columns.valid)?;
    let iframe = columns
        .frame
        .as_ref()
        .and_then(|name| header.iter().position(|h| h == name));

    let mut frames = Vec::new();
    let mut prev_frame: Option<i64> = None;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        if rec.len() != header.len() {
            return Err(DataError::RaggedRow {
                path: path.to_path_buf(),
                row: r,
                expected: header.len(),
                found: rec.len(),
            });
        }
        if let Some(fi) = iframe {
            let n = parse_cell(path, r, fi, &rec[fi])?;
            let n = n as i64;
            if let Some(p) = prev_frame {
                if n != p + 1 {
                    return Err(DataError::NonContiguousFrame {
                        path: path.to_path_buf(),
                        missing: p + 1,
                    });
                }
            }
            prev_frame = Some(n);
        }
        let valid = parse_cell(path, r, ivalid, &rec[ivalid])? >= 0.5;
        let eye_closed = parse_cell(path, r, ic, &rec[ic])? >= 0.5;
        // Coordinates of untracked frames are often garbage; keep them only if numeric.
        let coord = |c: usize| -> Result<f64> {
            match parse_cell(path, r, c, &rec[c]) {
                Ok(x) => Ok(x),
                Err(_) if !valid => Ok(0.0),
                Err(e) => Err(e),
            }
        };
        frames.push(GazeFrame {
            index: r,
            h: coord(ih)?,
            v: coord(iv)?,
            eye_closed,
            valid,
        });
    }
    if frames.is_empty() {
        return Err(DataError::NoFrames {
            path: path.to_path_buf(),
        });
    }
    GazeLog::new(frames, fps)
}

/// Loads an annotation trace from a `value` or `frame,value` CSV. A file
/// whose first line is numeric is read as a header-less single column.
pub fn load_annotation_csv(
    path: &Path,
    dimension: Dimension,
    fps: FrameRate,
) -> Result<AnnotationTrace> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err(path))?;
    let mut records = rdr.records();
    let first = match records.next() {
        Some(rec) => rec.map_err(csv_err(path))?,
        None => {
            return Err(DataError::NoFrames {
                path: path.to_path_buf(),
            })
        }
    };
    let headerless = first.len() == 1 && first[0].parse::<f64>().is_ok();
    let value_col = if headerless {
        0
    } else {
        match first.iter().position(|h| h == "value") {
            Some(c) => c,
            None if first.len() == 1 => 0,
            None => {
                return Err(DataError::MissingColumn {
                    path: path.to_path_buf(),
                    field: "value",
                    column: "value".into(),
                })
            }
        }
    };
    let width = first.len();

    let mut values = Vec::new();
    let push = |rec: &csv::StringRecord, values: &mut Vec<f64>| -> Result<()> {
        let frame = values.len();
        if rec.len() != width {
            return Err(DataError::RaggedRow {
                path: path.to_path_buf(),
                row: frame,
                expected: width,
                found: rec.len(),
            });
        }
        let v = parse_cell(path, frame, value_col, &rec[value_col])?;
        if !(-1.0..=1.0).contains(&v) {
            return Err(DataError::OutOfRange {
                path: path.to_path_buf(),
                frame,
                value: v,
            });
        }
        values.push(v);
        Ok(())
    };
    if headerless {
        push(&first, &mut values)?;
    }
    for rec in records {
        let rec = rec.map_err(csv_err(path))?;
        push(&rec, &mut values)?;
    }
    if values.is_empty() {
        return Err(DataError::NoFrames {
            path: path.to_path_buf(),
        });
    }
    AnnotationTrace::new(dimension, values, fps)
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn format_decimal(x: f64) -> String {
    if x == 0.0 {
        // normalise -0
        "0".to_string()
    } else {
        format!("{x}")
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)
}
