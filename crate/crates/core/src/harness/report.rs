use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{HarnessError, Modality};
use crate::metrics::relative_improvement;
use crate::net::LayerKind;
use crate::timeline::{format_decimal, write_file, DataError, Dimension};

/// One completed training run. Divergent runs carry NaN scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dimension: Dimension,
    pub modality: Modality,
    pub network: LayerKind,
    pub shift_frames: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub best_epoch: usize,
    pub val_sse: f64,
    pub val_ccc: f64,
    pub test_ccc: Option<f64>,
    pub train_corpus: String,
    /// Set when the test partition comes from a different corpus.
    pub test_corpus: Option<String>,
    /// Annotation shift applied to that corpus, when it differs in frame
    /// rate or was overridden.
    pub test_shift_frames: Option<usize>,
}

impl ResultRow {
    pub fn diverged(&self) -> bool {
        self.val_ccc.is_nan()
    }

    fn group_key(&self) -> GroupKey {
        (
            self.dimension,
            self.modality,
            self.network,
            self.shift_frames,
            self.train_corpus.clone(),
            self.test_corpus.clone(),
        )
    }
}

type GroupKey = (Dimension, Modality, LayerKind, usize, String, Option<String>);

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

const CSV_HEADER: [&str; 13] = [
    "dimension",
    "modality",
    "network",
    "shift_frames",
    "seed",
    "learning_rate",
    "best_epoch",
    "val_sse",
    "val_ccc",
    "test_ccc",
    "train_corpus",
    "test_corpus",
    "test_shift_frames",
];

fn score(x: f64) -> String {
    if x.is_nan() {
        "div".into()
    } else {
        format_decimal(x)
    }
}

fn parse_score(s: &str) -> Result<f64, String> {
    if s == "div" {
        Ok(f64::NAN)
    } else {
        s.parse().map_err(|_| format!("bad number {s:?}"))
    }
}

impl ResultsTable {
    pub fn new(rows: Vec<ResultRow>) -> Self {
        Self { rows }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn extend(&mut self, other: ResultsTable) {
        self.rows.extend(other.rows);
    }

    /// Every run, one line each, in insertion order. Divergent scores are
    /// written as `div`, absent ones as an empty cell.
    pub fn to_csv(&self) -> String {
        let mut out = CSV_HEADER.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells = [
                r.dimension.to_string(),
                r.modality.to_string(),
                r.network.to_string(),
                r.shift_frames.to_string(),
                r.seed.to_string(),
                format_decimal(r.learning_rate),
                r.best_epoch.to_string(),
                score(r.val_sse),
                score(r.val_ccc),
                r.test_ccc.map(score).unwrap_or_default(),
                r.train_corpus.clone(),
                r.test_corpus.clone().unwrap_or_default(),
                r.test_shift_frames.map(|s| s.to_string()).unwrap_or_default(),
            ];
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, HarnessError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| HarnessError::Config(e.to_string()))?
            .clone();
        if header.iter().ne(CSV_HEADER) {
            return Err(HarnessError::Config(format!(
                "unexpected results header {:?}",
                header.iter().collect::<Vec<_>>()
            )));
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| HarnessError::Config(e.to_string()))?;
            let bad = |m: String| HarnessError::Config(format!("results row {}: {m}", i + 1));
            let f = |j: usize| rec.get(j).unwrap_or("");
            let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
            rows.push(ResultRow {
                dimension: Dimension::from_str(f(0)).map_err(bad)?,
                modality: Modality::from_str(f(1)).map_err(bad)?,
                network: LayerKind::from_str(f(2)).map_err(bad)?,
                shift_frames: f(3).parse().map_err(|_| bad("bad shift".into()))?,
                seed: f(4).parse().map_err(|_| bad("bad seed".into()))?,
                learning_rate: parse_score(f(5)).map_err(bad)?,
                best_epoch: f(6).parse().map_err(|_| bad("bad epoch".into()))?,
                val_sse: parse_score(f(7)).map_err(bad)?,
                val_ccc: parse_score(f(8)).map_err(bad)?,
                test_ccc: opt(f(9)).map(|s| parse_score(&s)).transpose().map_err(bad)?,
                train_corpus: f(10).to_string(),
                test_corpus: opt(f(11)),
                test_shift_frames: opt(f(12))
                    .map(|s| s.parse())
                    .transpose()
                    .map_err(|_| bad("bad test shift".into()))?,
            });
        }
        Ok(Self { rows })
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), HarnessError> {
        Ok(write_file(path, self.to_csv().as_bytes())?)
    }

    pub fn load_csv(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv(&text)
    }

    /// Per configuration (dimension, modality, network, shift, corpora), the
    /// run with the lowest validation SSE, ordered by that key. A
    /// configuration whose runs all diverged keeps its first run.
    pub fn selected(&self) -> Vec<&ResultRow> {
        let mut best: BTreeMap<GroupKey, &ResultRow> = BTreeMap::new();
        for r in &self.rows {
            best.entry(r.group_key())
                .and_modify(|b| {
                    if !r.diverged() && (b.diverged() || r.val_sse < b.val_sse) {
                        *b = r;
                    }
                })
                .or_insert(r);
        }
        best.into_values().collect()
    }

    /// `(fused − best unimodal) / best unimodal` on validation CCC among the
    /// selected runs: per network kind, and across network kinds (best fused
    /// against best unimodal of any kind, `network: None`), for every
    /// dimension, shift and corpus pair.
    pub fn fusion_gains(&self) -> Vec<FusionGain> {
        type Arena = (Dimension, usize, String, Option<String>);
        let mut groups: BTreeMap<(Arena, Option<LayerKind>), Vec<&ResultRow>> = BTreeMap::new();
        for r in self.selected() {
            let arena = (r.dimension, r.shift_frames, r.train_corpus.clone(), r.test_corpus.clone());
            groups.entry((arena.clone(), Some(r.network))).or_default().push(r);
            groups.entry((arena, None)).or_default().push(r);
        }
        let networks_per_arena = |arena: &Arena| {
            groups
                .keys()
                .filter(|(a, n)| a == arena && n.is_some())
                .count()
        };
        groups
            .iter()
            .filter(|((arena, network), _)| network.is_some() || networks_per_arena(arena) > 1)
            .filter_map(|((arena, network), rows)| {
                let best_of = |fused: bool| {
                    rows.iter()
                        .filter(|r| (r.modality == Modality::Fused) == fused && !r.diverged())
                        .max_by(|a, b| a.val_ccc.total_cmp(&b.val_ccc))
                };
                let fused = best_of(true)?;
                let best = best_of(false)?;
                Some(FusionGain {
                    dimension: arena.0,
                    network: *network,
                    fused_ccc: fused.val_ccc,
                    best_unimodal: best.modality,
                    best_unimodal_ccc: best.val_ccc,
                    relative: relative_improvement(fused.val_ccc, best.val_ccc),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionGain {
    pub dimension: Dimension,
    /// `None` compares across network kinds.
    pub network: Option<LayerKind>,
    pub fused_ccc: f64,
    pub best_unimodal: Modality,
    pub best_unimodal_ccc: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

fn cell(x: Option<f64>) -> String {
    match x {
        None => "–".into(),
        Some(v) if v.is_nan() => "div".into(),
        Some(v) => format!("{v:.3}"),
    }
}

fn bold_if(s: String, on: bool) -> String {
    if on {
        format!("**{s}**")
    } else {
        s
    }
}

/// Renders the selected run per configuration. CSV lists them plainly;
/// markdown adds corpus columns for cross-corpus rows, bolds the best
/// validation and test CCC per dimension and corpus pair, and appends the
/// fused-over-unimodal improvements.
pub fn render_report(table: &ResultsTable, format: ReportFormat) -> Result<String, HarnessError> {
    if table.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let selected = table.selected();
    match format {
        ReportFormat::Csv => {
            let rows = selected.into_iter().cloned().collect();
            Ok(ResultsTable::new(rows).to_csv())
        }
        ReportFormat::Markdown => Ok(markdown(&selected, &table.fusion_gains())),
    }
}

fn markdown(rows: &[&ResultRow], gains: &[FusionGain]) -> String {
    let cross = rows.iter().any(|r| r.test_corpus.is_some());
    let arena = |r: &ResultRow| (r.dimension, r.train_corpus.clone(), r.test_corpus.clone());
    let mut best_val: BTreeMap<_, f64> = BTreeMap::new();
    let mut best_test: BTreeMap<_, f64> = BTreeMap::new();
    for r in rows {
        if !r.val_ccc.is_nan() {
            let e = best_val.entry(arena(r)).or_insert(f64::NEG_INFINITY);
            *e = e.max(r.val_ccc);
        }
        if let Some(t) = r.test_ccc.filter(|t| !t.is_nan()) {
            let e = best_test.entry(arena(r)).or_insert(f64::NEG_INFINITY);
            *e = e.max(t);
        }
    }

    let mut header = vec!["Dimension", "Modality", "Network", "Shift (frames)"];
    if cross {
        header.extend(["Training corpus", "Testing corpus", "Test shift"]);
    }
    header.extend(["Random seed", "Learning rate", "Validation CCC", "Test CCC"]);
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for r in rows {
        let key = arena(r);
        let mut cells = vec![
            r.dimension.to_string(),
            r.modality.to_string(),
            r.network.to_string(),
            r.shift_frames.to_string(),
        ];
        if cross {
            cells.push(r.train_corpus.clone());
            cells.push(r.test_corpus.clone().unwrap_or_else(|| r.train_corpus.clone()));
            cells.push(r.test_shift_frames.unwrap_or(r.shift_frames).to_string());
        }
        cells.push(r.seed.to_string());
        cells.push(format!("{:e}", r.learning_rate));
        cells.push(bold_if(cell(Some(r.val_ccc)), best_val.get(&key) == Some(&r.val_ccc)));
        let test_best = matches!((r.test_ccc, best_test.get(&key)), (Some(t), Some(b)) if t == *b);
        cells.push(bold_if(cell(r.test_ccc), test_best));
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
    if !gains.is_empty() {
        out.push('\n');
        for g in gains {
            let _ = writeln!(
                out,
                "- {} {}: fused {:.3} vs {} {:.3} → {:+.2}%",
                g.dimension,
                g.network.map_or("all networks", LayerKind::as_str),
                g.fused_ccc,
                g.best_unimodal,
                g.best_unimodal_ccc,
                100.0 * g.relative
            );
        }
    }
    out
}

pub fn write_report(table: &ResultsTable, format: ReportFormat, path: &Path) -> Result<(), HarnessError> {
    let text = render_report(table, format)?;
    Ok(write_file(path, text.as_bytes())?)
}
