use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use super::config::{ExperimentConfig, NetworkChoice};
use super::data::{load_corpus_path, CorpusData, RecordingData};
use super::report::{FusionGain, ResultRow, ResultsTable};
use super::{HarnessError, Modality};
use crate::fusion::{convert_shift, fit_norm_stats, shift_values, FusionError, NormDirection, NormStats, ShiftSpec};
use crate::metrics::PredictionPair;
use crate::net::{
    train_network, LayerKind, ModelMetadata, NetError, Sequence, TrainConfig, TrainedModel,
};
use crate::timeline::{DataError, FeatureMatrix, Partition};

/// Normalised sequences plus the raw (annotation-unit) truth they are
/// scored against.
struct Split {
    sequences: Vec<Sequence>,
    truth: Vec<f64>,
}

/// Everything a grid of runs on one (modality, shift) shares.
struct Prepared {
    modality: Modality,
    shift: usize,
    stats: NormStats,
    train: Vec<Sequence>,
    val: Split,
    test: Option<Split>,
    train_corpus: String,
    test_corpus: Option<String>,
    test_shift: Option<usize>,
}

impl Prepared {
    fn input_dim(&self) -> usize {
        self.stats.feature_names.len()
    }
}

fn partition_of(corpus: &CorpusData, p: Partition) -> Result<Vec<&RecordingData>, HarnessError> {
    let recs: Vec<_> = corpus.partition(p).collect();
    if recs.is_empty() {
        return Err(DataError::Invariant(format!("corpus {:?} has no {p} recordings", corpus.name)).into());
    }
    Ok(recs)
}

fn split(
    recs: &[&RecordingData],
    modality: Modality,
    shift: usize,
    stats: &NormStats,
) -> Result<Split, HarnessError> {
    let mut sequences = Vec::with_capacity(recs.len());
    let mut truth = Vec::new();
    for r in recs {
        let features = r.features(modality)?;
        let inputs = stats.normalize_features(&features).map_err(|e| match e {
            FusionError::NameMismatch(m) => HarnessError::FeatureMismatch(format!("{}: {m}", r.id)),
            e => e.into(),
        })?;
        let target = shift_values(&r.annotation, shift)?;
        let normalized = stats.apply_target(&target, NormDirection::Forward);
        sequences.push(Sequence::new(inputs, normalized)?);
        truth.extend(target);
    }
    Ok(Split { sequences, truth })
}

fn prepare(
    corpus: &CorpusData,
    modality: Modality,
    shift: usize,
    test: Option<(&CorpusData, usize)>,
) -> Result<Prepared, HarnessError> {
    let train_recs = partition_of(corpus, Partition::Train)?;
    let val_recs = partition_of(corpus, Partition::Validation)?;
    let features = train_recs
        .iter()
        .map(|r| r.features(modality))
        .collect::<Result<Vec<FeatureMatrix>, _>>()?;
    let targets = train_recs
        .iter()
        .map(|r| shift_values(&r.annotation, shift))
        .collect::<Result<Vec<_>, _>>()?;
    let stats = fit_norm_stats(
        &features.iter().collect::<Vec<_>>(),
        &targets.iter().map(Vec::as_slice).collect::<Vec<_>>(),
    )?;
    let train = split(&train_recs, modality, shift, &stats)?.sequences;
    let val = split(&val_recs, modality, shift, &stats)?;
    let (test, test_corpus, test_shift) = match test {
        None => {
            let recs: Vec<_> = corpus.partition(Partition::Test).collect();
            let test = (!recs.is_empty())
                .then(|| split(&recs, modality, shift, &stats))
                .transpose()?;
            (test, None, None)
        }
        Some((other, other_shift)) => {
            let recs = partition_of(other, Partition::Test)?;
            let test = split(&recs, modality, other_shift, &stats)?;
            (Some(test), Some(other.name.clone()), Some(other_shift))
        }
    };
    Ok(Prepared {
        modality,
        shift,
        stats,
        train,
        val,
        test,
        train_corpus: corpus.name.clone(),
        test_corpus,
        test_shift,
    })
}

fn split_ccc(model: &TrainedModel, split: &Split) -> Result<f64, HarnessError> {
    let mut predictions = Vec::with_capacity(split.truth.len());
    for s in &split.sequences {
        predictions.extend(model.predict_normalized(&s.inputs)?);
    }
    Ok(PredictionPair::new(&predictions, &split.truth)?.ccc().value)
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

struct RunJob<'a> {
    prepared: &'a Prepared,
    network: &'a NetworkChoice,
    train: TrainConfig,
}

/// A run's row with its model, or the divergence that stopped it.
type RunResult = (ResultRow, Result<TrainedModel, NetError>);

fn run_one(job: &RunJob<'_>, config: &ExperimentConfig) -> Result<RunResult, HarnessError> {
    let p = job.prepared;
    let spec = job.network.spec(p.input_dim());
    let mut row = ResultRow {
        dimension: config.dimension,
        modality: p.modality,
        network: job.network.kind,
        shift_frames: p.shift,
        seed: job.train.seed,
        learning_rate: job.train.learning_rate,
        best_epoch: 0,
        val_sse: f64::NAN,
        val_ccc: f64::NAN,
        test_ccc: p.test.as_ref().map(|_| f64::NAN),
        train_corpus: p.train_corpus.clone(),
        test_corpus: p.test_corpus.clone(),
        test_shift_frames: p.test_shift,
    };
    let outcome = match train_network(&spec, &p.train, &p.val.sequences, &job.train) {
        Ok(o) => o,
        Err(e @ NetError::Diverged { epoch, .. }) => {
            log::warn!(
                "{} {} shift {} lr {:e} seed {} diverged at epoch {epoch}",
                p.modality,
                job.network.kind,
                p.shift,
                job.train.learning_rate,
                job.train.seed
            );
            return Ok((row, Err(e)));
        }
        Err(e) => return Err(e.into()),
    };
    let metadata = ModelMetadata {
        seed: job.train.seed,
        learning_rate: job.train.learning_rate,
        corpus: p.train_corpus.clone(),
        timestamp: now(),
        modality: Some(p.modality.to_string()),
    };
    let model = TrainedModel::from_outcome(spec, outcome, p.stats.clone(), config.dimension, p.shift, metadata);
    row.best_epoch = model.best_epoch;
    row.val_sse = model.history[model.best_epoch - 1].val_sse;
    row.val_ccc = split_ccc(&model, &p.val)?;
    if let Some(test) = &p.test {
        row.test_ccc = Some(split_ccc(&model, test)?);
    }
    log::info!(
        "{} {} {} shift {} lr {:e} seed {}: best epoch {}, validation CCC {:.4}",
        config.dimension,
        p.modality,
        job.network.kind,
        p.shift,
        job.train.learning_rate,
        job.train.seed,
        row.best_epoch,
        row.val_ccc
    );
    Ok((row, Ok(model)))
}

/// Runs every network × learning rate × seed combination on every prepared
/// split in parallel and returns rows in a fixed order together with the
/// lowest-validation-SSE model per (split, network). Unless `tolerate_divergence`
/// is set, a (split, network) cell in which every run diverged is an error.
fn run_grid(
    prepared: &[Prepared],
    config: &ExperimentConfig,
    tolerate_divergence: bool,
) -> Result<(Vec<ResultRow>, Vec<TrainedModel>), HarnessError> {
    let grid = config.train_grid();
    let grid = &grid;
    let jobs: Vec<RunJob<'_>> = prepared
        .iter()
        .flat_map(|p| {
            config.networks.iter().flat_map(move |n| {
                grid.iter().map(move |t| RunJob {
                    prepared: p,
                    network: n,
                    train: *t,
                })
            })
        })
        .collect();
    let results = jobs
        .par_iter()
        .map(|j| run_one(j, config))
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::with_capacity(results.len());
    let mut best = Vec::new();
    for chunk in results.chunks(grid.len()) {
        let mut winner: Option<(f64, &TrainedModel)> = None;
        for (row, model) in chunk {
            if let Ok(m) = model {
                if winner.is_none_or(|(sse, _)| row.val_sse < sse) {
                    winner = Some((row.val_sse, m));
                }
            }
        }
        if winner.is_none() && !tolerate_divergence {
            if let Some((_, Err(e))) = chunk.first() {
                return Err(e.clone().into());
            }
        }
        best.push(winner.map(|(_, m)| m.clone()));
        rows.extend(chunk.iter().map(|(r, _)| r.clone()));
    }
    Ok((rows, best.into_iter().flatten().collect()))
}

fn usable_shift(corpus: &CorpusData, shift: usize) -> Result<usize, HarnessError> {
    let shortest = corpus.shortest_recording();
    if shift >= shortest {
        return Err(FusionError::ShiftTooLarge {
            shift,
            len: shortest,
        }
        .into());
    }
    Ok(shift)
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub table: ResultsTable,
    /// Shift with the highest validation CCC per network kind, among the
    /// lowest-validation-SSE run of every shift.
    pub best_shift: BTreeMap<LayerKind, usize>,
}

/// Trains on the training partition at every shift of the sweep and scores
/// validation CCC. Divergent runs are kept as NaN rows.
pub fn run_shift_sweep(config: &ExperimentConfig) -> Result<SweepOutcome, HarnessError> {
    config.validate()?;
    let corpus = load_corpus_path(&config.train_manifest, config.dimension, config.window(), &config.gaze)?;
    shift_sweep_on(&corpus, config)
}

pub fn shift_sweep_on(corpus: &CorpusData, config: &ExperimentConfig) -> Result<SweepOutcome, HarnessError> {
    let fps = corpus.fps()?;
    let shortest = corpus.shortest_recording();
    let shifts: Vec<usize> = config
        .sweep_shifts(fps)?
        .into_iter()
        .filter(|&s| {
            let ok = s < shortest;
            if !ok {
                log::warn!("skipping shift {s}: recordings have only {shortest} frames");
            }
            ok
        })
        .collect();
    if shifts.is_empty() {
        return Err(HarnessError::Config("no sweep shift fits the recordings".into()));
    }
    let prepared = shifts
        .iter()
        .map(|&s| prepare(corpus, config.sweep.modality, s, None))
        .collect::<Result<Vec<_>, _>>()?;
    let (mut rows, _) = run_grid(&prepared, config, true)?;
    for r in &mut rows {
        r.test_ccc = None;
    }
    let table = ResultsTable::new(rows);
    let mut best_shift = BTreeMap::new();
    let mut best_ccc: BTreeMap<LayerKind, f64> = BTreeMap::new();
    for r in table.selected() {
        if r.diverged() {
            continue;
        }
        let current = best_ccc.entry(r.network).or_insert(f64::NEG_INFINITY);
        let shift = best_shift.entry(r.network).or_insert(r.shift_frames);
        if r.val_ccc > *current || (r.val_ccc == *current && r.shift_frames < *shift) {
            *current = r.val_ccc;
            *shift = r.shift_frames;
        }
    }
    Ok(SweepOutcome { table, best_shift })
}

#[derive(Debug, Clone)]
pub struct IntraOutcome {
    pub table: ResultsTable,
    pub gains: Vec<FusionGain>,
    /// Lowest-validation-SSE model per (modality, network).
    pub models: Vec<TrainedModel>,
}

/// Trains every (modality × network) cell at the chosen shift, selecting
/// learning rate and seed by validation SSE. Test CCC is reported when the
/// corpus has a test partition. A cell in which every run diverges fails
/// with [`NetError::Diverged`].
pub fn run_intra_corpus(config: &ExperimentConfig) -> Result<IntraOutcome, HarnessError> {
    config.validate()?;
    let corpus = load_corpus_path(&config.train_manifest, config.dimension, config.window(), &config.gaze)?;
    intra_corpus_on(&corpus, config)
}

pub fn intra_corpus_on(corpus: &CorpusData, config: &ExperimentConfig) -> Result<IntraOutcome, HarnessError> {
    let shift = usable_shift(corpus, config.chosen_shift())?;
    let prepared = config
        .modalities
        .iter()
        .map(|&m| prepare(corpus, m, shift, None))
        .collect::<Result<Vec<_>, _>>()?;
    let (rows, models) = run_grid(&prepared, config, false)?;
    let table = ResultsTable::new(rows);
    let gains = table.fusion_gains();
    for g in &gains {
        log::info!(
            "{} {}: fused {:.4} vs {} {:.4} ({:+.2}%)",
            g.dimension,
            g.network.map_or("all", LayerKind::as_str),
            g.fused_ccc,
            g.best_unimodal,
            g.best_unimodal_ccc,
            100.0 * g.relative
        );
    }
    Ok(IntraOutcome { table, gains, models })
}

/// Trains on the training corpus (model selection on its validation
/// partition) and tests once on the test corpus's test partition, whose
/// annotation shift is the frame-rate conversion of the training shift or
/// the configured override. With `both_directions` the roles are swapped
/// for a second pass.
pub fn run_cross_corpus(config: &ExperimentConfig) -> Result<ResultsTable, HarnessError> {
    config.validate()?;
    let test_manifest = config
        .test_manifest
        .as_ref()
        .ok_or_else(|| HarnessError::Config("cross-corpus runs need test_manifest".into()))?;
    let a = load_corpus_path(&config.train_manifest, config.dimension, config.window(), &config.gaze)?;
    let b = load_corpus_path(test_manifest, config.dimension, config.window(), &config.gaze)?;
    cross_corpus_on(&a, &b, config)
}

pub fn cross_corpus_on(a: &CorpusData, b: &CorpusData, config: &ExperimentConfig) -> Result<ResultsTable, HarnessError> {
    let shift_a = usable_shift(a, config.chosen_shift())?;
    let converted = convert_shift(&ShiftSpec::new(shift_a, a.fps()?), b.fps()?, config.cross_shift_override);
    let shift_b = usable_shift(b, converted.frames)?;
    log::info!(
        "cross-corpus shift: {shift_a} frames @ {} → {shift_b} frames @ {}",
        a.fps()?,
        b.fps()?
    );
    check_feature_spaces(a, b, &config.modalities)?;

    let mut directions = vec![(a, shift_a, b, shift_b)];
    if config.both_directions {
        directions.push((b, shift_b, a, shift_a));
    }
    let mut table = ResultsTable::default();
    for (train, train_shift, test, test_shift) in directions {
        let prepared = config
            .modalities
            .iter()
            .map(|&m| prepare(train, m, train_shift, Some((test, test_shift))))
            .collect::<Result<Vec<_>, _>>()?;
        let (rows, _) = run_grid(&prepared, config, false)?;
        table.extend(ResultsTable::new(rows));
    }
    Ok(table)
}

fn check_feature_spaces(a: &CorpusData, b: &CorpusData, modalities: &[Modality]) -> Result<(), HarnessError> {
    let (ra, rb) = match (a.recordings.first(), b.recordings.first()) {
        (Some(ra), Some(rb)) => (ra, rb),
        _ => return Err(DataError::Invariant("empty corpus".into()).into()),
    };
    for &m in modalities {
        let (fa, fb) = (ra.features(m)?, rb.features(m)?);
        if fa.names() != fb.names() {
            let first = fa
                .names()
                .iter()
                .zip(fb.names())
                .position(|(x, y)| x != y)
                .unwrap_or(fa.n_features().min(fb.n_features()));
            return Err(HarnessError::FeatureMismatch(format!(
                "{m} features of {:?} ({}) and {:?} ({}) differ from column {first}",
                a.name,
                fa.n_features(),
                b.name,
                fb.n_features()
            )));
        }
    }
    Ok(())
}

/// Predicts `features` with `model` and scores the CCC against `annotation`
/// shifted by `shift` frames. Returns the predictions and the CCC.
pub fn evaluate_model(
    model: &TrainedModel,
    features: &FeatureMatrix,
    annotation: &[f64],
    shift: usize,
) -> Result<(Vec<f64>, f64), HarnessError> {
    if features.n_frames() != annotation.len() {
        return Err(FusionError::FrameCountMismatch(features.n_frames(), annotation.len()).into());
    }
    let inputs = model.norm_stats.normalize_features(features).map_err(|e| match e {
        FusionError::NameMismatch(m) => HarnessError::FeatureMismatch(m),
        e => e.into(),
    })?;
    let predictions = model.predict_normalized(&inputs)?;
    let truth = shift_values(annotation, shift)?;
    let ccc = PredictionPair::new(&predictions, &truth)?.ccc().value;
    Ok((predictions, ccc))
}
