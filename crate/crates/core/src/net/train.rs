use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{accumulate_gradients, init_network, sequence_sse, NetError, NetworkParams, NetworkSpec};

/// One training or evaluation sequence: frames × features with one target per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Sequence {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self, NetError> {
        if inputs.len() != targets.len() {
            return Err(NetError::LengthMismatch {
                frames: inputs.len(),
                targets: targets.len(),
            });
        }
        if inputs.is_empty() {
            return Err(NetError::EmptySequence);
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub seed: u64,
    pub max_epochs: usize,
    pub patience_epochs: usize,
    pub noise_sigma: f64,
    pub batch_sequences: usize,
    pub momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            seed: 1787452436,
            max_epochs: 100,
            patience_epochs: 20,
            noise_sigma: 0.1,
            batch_sequences: 1,
            momentum: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: &str| Err(NetError::InvalidConfig(m.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be ≥ 1");
        }
        if self.patience_epochs >= self.max_epochs {
            return bad("patience_epochs must be smaller than max_epochs");
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be ≥ 0");
        }
        if self.batch_sequences == 0 {
            return bad("batch_sequences must be ≥ 1");
        }
        if !(self.momentum >= 0.0 && self.momentum < 1.0) {
            return bad("momentum must be in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based
    pub epoch: usize,
    /// SSE on the noisy training presentations, summed over the epoch.
    pub train_sse: f64,
    pub val_sse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub params: NetworkParams,
    pub best_epoch: usize,
    pub best_val_sse: f64,
    pub history: Vec<EpochRecord>,
}

/// Tracks the best validation score and decides when to stop: training ends
/// once `patience` epochs have passed without a strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
        }
    }

    /// Records `score` for `epoch`; returns true when it is a new best.
    pub fn observe(&mut self, epoch: usize, score: f64) -> bool {
        if score < self.best {
            self.best = score;
            self.best_epoch = epoch;
            true
        } else {
            false
        }
    }

    pub fn should_stop(&self, epoch: usize) -> bool {
        epoch - self.best_epoch >= self.patience
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

/// Adds i.i.d. N(0, σ²) noise to every element. σ = 0 returns the input.
pub fn inject_noise<R: Rng + ?Sized>(sequence: &[Vec<f64>], sigma: f64, rng: &mut R) -> Vec<Vec<f64>> {
    if sigma == 0.0 {
        return sequence.to_vec();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    sequence
        .iter()
        .map(|row| row.iter().map(|x| x + normal.sample(rng)).collect())
        .collect()
}

/// Noise-free SSE summed over `sequences`.
pub fn validation_sse(
    spec: &NetworkSpec,
    params: &NetworkParams,
    sequences: &[Sequence],
) -> Result<f64, NetError> {
    sequences
        .iter()
        .map(|s| sequence_sse(spec, params, &s.inputs, &s.targets))
        .sum()
}

/// Trains from a fresh [`init_network`] and selects the epoch with the
/// lowest validation SSE.
pub fn train_network(
    spec: &NetworkSpec,
    train: &[Sequence],
    val: &[Sequence],
    config: &TrainConfig,
) -> Result<TrainOutcome, NetError> {
    if val.is_empty() {
        return Err(NetError::Data("validation set is empty".into()));
    }
    let init = init_network(spec, config.seed)?;
    train_with_validator(spec, init, train, config, |p| validation_sse(spec, p, val))
}

/// The training loop with a caller-supplied validation score (lower is
/// better). Per epoch: shuffle the training sequences, inject fresh input
/// noise, accumulate BPTT gradients over each batch and take a
/// gradient-descent step (with optional momentum); then score.
pub fn train_with_validator<F>(
    spec: &NetworkSpec,
    init: NetworkParams,
    train: &[Sequence],
    config: &TrainConfig,
    mut validate: F,
) -> Result<TrainOutcome, NetError>
where
    F: FnMut(&NetworkParams) -> Result<f64, NetError>,
{
    spec.validate()?;
    config.validate()?;
    if train.is_empty() {
        return Err(NetError::Data("training set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);

    let mut params = init;
    let mut velocity = vec![0.0; params.len()];
    let mut grad = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stopper = EarlyStopping::new(config.patience_epochs);
    let mut best_params = params.clone();
    let mut history = Vec::new();
    let mut last_finite = 0;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut train_sse = 0.0;
        for batch in order.chunks(config.batch_sequences) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let noisy = inject_noise(&train[i].inputs, config.noise_sigma, &mut rng);
                train_sse += accumulate_gradients(spec, &params, &noisy, &train[i].targets, &mut grad)?;
            }
            for ((p, v), g) in params.values.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = config.momentum * *v - config.learning_rate * g;
                *p += *v;
            }
        }
        let val_sse = validate(&params)?;
        if !(train_sse.is_finite() && val_sse.is_finite() && params.is_finite()) {
            return Err(NetError::Diverged {
                epoch,
                last_finite_epoch: last_finite,
            });
        }
        last_finite = epoch;
        history.push(EpochRecord {
            epoch,
            train_sse,
            val_sse,
        });
        log::debug!("epoch {epoch}: train SSE {train_sse:.4}, validation SSE {val_sse:.4}");
        if stopper.observe(epoch, val_sse) {
            best_params = params.clone();
        }
        if stopper.should_stop(epoch) {
            break;
        }
    }
    Ok(TrainOutcome {
        params: best_params,
        best_epoch: stopper.best_epoch(),
        best_val_sse: stopper.best(),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{LayerKind, NetworkSpec};

    #[test]
    fn early_stopping_counts_from_best() {
        let mut es = EarlyStopping::new(20);
        for e in 1..=5 {
            assert!(es.observe(e, 10.0 - e as f64));
        }
        let mut stop = None;
        for e in 6..=100 {
            assert!(!es.observe(e, 5.0));
            if es.should_stop(e) {
                stop = Some(e);
                break;
            }
        }
        assert_eq!(stop, Some(25));
        assert_eq!(es.best_epoch(), 5);
    }

    #[test]
    fn noise_statistics() {
        let seq = vec![vec![0.0; 1000]; 1000];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let noisy = inject_noise(&seq, 0.1, &mut rng);
        let all: Vec<f64> = noisy.into_iter().flatten().collect();
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let std = (all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 0.001, "{mean}");
        assert!((std - 0.1).abs() < 0.001, "{std}");
    }

    #[test]
    fn noise_identity_and_reproducible() {
        let seq = vec![vec![0.5, -0.25]; 10];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(inject_noise(&seq, 0.0, &mut rng), seq);
        let a = inject_noise(&seq, 0.1, &mut ChaCha8Rng::seed_from_u64(4));
        let b = inject_noise(&seq, 0.1, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
        assert_ne!(a, seq);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            patience_epochs: 100,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    fn toy_sequences(seed: u64, n: usize) -> Vec<Sequence> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let inputs: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
                let targets = inputs.iter().map(|x| 0.5 * x[0]).collect();
                Sequence::new(inputs, targets).unwrap()
            })
            .collect()
    }

    #[test]
    fn plateau_stops_at_best_plus_patience() {
        let spec = NetworkSpec::uniform(LayerKind::Lstm, 1, &[3]);
        let train = toy_sequences(1, 2);
        let config = TrainConfig {
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let mut calls = 0;
        let mut snapshot = None;
        let out = train_with_validator(&spec, init_network(&spec, 3).unwrap(), &train, &config, |p| {
            calls += 1;
            if calls == 5 {
                snapshot = Some(p.clone());
            }
            Ok(if calls <= 5 { 10.0 - calls as f64 } else { 5.0 })
        })
        .unwrap();
        assert_eq!(out.history.len(), 25);
        assert_eq!(out.best_epoch, 5);
        assert_eq!(Some(out.params), snapshot);
    }

    #[test]
    fn max_epochs_cap() {
        let spec = NetworkSpec::uniform(LayerKind::Lstm, 1, &[2]);
        let train = toy_sequences(2, 1);
        let config = TrainConfig {
            learning_rate: 1e-3,
            ..TrainConfig::default()
        };
        let mut k = 0.0;
        let out = train_with_validator(&spec, init_network(&spec, 1).unwrap(), &train, &config, |_| {
            k += 1.0;
            Ok(1000.0 - k)
        })
        .unwrap();
        assert_eq!(out.history.len(), 100);
        assert_eq!(out.best_epoch, 100);
    }

    #[test]
    fn divergence_is_reported() {
        let spec = NetworkSpec::uniform(LayerKind::Lstm, 1, &[2]);
        let train = toy_sequences(2, 1);
        let config = TrainConfig::default();
        let mut k = 0;
        let err = train_with_validator(&spec, init_network(&spec, 1).unwrap(), &train, &config, |_| {
            k += 1;
            Ok(if k < 4 { 1.0 } else { f64::NAN })
        })
        .unwrap_err();
        assert!(matches!(err, NetError::Diverged { epoch: 4, last_finite_epoch: 3 }));
    }

    #[test]
    fn training_is_deterministic_and_learns() {
        let spec = NetworkSpec::uniform(LayerKind::Lstm, 1, &[4]);
        let train = toy_sequences(5, 4);
        let val = toy_sequences(6, 2);
        let config = TrainConfig {
            learning_rate: 5e-3,
            max_epochs: 40,
            momentum: 0.5,
            batch_sequences: 2,
            ..TrainConfig::default()
        };
        let a = train_network(&spec, &train, &val, &config).unwrap();
        let b = train_network(&spec, &train, &val, &config).unwrap();
        assert_eq!(a, b);
        let first = a.history[0].val_sse;
        assert!(a.best_val_sse < first * 0.5, "{} vs {first}", a.best_val_sse);
        // the returned parameters reproduce the recorded best validation SSE
        assert_eq!(validation_sse(&spec, &a.params, &val).unwrap(), a.best_val_sse);
        // best never worse than any earlier epoch
        let min = a.history.iter().map(|h| h.val_sse).fold(f64::INFINITY, f64::min);
        assert_eq!(min, a.best_val_sse);
    }
}
