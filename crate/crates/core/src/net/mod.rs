//! LSTM / BLSTM sequence regression with an affine single-output readout.
//!
//! Cell (no peepholes, logistic gates σ, tanh elsewhere):
//!
//! ```text
//! i = σ(W_i x + R_i h' + b_i)    f = σ(W_f x + R_f h' + b_f)
//! o = σ(W_o x + R_o h' + b_o)    g = tanh(W_c x + R_c h' + b_c)
//! c = f ⊙ c' + i ⊙ g             h = o ⊙ tanh(c)
//! ```
//!
//! A BLSTM layer of size `N` runs `N/2` units forward in time and `N/2`
//! backward and concatenates `[forward, backward]` per frame.
//!
//! All parameters live in one flat `Vec<f64>`; [`Layout`] maps layers,
//! directions and gates onto ranges of it. Within a direction block the
//! order is `W` (4u × in, row-major), `R` (4u × u), `b` (4u), with gate rows
//! stacked input, forget, output, cell.

mod gradcheck;
mod model;
mod train;

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gradcheck::{gradient_check, gradient_check_on, GradCheckReport};
pub use model::{load_model, save_model, ModelIoError, ModelMetadata, TrainedModel, MODEL_FORMAT_VERSION};
pub use train::{
    inject_noise, train_network, train_with_validator, validation_sse, EarlyStopping, EpochRecord,
    Sequence, TrainConfig, TrainOutcome,
};

#[derive(Debug, Clone, Error)]
pub enum NetError {
    #[error("invalid network: {0}")]
    InvalidSpec(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("input width {found} does not match network input dimension {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("sequence has {frames} frames but {targets} targets")]
    LengthMismatch { frames: usize, targets: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("non-finite input at frame {0}")]
    NonFiniteInput(usize),
    #[error("training diverged at epoch {epoch} (last finite epoch: {last_finite_epoch})")]
    Diverged { epoch: usize, last_finite_epoch: usize },
    #[error("{0}")]
    Data(String),
}

pub const GATES: [&str; 4] = ["input", "forget", "output", "cell"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Lstm,
    Blstm,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Lstm => "LSTM",
            LayerKind::Blstm => "BLSTM",
        }
    }

    pub fn directions(self) -> usize {
        match self {
            LayerKind::Lstm => 1,
            LayerKind::Blstm => 2,
        }
    }
}

impl std::fmt::Display for LayerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LayerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "lstm" => Ok(LayerKind::Lstm),
            "blstm" => Ok(LayerKind::Blstm),
            other => Err(format!("unknown layer kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// Stack of hidden layers of one kind.
    pub fn uniform(kind: LayerKind, input_dim: usize, sizes: &[usize]) -> Self {
        Self {
            input_dim,
            layers: sizes.iter().map(|&size| LayerSpec { kind, size }).collect(),
        }
    }

    /// Two BLSTM layers of 40 and 30 nodes.
    pub fn default_blstm(input_dim: usize) -> Self {
        Self::uniform(LayerKind::Blstm, input_dim, &[40, 30])
    }

    /// Two LSTM layers of 80 and 60 nodes.
    pub fn default_lstm(input_dim: usize) -> Self {
        Self::uniform(LayerKind::Lstm, input_dim, &[80, 60])
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.input_dim == 0 {
            return Err(NetError::InvalidSpec("input_dim must be ≥ 1".into()));
        }
        if self.layers.is_empty() {
            return Err(NetError::InvalidSpec("at least one hidden layer is required".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.size == 0 {
                return Err(NetError::InvalidSpec(format!("layer {i} has size 0")));
            }
            if l.kind == LayerKind::Blstm && l.size % 2 != 0 {
                return Err(NetError::InvalidSpec(format!(
                    "BLSTM layer {i} size {} is not even",
                    l.size
                )));
            }
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        1
    }
}

/// Where one direction of one layer lives in the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectionLayout {
    pub in_dim: usize,
    pub units: usize,
    pub offset: usize,
}

impl DirectionLayout {
    fn len(&self) -> usize {
        4 * self.units * (self.in_dim + self.units + 1)
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }

    pub fn w(&self) -> Range<usize> {
        self.offset..self.offset + 4 * self.units * self.in_dim
    }

    pub fn r(&self) -> Range<usize> {
        let s = self.w().end;
        s..s + 4 * self.units * self.units
    }

    pub fn b(&self) -> Range<usize> {
        let s = self.r().end;
        s..s + 4 * self.units
    }

    /// Input weights of gate `g` (rows contiguous in row-major order).
    pub fn gate_w(&self, g: usize) -> Range<usize> {
        let s = self.w().start + g * self.units * self.in_dim;
        s..s + self.units * self.in_dim
    }

    pub fn gate_r(&self, g: usize) -> Range<usize> {
        let s = self.r().start + g * self.units * self.units;
        s..s + self.units * self.units
    }

    pub fn gate_b(&self, g: usize) -> Range<usize> {
        let s = self.b().start + g * self.units;
        s..s + self.units
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    /// `[layer][direction]`
    pub layers: Vec<Vec<DirectionLayout>>,
    pub readout_in: usize,
    pub readout_offset: usize,
    pub total: usize,
}

impl Layout {
    pub fn new(spec: &NetworkSpec) -> Self {
        let mut offset = 0;
        let mut in_dim = spec.input_dim;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for l in &spec.layers {
            let dirs = l.kind.directions();
            let units = l.size / dirs;
            let mut v = Vec::with_capacity(dirs);
            for _ in 0..dirs {
                let d = DirectionLayout {
                    in_dim,
                    units,
                    offset,
                };
                offset += d.len();
                v.push(d);
            }
            layers.push(v);
            in_dim = units * dirs;
        }
        Self {
            layers,
            readout_in: in_dim,
            readout_offset: offset,
            total: offset + in_dim + 1,
        }
    }

    pub fn readout_w(&self) -> Range<usize> {
        self.readout_offset..self.readout_offset + self.readout_in
    }

    pub fn readout_b(&self) -> usize {
        self.readout_offset + self.readout_in
    }

    /// Ranges holding biases (zero at initialisation).
    fn bias_ranges(&self) -> Vec<Range<usize>> {
        let mut v: Vec<Range<usize>> = self.layers.iter().flatten().map(|d| d.b()).collect();
        v.push(self.readout_b()..self.readout_b() + 1);
        v
    }
}

/// Every weight and bias of a network, flat. See [`Layout`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub values: Vec<f64>,
}

impl NetworkParams {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        Self {
            values: vec![0.0; Layout::new(spec).total],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Weights uniform in [−0.1, 0.1] from a ChaCha8 stream keyed by `seed`;
/// biases zero.
pub fn init_network(spec: &NetworkSpec, seed: u64) -> Result<NetworkParams, NetError> {
    spec.validate()?;
    let layout = Layout::new(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values: Vec<f64> = (0..layout.total).map(|_| rng.gen_range(-0.1..=0.1)).collect();
    for r in layout.bias_ranges() {
        values[r].iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(NetworkParams { values })
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out += M x` for row-major `M` of shape `out.len() × x.len()`.
#[inline]
fn matvec_add(out: &mut [f64], m: &[f64], x: &[f64]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += Mᵀ v` for row-major `M` of shape `v.len() × out.len()`.
#[inline]
fn matvec_t_add(out: &mut [f64], m: &[f64], v: &[f64]) {
    let cols = out.len();
    for (row, &s) in m.chunks_exact(cols).zip(v) {
        if s != 0.0 {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * s;
            }
        }
    }
}

/// `g += a xᵀ`.
#[inline]
fn outer_add(g: &mut [f64], a: &[f64], x: &[f64]) {
    let cols = x.len();
    for (row, &s) in g.chunks_exact_mut(cols).zip(a) {
        if s != 0.0 {
            for (o, b) in row.iter_mut().zip(x) {
                *o += s * b;
            }
        }
    }
}

/// Activations of one direction, indexed by absolute frame.
#[derive(Debug, Clone)]
struct DirectionCache {
    /// activated gates, T × 4u (i, f, o, g)
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    /// input to this layer, T × in
    input: Vec<f64>,
    dirs: Vec<DirectionCache>,
}

/// Predictions plus the activations needed for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub predictions: Vec<f64>,
    layers: Vec<LayerCache>,
    /// top hidden output, T × readout_in
    top: Vec<f64>,
}

fn run_direction(
    params: &[f64],
    d: &DirectionLayout,
    input: &[f64],
    frames: usize,
    reverse: bool,
) -> DirectionCache {
    let u = d.units;
    let w = &params[d.w()];
    let r = &params[d.r()];
    let b = &params[d.b()];
    let mut cache = DirectionCache {
        gates: vec![0.0; frames * 4 * u],
        c: vec![0.0; frames * u],
        tanh_c: vec![0.0; frames * u],
        h: vec![0.0; frames * u],
    };
    let zeros = vec![0.0; u];
    let mut prev: Option<usize> = None;
    let mut a = vec![0.0; 4 * u];
    for step in 0..frames {
        let t = if reverse { frames - 1 - step } else { step };
        a.copy_from_slice(b);
        matvec_add(&mut a, w, &input[t * d.in_dim..(t + 1) * d.in_dim]);
        let (h_prev, c_prev) = match prev {
            Some(p) => (&cache.h[p * u..(p + 1) * u], &cache.c[p * u..(p + 1) * u]),
            None => (&zeros[..], &zeros[..]),
        };
        matvec_add(&mut a, r, h_prev);
        let c_prev = c_prev.to_vec();
        let gates = &mut cache.gates[t * 4 * u..(t + 1) * 4 * u];
        for k in 0..3 * u {
            gates[k] = sigmoid(a[k]);
        }
        for k in 3 * u..4 * u {
            gates[k] = a[k].tanh();
        }
        for j in 0..u {
            let (i, f, o, g) = (gates[j], gates[u + j], gates[2 * u + j], gates[3 * u + j]);
            let c = f * c_prev[j] + i * g;
            let tc = c.tanh();
            cache.c[t * u + j] = c;
            cache.tanh_c[t * u + j] = tc;
            cache.h[t * u + j] = o * tc;
        }
        prev = Some(t);
    }
    cache
}

fn flatten_sequence(spec: &NetworkSpec, sequence: &[Vec<f64>]) -> Result<Vec<f64>, NetError> {
    if sequence.is_empty() {
        return Err(NetError::EmptySequence);
    }
    let mut flat = Vec::with_capacity(sequence.len() * spec.input_dim);
    for (t, row) in sequence.iter().enumerate() {
        if row.len() != spec.input_dim {
            return Err(NetError::WidthMismatch {
                expected: spec.input_dim,
                found: row.len(),
            });
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(NetError::NonFiniteInput(t));
        }
        flat.extend_from_slice(row);
    }
    Ok(flat)
}

/// Runs the network over `sequence` (frames × input_dim).
pub fn network_forward(
    spec: &NetworkSpec,
    params: &NetworkParams,
    sequence: &[Vec<f64>],
) -> Result<ForwardPass, NetError> {
    spec.validate()?;
    let layout = Layout::new(spec);
    if params.len() != layout.total {
        return Err(NetError::InvalidSpec(format!(
            "parameter vector has {} entries, network needs {}",
            params.len(),
            layout.total
        )));
    }
    let frames = sequence.len();
    let mut input = flatten_sequence(spec, sequence)?;
    let mut layers = Vec::with_capacity(layout.layers.len());
    for dirs in &layout.layers {
        let caches: Vec<DirectionCache> = dirs
            .iter()
            .enumerate()
            .map(|(k, d)| run_direction(&params.values, d, &input, frames, k == 1))
            .collect();
        let width: usize = dirs.iter().map(|d| d.units).sum();
        let mut out = vec![0.0; frames * width];
        for t in 0..frames {
            let mut col = 0;
            for (d, c) in dirs.iter().zip(&caches) {
                out[t * width + col..t * width + col + d.units]
                    .copy_from_slice(&c.h[t * d.units..(t + 1) * d.units]);
                col += d.units;
            }
        }
        layers.push(LayerCache {
            input: std::mem::replace(&mut input, out),
            dirs: caches,
        });
    }
    let top = input;
    let rw = &params.values[layout.readout_w()];
    let rb = params.values[layout.readout_b()];
    let predictions = top
        .chunks_exact(layout.readout_in)
        .map(|h| rb + h.iter().zip(rw).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    Ok(ForwardPass {
        predictions,
        layers,
        top,
    })
}

/// Per-frame predictions only.
pub fn predict(
    spec: &NetworkSpec,
    params: &NetworkParams,
    sequence: &[Vec<f64>],
) -> Result<Vec<f64>, NetError> {
    Ok(network_forward(spec, params, sequence)?.predictions)
}

fn backward_direction(
    params: &[f64],
    d: &DirectionLayout,
    cache: &DirectionCache,
    input: &[f64],
    dh_ext: &[f64],
    frames: usize,
    reverse: bool,
    grad: &mut [f64],
    dx: &mut [f64],
) {
    let u = d.units;
    let in_dim = d.in_dim;
    let w = &params[d.w()];
    let r = &params[d.r()];
    let (w0, r0, b0) = (d.w().start, d.r().start, d.b().start);
    let mut dh_next = vec![0.0; u];
    let mut dc_next = vec![0.0; u];
    let mut da = vec![0.0; 4 * u];
    let mut dh = vec![0.0; u];
    let zeros = vec![0.0; u];
    for step in (0..frames).rev() {
        let t = if reverse { frames - 1 - step } else { step };
        let prev = if step == 0 {
            None
        } else if reverse {
            Some(t + 1)
        } else {
            Some(t - 1)
        };
        let gates = &cache.gates[t * 4 * u..(t + 1) * 4 * u];
        let (h_prev, c_prev) = match prev {
            Some(p) => (&cache.h[p * u..(p + 1) * u], &cache.c[p * u..(p + 1) * u]),
            None => (&zeros[..], &zeros[..]),
        };
        for j in 0..u {
            dh[j] = dh_ext[t * u + j] + dh_next[j];
        }
        for j in 0..u {
            let (i, f, o, g) = (gates[j], gates[u + j], gates[2 * u + j], gates[3 * u + j]);
            let tc = cache.tanh_c[t * u + j];
            let d_o = dh[j] * tc;
            let dc = dh[j] * o * (1.0 - tc * tc) + dc_next[j];
            da[j] = dc * g * i * (1.0 - i);
            da[u + j] = dc * c_prev[j] * f * (1.0 - f);
            da[2 * u + j] = d_o * o * (1.0 - o);
            da[3 * u + j] = dc * i * (1.0 - g * g);
            dc_next[j] = dc * f;
        }
        let x = &input[t * in_dim..(t + 1) * in_dim];
        outer_add(&mut grad[w0..w0 + 4 * u * in_dim], &da, x);
        outer_add(&mut grad[r0..r0 + 4 * u * u], &da, h_prev);
        for (g, a) in grad[b0..b0 + 4 * u].iter_mut().zip(&da) {
            *g += a;
        }
        matvec_t_add(&mut dx[t * in_dim..(t + 1) * in_dim], w, &da);
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        matvec_t_add(&mut dh_next, r, &da);
    }
}

/// Backpropagates `d_pred` (∂loss/∂prediction per frame) through a cached
/// forward pass, accumulating into `grad`.
fn backward(
    spec: &NetworkSpec,
    params: &NetworkParams,
    pass: &ForwardPass,
    d_pred: &[f64],
    grad: &mut [f64],
) {
    let layout = Layout::new(spec);
    let frames = d_pred.len();
    let rw = &params.values[layout.readout_w()];
    let rw_range = layout.readout_w();
    let mut d_top = vec![0.0; frames * layout.readout_in];
    for t in 0..frames {
        let dy = d_pred[t];
        let h = &pass.top[t * layout.readout_in..(t + 1) * layout.readout_in];
        for (g, hv) in grad[rw_range.clone()].iter_mut().zip(h) {
            *g += dy * hv;
        }
        grad[layout.readout_b()] += dy;
        for (dh, w) in d_top[t * layout.readout_in..(t + 1) * layout.readout_in]
            .iter_mut()
            .zip(rw)
        {
            *dh = dy * w;
        }
    }
    let mut d_out = d_top;
    for (l, dirs) in layout.layers.iter().enumerate().rev() {
        let cache = &pass.layers[l];
        let width: usize = dirs.iter().map(|d| d.units).sum();
        let in_dim = dirs[0].in_dim;
        let mut dx = vec![0.0; frames * in_dim];
        let mut col = 0;
        for (k, d) in dirs.iter().enumerate() {
            // split the concatenated output gradient per direction
            let mut dh_ext = vec![0.0; frames * d.units];
            for t in 0..frames {
                dh_ext[t * d.units..(t + 1) * d.units]
                    .copy_from_slice(&d_out[t * width + col..t * width + col + d.units]);
            }
            backward_direction(
                &params.values,
                d,
                &cache.dirs[k],
                &cache.input,
                &dh_ext,
                frames,
                k == 1,
                grad,
                &mut dx,
            );
            col += d.units;
        }
        d_out = dx;
    }
}

/// SSE loss `Σ (ŷ − y)²` and its exact gradient with respect to every
/// parameter (full-sequence backpropagation through time).
pub fn bptt_gradients(
    spec: &NetworkSpec,
    params: &NetworkParams,
    sequence: &[Vec<f64>],
    targets: &[f64],
) -> Result<(Vec<f64>, f64), NetError> {
    let mut grad = vec![0.0; params.len()];
    let loss = accumulate_gradients(spec, params, sequence, targets, &mut grad)?;
    Ok((grad, loss))
}

/// Like [`bptt_gradients`] but adds into an existing gradient buffer.
pub fn accumulate_gradients(
    spec: &NetworkSpec,
    params: &NetworkParams,
    sequence: &[Vec<f64>],
    targets: &[f64],
    grad: &mut [f64],
) -> Result<f64, NetError> {
    if sequence.len() != targets.len() {
        return Err(NetError::LengthMismatch {
            frames: sequence.len(),
            targets: targets.len(),
        });
    }
    let pass = network_forward(spec, params, sequence)?;
    let mut loss = 0.0;
    let d_pred: Vec<f64> = pass
        .predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| {
            let e = p - y;
            loss += e * e;
            2.0 * e
        })
        .collect();
    backward(spec, params, &pass, &d_pred, grad);
    Ok(loss)
}

/// SSE of the network on one sequence (no gradient).
pub fn sequence_sse(
    spec: &NetworkSpec,
    params: &NetworkParams,
    sequence: &[Vec<f64>],
    targets: &[f64],
) -> Result<f64, NetError> {
    if sequence.len() != targets.len() {
        return Err(NetError::LengthMismatch {
            frames: sequence.len(),
            targets: targets.len(),
        });
    }
    let p = predict(spec, params, sequence)?;
    Ok(p.iter().zip(targets).map(|(a, b)| (a - b) * (a - b)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_sequence(frames: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..frames)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn spec_validation() {
        assert!(NetworkSpec::uniform(LayerKind::Blstm, 3, &[5]).validate().is_err());
        assert!(NetworkSpec::uniform(LayerKind::Lstm, 3, &[]).validate().is_err());
        assert!(NetworkSpec::uniform(LayerKind::Lstm, 0, &[2]).validate().is_err());
        assert!(NetworkSpec::default_blstm(119).validate().is_ok());
        assert!(NetworkSpec::default_lstm(119).validate().is_ok());
    }

    #[test]
    fn init_is_deterministic_and_seed_dependent() {
        let spec = NetworkSpec::uniform(LayerKind::Blstm, 4, &[8, 6]);
        let a = init_network(&spec, 1787452436).unwrap();
        let b = init_network(&spec, 1787452436).unwrap();
        let c = init_network(&spec, 123456789).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.values.iter().all(|v| (-0.1..=0.1).contains(v)));
        let layout = Layout::new(&spec);
        for d in layout.layers.iter().flatten() {
            assert!(a.values[d.b()].iter().all(|&v| v == 0.0));
        }
        assert_eq!(a.values[layout.readout_b()], 0.0);
    }

    #[test]
    fn blstm_split_rule() {
        let spec = NetworkSpec::uniform(LayerKind::Blstm, 10, &[40]);
        let layout = Layout::new(&spec);
        assert_eq!(layout.layers[0].len(), 2);
        assert!(layout.layers[0].iter().all(|d| d.units == 20));
        assert_eq!(layout.readout_in, 40);
    }

    #[test]
    fn zero_weights_predict_zero() {
        let spec = NetworkSpec::uniform(LayerKind::Blstm, 3, &[4, 2]);
        let params = NetworkParams::zeros(&spec);
        let p = predict(&spec, &params, &random_sequence(12, 3, 1)).unwrap();
        assert_eq!(p, vec![0.0; 12]);
    }

    #[test]
    fn width_mismatch_is_reported() {
        let spec = NetworkSpec::uniform(LayerKind::Lstm, 3, &[4]);
        let params = init_network(&spec, 1).unwrap();
        let err = predict(&spec, &params, &random_sequence(5, 2, 1)).unwrap_err();
        assert!(matches!(err, NetError::WidthMismatch { expected: 3, found: 2 }));
    }

    #[test]
    fn lstm_is_causal_blstm_is_not() {
        let seq = random_sequence(15, 3, 7);
        let lstm = NetworkSpec::uniform(LayerKind::Lstm, 3, &[6]);
        let p = init_network(&lstm, 3).unwrap();
        let base = predict(&lstm, &p, &seq).unwrap();
        let mut altered = seq.clone();
        altered[10] = vec![5.0, -5.0, 5.0];
        let after = predict(&lstm, &p, &altered).unwrap();
        assert_eq!(&base[..10], &after[..10]);
        assert_ne!(base[10], after[10]);

        // reversing the input does not reverse the output
        let rev: Vec<Vec<f64>> = seq.iter().rev().cloned().collect();
        let mut out_rev = predict(&lstm, &p, &rev).unwrap();
        out_rev.reverse();
        assert!(base.iter().zip(&out_rev).any(|(a, b)| (a - b).abs() > 1e-9));

        let blstm = NetworkSpec::uniform(LayerKind::Blstm, 3, &[6]);
        let q = init_network(&blstm, 3).unwrap();
        let base = predict(&blstm, &q, &seq).unwrap();
        let after = predict(&blstm, &q, &altered).unwrap();
        assert_ne!(base[0], after[0]);
    }

    /// One frame through a single-direction cell, written out by hand.
    fn one_step_cell(params: &[f64], d: &DirectionLayout, x: &[f64]) -> Vec<f64> {
        let u = d.units;
        (0..u)
            .map(|j| {
                let pre = |g: usize| {
                    let w = &params[d.gate_w(g)][j * d.in_dim..(j + 1) * d.in_dim];
                    params[d.gate_b(g)][j] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                };
                let i = sigmoid(pre(0));
                let o = sigmoid(pre(2));
                let g = pre(3).tanh();
                o * (i * g).tanh()
            })
            .collect()
    }

    #[test]
    fn single_frame_blstm_matches_hand_walked_cells() {
        let spec = NetworkSpec::uniform(LayerKind::Blstm, 3, &[4]);
        let mut params = init_network(&spec, 11).unwrap();
        let layout = Layout::new(&spec);
        for d in &layout.layers[0] {
            for (k, v) in params.values[d.b()].iter_mut().enumerate() {
                *v = 0.05 * k as f64 - 0.2;
            }
        }
        let x = vec![0.3, -0.8, 0.5];
        let pass = network_forward(&spec, &params, std::slice::from_ref(&x)).unwrap();
        let fwd = one_step_cell(&params.values, &layout.layers[0][0], &x);
        let bwd = one_step_cell(&params.values, &layout.layers[0][1], &x);
        let h: Vec<f64> = fwd.iter().chain(&bwd).copied().collect();
        let rw = &params.values[layout.readout_w()];
        let expected = params.values[layout.readout_b()]
            + h.iter().zip(rw).map(|(a, b)| a * b).sum::<f64>();
        assert!((pass.predictions[0] - expected).abs() < 1e-15);

        // a unidirectional net holding the forward block alone sees the same frame
        let lstm = NetworkSpec::uniform(LayerKind::Lstm, 3, &[2]);
        let ll = Layout::new(&lstm);
        let mut lp = NetworkParams::zeros(&lstm);
        lp.values[ll.layers[0][0].range()]
            .copy_from_slice(&params.values[layout.layers[0][0].range()]);
        lp.values[ll.readout_w()].copy_from_slice(&rw[..2]);
        let lstm_out = predict(&lstm, &lp, &[x]).unwrap();
        let fwd_part: f64 = fwd.iter().zip(&rw[..2]).map(|(a, b)| a * b).sum();
        assert!((lstm_out[0] - fwd_part).abs() < 1e-15);
    }

    #[test]
    fn perfect_predictions_have_zero_loss_and_gradient() {
        let spec = NetworkSpec::uniform(LayerKind::Lstm, 2, &[3]);
        let params = init_network(&spec, 5).unwrap();
        let seq = random_sequence(9, 2, 5);
        let targets = predict(&spec, &params, &seq).unwrap();
        let (g, loss) = bptt_gradients(&spec, &params, &seq, &targets).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
        assert!(matches!(
            bptt_gradients(&spec, &params, &seq, &targets[1..]),
            Err(NetError::LengthMismatch { .. })
        ));
    }
}
