use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{bptt_gradients, predict, Layout, NetError, NetworkParams, NetworkSpec};

/// Analytic-vs-numeric gradient comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// max over parameters of |g_a − g_n| / max(|g_a|, |g_n|, 1e-8)
    pub max_relative_error: f64,
    pub worst_parameter: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub n_parameters: usize,
    pub passed: bool,
}

const REL_FLOOR: f64 = 1e-8;

/// Compares BPTT gradients against central differences with step `h` for
/// every parameter.
pub fn gradient_check_on(
    spec: &NetworkSpec,
    params: &NetworkParams,
    sequence: &[Vec<f64>],
    targets: &[f64],
    h: f64,
    tolerance: f64,
) -> Result<GradCheckReport, NetError> {
    let (analytic, _) = bptt_gradients(spec, params, sequence, targets)?;
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_parameter: 0,
        analytic: 0.0,
        numeric: 0.0,
        n_parameters: params.len(),
        passed: true,
    };
    for (i, &ga) in analytic.iter().enumerate() {
        let orig = probe.values[i];
        probe.values[i] = orig + h;
        let plus = predict(spec, &probe, sequence)?;
        probe.values[i] = orig - h;
        let minus = predict(spec, &probe, sequence)?;
        probe.values[i] = orig;
        // SSE(+) − SSE(−) summed per frame as (ŷ⁺ − ŷ⁻)(ŷ⁺ + ŷ⁻ − 2y), which
        // avoids cancelling two large loss totals
        let diff: f64 = plus
            .iter()
            .zip(&minus)
            .zip(targets)
            .map(|((p, m), y)| (p - m) * (p + m - 2.0 * y))
            .sum();
        let gn = diff / (2.0 * h);
        let rel = (ga - gn).abs() / ga.abs().max(gn.abs()).max(REL_FLOOR);
        if rel > report.max_relative_error {
            report.max_relative_error = rel;
            report.worst_parameter = i;
            report.analytic = ga;
            report.numeric = gn;
        }
    }
    report.passed = report.max_relative_error < tolerance;
    Ok(report)
}

/// Half-width of the uniform parameter draw used by [`gradient_check`].
pub const CHECK_PARAM_SCALE: f64 = 1.5;

/// Gradient check with h = 1e-5 on seeded random data: every parameter
/// (biases included) uniform in ±[`CHECK_PARAM_SCALE`], inputs in [−1, 1],
/// targets in [−0.5, 0.5].
pub fn gradient_check(
    spec: &NetworkSpec,
    seed: u64,
    frames: usize,
    tolerance: f64,
) -> Result<GradCheckReport, NetError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(7);
    let params = NetworkParams {
        values: (0..Layout::new(spec).total)
            .map(|_| rng.gen_range(-CHECK_PARAM_SCALE..CHECK_PARAM_SCALE))
            .collect(),
    };
    let sequence: Vec<Vec<f64>> = (0..frames)
        .map(|_| (0..spec.input_dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let targets: Vec<f64> = (0..frames).map(|_| rng.gen_range(-0.5..0.5)).collect();
    gradient_check_on(spec, &params, &sequence, &targets, 1e-5, tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::LayerKind;

    #[test]
    fn lstm_and_blstm_pass() {
        for kind in [LayerKind::Lstm, LayerKind::Blstm] {
            let spec = NetworkSpec::uniform(kind, 5, &[8, 6]);
            let r = gradient_check(&spec, 42, 20, 1e-4).unwrap();
            assert!(r.passed, "{kind}: {r:?}");
        }
    }

    #[test]
    fn many_seeds() {
        for seed in 0..10u64 {
            for kind in [LayerKind::Lstm, LayerKind::Blstm] {
                let spec = NetworkSpec::uniform(kind, 5, &[8, 6]);
                let r = gradient_check(&spec, seed, 20 + 30 * seed as usize / 9, 1e-4).unwrap();
                assert!(r.passed, "{kind} seed {seed}: {r:?}");
            }
        }
    }

    #[test]
    fn zero_network_is_defined() {
        let spec = NetworkSpec::uniform(LayerKind::Blstm, 3, &[4]);
        let params = NetworkParams::zeros(&spec);
        let seq = vec![vec![0.2, -0.1, 0.4]; 6];
        let r = gradient_check_on(&spec, &params, &seq, &[0.0; 6], 1e-5, 1e-4).unwrap();
        assert!(r.max_relative_error.is_finite());
        assert!(r.passed);
    }
}
