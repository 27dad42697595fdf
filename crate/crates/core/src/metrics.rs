//! Agreement metrics between predicted and gold-standard traces.
//!
//! All moments are population (1/N) moments.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {predicted} predictions vs {truth} ground-truth values")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("need at least 2 values, got {0}")]
    TooShort(usize),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

/// Denominators below this are treated as zero.
pub const DEGENERATE_EPS: f64 = 1e-12;

/// Machine predictions `x` paired with ground truth `y`.
#[derive(Debug, Clone, Copy)]
pub struct PredictionPair<'a> {
    x: &'a [f64],
    y: &'a [f64],
}

/// A correlation value plus whether it was defined by the degenerate rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub value: f64,
    pub degenerate: bool,
}

struct Moments {
    mean_x: f64,
    mean_y: f64,
    var_x: f64,
    var_y: f64,
    cov: f64,
}

impl<'a> PredictionPair<'a> {
    pub fn new(predicted: &'a [f64], truth: &'a [f64]) -> Result<Self, MetricError> {
        if predicted.len() != truth.len() {
            return Err(MetricError::LengthMismatch {
                predicted: predicted.len(),
                truth: truth.len(),
            });
        }
        if predicted.len() < 2 {
            return Err(MetricError::TooShort(predicted.len()));
        }
        if let Some(i) = predicted
            .iter()
            .zip(truth)
            .position(|(a, b)| !(a.is_finite() && b.is_finite()))
        {
            return Err(MetricError::NonFinite(i));
        }
        Ok(Self {
            x: predicted,
            y: truth,
        })
    }

    pub fn predicted(&self) -> &[f64] {
        self.x
    }

    pub fn truth(&self) -> &[f64] {
        self.y
    }

    fn moments(&self) -> Moments {
        let n = self.x.len() as f64;
        let mean_x = self.x.iter().sum::<f64>() / n;
        let mean_y = self.y.iter().sum::<f64>() / n;
        let (mut var_x, mut var_y, mut cov) = (0.0, 0.0, 0.0);
        for (a, b) in self.x.iter().zip(self.y) {
            let (dx, dy) = (a - mean_x, b - mean_y);
            var_x += dx * dx;
            var_y += dy * dy;
            cov += dx * dy;
        }
        Moments {
            mean_x,
            mean_y,
            var_x: var_x / n,
            var_y: var_y / n,
            cov: cov / n,
        }
    }

    /// Concordance correlation coefficient
    /// `2 σxy / (σx² + σy² + (μx − μy)²)`.
    pub fn ccc(&self) -> Correlation {
        let m = self.moments();
        let denom = m.var_x + m.var_y + (m.mean_x - m.mean_y).powi(2);
        if denom < DEGENERATE_EPS {
            return Correlation {
                value: 0.0,
                degenerate: true,
            };
        }
        Correlation {
            value: (2.0 * m.cov / denom).clamp(-1.0, 1.0),
            degenerate: false,
        }
    }

    pub fn pearson(&self) -> Correlation {
        let m = self.moments();
        let denom = (m.var_x * m.var_y).sqrt();
        if m.var_x < DEGENERATE_EPS || m.var_y < DEGENERATE_EPS || denom < DEGENERATE_EPS {
            return Correlation {
                value: 0.0,
                degenerate: true,
            };
        }
        Correlation {
            value: (m.cov / denom).clamp(-1.0, 1.0),
            degenerate: false,
        }
    }

    pub fn sse(&self) -> f64 {
        sse_unchecked(self.x, self.y)
    }
}

fn sse_unchecked(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// CCC of predictions `x` against truth `y`; 0 for a degenerate denominator.
pub fn ccc(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    Ok(PredictionPair::new(x, y)?.ccc().value)
}

/// Pearson correlation; 0 (flagged degenerate) when either series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation, MetricError> {
    Ok(PredictionPair::new(x, y)?.pearson())
}

/// Sum of squared errors. Only equal lengths are required.
pub fn sse(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch {
            predicted: x.len(),
            truth: y.len(),
        });
    }
    Ok(sse_unchecked(x, y))
}

/// `(candidate − baseline) / baseline`, e.g. fused over best unimodal CCC.
pub fn relative_improvement(candidate: f64, baseline: f64) -> f64 {
    (candidate - baseline) / baseline
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn ccc_examples() {
        let x = [0.1, 0.2, 0.3];
        assert_abs_diff_eq!(ccc(&x, &x).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(ccc(&[0.5, 0.5, 0.5], &[0.0, 0.5, 1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            ccc(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0]).unwrap(),
            5.0 / 7.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn ccc_errors_and_degenerate() {
        assert_eq!(
            ccc(&[1.0, 2.0], &[1.0]),
            Err(MetricError::LengthMismatch {
                predicted: 2,
                truth: 1
            })
        );
        assert_eq!(ccc(&[1.0], &[1.0]), Err(MetricError::TooShort(1)));
        let c = PredictionPair::new(&[0.3, 0.3], &[0.3, 0.3]).unwrap().ccc();
        assert!(c.degenerate);
        assert_eq!(c.value, 0.0);
    }

    #[test]
    fn pearson_examples() {
        let x = [0.3, -1.0, 2.0, 0.5];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(pearson(&x, &x).unwrap().value, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pearson(&x, &neg).unwrap().value, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            pearson(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0]).unwrap().value,
            1.0,
            epsilon = 1e-15
        );
        let d = pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn sse_examples() {
        assert_eq!(sse(&[0.4, 0.1], &[0.4, 0.1]).unwrap(), 0.0);
        assert_eq!(sse(&[1.0, 1.0], &[0.0, 2.0]).unwrap(), 2.0);
        assert!(sse(&[1.0], &[]).is_err());
        assert_eq!(sse(&[], &[]).unwrap(), 0.0);
    }

    #[test]
    fn relative_improvement_two_decimals() {
        let ar = relative_improvement(0.754, 0.742) * 100.0;
        let val = relative_improvement(0.277, 0.261) * 100.0;
        assert_eq!(format!("{ar:.2}"), "1.62");
        assert_eq!(format!("{val:.2}"), "6.13");
    }

    fn pair_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..60).prop_flat_map(|n| {
            (
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec(-5.0f64..5.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn ccc_bounded_by_pearson_and_symmetric((x, y) in pair_strategy()) {
            let c = ccc(&x, &y).unwrap();
            let r = pearson(&x, &y).unwrap().value;
            prop_assert!(c.abs() <= r.abs() + 1e-12);
            prop_assert!((c - ccc(&y, &x).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn ccc_self_is_one(x in prop::collection::vec(-5.0f64..5.0, 2..60)) {
            let spread = x.iter().cloned().fold(f64::MIN, f64::max) - x.iter().cloned().fold(f64::MAX, f64::min);
            prop_assume!(spread > 1e-3);
            prop_assert!((ccc(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn ccc_affine_invariant((x, y) in pair_strategy(), a in 0.1f64..10.0, b in -3.0f64..3.0) {
            let tx: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let ty: Vec<f64> = y.iter().map(|v| a * v + b).collect();
            prop_assert!((ccc(&x, &y).unwrap() - ccc(&tx, &ty).unwrap()).abs() < 1e-9);
        }
    }
}
