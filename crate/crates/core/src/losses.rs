//! Joint detection loss: binary cross entropy for classification plus
//! smooth-L1 regression gated on positive samples, with analytic
//! gradients and a standard center/size box-offset encoding.

use alloc::string::String;
use alloc::vec::Vec;

use crate::geom::BBox;
use crate::{Error, Result};

/// Probabilities are clamped into `[PROB_EPSILON, 1 - PROB_EPSILON]`
/// before any logarithm.
pub const PROB_EPSILON: f64 = 1e-12;

/// Smooth L1: `0.5 x^2` for `|x| < 1`, `|x| - 0.5` otherwise.
pub fn smooth_l1(x: f64) -> f64 {
    let a = libm::fabs(x);
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

/// Derivative of [`smooth_l1`]; continuous everywhere (both pieces give
/// +-1 at |x| = 1).
pub fn smooth_l1_grad(x: f64) -> f64 {
    if libm::fabs(x) < 1.0 {
        x
    } else if x > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Binary cross entropy `-[p ln p' + (1-p) ln(1-p')]` with the true label
/// as `p` and epsilon-clamped `p'`.
pub fn binary_cross_entropy(true_label: bool, predicted_prob: f64) -> Result<f64> {
    if !(predicted_prob >= 0.0 && predicted_prob <= 1.0) {
        return Err(Error::InvalidProbability(predicted_prob));
    }
    let p = predicted_prob.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
    Ok(if true_label {
        -libm::log(p)
    } else {
        -libm::log(1.0 - p)
    })
}

/// Loss weights and normalizers. The paper's weights are 8.3 for the RPN
/// and 12.5 for the detector; the normalizers default to 1 and are
/// usually set to the sample count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda_rpn: f64,
    pub lambda_det: f64,
    pub n_cls: usize,
    pub n_reg: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_rpn: 8.3,
            lambda_det: 12.5,
            n_cls: 1,
            n_reg: 1,
        }
    }
}

impl LossConfig {
    /// Normalizers set to the sample count.
    pub fn for_sample_count(n: usize) -> Self {
        Self {
            n_cls: n.max(1),
            n_reg: n.max(1),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let msg = if !(self.lambda_rpn.is_finite() && self.lambda_rpn > 0.0) {
            Some("lambda_rpn must be positive")
        } else if !(self.lambda_det.is_finite() && self.lambda_det > 0.0) {
            Some("lambda_det must be positive")
        } else if self.n_cls == 0 || self.n_reg == 0 {
            Some("normalizers must be at least 1")
        } else {
            None
        };
        match msg {
            Some(m) => Err(Error::InvalidLossConfig(String::from(m))),
            None => Ok(()),
        }
    }
}

/// Predicted box offsets and their regression targets, both already
/// encoded as 4-vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionTarget {
    pub offsets: [f64; 4],
    pub targets: [f64; 4],
}

impl RegressionTarget {
    pub fn residuals(&self) -> [f64; 4] {
        [
            self.offsets[0] - self.targets[0],
            self.offsets[1] - self.targets[1],
            self.offsets[2] - self.targets[2],
            self.offsets[3] - self.targets[3],
        ]
    }

    fn is_finite(&self) -> bool {
        self.offsets.iter().chain(&self.targets).all(|v| v.is_finite())
    }
}

/// One training sample for the joint loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSample {
    pub true_label: bool,
    pub predicted_prob: f64,
    pub regression: RegressionTarget,
}

fn validate_samples(samples: &[LossSample], lambda: f64) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("loss samples"));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidLossConfig(String::from(
            "lambda must be finite and non-negative",
        )));
    }
    for s in samples {
        if !(s.predicted_prob >= 0.0 && s.predicted_prob <= 1.0) {
            return Err(Error::InvalidProbability(s.predicted_prob));
        }
        if !s.regression.is_finite() {
            return Err(Error::NonFinite {
                what: "regression offsets",
            });
        }
    }
    Ok(())
}

/// Joint loss `(1/n_cls) sum L_cls + lambda (1/n_reg) sum p_i L_reg`,
/// where the label gate `p_i` zeroes regression for negative samples and
/// `L_reg` is element-wise smooth L1 over the four offset residuals.
pub fn joint_loss(samples: &[LossSample], config: &LossConfig, lambda: f64) -> Result<f64> {
    config.validate()?;
    validate_samples(samples, lambda)?;

    let mut cls = 0.0;
    let mut reg = 0.0;
    for s in samples {
        cls += binary_cross_entropy(s.true_label, s.predicted_prob)?;
        if s.true_label {
            reg += s.regression.residuals().iter().map(|&r| smooth_l1(r)).sum::<f64>();
        }
    }
    Ok(cls / config.n_cls as f64 + lambda * reg / config.n_reg as f64)
}

/// Partial derivatives of [`joint_loss`] for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleGradient {
    pub d_predicted_prob: f64,
    pub d_offsets: [f64; 4],
}

/// Analytic gradient of [`joint_loss`] with respect to every predicted
/// probability and offset component. Evaluation exactly at a smooth-L1
/// kink (|residual| == 1) is rejected rather than silently smoothed;
/// probabilities inside the epsilon clamp region get zero slope.
pub fn joint_loss_gradient(
    samples: &[LossSample],
    config: &LossConfig,
    lambda: f64,
) -> Result<Vec<SampleGradient>> {
    config.validate()?;
    validate_samples(samples, lambda)?;

    for (i, s) in samples.iter().enumerate() {
        if s.true_label {
            for (j, r) in s.regression.residuals().iter().enumerate() {
                if libm::fabs(*r) == 1.0 {
                    return Err(Error::GradientAtKink {
                        sample: i,
                        component: j,
                    });
                }
            }
        }
    }

    let n_cls = config.n_cls as f64;
    let n_reg = config.n_reg as f64;
    Ok(samples
        .iter()
        .map(|s| {
            let p = s.predicted_prob;
            let clamped = p > PROB_EPSILON && p < 1.0 - PROB_EPSILON;
            let d_predicted_prob = if !clamped {
                0.0
            } else if s.true_label {
                -1.0 / p / n_cls
            } else {
                1.0 / (1.0 - p) / n_cls
            };
            let mut d_offsets = [0.0; 4];
            if s.true_label {
                for (j, r) in s.regression.residuals().iter().enumerate() {
                    d_offsets[j] = lambda * smooth_l1_grad(*r) / n_reg;
                }
            }
            SampleGradient {
                d_predicted_prob,
                d_offsets,
            }
        })
        .collect())
}

/// Standard center/size offset encoding of `target` relative to `anchor`:
/// `((tx-ax)/aw, (ty-ay)/ah, ln(tw/aw), ln(th/ah))`.
pub fn encode_box_offsets(anchor: &BBox, target: &BBox) -> [f64; 4] {
    let (acx, acy) = anchor.center();
    let (tcx, tcy) = target.center();
    [
        (tcx - acx) / anchor.width(),
        (tcy - acy) / anchor.height(),
        libm::log(target.width() / anchor.width()),
        libm::log(target.height() / anchor.height()),
    ]
}

/// Inverse of [`encode_box_offsets`].
pub fn decode_box_offsets(anchor: &BBox, offsets: [f64; 4]) -> Result<BBox> {
    let (acx, acy) = anchor.center();
    let cx = acx + offsets[0] * anchor.width();
    let cy = acy + offsets[1] * anchor.height();
    let w = anchor.width() * libm::exp(offsets[2]);
    let h = anchor.height() * libm::exp(offsets[3]);
    BBox::centered(cx, cy, w, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_regression() -> RegressionTarget {
        RegressionTarget {
            offsets: [0.0; 4],
            targets: [0.0; 4],
        }
    }

    #[test]
    fn smooth_l1_values() {
        assert_eq!(smooth_l1(0.0), 0.0);
        assert_eq!(smooth_l1(0.5), 0.125);
        assert_eq!(smooth_l1(2.0), 1.5);
        assert_eq!(smooth_l1(-2.0), 1.5);
        // Continuous and C1 at the kink.
        assert_eq!(smooth_l1(1.0), 0.5);
        assert_eq!(smooth_l1_grad(1.0), 1.0);
        assert_eq!(smooth_l1_grad(-1.0), -1.0);
    }

    #[test]
    fn smooth_l1_grad_values() {
        assert_eq!(smooth_l1_grad(0.0), 0.0);
        assert_eq!(smooth_l1_grad(0.5), 0.5);
        assert_eq!(smooth_l1_grad(2.0), 1.0);
    }

    #[test]
    fn bce_values() {
        assert!(binary_cross_entropy(true, 1.0).unwrap() < 1e-11);
        let ln2 = core::f64::consts::LN_2;
        assert!((binary_cross_entropy(true, 0.5).unwrap() - ln2).abs() < 1e-12);
        assert!((binary_cross_entropy(false, 0.5).unwrap() - ln2).abs() < 1e-12);
        assert!(binary_cross_entropy(true, 1.5).is_err());
    }

    #[test]
    fn joint_loss_worked_example() {
        let sample = LossSample {
            true_label: true,
            predicted_prob: 0.5,
            regression: RegressionTarget {
                offsets: [0.5, 0.0, 0.0, 0.0],
                targets: [0.0; 4],
            },
        };
        let config = LossConfig::default();
        let loss = joint_loss(&[sample], &config, 8.3).unwrap();
        let expected = core::f64::consts::LN_2 + 8.3 * 0.125;
        assert!((loss - expected).abs() < 1e-9);
        assert!((loss - 1.73065).abs() < 1e-5);
    }

    #[test]
    fn negatives_contribute_no_regression() {
        let samples: Vec<LossSample> = (0..5)
            .map(|i| LossSample {
                true_label: false,
                predicted_prob: 0.1 * (i + 1) as f64,
                regression: RegressionTarget {
                    offsets: [3.0, -2.0, 0.7, 0.1],
                    targets: [0.0; 4],
                },
            })
            .collect();
        let config = LossConfig::default();
        let with = joint_loss(&samples, &config, 8.3).unwrap();
        let without = joint_loss(&samples, &config, 0.0).unwrap();
        assert_eq!(with, without);
        for g in joint_loss_gradient(&samples, &config, 8.3).unwrap() {
            assert_eq!(g.d_offsets, [0.0; 4]);
        }
    }

    #[test]
    fn perfect_prediction_has_negligible_loss() {
        let sample = LossSample {
            true_label: true,
            predicted_prob: 1.0,
            regression: zero_regression(),
        };
        assert!(joint_loss(&[sample], &LossConfig::default(), 8.3).unwrap() < 1e-11);
    }

    #[test]
    fn gradient_at_kink_is_flagged() {
        let sample = LossSample {
            true_label: true,
            predicted_prob: 0.5,
            regression: RegressionTarget {
                offsets: [1.0, 0.0, 0.0, 0.0],
                targets: [0.0; 4],
            },
        };
        let err = joint_loss_gradient(&[sample], &LossConfig::default(), 8.3).unwrap_err();
        assert_eq!(err, Error::GradientAtKink { sample: 0, component: 0 });
    }

    #[test]
    fn lambda_scales_only_the_regression_term() {
        let sample = LossSample {
            true_label: true,
            predicted_prob: 0.7,
            regression: RegressionTarget {
                offsets: [0.4, -0.2, 1.5, 0.0],
                targets: [0.0; 4],
            },
        };
        let config = LossConfig::default();
        let at = |l: f64| joint_loss(&[sample], &config, l).unwrap();
        let base = at(0.0);
        let unit = at(1.0) - base;
        for c in [0.5, 2.0, 8.3, 12.5] {
            assert!((at(c) - base - c * unit).abs() < 1e-12);
        }
    }

    #[test]
    fn offsets_round_trip() {
        let anchor = BBox::new(100.0, 120.0, 260.0, 220.0).unwrap();
        let target = BBox::new(90.0, 140.0, 310.0, 230.0).unwrap();
        let decoded = decode_box_offsets(&anchor, encode_box_offsets(&anchor, &target)).unwrap();
        assert!((decoded.x1() - target.x1()).abs() < 1e-9);
        assert!((decoded.y1() - target.y1()).abs() < 1e-9);
        assert!((decoded.x2() - target.x2()).abs() < 1e-9);
        assert!((decoded.y2() - target.y2()).abs() < 1e-9);
    }
}
