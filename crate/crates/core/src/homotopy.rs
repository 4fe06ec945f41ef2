//! The homotopy maps: activation homotopies (h-ReLU, h-sigmoid), the
//! brightness data homotopy, and the explicit two-loss blend.
//!
//! Every map interpolates between an easy problem at lambda = 0 and the
//! target problem at lambda = 1, is affine in lambda for fixed input, and
//! reproduces its endpoints bit-exactly. All functions here are stateless
//! and safe for concurrent use.

use serde::{Deserialize, Serialize};

use crate::param_space::ParamVector;

/// Base activation for plain networks and for the activation homotopies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationBase {
    Relu,
    Sigmoid,
}

impl ActivationBase {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            ActivationBase::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            ActivationBase::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative of the base activation. relu'(0) is defined as 0.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            ActivationBase::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationBase::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Which homotopy is active for a model, plus its configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomotopySpec {
    pub kind: HomotopyKind,
    /// Brightness anchor: the constant image interpolated from at lambda = 0.
    pub baseline_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomotopyKind {
    HRelu,
    HSigmoid,
    HBrightness,
    LossBlend,
    None,
}

impl HomotopySpec {
    pub fn none() -> Self {
        HomotopySpec {
            kind: HomotopyKind::None,
            baseline_value: 0.0,
        }
    }

    pub fn new(kind: HomotopyKind) -> Self {
        HomotopySpec {
            kind,
            baseline_value: 0.0,
        }
    }
}

/// Elementwise activation homotopy: (1 - lambda) * z + lambda * act(z).
///
/// lambda = 0 is the identity map; lambda = 1 is the base activation, both
/// bit-exact.
#[inline]
pub fn h_activation(z: f64, lambda: f64, base: ActivationBase) -> f64 {
    if lambda == 0.0 {
        z
    } else if lambda == 1.0 {
        base.apply(z)
    } else {
        (1.0 - lambda) * z + lambda * base.apply(z)
    }
}

/// Partials of [`h_activation`]: (d/dz, d/dlambda).
///
/// d/dz = (1 - lambda) + lambda * act'(z); d/dlambda = act(z) - z.
#[inline]
pub fn h_activation_grad(z: f64, lambda: f64, base: ActivationBase) -> (f64, f64) {
    let dz = (1.0 - lambda) + lambda * base.derivative(z);
    let dl = base.apply(z) - z;
    (dz, dl)
}

/// Brightness data homotopy: (1 - lambda) * baseline + lambda * x.
///
/// lambda = 1 returns x bit-exactly; lambda = 0 returns the constant
/// baseline image.
#[inline]
pub fn h_brightness(x: f64, lambda: f64, baseline: f64) -> f64 {
    if lambda == 1.0 {
        x
    } else {
        (1.0 - lambda) * baseline + lambda * x
    }
}

/// d/dlambda of [`h_brightness`].
#[inline]
pub fn h_brightness_dlambda(x: f64, baseline: f64) -> f64 {
    x - baseline
}

/// A loss value with its parameter gradient, for the explicit loss blend.
#[derive(Debug, Clone)]
pub struct LossEval {
    pub value: f64,
    pub grad: ParamVector,
}

/// Explicit two-loss blend: lambda * hard + (1 - lambda) * easy.
///
/// Both losses must be evaluated at the same parameter vector. Returns the
/// blended loss, its parameter gradient, and the lambda-derivative
/// (hard - easy).
pub fn blended_loss(hard: &LossEval, easy: &LossEval, lambda: f64) -> (LossEval, f64) {
    debug_assert_eq!(hard.grad.len(), easy.grad.len());
    let value = if lambda == 0.0 {
        easy.value
    } else if lambda == 1.0 {
        hard.value
    } else {
        lambda * hard.value + (1.0 - lambda) * easy.value
    };
    let mut grad = hard.grad.scaled(lambda);
    grad.axpy(1.0 - lambda, &easy.grad);
    let d_lambda = hard.value - easy.value;
    (LossEval { value, grad }, d_lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::central_diff;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigmoid_at_zero_is_half() {
        assert_eq!(h_activation(0.0, 1.0, ActivationBase::Sigmoid), 0.5);
    }

    #[test]
    fn lambda_zero_is_identity() {
        assert_eq!(h_activation(-3.7, 0.0, ActivationBase::Relu), -3.7);
        assert_eq!(h_activation(-3.7, 0.0, ActivationBase::Sigmoid), -3.7);
    }

    #[test]
    fn relu_midpoint_interpolation() {
        assert_eq!(h_activation(2.0, 0.5, ActivationBase::Relu), 2.0);
        assert_eq!(h_activation(-2.0, 0.5, ActivationBase::Relu), -1.0);
    }

    #[test]
    fn activation_grad_at_zero_sigmoid() {
        let (dz, dl) = h_activation_grad(0.0, 1.0, ActivationBase::Sigmoid);
        assert!((dz - 0.25).abs() < 1e-15);
        assert!((dl - 0.5).abs() < 1e-15);
    }

    #[test]
    fn relu_identity_region_grad() {
        let (dz, _) = h_activation_grad(3.2, 0.0, ActivationBase::Relu);
        assert_eq!(dz, 1.0);
    }

    #[test]
    fn relu_derivative_at_zero_is_zero() {
        assert_eq!(ActivationBase::Relu.derivative(0.0), 0.0);
    }

    #[test]
    fn activation_partials_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for base in [ActivationBase::Relu, ActivationBase::Sigmoid] {
            for _ in 0..500 {
                let z: f64 = rng.random_range(-4.0..4.0);
                let lambda: f64 = rng.random_range(0.0..1.0);
                // Central differences straddle the relu kink when |z| < h.
                if base == ActivationBase::Relu && z.abs() < 1e-4 {
                    continue;
                }
                let (dz, dl) = h_activation_grad(z, lambda, base);
                let fd_dz = central_diff(|v| h_activation(v, lambda, base), z, 1e-6);
                let fd_dl = central_diff(|v| h_activation(z, v, base), lambda, 1e-6);
                let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-3);
                assert!(rel(dz, fd_dz) < 1e-5, "dz {dz} vs fd {fd_dz} at z={z}");
                assert!(rel(dl, fd_dl) < 1e-5, "dl {dl} vs fd {fd_dl} at z={z}");
            }
        }
    }

    #[test]
    fn brightness_endpoints_and_midpoint() {
        assert_eq!(h_brightness(0.2, 1.0, 0.0), 0.2);
        assert_eq!(h_brightness(0.8, 1.0, 0.0), 0.8);
        assert_eq!(h_brightness(0.2, 0.0, 0.0), 0.0);
        assert_eq!(h_brightness(0.4, 0.5, 0.0), 0.2);
    }

    #[test]
    fn blended_loss_endpoints_and_affine() {
        let hard = LossEval {
            value: 2.0,
            grad: ParamVector::new(vec![1.0, 0.0]),
        };
        let easy = LossEval {
            value: 0.5,
            grad: ParamVector::new(vec![0.0, 2.0]),
        };
        let (b0, _) = blended_loss(&hard, &easy, 0.0);
        assert_eq!(b0.value, 0.5);
        let (b1, _) = blended_loss(&hard, &easy, 1.0);
        assert_eq!(b1.value, 2.0);
        let (bq, dl) = blended_loss(&hard, &easy, 0.25);
        assert!((bq.value - 0.875).abs() < 1e-15);
        assert!((dl - 1.5).abs() < 1e-15);
        assert!((bq.grad[0] - 0.25).abs() < 1e-15);
        assert!((bq.grad[1] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn h_activation_affine_in_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let z: f64 = rng.random_range(-5.0..5.0);
            let l: f64 = rng.random_range(0.0..1.0);
            for base in [ActivationBase::Relu, ActivationBase::Sigmoid] {
                let direct = h_activation(z, l, base);
                let affine = z + l * (base.apply(z) - z);
                assert!((direct - affine).abs() < 1e-15);
            }
        }
    }
}
