//! Dense vector algebra over flattened parameter vectors and joint
//! (params, lambda) states.
//!
//! Continuation treats a network as a single point in R^m. This module owns
//! that representation: [`ParamVector`] for the flattened parameters,
//! [`HomotopyPoint`] for the joint state, and [`Secant`] for the normalized
//! direction between two accepted points. Everything here is pure value math
//! with no shared state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two points closer than this (joint distance) cannot define a secant.
pub const SECANT_TOL: f64 = 1e-12;

/// Flattened network parameters as one dense vector.
///
/// The length is fixed per model and never changes across operations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// self := self + c * other
    pub fn axpy(&mut self, c: f64, other: &ParamVector) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += c * b;
        }
    }

    pub fn scaled(&self, c: f64) -> ParamVector {
        ParamVector(self.0.iter().map(|v| c * v).collect())
    }

    pub fn add(&self, other: &ParamVector) -> ParamVector {
        debug_assert_eq!(self.len(), other.len());
        ParamVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &ParamVector) -> ParamVector {
        debug_assert_eq!(self.len(), other.len());
        ParamVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for ParamVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// A point on (or near) the solution path: joint state (params, lambda).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomotopyPoint {
    pub params: ParamVector,
    pub lambda: f64,
}

impl HomotopyPoint {
    pub fn new(params: ParamVector, lambda: f64) -> Self {
        HomotopyPoint { params, lambda }
    }

    /// Euclidean distance in joint (params, lambda) space.
    pub fn joint_distance(&self, other: &HomotopyPoint) -> f64 {
        let (dp, dl) = joint_diff(self, other).expect("dimension mismatch in joint_distance");
        joint_norm(&dp, dl)
    }
}

/// How the secant between two accepted points is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// Unit tangent in R^{m+1}: (dp, dl) / sqrt(|dp|^2 + dl^2). The default.
    #[default]
    Joint,
    /// Parameter and lambda components normalized separately:
    /// dp / |dp| and dl / |dl|. Provided for fidelity experiments.
    PaperLiteral,
}

/// Normalized direction between two consecutive accepted points. Defines the
/// predictor step and the corrector hyperplane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Secant {
    pub d_params: ParamVector,
    pub d_lambda: f64,
    pub mode: NormalizationMode,
}

impl Secant {
    pub fn joint_norm(&self) -> f64 {
        joint_norm(&self.d_params, self.d_lambda)
    }

    /// Inner product of (dp, dl) with this secant direction.
    pub fn project(&self, dp: &ParamVector, dl: f64) -> f64 {
        self.d_params.dot(dp) + self.d_lambda * dl
    }
}

/// sqrt(|dp|^2 + dl^2)
pub fn joint_norm(dp: &ParamVector, dl: f64) -> f64 {
    (dp.dot(dp) + dl * dl).sqrt()
}

/// Componentwise difference (a.params - b.params, a.lambda - b.lambda).
pub fn joint_diff(a: &HomotopyPoint, b: &HomotopyPoint) -> Result<(ParamVector, f64)> {
    if a.params.len() != b.params.len() {
        return Err(Error::DimensionMismatch {
            expected: a.params.len(),
            got: b.params.len(),
        });
    }
    Ok((a.params.sub(&b.params), a.lambda - b.lambda))
}

/// Secant direction from `prev` to `curr` under the given normalization mode.
///
/// Errors with [`Error::DegenerateSecant`] when the points are closer than
/// [`SECANT_TOL`] in joint distance.
pub fn secant_from(
    prev: &HomotopyPoint,
    curr: &HomotopyPoint,
    mode: NormalizationMode,
) -> Result<Secant> {
    let (dp, dl) = joint_diff(curr, prev)?;
    let joint = joint_norm(&dp, dl);
    if joint <= SECANT_TOL {
        return Err(Error::DegenerateSecant { distance: joint });
    }
    match mode {
        NormalizationMode::Joint => Ok(Secant {
            d_params: dp.scaled(1.0 / joint),
            d_lambda: dl / joint,
            mode,
        }),
        NormalizationMode::PaperLiteral => {
            let pnorm = dp.norm();
            let d_params = if pnorm > SECANT_TOL {
                dp.scaled(1.0 / pnorm)
            } else {
                ParamVector::zeros(dp.len())
            };
            let d_lambda = if dl.abs() > SECANT_TOL {
                dl / dl.abs()
            } else {
                0.0
            };
            Ok(Secant {
                d_params,
                d_lambda,
                mode,
            })
        }
    }
}

/// Per-layer parameters in their structured form: a row-major weight matrix
/// (out x in) and a bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major: weights[o * in_dim + i] multiplies input i into output o.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        LayerParams {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn param_count(&self) -> usize {
        self.in_dim * self.out_dim + self.out_dim
    }
}

/// Flattens structured per-layer parameters into one dense vector.
///
/// Ordering is deterministic: layer index ascending; within a layer, weights
/// row-major, then biases. Round-trips exactly with [`unflatten`].
pub fn flatten(layers: &[LayerParams]) -> ParamVector {
    assert!(!layers.is_empty(), "model must have at least one layer");
    let total: usize = layers.iter().map(|l| l.param_count()).sum();
    let mut out = Vec::with_capacity(total);
    for layer in layers {
        debug_assert_eq!(layer.weights.len(), layer.in_dim * layer.out_dim);
        debug_assert_eq!(layer.bias.len(), layer.out_dim);
        out.extend_from_slice(&layer.weights);
        out.extend_from_slice(&layer.bias);
    }
    ParamVector(out)
}

/// Inverse of [`flatten`] for the given layer shapes (in, out).
pub fn unflatten(v: &ParamVector, shapes: &[(usize, usize)]) -> Result<Vec<LayerParams>> {
    let expected: usize = shapes.iter().map(|&(i, o)| i * o + o).sum();
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: v.len(),
        });
    }
    let mut layers = Vec::with_capacity(shapes.len());
    let mut offset = 0;
    for &(in_dim, out_dim) in shapes {
        let w_len = in_dim * out_dim;
        let weights = v.as_slice()[offset..offset + w_len].to_vec();
        offset += w_len;
        let bias = v.as_slice()[offset..offset + out_dim].to_vec();
        offset += out_dim;
        layers.push(LayerParams {
            in_dim,
            out_dim,
            weights,
            bias,
        });
    }
    Ok(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn point(params: &[f64], lambda: f64) -> HomotopyPoint {
        HomotopyPoint::new(ParamVector::new(params.to_vec()), lambda)
    }

    #[test]
    fn flatten_orders_weights_then_bias() {
        let layer = LayerParams {
            in_dim: 2,
            out_dim: 2,
            weights: vec![1.0, 2.0, 3.0, 4.0],
            bias: vec![5.0, 6.0],
        };
        assert_eq!(
            flatten(&[layer]).as_slice(),
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
        );
    }

    #[test]
    fn flatten_degenerate_single_weight() {
        let layer = LayerParams {
            in_dim: 1,
            out_dim: 1,
            weights: vec![7.0],
            bias: vec![0.0],
        };
        assert_eq!(flatten(&[layer]).as_slice(), &[7.0, 0.0]);
    }

    #[test]
    fn joint_diff_componentwise() {
        let a = point(&[1.0, 1.0], 0.5);
        let b = point(&[0.0, 1.0], 0.3);
        let (dp, dl) = joint_diff(&a, &b).unwrap();
        assert_eq!(dp.as_slice(), &[1.0, 0.0]);
        assert!((dl - 0.2).abs() < 1e-15);
    }

    #[test]
    fn joint_diff_identity_is_zero() {
        let a = point(&[2.0, -3.0], 0.7);
        let (dp, dl) = joint_diff(&a, &a).unwrap();
        assert_eq!(dp.as_slice(), &[0.0, 0.0]);
        assert_eq!(dl, 0.0);
    }

    #[test]
    fn joint_diff_dimension_mismatch() {
        let a = point(&[1.0], 0.0);
        let b = point(&[1.0, 2.0], 0.0);
        assert!(matches!(
            joint_diff(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn secant_joint_is_three_four_five() {
        let prev = point(&[0.0], 0.0);
        let curr = point(&[3.0], 4.0);
        let s = secant_from(&prev, &curr, NormalizationMode::Joint).unwrap();
        assert!((s.d_params[0] - 0.6).abs() < 1e-15);
        assert!((s.d_lambda - 0.8).abs() < 1e-15);
        assert!((s.joint_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn secant_paper_literal_normalizes_separately() {
        let prev = point(&[0.0], 0.0);
        let curr = point(&[3.0], 4.0);
        let s = secant_from(&prev, &curr, NormalizationMode::PaperLiteral).unwrap();
        assert!((s.d_params[0] - 1.0).abs() < 1e-15);
        assert!((s.d_lambda - 1.0).abs() < 1e-15);
    }

    #[test]
    fn secant_degenerate_when_points_coincide() {
        let a = point(&[1.0, 2.0], 0.25);
        assert!(matches!(
            secant_from(&a, &a, NormalizationMode::Joint),
            Err(Error::DegenerateSecant { .. })
        ));
    }

    proptest! {
        #[test]
        fn flatten_unflatten_round_trip(values in proptest::collection::vec(-1e6f64..1e6, 100)) {
            // 100 params split as (4,10) + (10,5): 4*10+10 + 10*5+5 = 105... use shapes summing to 100:
            // (9,7)=70 params + (4,5)=25 params + (4,1)=5 params = 100.
            let shapes = [(9usize, 7usize), (4, 5), (4, 1)];
            let v = ParamVector::new(values);
            let layers = unflatten(&v, &shapes).unwrap();
            let back = flatten(&layers);
            prop_assert_eq!(back, v);
        }

        #[test]
        fn joint_diff_matches_euclidean_distance(
            a in proptest::collection::vec(-10.0f64..10.0, 8),
            b in proptest::collection::vec(-10.0f64..10.0, 8),
            la in -1.0f64..2.0,
            lb in -1.0f64..2.0,
        ) {
            let pa = point(&a, la);
            let pb = point(&b, lb);
            let (dp, dl) = joint_diff(&pa, &pb).unwrap();
            // brute-force norm in R^{m+1}
            let mut acc = 0.0;
            for i in 0..8 {
                acc += (a[i] - b[i]) * (a[i] - b[i]);
            }
            acc += (la - lb) * (la - lb);
            prop_assert!((joint_norm(&dp, dl) - acc.sqrt()).abs() < 1e-12);
        }

        #[test]
        fn joint_diff_antisymmetric(
            a in proptest::collection::vec(-10.0f64..10.0, 5),
            b in proptest::collection::vec(-10.0f64..10.0, 5),
            la in -1.0f64..2.0,
            lb in -1.0f64..2.0,
        ) {
            let pa = point(&a, la);
            let pb = point(&b, lb);
            let (dp_ab, dl_ab) = joint_diff(&pa, &pb).unwrap();
            let (dp_ba, dl_ba) = joint_diff(&pb, &pa).unwrap();
            for i in 0..5 {
                prop_assert_eq!(dp_ab[i], -dp_ba[i]);
            }
            prop_assert_eq!(dl_ab, -dl_ba);
        }

        #[test]
        fn secant_joint_mode_always_unit(
            a in proptest::collection::vec(-10.0f64..10.0, 6),
            dl in 0.1f64..2.0,
        ) {
            let pa = point(&a, 0.1);
            let mut b = a.clone();
            b[0] += 0.5;
            let pb = point(&b, 0.1 + dl);
            let s = secant_from(&pa, &pb, NormalizationMode::Joint).unwrap();
            prop_assert!((s.joint_norm() - 1.0).abs() < 1e-12);
        }
    }
}
