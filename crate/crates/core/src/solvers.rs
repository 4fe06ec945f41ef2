//! First-order optimizers (SGD, ADAM) used as the inner corrector for all
//! training modes.
//!
//! The solver state is single-owner and mutated in place; one instance per
//! run. Identical seeds, data order, and hyperparameters produce bit-identical
//! trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param_space::ParamVector;

/// ADAM hyperparameters. Defaults are the standard ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        AdamConfig {
            alpha,
            ..Default::default()
        }
    }
}

/// Bias-corrected ADAM moments for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: ParamVector,
    v: ParamVector,
    t: u64,
}

impl AdamState {
    pub fn new(dim: usize, config: AdamConfig) -> Self {
        AdamState {
            config,
            m: ParamVector::zeros(dim),
            v: ParamVector::zeros(dim),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One bias-corrected ADAM update, in place.
    pub fn step(&mut self, theta: &mut ParamVector, grad: &ParamVector) -> Result<()> {
        if grad.len() != theta.len() {
            return Err(Error::DimensionMismatch {
                expected: theta.len(),
                got: grad.len(),
            });
        }
        if !grad.all_finite() {
            return Err(Error::NumericalDivergence {
                context: "non-finite gradient passed to ADAM".into(),
            });
        }
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let (m, v) = (self.m.as_mut_slice(), self.v.as_mut_slice());
        let th = theta.as_mut_slice();
        let g = grad.as_slice();
        for i in 0..g.len() {
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            th[i] -= c.alpha * m_hat / (v_hat.sqrt() + c.epsilon);
        }
        Ok(())
    }
}

/// Convenience wrapper matching the classic signature: returns the updated
/// state and parameters.
pub fn adam_step(
    mut state: AdamState,
    theta: &ParamVector,
    grad: &ParamVector,
) -> Result<(AdamState, ParamVector)> {
    let mut theta = theta.clone();
    state.step(&mut theta, grad)?;
    Ok((state, theta))
}

/// Plain gradient step: theta - alpha * grad.
pub fn sgd_step(theta: &ParamVector, grad: &ParamVector, alpha: f64) -> ParamVector {
    debug_assert_eq!(theta.len(), grad.len());
    let mut out = theta.clone();
    out.axpy(-alpha, grad);
    out
}

/// Stopping rules for [`run_to_convergence`]. At least one must be set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCriteria {
    pub max_steps: Option<usize>,
    pub grad_norm_tol: Option<f64>,
    pub loss_delta_tol: Option<f64>,
}

impl ConvergenceCriteria {
    pub fn max_steps(n: usize) -> Self {
        ConvergenceCriteria {
            max_steps: Some(n),
            grad_norm_tol: None,
            loss_delta_tol: None,
        }
    }

    /// The corrector default: re-enter the basin, bounded cost per step.
    pub fn corrector_default() -> Self {
        ConvergenceCriteria {
            max_steps: Some(500),
            grad_norm_tol: Some(1e-4),
            loss_delta_tol: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps.is_none() && self.grad_norm_tol.is_none() && self.loss_delta_tol.is_none()
        {
            return Err(Error::Config(
                "convergence criteria must set at least one stopping rule".into(),
            ));
        }
        Ok(())
    }
}

/// Which stopping rule fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradNormTol,
    LossDeltaTol,
    BudgetExhausted,
}

/// Per-solve record: which criterion fired, how many gradient steps were
/// taken, and the losses seen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub steps: usize,
    pub stopped_by: StopReason,
    pub final_grad_norm: Option<f64>,
    pub initial_loss: Option<f64>,
    pub final_loss: Option<f64>,
}

/// Extra knobs for [`minimize`] beyond the public criteria.
#[derive(Debug, Clone, Copy, Default)]
pub struct MinimizeOptions {
    /// Clamp one coordinate into [lo, hi] after every update. Used to keep
    /// the continuation parameter inside its slack interval.
    pub clamp_coord: Option<(usize, f64, f64)>,
}

/// ADAM descent on a black-box objective until the first satisfied criterion.
///
/// The objective returns (loss, gradient) and may be stochastic; it is called
/// exactly once per gradient step.
pub fn run_to_convergence<F>(
    objective: F,
    theta0: ParamVector,
    adam: AdamConfig,
    criteria: ConvergenceCriteria,
) -> Result<(ParamVector, SolveDiagnostics)>
where
    F: FnMut(&ParamVector) -> Result<(f64, ParamVector)>,
{
    let dim = theta0.len();
    let mut state = AdamState::new(dim, adam);
    minimize(
        objective,
        theta0,
        &mut state,
        criteria,
        MinimizeOptions::default(),
    )
}

/// Core descent loop. Reuses the caller's ADAM state so moments can either be
/// reset or carried across continuation stages.
pub fn minimize<F>(
    mut objective: F,
    mut theta: ParamVector,
    state: &mut AdamState,
    criteria: ConvergenceCriteria,
    options: MinimizeOptions,
) -> Result<(ParamVector, SolveDiagnostics)>
where
    F: FnMut(&ParamVector) -> Result<(f64, ParamVector)>,
{
    criteria.validate()?;
    let max_steps = criteria.max_steps.unwrap_or(usize::MAX);
    let mut steps = 0;
    let mut initial_loss = None;
    let mut prev_loss: Option<f64> = None;
    let mut final_grad_norm = None;

    while steps < max_steps {
        let (loss, grad) = objective(&theta)?;
        if !loss.is_finite() {
            return Err(Error::NumericalDivergence {
                context: format!("loss became non-finite after {steps} steps"),
            });
        }
        let gnorm = grad.norm();
        final_grad_norm = Some(gnorm);
        if initial_loss.is_none() {
            initial_loss = Some(loss);
        }
        if let Some(tol) = criteria.grad_norm_tol {
            if gnorm <= tol {
                return Ok((
                    theta,
                    SolveDiagnostics {
                        steps,
                        stopped_by: StopReason::GradNormTol,
                        final_grad_norm,
                        initial_loss,
                        final_loss: Some(loss),
                    },
                ));
            }
        }
        if let (Some(tol), Some(prev)) = (criteria.loss_delta_tol, prev_loss) {
            if (prev - loss).abs() <= tol {
                return Ok((
                    theta,
                    SolveDiagnostics {
                        steps,
                        stopped_by: StopReason::LossDeltaTol,
                        final_grad_norm,
                        initial_loss,
                        final_loss: Some(loss),
                    },
                ));
            }
        }
        prev_loss = Some(loss);
        state.step(&mut theta, &grad)?;
        if let Some((i, lo, hi)) = options.clamp_coord {
            theta[i] = theta[i].clamp(lo, hi);
        }
        steps += 1;
    }
    Ok((
        theta,
        SolveDiagnostics {
            steps,
            stopped_by: StopReason::BudgetExhausted,
            final_grad_norm,
            initial_loss,
            final_loss: prev_loss,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut state = AdamState::new(3, AdamConfig::default());
        let mut theta = ParamVector::new(vec![1.0, -2.0, 0.5]);
        let before = theta.clone();
        state.step(&mut theta, &ParamVector::zeros(3)).unwrap();
        assert_eq!(theta, before);
    }

    #[test]
    fn first_step_is_signed_alpha() {
        // Hand-computed single ADAM step with defaults: m_hat = g, v_hat = g^2,
        // update = -alpha * g / (|g| + eps) ~= -alpha * sign(g).
        let cfg = AdamConfig::default();
        let mut state = AdamState::new(2, cfg);
        let mut theta = ParamVector::new(vec![0.0, 0.0]);
        let grad = ParamVector::new(vec![3.0, -0.25]);
        state.step(&mut theta, &grad).unwrap();
        assert!((theta[0] - (-cfg.alpha)).abs() < 1e-9);
        assert!((theta[1] - cfg.alpha).abs() < 1e-9);
    }

    #[test]
    fn sgd_step_examples() {
        let theta = ParamVector::new(vec![1.0, 2.0]);
        let g = ParamVector::new(vec![1.0, 1.0]);
        assert_eq!(sgd_step(&theta, &g, 0.5).as_slice(), &[0.5, 1.5]);
        assert_eq!(sgd_step(&theta, &g, 0.0).as_slice(), &[1.0, 2.0]);
        assert_eq!(
            sgd_step(&theta, &ParamVector::zeros(2), 0.7).as_slice(),
            &[1.0, 2.0]
        );
    }

    #[test]
    fn non_finite_gradient_is_divergence() {
        let mut state = AdamState::new(1, AdamConfig::default());
        let mut theta = ParamVector::new(vec![0.0]);
        let err = state
            .step(&mut theta, &ParamVector::new(vec![f64::NAN]))
            .unwrap_err();
        assert!(matches!(err, Error::NumericalDivergence { .. }));
    }

    #[test]
    fn quadratic_bowl_converges_to_grad_tol() {
        let objective = |theta: &ParamVector| {
            let x = theta[0];
            let y = theta[1];
            Ok((x * x + 0.5 * y * y, ParamVector::new(vec![2.0 * x, y])))
        };
        let criteria = ConvergenceCriteria {
            max_steps: Some(100_000),
            grad_norm_tol: Some(1e-8),
            loss_delta_tol: None,
        };
        let (theta, diag) = run_to_convergence(
            objective,
            ParamVector::new(vec![1.0, -2.0]),
            AdamConfig::default(),
            criteria,
        )
        .unwrap();
        assert_eq!(diag.stopped_by, StopReason::GradNormTol);
        assert!(diag.final_grad_norm.unwrap() <= 1e-8);
        assert!(theta.norm() < 1e-4);
    }

    #[test]
    fn zero_budget_returns_input_unchanged() {
        let theta0 = ParamVector::new(vec![4.0]);
        let (theta, diag) = run_to_convergence(
            |t: &ParamVector| Ok((t[0] * t[0], ParamVector::new(vec![2.0 * t[0]]))),
            theta0.clone(),
            AdamConfig::default(),
            ConvergenceCriteria::max_steps(0),
        )
        .unwrap();
        assert_eq!(theta, theta0);
        assert_eq!(diag.steps, 0);
        assert_eq!(diag.stopped_by, StopReason::BudgetExhausted);
    }

    #[test]
    fn scalar_quadratic_reaches_near_zero_in_200_steps() {
        // Minimizing f(t) = t^2 from t = 1 with alpha = 0.1.
        let (theta, _) = run_to_convergence(
            |t: &ParamVector| Ok((t[0] * t[0], ParamVector::new(vec![2.0 * t[0]]))),
            ParamVector::new(vec![1.0]),
            AdamConfig::with_alpha(0.1),
            ConvergenceCriteria::max_steps(200),
        )
        .unwrap();
        assert!(theta[0].abs() < 0.05, "theta = {}", theta[0]);
    }

    #[test]
    fn rosenbrock_adam_50k_steps() {
        let rosenbrock = |t: &ParamVector| {
            let (x, y) = (t[0], t[1]);
            let loss = (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2);
            let gx = -2.0 * (1.0 - x) - 400.0 * x * (y - x * x);
            let gy = 200.0 * (y - x * x);
            Ok((loss, ParamVector::new(vec![gx, gy])))
        };
        let (theta, diag) = run_to_convergence(
            rosenbrock,
            ParamVector::new(vec![-1.2, 1.0]),
            AdamConfig::default(),
            ConvergenceCriteria::max_steps(50_000),
        )
        .unwrap();
        let final_loss = rosenbrock(&theta).unwrap().0;
        assert!(final_loss < 1e-3, "final loss {final_loss}, diag {diag:?}");
    }

    #[test]
    fn update_is_gradient_scale_invariant_with_tiny_epsilon() {
        // Doubling every gradient of a fixed sequence changes each update by
        // < 1% when epsilon is negligible.
        let cfg = AdamConfig {
            epsilon: 1e-12,
            ..Default::default()
        };
        let grads = [0.5, -1.25, 2.0, 0.125, -0.75];
        let run = |scale: f64| {
            let mut st = AdamState::new(1, cfg);
            let mut th = ParamVector::new(vec![0.0]);
            let mut updates = Vec::new();
            for g in grads {
                let before = th[0];
                st.step(&mut th, &ParamVector::new(vec![scale * g]))
                    .unwrap();
                updates.push(th[0] - before);
            }
            updates
        };
        let u1 = run(1.0);
        let u2 = run(2.0);
        for (a, b) in u1.iter().zip(&u2) {
            assert!((a - b).abs() / a.abs() < 0.01, "{a} vs {b}");
        }
    }

    #[test]
    fn deterministic_trajectories() {
        let obj = |t: &ParamVector| {
            Ok((
                (t[0] - 0.3).powi(2),
                ParamVector::new(vec![2.0 * (t[0] - 0.3)]),
            ))
        };
        let run = || {
            run_to_convergence(
                obj,
                ParamVector::new(vec![1.0]),
                AdamConfig::default(),
                ConvergenceCriteria::max_steps(1000),
            )
            .unwrap()
            .0
        };
        let a = run();
        let b = run();
        assert_eq!(a[0].to_bits(), b[0].to_bits());
    }
}
