//! Low-dimensional root systems H(theta, lambda) = 0 with analytically known
//! solution paths and fold points.
//!
//! These are the correctness oracle for the path-following machinery: at
//! n <= 10 a dense Newton solve on the augmented system [H; (dz . secant)]
//! is cheap and lands exactly on both the path and the corrector hyperplane,
//! so predictor geometry, arclength stepping, and fold traversal can be
//! asserted sharply. The penalty-gradient corrector is cross-validated
//! against the Newton corrector on the same problems, which is what
//! certifies it for the high-dimensional runs where no ground truth exists.

use std::time::Instant;

use crate::continuation::{ContinuationTrace, HomotopyObjective, ScheduleKind, TracePoint};
use crate::error::{Error, Result};
use crate::param_space::{secant_from, HomotopyPoint, NormalizationMode, ParamVector, Secant};

type ResidualFn = dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync;
/// Row-major n x (n+1) Jacobian: columns are d/d theta_0..theta_{n-1}, d/d lambda.
type JacobianFn = dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync;

/// A root system H: R^n x R -> R^n with its Jacobian over (theta, lambda).
pub struct RootProblem {
    pub dim: usize,
    residual: Box<ResidualFn>,
    jacobian: Box<JacobianFn>,
    /// Optional analytic branches theta(lambda) for assertions.
    pub known_path: Option<Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>>,
}

impl RootProblem {
    pub fn residual(&self, theta: &[f64], lambda: f64) -> Vec<f64> {
        (self.residual)(theta, lambda)
    }

    pub fn jacobian(&self, theta: &[f64], lambda: f64) -> Vec<f64> {
        (self.jacobian)(theta, lambda)
    }

    pub fn residual_norm(&self, theta: &[f64], lambda: f64) -> f64 {
        self.residual(theta, lambda)
            .iter()
            .map(|r| r * r)
            .sum::<f64>()
            .sqrt()
    }
}

/// H(theta, lambda) = theta^2 + lambda - 1.
///
/// Analytic path theta = +/- sqrt(1 - lambda) with a single fold at (0, 1),
/// where dH/d theta = 2 theta vanishes and the path cannot be parameterized
/// by lambda.
pub fn fold_problem() -> RootProblem {
    RootProblem {
        dim: 1,
        residual: Box::new(|t, l| vec![t[0] * t[0] + l - 1.0]),
        jacobian: Box::new(|t, _l| vec![2.0 * t[0], 1.0]),
        known_path: Some(Box::new(|l| {
            if l <= 1.0 {
                vec![(1.0 - l).sqrt(), -(1.0 - l).sqrt()]
            } else {
                vec![]
            }
        })),
    }
}

/// Fixed points of the logistic map: H(theta, lambda) = lambda theta (1 -
/// theta) - theta. Branches theta = 0 and theta = 1 - 1/lambda cross at
/// (0, 1): a transcritical point, kept as a documented hard case (no branch
/// switching is attempted there).
pub fn logistic_fixed_points() -> RootProblem {
    RootProblem {
        dim: 1,
        residual: Box::new(|t, l| vec![l * t[0] * (1.0 - t[0]) - t[0]]),
        jacobian: Box::new(|t, l| vec![l * (1.0 - 2.0 * t[0]) - 1.0, t[0] * (1.0 - t[0])]),
        known_path: Some(Box::new(|l| {
            if l.abs() > 1e-12 {
                vec![0.0, 1.0 - 1.0 / l]
            } else {
                vec![0.0]
            }
        })),
    }
}

/// Dense Gaussian elimination with partial pivoting; fine for n <= 10.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Result<Vec<f64>> {
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col].abs() < 1e-14 {
            return Err(Error::SingularSystem);
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / diag;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col * n + k] * x[k];
        }
        x[col] = acc / a[col * n + col];
    }
    Ok(x)
}

/// Newton iteration on the augmented square system
/// [H(theta, lambda); (z - z_pred) . secant] = 0.
///
/// Returns a point with ||H|| <= tol and |dz . secant| <= tol, or
/// [`Error::CorrectorFailed`] carrying the best iterate.
pub fn newton_corrector(
    problem: &RootProblem,
    predicted: &HomotopyPoint,
    secant: &Secant,
    tol: f64,
    max_iters: usize,
) -> Result<HomotopyPoint> {
    let n = problem.dim;
    let mut theta = predicted.params.as_slice().to_vec();
    let mut lambda = predicted.lambda;
    let mut best: Option<(f64, Vec<f64>, f64)> = None;

    for _ in 0..=max_iters {
        let h = problem.residual(&theta, lambda);
        let dp = ParamVector::new(
            theta
                .iter()
                .zip(predicted.params.as_slice())
                .map(|(a, b)| a - b)
                .collect(),
        );
        let c = secant.project(&dp, lambda - predicted.lambda);
        let h_norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
        let merit = h_norm.max(c.abs());
        if best.as_ref().is_none_or(|(m, _, _)| merit < *m) {
            best = Some((merit, theta.clone(), lambda));
        }
        if h_norm <= tol && c.abs() <= tol {
            return Ok(HomotopyPoint::new(ParamVector::new(theta), lambda));
        }

        // augmented Jacobian: [J_theta, J_lambda; secant_theta^T, secant_lambda]
        let jac = problem.jacobian(&theta, lambda);
        let dim = n + 1;
        let mut a = vec![0.0; dim * dim];
        let mut rhs = vec![0.0; dim];
        for row in 0..n {
            for colk in 0..dim {
                a[row * dim + colk] = jac[row * dim + colk];
            }
            rhs[row] = -h[row];
        }
        for colk in 0..n {
            a[n * dim + colk] = secant.d_params[colk];
        }
        a[n * dim + n] = secant.d_lambda;
        rhs[n] = -c;

        let delta = solve_dense(&mut a, &mut rhs, dim)?;
        for (t, d) in theta.iter_mut().zip(&delta[..n]) {
            *t += d;
        }
        lambda += delta[n];
    }

    let (merit, theta, lambda) = best.unwrap();
    Err(Error::CorrectorFailed {
        best: Box::new(HomotopyPoint::new(ParamVector::new(theta), lambda)),
        residual: merit,
        steps: max_iters,
    })
}

/// Newton on theta at fixed lambda; the testbed's NPC inner solve.
pub fn newton_fixed_lambda(
    problem: &RootProblem,
    lambda: f64,
    theta_init: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<Vec<f64>> {
    let n = problem.dim;
    let mut theta = theta_init.to_vec();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..=max_iters {
        let h = problem.residual(&theta, lambda);
        let h_norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
        if best.as_ref().is_none_or(|(m, _)| h_norm < *m) {
            best = Some((h_norm, theta.clone()));
        }
        if h_norm <= tol {
            return Ok(theta);
        }
        let jac = problem.jacobian(&theta, lambda);
        let mut a = vec![0.0; n * n];
        let mut rhs = vec![0.0; n];
        for row in 0..n {
            for colk in 0..n {
                a[row * n + colk] = jac[row * (n + 1) + colk];
            }
            rhs[row] = -h[row];
        }
        let delta = solve_dense(&mut a, &mut rhs, n)?;
        for (t, d) in theta.iter_mut().zip(&delta) {
            *t += d;
        }
    }
    let (merit, theta) = best.unwrap();
    Err(Error::CorrectorFailed {
        best: Box::new(HomotopyPoint::new(ParamVector::new(theta), lambda)),
        residual: merit,
        steps: max_iters,
    })
}

/// Configuration for the analytic (Newton-corrected) runs.
#[derive(Debug, Clone)]
pub struct AnalyticParcConfig {
    pub ds: f64,
    pub bootstrap_dlambda: f64,
    pub max_steps: usize,
    pub tol: f64,
    pub newton_max_iters: usize,
    pub normalization: NormalizationMode,
}

impl Default for AnalyticParcConfig {
    fn default() -> Self {
        AnalyticParcConfig {
            ds: 0.05,
            bootstrap_dlambda: 0.02,
            max_steps: 100,
            tol: 1e-10,
            newton_max_iters: 20,
            normalization: NormalizationMode::Joint,
        }
    }
}

fn analytic_point(
    problem: &RootProblem,
    theta: Vec<f64>,
    lambda: f64,
    arclength: f64,
    corrector_steps: usize,
    penalty_residual: f64,
    started: Instant,
) -> TracePoint {
    let h_norm = problem.residual_norm(&theta, lambda);
    TracePoint {
        point: HomotopyPoint::new(ParamVector::new(theta), lambda),
        arclength,
        loss: 0.5 * h_norm * h_norm,
        grad_norm: h_norm,
        corrector_steps,
        penalty_residual,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
        warm_start_ratio: None,
    }
}

/// Pseudo-arclength continuation with the Newton corrector: traces the path
/// from (theta0, 0) for `max_steps` steps, through folds.
pub fn parc_run_analytic(
    problem: &RootProblem,
    theta0: &[f64],
    config: &AnalyticParcConfig,
) -> Result<ContinuationTrace> {
    let mut trace = ContinuationTrace {
        schedule: ScheduleKind::Parc,
        points: Vec::new(),
    };
    let mut arclength = 0.0;

    // bootstrap: two fixed-lambda Newton solves
    let started = Instant::now();
    let th0 = newton_fixed_lambda(problem, 0.0, theta0, config.tol, config.newton_max_iters)?;
    trace.points.push(analytic_point(
        problem,
        th0.clone(),
        0.0,
        0.0,
        0,
        0.0,
        started,
    ));
    let started = Instant::now();
    let l1 = config.bootstrap_dlambda;
    let th1 = newton_fixed_lambda(problem, l1, &th0, config.tol, config.newton_max_iters)?;
    let p1 = HomotopyPoint::new(ParamVector::new(th1.clone()), l1);
    arclength += p1.joint_distance(&trace.points[0].point);
    trace
        .points
        .push(analytic_point(problem, th1, l1, arclength, 0, 0.0, started));

    for stage in 2..2 + config.max_steps {
        let curr = trace.points[trace.points.len() - 1].point.clone();
        let prev = trace.points[trace.points.len() - 2].point.clone();
        let secant = secant_from(&prev, &curr, config.normalization)?;
        let started = Instant::now();

        let mut ds = config.ds;
        let corrected = loop {
            let mut predicted = curr.params.clone();
            predicted.axpy(ds, &secant.d_params);
            let predicted = HomotopyPoint::new(predicted, curr.lambda + ds * secant.d_lambda);
            match newton_corrector(
                problem,
                &predicted,
                &secant,
                config.tol,
                config.newton_max_iters,
            ) {
                Ok(point) => break point,
                Err(Error::CorrectorFailed { .. }) if ds == config.ds => {
                    ds *= 0.5;
                }
                Err(e) => {
                    return Err(match e {
                        Error::CorrectorFailed { .. } | Error::SingularSystem => {
                            Error::ContinuationStalled {
                                stage,
                                lambda_max: trace.lambda_max(),
                                trace: Box::new(trace),
                            }
                        }
                        other => other,
                    })
                }
            }
        };

        let dist = corrected.joint_distance(&curr);
        arclength += dist;
        let lambda = corrected.lambda;
        let theta = corrected.params.into_vec();
        // hyperplane offset actually achieved: (z - z_pred) . secant, where
        // z_pred = curr + ds * secant
        let penalty_res = {
            let dpv = ParamVector::new(
                theta
                    .iter()
                    .zip(curr.params.as_slice())
                    .map(|(a, b)| a - b)
                    .collect(),
            );
            (secant.project(&dpv, lambda - curr.lambda) - ds).abs()
        };
        trace.points.push(analytic_point(
            problem,
            theta,
            lambda,
            arclength,
            0,
            penalty_res,
            started,
        ));
    }
    Ok(trace)
}

/// Natural-parameter continuation with the fixed-lambda Newton corrector on
/// the grid lambda_l = l / n_steps. Stalls (with the partial trace) when the
/// bounded Newton iteration stops converging, which on a fold problem
/// happens as dH/d theta degenerates.
pub fn npc_run_analytic(
    problem: &RootProblem,
    theta0: &[f64],
    n_steps: usize,
    tol: f64,
    newton_max_iters: usize,
) -> Result<ContinuationTrace> {
    let mut trace = ContinuationTrace {
        schedule: ScheduleKind::Npc,
        points: Vec::new(),
    };
    let mut arclength = 0.0;
    let mut theta = theta0.to_vec();
    for stage in 0..=n_steps {
        let lambda = stage as f64 / n_steps as f64;
        let started = Instant::now();
        let solved = newton_fixed_lambda(problem, lambda, &theta, tol, newton_max_iters);
        let new_theta = match solved {
            Ok(t) => t,
            Err(Error::CorrectorFailed { .. }) | Err(Error::SingularSystem) => {
                return Err(Error::ContinuationStalled {
                    stage,
                    lambda_max: trace.lambda_max(),
                    trace: Box::new(trace),
                });
            }
            Err(e) => return Err(e),
        };
        let point = HomotopyPoint::new(ParamVector::new(new_theta.clone()), lambda);
        if let Some(prev) = trace.points.last() {
            arclength += point.joint_distance(&prev.point);
        }
        trace.points.push(analytic_point(
            problem,
            new_theta.clone(),
            lambda,
            arclength,
            0,
            0.0,
            started,
        ));
        theta = new_theta;
    }
    Ok(trace)
}

/// Adapter: a root system as a gradient objective, loss = 0.5 ||H||^2.
///
/// This is the bridge that lets the penalty-gradient corrector (the
/// high-dimensional scheme) run on the analytic problems for
/// cross-validation.
pub struct RootObjective<'a> {
    pub problem: &'a RootProblem,
}

impl HomotopyObjective for RootObjective<'_> {
    fn dim(&self) -> usize {
        self.problem.dim
    }

    fn eval(&mut self, params: &ParamVector, lambda: f64) -> Result<(f64, ParamVector, f64)> {
        let n = self.problem.dim;
        let theta = params.as_slice();
        let h = self.problem.residual(theta, lambda);
        let jac = self.problem.jacobian(theta, lambda);
        let loss = 0.5 * h.iter().map(|v| v * v).sum::<f64>();
        // grad_theta = J_theta^T H, grad_lambda = J_lambda^T H
        let mut grad = vec![0.0; n];
        let mut d_lambda = 0.0;
        for row in 0..n {
            for (colk, g) in grad.iter_mut().enumerate() {
                *g += jac[row * (n + 1) + colk] * h[row];
            }
            d_lambda += jac[row * (n + 1) + n] * h[row];
        }
        Ok((loss, ParamVector::new(grad), d_lambda))
    }

    fn full_loss(&self, params: &ParamVector, lambda: f64) -> Result<f64> {
        let h_norm = self.problem.residual_norm(params.as_slice(), lambda);
        Ok(0.5 * h_norm * h_norm)
    }

    fn critical_residual(&self, params: &ParamVector, lambda: f64) -> Result<f64> {
        let mut me = RootObjective {
            problem: self.problem,
        };
        let (_, grad, _) = me.eval(params, lambda)?;
        Ok(grad.norm())
    }

    fn start_stage(&mut self, _stage: usize) {}
}


#[cfg(test)]
mod run_tests {
    use super::*;

    #[test]
    fn analytic_parc_rounds_the_fold() {
        let p = fold_problem();
        let config = AnalyticParcConfig {
            ds: 0.05,
            bootstrap_dlambda: 0.02,
            max_steps: 80,
            ..Default::default()
        };
        let trace = parc_run_analytic(&p, &[1.0], &config).unwrap();
        let lambda_max = trace.lambda_max();
        let thetas: Vec<f64> = trace.points.iter().map(|q| q.point.params[0]).collect();
        let lambdas = trace.lambdas();
        eprintln!("lambda_max = {lambda_max}");
        eprintln!("n points = {}", trace.points.len());
        eprintln!(
            "theta range: {:.3} .. {:.3}",
            thetas.iter().cloned().fold(f64::INFINITY, f64::min),
            thetas.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        );
        // residuals
        let worst_h = trace.points.iter().map(|q| q.grad_norm).fold(0.0, f64::max);
        eprintln!("worst |H| = {worst_h:.3e}");
        // spacing stats (Euclidean and projected)
        let mut worst_euclid: f64 = 0.0;
        let mut worst_proj: f64 = 0.0;
        for (i, w) in trace.points.windows(2).enumerate() {
            if i == 0 {
                continue;
            } // bootstrap pair has spacing bootstrap_dlambda-ish
            let d = w[1].point.joint_distance(&w[0].point);
            worst_euclid = worst_euclid.max((d - 0.05).abs());
            worst_proj = worst_proj.max(w[1].penalty_residual);
        }
        eprintln!("worst |euclid spacing - ds| = {worst_euclid:.3e}");
        eprintln!("worst |projected spacing - ds| = {worst_proj:.3e}");
        // decreasing-lambda steps on the negative branch
        let mut count = 0;
        for (i, w) in trace.points.windows(2).enumerate() {
            let _ = i;
            if w[1].point.params[0] < 0.0 && w[1].point.lambda < w[0].point.lambda {
                count += 1;
            }
        }
        eprintln!("decreasing-lambda steps on negative branch: {count}");
        eprintln!(
            "lambda_min at end: {:.4}, theta_end: {:.4}",
            lambdas.last().unwrap(),
            thetas.last().unwrap()
        );
        assert!(lambda_max > 0.999);
        assert!(worst_h <= 1e-8);
        assert!(count >= 10);
    }

    #[test]
    fn analytic_npc_stalls_before_the_fold() {
        let p = fold_problem();
        let err = npc_run_analytic(&p, &[1.0], 20, 1e-8, 10).unwrap_err();
        match err {
            Error::ContinuationStalled {
                stage,
                lambda_max,
                trace,
            } => {
                eprintln!("stalled at stage {stage}, lambda_max {lambda_max}");
                assert!(lambda_max < 1.0);
                assert_eq!(stage, 20);
                assert!(!trace.points.is_empty());
            }
            other => panic!("expected stall, got {other:?}"),
        }
    }
}
