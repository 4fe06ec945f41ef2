//! Natural Parameter Continuation (NPC) and first-order Pseudo-Arclength
//! Continuation (PARC) as outer loops around the gradient solvers.
//!
//! Both produce a [`ContinuationTrace`]: the ordered record of accepted
//! points on the solution path with arclength, loss, and corrector
//! diagnostics. NPC steps the continuation parameter on a fixed grid and
//! re-solves at each fixed lambda. PARC steps a fixed arclength along the
//! secant direction and corrects on (near) the hyperplane orthogonal to the
//! secant, which lets it round folds where lambda reverses direction.

use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param_space::{
    secant_from, HomotopyPoint, NormalizationMode, ParamVector, Secant, SECANT_TOL,
};
use crate::solvers::{minimize, AdamConfig, AdamState, ConvergenceCriteria, MinimizeOptions};

/// A differentiable training objective over joint (params, lambda) space.
///
/// `eval` may be stochastic (minibatch); it is called once per gradient step
/// and advances the data stream. `full_loss` and `critical_residual` are
/// deterministic whole-dataset measures used for trace records.
pub trait HomotopyObjective {
    fn dim(&self) -> usize;

    /// (loss, d loss / d params, d loss / d lambda) on the next minibatch.
    fn eval(&mut self, params: &ParamVector, lambda: f64) -> Result<(f64, ParamVector, f64)>;

    /// Deterministic loss over the full dataset.
    fn full_loss(&self, params: &ParamVector, lambda: f64) -> Result<f64>;

    /// ||grad_params of the full-data task loss||: how close a point is to
    /// the solution path (the critical-point residual).
    fn critical_residual(&self, params: &ParamVector, lambda: f64) -> Result<f64>;

    /// Reseed the minibatch stream for a new continuation stage.
    fn start_stage(&mut self, stage: usize);
}

/// Critical-point residual diagnostic at a trace point.
pub fn critical_residual<O: HomotopyObjective>(obj: &O, point: &HomotopyPoint) -> Result<f64> {
    obj.critical_residual(&point.params, point.lambda)
}

/// How the orthogonality penalty enters the corrector loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyForm {
    /// gamma * (dz . secant)^2 — a proper constraint penalty, minimized on
    /// the hyperplane. The default.
    #[default]
    Squared,
    /// gamma * (dz . secant) — the sign-indefinite literal form, selectable
    /// for fidelity runs.
    Raw,
}

/// Which stepping scheme produced a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Npc,
    Parc,
}

/// One accepted point on the solution path.
#[derive(Debug, Clone)]
pub struct TracePoint {
    pub point: HomotopyPoint,
    /// Cumulative joint-space distance along the accepted points.
    pub arclength: f64,
    pub loss: f64,
    /// Critical-point residual at acceptance (||H|| for root systems).
    pub grad_norm: f64,
    pub corrector_steps: usize,
    /// |dz . secant| at acceptance; 0 for fixed-lambda stages.
    pub penalty_residual: f64,
    pub wall_ms: f64,
    /// Corrector initial full loss / previous accepted full loss.
    pub warm_start_ratio: Option<f64>,
}

/// The solution-path record.
#[derive(Debug, Clone)]
pub struct ContinuationTrace {
    pub schedule: ScheduleKind,
    pub points: Vec<TracePoint>,
}

impl ContinuationTrace {
    fn new(schedule: ScheduleKind) -> Self {
        ContinuationTrace {
            schedule,
            points: Vec::new(),
        }
    }

    pub fn last_point(&self) -> &TracePoint {
        self.points.last().expect("trace has at least one point")
    }

    pub fn lambda_max(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.point.lambda)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.point.lambda).collect()
    }

    /// Total gradient steps spent by all correctors in this trace.
    pub fn corrector_steps_total(&self) -> usize {
        self.points.iter().map(|p| p.corrector_steps).sum()
    }

    /// CSV with one row per accepted point.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("step,s,lambda,loss,grad_norm,corrector_steps,penalty_residual,wall_ms\n");
        for (i, p) in self.points.iter().enumerate() {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.12e},{:.3}\n",
                i,
                p.arclength,
                p.point.lambda,
                p.loss,
                p.grad_norm,
                p.corrector_steps,
                p.penalty_residual,
                p.wall_ms
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    /// JSON sidecar with the run configuration and seed.
    pub fn write_sidecar(&self, path: &Path, config: &serde_json::Value) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(
            serde_json::to_string_pretty(config)
                .map_err(|e| Error::Format(e.to_string()))?
                .as_bytes(),
        )?;
        Ok(())
    }
}

/// PARC configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParcConfig {
    /// Arclength step.
    pub ds: f64,
    /// Orthogonality penalty weight.
    pub gamma: f64,
    pub normalization: NormalizationMode,
    pub penalty: PenaltyForm,
    /// Size of the single NPC step that bootstraps the first secant.
    pub bootstrap_dlambda: f64,
    /// Cap on continuation steps (not gradient steps).
    pub max_steps: usize,
    pub lambda_target: f64,
    /// Overshoot slack: lambda may step past the target by at most this.
    pub lambda_slack: f64,
    /// Stop at the lambda target (training) or trace until max_steps
    /// (path following on root systems).
    pub stop_at_target: bool,
    pub corrector: ConvergenceCriteria,
    pub adam: AdamConfig,
    /// Keep ADAM moments across continuation stages instead of resetting.
    pub carry_adam_moments: bool,
    /// Total gradient-step budget across all correctors, if bounded.
    pub total_budget: Option<usize>,
    /// Portion of the budget reserved for the final fixed-lambda correction
    /// at the target; the stepping loop stops once only this much remains.
    pub final_budget_reserve: usize,
    /// NPC-reduction mode: freeze lambda to the grid l/N for the given N,
    /// zero the parameter extrapolation, and disable the penalty. PARC then
    /// reproduces an NPC run point for point.
    pub npc_mode: Option<usize>,
}

impl Default for ParcConfig {
    fn default() -> Self {
        ParcConfig {
            ds: 0.05,
            gamma: 10.0,
            normalization: NormalizationMode::Joint,
            penalty: PenaltyForm::Squared,
            bootstrap_dlambda: 0.02,
            max_steps: 400,
            lambda_target: 1.0,
            lambda_slack: 0.05,
            stop_at_target: true,
            corrector: ConvergenceCriteria::corrector_default(),
            adam: AdamConfig::default(),
            carry_adam_moments: false,
            total_budget: None,
            final_budget_reserve: 0,
            npc_mode: None,
        }
    }
}

/// Per-corrector diagnostics surfaced into the trace.
#[derive(Debug, Clone)]
pub struct CorrectorDiagnostics {
    pub steps: usize,
    pub penalty_residual: f64,
    pub initial_task_loss: Option<f64>,
    pub final_task_loss: Option<f64>,
}

/// Derives the minibatch-stream seed for a continuation stage. Shared by NPC
/// and PARC so equivalent stage schedules see identical data.
pub fn stage_seed(run_seed: u64, stage: usize) -> u64 {
    // splitmix64 over (seed, stage)
    let mut z = run_seed ^ (stage as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Solves at fixed lambda with the ADAM corrector; the NPC inner step.
fn solve_fixed_lambda<O: HomotopyObjective>(
    obj: &mut O,
    lambda: f64,
    theta_init: ParamVector,
    state: &mut AdamState,
    criteria: ConvergenceCriteria,
) -> Result<(ParamVector, CorrectorDiagnostics)> {
    let (theta, diag) = minimize(
        |t: &ParamVector| {
            let (loss, grad, _) = obj.eval(t, lambda)?;
            Ok((loss, grad))
        },
        theta_init,
        state,
        criteria,
        MinimizeOptions::default(),
    )?;
    Ok((
        theta,
        CorrectorDiagnostics {
            steps: diag.steps,
            penalty_residual: 0.0,
            initial_task_loss: diag.initial_loss,
            final_task_loss: diag.final_loss,
        },
    ))
}

/// Natural Parameter Continuation: lambda_l = l/N for l = 0..=N, each stage
/// solved at fixed lambda and warm-started from the previous solution.
///
/// Stage l's corrector budget is `criteria` (the closing lambda = 1 stage
/// uses `final_criteria` when given); divergence at any stage raises
/// [`Error::ContinuationStalled`] carrying the partial trace.
pub fn npc_run<O: HomotopyObjective>(
    obj: &mut O,
    theta0: ParamVector,
    n_steps: usize,
    adam: AdamConfig,
    criteria: ConvergenceCriteria,
    final_criteria: Option<ConvergenceCriteria>,
    carry_adam_moments: bool,
) -> Result<ContinuationTrace> {
    if n_steps < 1 {
        return Err(Error::Config("npc_run needs n_steps >= 1".into()));
    }
    let dim = obj.dim();
    let mut trace = ContinuationTrace::new(ScheduleKind::Npc);
    let mut theta = theta0;
    let mut state = AdamState::new(dim, adam);
    let mut arclength = 0.0;

    for stage in 0..=n_steps {
        let lambda = stage as f64 / n_steps as f64;
        obj.start_stage(stage);
        if !carry_adam_moments {
            state = AdamState::new(dim, adam);
        }
        let stage_criteria = match final_criteria {
            Some(fc) if stage == n_steps => fc,
            _ => criteria,
        };
        let started = Instant::now();
        let solved = solve_fixed_lambda(obj, lambda, theta.clone(), &mut state, stage_criteria);
        let (new_theta, diag) = match solved {
            Ok(v) => v,
            Err(e) => {
                let lambda_max = trace.lambda_max();
                return Err(match e {
                    Error::NumericalDivergence { .. } | Error::CorrectorFailed { .. } => {
                        Error::ContinuationStalled {
                            stage,
                            lambda_max,
                            trace: Box::new(trace),
                        }
                    }
                    other => other,
                });
            }
        };
        let point = HomotopyPoint::new(new_theta.clone(), lambda);
        if let Some(prev) = trace.points.last() {
            arclength += point.joint_distance(&prev.point);
        }
        let loss = obj.full_loss(&point.params, point.lambda)?;
        let grad_norm = obj.critical_residual(&point.params, point.lambda)?;
        let warm = match (diag.initial_task_loss, trace.points.last()) {
            (Some(init), Some(prev)) if prev.loss != 0.0 => Some(init / prev.loss),
            _ => None,
        };
        trace.points.push(TracePoint {
            point,
            arclength,
            loss,
            grad_norm,
            corrector_steps: diag.steps,
            penalty_residual: 0.0,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
            warm_start_ratio: warm,
        });
        theta = new_theta;
    }
    Ok(trace)
}

/// Secant predictor: curr + ds * secant(prev -> curr).
///
/// Pure function; [`Error::DegenerateSecant`] propagates when prev == curr.
pub fn parc_predict(
    prev: &HomotopyPoint,
    curr: &HomotopyPoint,
    ds: f64,
    mode: NormalizationMode,
) -> Result<HomotopyPoint> {
    let secant = secant_from(prev, curr, mode)?;
    Ok(predict_along(curr, &secant, ds))
}

fn predict_along(curr: &HomotopyPoint, secant: &Secant, ds: f64) -> HomotopyPoint {
    let mut params = curr.params.clone();
    params.axpy(ds, &secant.d_params);
    HomotopyPoint::new(params, curr.lambda + ds * secant.d_lambda)
}

/// Penalty-gradient corrector: minimizes
/// `task_loss(theta, lambda) + gamma * penalty((dz . secant))` over the joint
/// (theta, lambda) state, starting from the predicted point. Both theta and
/// lambda take gradient steps; lambda is kept inside `lambda_bounds` when
/// given.
#[allow(clippy::too_many_arguments)]
pub fn parc_correct<O: HomotopyObjective>(
    obj: &mut O,
    predicted: &HomotopyPoint,
    secant: &Secant,
    gamma: f64,
    penalty: PenaltyForm,
    criteria: ConvergenceCriteria,
    adam_state: &mut AdamState,
    lambda_bounds: Option<(f64, f64)>,
    freeze_lambda: bool,
) -> Result<(HomotopyPoint, CorrectorDiagnostics)> {
    let m = obj.dim();
    if gamma < 0.0 {
        return Err(Error::Config("gamma must be >= 0".into()));
    }
    let mut z0 = ParamVector::zeros(m + 1);
    z0.as_mut_slice()[..m].copy_from_slice(predicted.params.as_slice());
    z0[m] = predicted.lambda;

    let mut initial_task_loss = None;
    let mut final_task_loss = None;
    let mut last_projection = 0.0;

    let options = MinimizeOptions {
        clamp_coord: lambda_bounds.map(|(lo, hi)| (m, lo, hi)),
    };

    let (z, diag) = minimize(
        |z: &ParamVector| {
            let theta = ParamVector::new(z.as_slice()[..m].to_vec());
            let lambda = z[m];
            let (task, g_theta, g_lambda) = obj.eval(&theta, lambda)?;
            if initial_task_loss.is_none() {
                initial_task_loss = Some(task);
            }
            final_task_loss = Some(task);
            let dp = theta.sub(&predicted.params);
            let dl = lambda - predicted.lambda;
            let p = secant.project(&dp, dl);
            last_projection = p;

            let mut total = task;
            let mut grad = ParamVector::zeros(m + 1);
            grad.as_mut_slice()[..m].copy_from_slice(g_theta.as_slice());
            grad[m] = if freeze_lambda { 0.0 } else { g_lambda };
            if gamma > 0.0 {
                match penalty {
                    PenaltyForm::Squared => {
                        total += gamma * p * p;
                        let c = 2.0 * gamma * p;
                        for (gi, si) in grad.as_mut_slice()[..m]
                            .iter_mut()
                            .zip(secant.d_params.as_slice())
                        {
                            *gi += c * si;
                        }
                        if !freeze_lambda {
                            grad[m] += c * secant.d_lambda;
                        }
                    }
                    PenaltyForm::Raw => {
                        total += gamma * p;
                        for (gi, si) in grad.as_mut_slice()[..m]
                            .iter_mut()
                            .zip(secant.d_params.as_slice())
                        {
                            *gi += gamma * si;
                        }
                        if !freeze_lambda {
                            grad[m] += gamma * secant.d_lambda;
                        }
                    }
                }
            }
            Ok((total, grad))
        },
        z0,
        adam_state,
        criteria,
        options,
    )?;

    let corrected = HomotopyPoint::new(ParamVector::new(z.as_slice()[..m].to_vec()), z[m]);
    Ok((
        corrected,
        CorrectorDiagnostics {
            steps: diag.steps,
            penalty_residual: last_projection.abs(),
            initial_task_loss,
            final_task_loss,
        },
    ))
}

/// First-order Pseudo-Arclength Continuation (the penalty-gradient variant).
///
/// Bootstraps the first secant with one NPC step of `bootstrap_dlambda`, then
/// loops predict/correct. In training mode (`stop_at_target`) the loop stops
/// once lambda reaches the target and a final fixed-lambda correction at
/// exactly `lambda_target` is appended; in trace mode the loop runs to
/// `max_steps` and folds may carry lambda back down.
pub fn parc_run<O: HomotopyObjective>(
    obj: &mut O,
    theta0: ParamVector,
    config: &ParcConfig,
) -> Result<ContinuationTrace> {
    if config.ds <= 0.0 {
        return Err(Error::Config("ds must be > 0".into()));
    }
    if config.gamma < 0.0 {
        return Err(Error::Config("gamma must be >= 0".into()));
    }
    let dim = obj.dim();
    let npc_grid = config.npc_mode;
    let lambda_cap = config.lambda_target + config.lambda_slack;
    let bounds = if config.stop_at_target {
        Some((0.0, lambda_cap))
    } else {
        None
    };
    let mut budget_left = config.total_budget;

    let mut trace = ContinuationTrace::new(ScheduleKind::Parc);
    let mut arclength = 0.0;
    let mut joint_state = AdamState::new(dim + 1, config.adam);

    let stage_criteria = |budget_left: &Option<usize>| {
        let mut c = config.corrector;
        if let (Some(max), Some(left)) = (c.max_steps, budget_left) {
            c.max_steps = Some(max.min(*left));
        }
        c
    };
    let spend = |budget_left: &mut Option<usize>, used: usize| {
        if let Some(left) = budget_left {
            *left = left.saturating_sub(used);
        }
    };

    // bootstrap: fixed-lambda solves at lambda = 0 and one small NPC step
    let bootstrap_lambdas = match npc_grid {
        Some(n) => vec![0.0, 1.0 / n as f64],
        None => vec![0.0, config.bootstrap_dlambda],
    };
    let mut theta = theta0;
    for (stage, &lambda) in bootstrap_lambdas.iter().enumerate() {
        obj.start_stage(stage);
        let mut state = AdamState::new(dim, config.adam);
        let started = Instant::now();
        let (new_theta, diag) = solve_fixed_lambda(
            obj,
            lambda,
            theta.clone(),
            &mut state,
            stage_criteria(&budget_left),
        )
        .map_err(|e| stall_from(e, stage, &trace))?;
        spend(&mut budget_left, diag.steps);
        let point = HomotopyPoint::new(new_theta.clone(), lambda);
        if let Some(prev) = trace.points.last() {
            arclength += point.joint_distance(&prev.point);
        }
        push_point(&mut trace, obj, point, arclength, &diag, started, 0.0)?;
        theta = new_theta;
    }

    // predict/correct loop
    let mut stage = bootstrap_lambdas.len();
    let mut ds = config.ds;
    loop {
        let curr = trace.points[trace.points.len() - 1].point.clone();
        let prev = trace.points[trace.points.len() - 2].point.clone();
        if config.stop_at_target && curr.lambda >= config.lambda_target {
            break;
        }
        let continuation_steps = trace.points.len() - 2;
        if continuation_steps >= config.max_steps {
            break;
        }
        if let Some(left) = budget_left {
            if left <= config.final_budget_reserve {
                break;
            }
        }

        let (secant, predicted) = match npc_grid {
            Some(n) => {
                if stage > n {
                    break;
                }
                let secant = Secant {
                    d_params: ParamVector::zeros(dim),
                    d_lambda: 1.0,
                    mode: config.normalization,
                };
                let predicted = HomotopyPoint::new(curr.params.clone(), stage as f64 / n as f64);
                (secant, predicted)
            }
            None => {
                let mut secant = secant_from(&prev, &curr, config.normalization)
                    .map_err(|e| stall_from(e, stage, &trace))?;
                if config.stop_at_target && secant.d_lambda < 0.0 {
                    // training schedule marches lambda forward: a corrector
                    // that slid lambda backwards must not flip the predictor
                    // direction (Algorithm-1's while-loop assumes forward
                    // lambda); mirror the component, norm is unchanged
                    secant.d_lambda = -secant.d_lambda;
                }
                let mut predicted = predict_along(&curr, &secant, ds);
                if config.stop_at_target {
                    predicted.lambda = predicted.lambda.clamp(0.0, lambda_cap);
                }
                (secant, predicted)
            }
        };

        obj.start_stage(stage);
        if !config.carry_adam_moments {
            joint_state = AdamState::new(dim + 1, config.adam);
        }
        let gamma = if npc_grid.is_some() {
            0.0
        } else {
            config.gamma
        };
        let freeze_lambda = npc_grid.is_some();
        // in training mode the corrector searches near the predicted point:
        // lambda adapts within a ds/2 trust interval of the prediction, so a
        // stage cannot slide the schedule back further than half a step
        let stage_bounds = |predicted: &HomotopyPoint, ds: f64| {
            bounds.map(|(lo, hi)| {
                (
                    (predicted.lambda - ds / 2.0).clamp(lo, hi),
                    (predicted.lambda + ds / 2.0).clamp(lo, hi),
                )
            })
        };
        let started = Instant::now();
        let attempt = parc_correct(
            obj,
            &predicted,
            &secant,
            gamma,
            config.penalty,
            stage_criteria(&budget_left),
            &mut joint_state,
            stage_bounds(&predicted, ds),
            freeze_lambda,
        );
        let (accepted, diag) = match attempt {
            Ok(v) => v,
            Err(Error::CorrectorFailed { .. }) if npc_grid.is_none() => {
                // halve the step once and retry from the same accepted point
                ds *= 0.5;
                let predicted = {
                    let mut p = predict_along(&curr, &secant, ds);
                    if config.stop_at_target {
                        p.lambda = p.lambda.clamp(0.0, lambda_cap);
                    }
                    p
                };
                obj.start_stage(stage);
                if !config.carry_adam_moments {
                    joint_state = AdamState::new(dim + 1, config.adam);
                }
                match parc_correct(
                    obj,
                    &predicted,
                    &secant,
                    gamma,
                    config.penalty,
                    stage_criteria(&budget_left),
                    &mut joint_state,
                    stage_bounds(&predicted, ds),
                    freeze_lambda,
                ) {
                    Ok(v) => v,
                    Err(e) => return Err(stall_from(e, stage, &trace)),
                }
            }
            Err(e) => return Err(stall_from(e, stage, &trace)),
        };
        spend(&mut budget_left, diag.steps);
        ds = config.ds;

        let dist = accepted.joint_distance(&curr);
        if dist <= SECANT_TOL {
            return Err(stall_from(
                Error::DegenerateSecant { distance: dist },
                stage,
                &trace,
            ));
        }
        arclength += dist;
        push_point(
            &mut trace,
            obj,
            accepted,
            arclength,
            &diag,
            started,
            diag.penalty_residual,
        )?;
        stage += 1;
    }

    // final correction pinned at exactly lambda_target; absorbs whatever
    // budget the stepping loop left unspent
    if config.stop_at_target && npc_grid.is_none() {
        let lambda_before = trace.lambda_max();
        obj.start_stage(stage);
        let mut state = AdamState::new(dim, config.adam);
        let curr = trace.points[trace.points.len() - 1].point.clone();
        let started = Instant::now();
        let final_criteria = {
            let mut c = config.corrector;
            if let Some(left) = budget_left {
                c.max_steps = Some(left);
            }
            c
        };
        let (final_theta, diag) = solve_fixed_lambda(
            obj,
            config.lambda_target,
            curr.params.clone(),
            &mut state,
            final_criteria,
        )
        .map_err(|e| stall_from(e, stage, &trace))?;
        spend(&mut budget_left, diag.steps);
        let point = HomotopyPoint::new(final_theta, config.lambda_target);
        arclength += point.joint_distance(&curr);
        push_point(&mut trace, obj, point, arclength, &diag, started, 0.0)?;

        // a lambda=1 point that never received a real correction at the
        // target is not a completed run
        if lambda_before < config.lambda_target && diag.steps == 0 {
            return Err(Error::MaxStepsExceeded {
                trace: Box::new(trace),
            });
        }
    }

    Ok(trace)
}

fn push_point<O: HomotopyObjective>(
    trace: &mut ContinuationTrace,
    obj: &O,
    point: HomotopyPoint,
    arclength: f64,
    diag: &CorrectorDiagnostics,
    started: Instant,
    penalty_residual: f64,
) -> Result<()> {
    let loss = obj.full_loss(&point.params, point.lambda)?;
    let grad_norm = obj.critical_residual(&point.params, point.lambda)?;
    let warm = match (diag.initial_task_loss, trace.points.last()) {
        (Some(init), Some(prev)) if prev.loss != 0.0 => Some(init / prev.loss),
        _ => None,
    };
    trace.points.push(TracePoint {
        point,
        arclength,
        loss,
        grad_norm,
        corrector_steps: diag.steps,
        penalty_residual,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
        warm_start_ratio: warm,
    });
    Ok(())
}

fn stall_from(e: Error, stage: usize, trace: &ContinuationTrace) -> Error {
    match e {
        Error::NumericalDivergence { .. }
        | Error::CorrectorFailed { .. }
        | Error::DegenerateSecant { .. } => Error::ContinuationStalled {
            stage,
            lambda_max: trace.lambda_max(),
            trace: Box::new(trace.clone()),
        },
        other => other,
    }
}
