//! Glue between models, data, and the continuation loops: the minibatch
//! training objective, plus the plain-ADAM baseline that continuation methods
//! are compared against.

use std::time::Instant;

use crate::continuation::{stage_seed, HomotopyObjective};
use crate::data::{BatchStream, Dataset};
use crate::error::Result;
use crate::models::{Batch, BatchTargets, LossKind, MlpModel};
use crate::param_space::ParamVector;
use crate::solvers::{minimize, AdamConfig, AdamState, ConvergenceCriteria, MinimizeOptions};

/// A model + dataset + loss as a stochastic objective over (params, lambda).
///
/// Each `eval` call consumes the next seeded minibatch; `start_stage`
/// reseeds the stream so equal stage schedules see identical data.
pub struct TrainObjective<'a> {
    pub model: &'a MlpModel,
    pub data: &'a Dataset,
    pub loss_kind: LossKind,
    batch_size: usize,
    run_seed: u64,
    stream: BatchStream,
    evals: u64,
}

impl<'a> TrainObjective<'a> {
    pub fn new(
        model: &'a MlpModel,
        data: &'a Dataset,
        loss_kind: LossKind,
        batch_size: usize,
        run_seed: u64,
    ) -> Self {
        TrainObjective {
            model,
            data,
            loss_kind,
            batch_size,
            run_seed,
            stream: BatchStream::new(data.n, batch_size, stage_seed(run_seed, 0)),
            evals: 0,
        }
    }

    /// Gradient evaluations consumed so far — the budget measure.
    pub fn evals(&self) -> u64 {
        self.evals
    }

    fn batch_view<'b>(&self, inputs: &'b [f64], labels: Option<&'b [u8]>, n: usize) -> Batch<'b> {
        let targets = match (self.loss_kind, labels) {
            (LossKind::MseFrobenius, _) => BatchTargets::Reconstruction,
            (LossKind::SoftmaxCrossEntropy, Some(l)) => BatchTargets::Labels(l),
            (LossKind::SoftmaxCrossEntropy, None) => BatchTargets::Reconstruction,
        };
        Batch { inputs, targets, n }
    }

    /// The whole dataset as one batch.
    pub fn full_batch(&self) -> Batch<'a> {
        let targets = match (self.loss_kind, self.data.labels.as_ref()) {
            (LossKind::MseFrobenius, _) => BatchTargets::Reconstruction,
            (LossKind::SoftmaxCrossEntropy, Some(l)) => BatchTargets::Labels(l),
            (LossKind::SoftmaxCrossEntropy, None) => BatchTargets::Reconstruction,
        };
        Batch {
            inputs: &self.data.inputs,
            targets,
            n: self.data.n,
        }
    }
}

impl HomotopyObjective for TrainObjective<'_> {
    fn dim(&self) -> usize {
        self.model.param_count()
    }

    fn eval(&mut self, params: &ParamVector, lambda: f64) -> Result<(f64, ParamVector, f64)> {
        let batch = self.stream.next_batch(self.data);
        self.evals += 1;
        let view = self.batch_view(&batch.inputs, batch.labels.as_deref(), batch.n);
        self.model
            .loss_and_grads(params, &view, lambda, self.loss_kind)
    }

    fn full_loss(&self, params: &ParamVector, lambda: f64) -> Result<f64> {
        self.model
            .evaluate(params, &self.full_batch(), lambda, self.loss_kind)
    }

    fn critical_residual(&self, params: &ParamVector, lambda: f64) -> Result<f64> {
        let (_, grad, _) =
            self.model
                .loss_and_grads(params, &self.full_batch(), lambda, self.loss_kind)?;
        Ok(grad.norm())
    }

    fn start_stage(&mut self, stage: usize) {
        self.stream = BatchStream::new(
            self.data.n,
            self.batch_size,
            stage_seed(self.run_seed, stage),
        );
    }
}

/// A plain training curve: (gradient step, full-data loss) samples.
#[derive(Debug, Clone)]
pub struct LossCurve {
    pub points: Vec<(usize, f64)>,
}

impl LossCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss\n");
        for (s, l) in &self.points {
            out.push_str(&format!("{s},{l:.12e}\n"));
        }
        out
    }
}

/// Standard training: ADAM on the fixed target problem (lambda pinned at 1)
/// for exactly `budget` gradient steps. The baseline every continuation
/// method is compared against under an equal budget.
pub fn train_standard(
    obj: &mut TrainObjective,
    theta0: ParamVector,
    budget: usize,
    adam: AdamConfig,
    curve_samples: usize,
) -> Result<(ParamVector, LossCurve)> {
    let dim = obj.dim();
    obj.start_stage(0);
    let mut state = AdamState::new(dim, adam);
    let mut curve = Vec::new();
    let sample_every = (budget / curve_samples.max(1)).max(1);

    let mut theta = theta0;
    let mut done = 0;
    while done < budget {
        let chunk = sample_every.min(budget - done);
        let (new_theta, diag) = minimize(
            |t: &ParamVector| {
                let (loss, grad, _) = obj.eval(t, 1.0)?;
                Ok((loss, grad))
            },
            theta,
            &mut state,
            ConvergenceCriteria::max_steps(chunk),
            MinimizeOptions::default(),
        )?;
        theta = new_theta;
        done += diag.steps;
        curve.push((done, obj.full_loss(&theta, 1.0)?));
        if diag.steps < chunk {
            break;
        }
    }
    Ok((theta, LossCurve { points: curve }))
}

/// Wall-clock helper used by the harness.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}
