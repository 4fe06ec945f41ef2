//! Experiment harness: config parsing, single-run execution, suite
//! orchestration with seeded repeats, and the comparison report.
//!
//! A run is fully determined by its config and seed: data subset, parameter
//! initialization, and every minibatch are derived from the seed, so
//! identical (config, seed) pairs reproduce identical result rows (wall time
//! aside). Suites fan runs out across threads when the `parallel` feature is
//! on; rows are collected back in config order either way.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::continuation::{
    npc_run, parc_run, stage_seed, ContinuationTrace, HomotopyObjective, ParcConfig,
};
use crate::data::{load_mnist_6x6, mnist_available, synthetic_dataset, Dataset, Split};
use crate::error::{Error, Result};
use crate::homotopy::{ActivationBase, HomotopyKind, HomotopySpec};
use crate::models::{InitScheme, LossKind, MlpModel};
use crate::param_space::{NormalizationMode, ParamVector};
use crate::solvers::{AdamConfig, ConvergenceCriteria};
use crate::training::{timed, train_standard, LossCurve, TrainObjective};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Environment variable overriding the configured data directory.
pub const DATA_DIR_ENV: &str = "ARCTRAIN_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Autoencoder,
    Classifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Standard,
    Npc,
    Parc,
}

/// Config-level homotopy selector. For the standard method this names the
/// fixed activation; for continuation methods it names the homotopy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HomotopyChoice {
    Relu,
    Sigmoid,
    HRelu,
    HSigmoid,
    HBrightness,
}

impl HomotopyChoice {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(HomotopyChoice::Relu),
            "sigmoid" => Ok(HomotopyChoice::Sigmoid),
            "h-relu" => Ok(HomotopyChoice::HRelu),
            "h-sigmoid" => Ok(HomotopyChoice::HSigmoid),
            "h-brightness" => Ok(HomotopyChoice::HBrightness),
            other => Err(Error::Config(format!("unknown homotopy '{other}'"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            HomotopyChoice::Relu => "relu",
            HomotopyChoice::Sigmoid => "sigmoid",
            HomotopyChoice::HRelu => "h-relu",
            HomotopyChoice::HSigmoid => "h-sigmoid",
            HomotopyChoice::HBrightness => "h-brightness",
        }
    }

    fn model_parts(&self) -> (ActivationBase, HomotopySpec) {
        match self {
            HomotopyChoice::Relu => (ActivationBase::Relu, HomotopySpec::none()),
            HomotopyChoice::Sigmoid => (ActivationBase::Sigmoid, HomotopySpec::none()),
            HomotopyChoice::HRelu => (ActivationBase::Relu, HomotopySpec::new(HomotopyKind::HRelu)),
            HomotopyChoice::HSigmoid => (
                ActivationBase::Sigmoid,
                HomotopySpec::new(HomotopyKind::HSigmoid),
            ),
            HomotopyChoice::HBrightness => (
                ActivationBase::Sigmoid,
                HomotopySpec::new(HomotopyKind::HBrightness),
            ),
        }
    }

    fn is_continuation(&self) -> bool {
        matches!(
            self,
            HomotopyChoice::HRelu | HomotopyChoice::HSigmoid | HomotopyChoice::HBrightness
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Mnist,
    Synthetic,
}

/// One experiment. The flat config-file schema covers exactly the keys
/// task, method, homotopy, gamma, ds, n_steps, budget, seed, data, data_dir,
/// out_dir; everything else is a fixed desk-scale default.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub method: Method,
    pub homotopy: HomotopyChoice,
    pub gamma: f64,
    pub ds: f64,
    pub n_steps: usize,
    pub budget: usize,
    pub seed: u64,
    pub data: DataSource,
    pub data_dir: PathBuf,
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_train_size")]
    pub train_size: usize,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
}

fn default_batch_size() -> usize {
    32
}
fn default_alpha() -> f64 {
    2e-3
}
fn default_train_size() -> usize {
    4000
}
fn default_test_size() -> usize {
    1000
}

impl ExperimentConfig {
    pub fn new(task: Task, method: Method, homotopy: HomotopyChoice) -> Self {
        // gamma keeps the corrector's hyperplane residual |dz . secant|
        // under ~1e-2 at acceptance; the brightness homotopy's
        // lambda-gradient is pixel-sum scaled and needs a stiffer penalty
        let gamma = match homotopy {
            HomotopyChoice::HBrightness => 200.0,
            _ => 3.0,
        };
        ExperimentConfig {
            task,
            method,
            homotopy,
            gamma,
            ds: 0.2,
            n_steps: 20,
            budget: 12_000,
            seed: 0,
            data: DataSource::Synthetic,
            data_dir: PathBuf::from("data"),
            out_dir: None,
            batch_size: default_batch_size(),
            alpha: default_alpha(),
            train_size: default_train_size(),
            test_size: default_test_size(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            Method::Standard => {
                if self.homotopy.is_continuation() {
                    return Err(Error::Config(
                        "standard method requires homotopy relu or sigmoid (kind none)".into(),
                    ));
                }
            }
            Method::Npc | Method::Parc => {
                if !self.homotopy.is_continuation() {
                    return Err(Error::Config(
                        "continuation methods require an h-* homotopy".into(),
                    ));
                }
            }
        }
        if self.ds <= 0.0 || self.gamma < 0.0 || self.n_steps == 0 {
            return Err(Error::Config(
                "ds > 0, gamma >= 0, n_steps >= 1 required".into(),
            ));
        }
        Ok(())
    }

    /// Data directory after the environment override.
    pub fn resolved_data_dir(&self) -> PathBuf {
        std::env::var_os(DATA_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.data_dir.clone())
    }

    fn loss_kind(&self) -> LossKind {
        match self.task {
            Task::Autoencoder => LossKind::MseFrobenius,
            Task::Classifier => LossKind::SoftmaxCrossEntropy,
        }
    }

    fn build_model(&self) -> MlpModel {
        let (base, spec) = self.homotopy.model_parts();
        match self.task {
            Task::Autoencoder => MlpModel::autoencoder_6x6(base, spec),
            Task::Classifier => MlpModel::classifier_6x6(base, spec),
        }
    }

    fn load_split(&self, split: Split) -> Result<Dataset> {
        let take = match split {
            Split::Train => self.train_size,
            Split::Test => self.test_size,
        };
        match self.data {
            DataSource::Synthetic => {
                let tag = match split {
                    Split::Train => 0x5EED_7001u64,
                    Split::Test => 0x5EED_7002u64,
                };
                Ok(synthetic_dataset(
                    take,
                    stage_seed(self.seed, tag as usize),
                    split,
                ))
            }
            DataSource::Mnist => load_mnist_6x6(
                &self.resolved_data_dir(),
                split,
                take,
                stage_seed(self.seed, 0xDA7A),
            ),
        }
    }
}

/// One line of results.jsonl.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub task: Task,
    pub method: Method,
    pub homotopy: String,
    pub train_loss: f64,
    pub test_loss: f64,
    pub test_accuracy: Option<f64>,
    pub steps_used: u64,
    pub wall_seconds: f64,
    pub seed: u64,
    /// Failure marker (stall etc.); the row still reports the best state.
    pub error: Option<String>,
}

impl ResultRow {
    /// Everything that must be bit-identical across reruns (wall time is
    /// timing metadata, not a result).
    pub fn deterministic_key(&self) -> (u64, u64, Option<u64>, u64, u64, Option<String>) {
        (
            self.train_loss.to_bits(),
            self.test_loss.to_bits(),
            self.test_accuracy.map(f64::to_bits),
            self.steps_used,
            self.seed,
            self.error.clone(),
        )
    }
}

/// What a run produced besides the row.
#[derive(Debug, Clone)]
pub enum RunArtifact {
    Trace(ContinuationTrace),
    Curve(LossCurve),
}

/// Runs one experiment end to end: load data, train by the configured
/// method, evaluate the final parameters at lambda = 1 on both splits, and
/// write artifacts into `out_dir` when set.
///
/// Continuation stalls are recorded in the row rather than aborting: the row
/// carries the failure marker and evaluates the last accepted point.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(ResultRow, RunArtifact)> {
    config.validate()?;
    let train = config.load_split(Split::Train)?;
    let test = config.load_split(Split::Test)?;
    let model = config.build_model();
    let loss_kind = config.loss_kind();
    let theta0 = model.init_params(InitScheme::XavierUniform, stage_seed(config.seed, 0x1217));
    let adam = AdamConfig::with_alpha(config.alpha);

    let mut obj = TrainObjective::new(&model, &train, loss_kind, config.batch_size, config.seed);

    let ((theta, artifact, error), wall_seconds) =
        timed(|| -> (ParamVector, RunArtifact, Option<String>) {
            match config.method {
                Method::Standard => {
                    match train_standard(&mut obj, theta0.clone(), config.budget, adam, 20) {
                        Ok((theta, curve)) => (theta, RunArtifact::Curve(curve), None),
                        Err(e) => (
                            theta0.clone(),
                            RunArtifact::Curve(LossCurve { points: vec![] }),
                            Some(e.to_string()),
                        ),
                    }
                }
                Method::Npc => {
                    // same split as PARC: a quarter of the budget polishes at
                    // the lambda = 1 endpoint, the rest spreads over the grid
                    let final_reserve = config.budget / 4;
                    let per_stage = (config.budget - final_reserve) / config.n_steps;
                    let criteria = ConvergenceCriteria {
                        max_steps: Some(per_stage),
                        grad_norm_tol: Some(1e-4),
                        loss_delta_tol: None,
                    };
                    let final_criteria = ConvergenceCriteria {
                        max_steps: Some(final_reserve),
                        grad_norm_tol: Some(1e-4),
                        loss_delta_tol: None,
                    };
                    match npc_run(
                        &mut obj,
                        theta0.clone(),
                        config.n_steps,
                        adam,
                        criteria,
                        Some(final_criteria),
                        false,
                    ) {
                        Ok(trace) => {
                            let theta = trace.last_point().point.params.clone();
                            (theta, RunArtifact::Trace(trace), None)
                        }
                        Err(e) => recover_partial(e, &theta0),
                    }
                }
                Method::Parc => {
                    let parc = parc_config_for(config, adam);
                    match parc_run(&mut obj, theta0.clone(), &parc) {
                        Ok(trace) => {
                            let theta = trace.last_point().point.params.clone();
                            (theta, RunArtifact::Trace(trace), None)
                        }
                        Err(e) => recover_partial(e, &theta0),
                    }
                }
            }
        });

    // evaluation at the target problem (lambda = 1), test data never trains
    let eval_obj = TrainObjective::new(&model, &train, loss_kind, config.batch_size, config.seed);
    let train_loss = eval_obj.full_loss(&theta, 1.0)?;
    let test_obj = TrainObjective::new(&model, &test, loss_kind, config.batch_size, config.seed);
    let test_loss = test_obj.full_loss(&theta, 1.0)?;
    let test_accuracy = match (config.task, test.labels.as_ref()) {
        (Task::Classifier, Some(labels)) => {
            Some(model.accuracy(&theta, &test.inputs, labels, 1.0)?)
        }
        _ => None,
    };

    let row = ResultRow {
        task: config.task,
        method: config.method,
        homotopy: config.homotopy.label().to_string(),
        train_loss,
        test_loss,
        test_accuracy,
        steps_used: obj.evals(),
        wall_seconds,
        seed: config.seed,
        error,
    };

    if let Some(dir) = &config.out_dir {
        write_artifacts(config, &row, &artifact, dir)?;
    }
    Ok((row, artifact))
}

/// PARC settings derived from an experiment config, including the budget
/// split across the expected continuation stages.
///
/// Network runs use the paper-literal normalization: the lambda predictor
/// component is normalized separately and so advances by ds per step
/// regardless of how far the corrector moved theta. Under joint
/// normalization the lambda rate scales with 1/||d theta|| and a training
/// path (which moves theta a long way per unit lambda) would need orders of
/// magnitude more continuation steps to reach lambda = 1.
pub fn parc_config_for(config: &ExperimentConfig, adam: AdamConfig) -> ParcConfig {
    // the corrector's lambda updates backslide against the predictor, so a
    // run needs roughly twice the nominal 1/ds stages; a quarter of the
    // budget is reserved for the final fixed-lambda correction at the
    // target, which also absorbs anything the stepping loop leaves unspent
    let final_reserve = config.budget / 4;
    let expected_stages = 2 + (2.0 / config.ds).ceil() as usize;
    let per_stage = ((config.budget - final_reserve) / expected_stages).max(1);
    ParcConfig {
        ds: config.ds,
        gamma: config.gamma,
        normalization: NormalizationMode::PaperLiteral,
        bootstrap_dlambda: 0.02,
        max_steps: expected_stages * 8,
        corrector: ConvergenceCriteria {
            max_steps: Some(per_stage),
            grad_norm_tol: Some(1e-4),
            loss_delta_tol: None,
        },
        adam,
        total_budget: Some(config.budget),
        final_budget_reserve: final_reserve,
        ..ParcConfig::default()
    }
}

fn recover_partial(e: Error, theta0: &ParamVector) -> (ParamVector, RunArtifact, Option<String>) {
    let msg = e.to_string();
    match e.into_partial_trace() {
        Some(trace) if !trace.points.is_empty() => {
            let theta = trace.last_point().point.params.clone();
            (theta, RunArtifact::Trace(trace), Some(msg))
        }
        _ => (
            theta0.clone(),
            RunArtifact::Curve(LossCurve { points: vec![] }),
            Some(msg),
        ),
    }
}

fn run_tag(config: &ExperimentConfig) -> String {
    format!(
        "{:?}_{:?}_{}_{}",
        config.task,
        config.method,
        config.homotopy.label(),
        config.seed
    )
    .to_lowercase()
}

fn write_artifacts(
    config: &ExperimentConfig,
    row: &ResultRow,
    artifact: &RunArtifact,
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let tag = run_tag(config);
    match artifact {
        RunArtifact::Trace(trace) => {
            trace.write_csv(&dir.join(format!("{tag}_trace.csv")))?;
            let sidecar = serde_json::json!({
                "config": config,
                "seed": config.seed,
            });
            trace.write_sidecar(&dir.join(format!("{tag}_trace.json")), &sidecar)?;
        }
        RunArtifact::Curve(curve) => {
            std::fs::write(dir.join(format!("{tag}_curve.csv")), curve.to_csv())?;
        }
    }
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join("results.jsonl"))?;
    writeln!(
        f,
        "{}",
        serde_json::to_string(row).map_err(|e| Error::Format(e.to_string()))?
    )?;
    Ok(())
}

/// Mean/stddev aggregation of one (task, method, homotopy) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub task: Task,
    pub method: Method,
    pub homotopy: String,
    pub runs: usize,
    pub failures: usize,
    pub mean_train_loss: f64,
    pub mean_test_loss: f64,
    pub std_test_loss: f64,
    pub mean_test_accuracy: Option<f64>,
    pub std_test_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub rows: Vec<ResultRow>,
    pub summaries: Vec<SummaryRow>,
}

/// Runs every config with seeds seed+0..repeats-1. Individual failures are
/// isolated per row; the suite itself only fails on setup errors.
pub fn run_suite(configs: &[ExperimentConfig], repeats: usize) -> Result<SuiteResult> {
    if repeats < 1 {
        return Err(Error::Config("repeats must be >= 1".into()));
    }
    let mut jobs = Vec::new();
    for config in configs {
        for r in 0..repeats {
            let mut c = config.clone();
            c.seed = config.seed + r as u64;
            jobs.push(c);
        }
    }

    let run_one = |c: &ExperimentConfig| -> ResultRow {
        match run_experiment(c) {
            Ok((row, _)) => row,
            Err(e) => ResultRow {
                task: c.task,
                method: c.method,
                homotopy: c.homotopy.label().to_string(),
                train_loss: f64::NAN,
                test_loss: f64::NAN,
                test_accuracy: None,
                steps_used: 0,
                wall_seconds: 0.0,
                seed: c.seed,
                error: Some(e.to_string()),
            },
        }
    };

    #[cfg(feature = "parallel")]
    let rows: Vec<ResultRow> = jobs.par_iter().map(run_one).collect();
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<ResultRow> = jobs.iter().map(run_one).collect();

    let summaries = summarize(&rows);
    Ok(SuiteResult { rows, summaries })
}

pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<String, Vec<&ResultRow>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for row in rows {
        let key = format!("{:?}|{:?}|{}", row.task, row.method, row.homotopy);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(row);
    }
    order
        .into_iter()
        .map(|key| {
            let members = &groups[&key];
            let ok: Vec<&&ResultRow> = members.iter().filter(|r| r.error.is_none()).collect();
            let failures = members.len() - ok.len();
            let mean = |f: &dyn Fn(&ResultRow) -> f64| -> f64 {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
                }
            };
            let std = |f: &dyn Fn(&ResultRow) -> f64, mu: f64| -> f64 {
                if ok.len() < 2 {
                    0.0
                } else {
                    (ok.iter().map(|r| (f(r) - mu).powi(2)).sum::<f64>() / (ok.len() - 1) as f64)
                        .sqrt()
                }
            };
            let mean_test = mean(&|r| r.test_loss);
            let accs: Vec<f64> = ok.iter().filter_map(|r| r.test_accuracy).collect();
            let (mean_acc, std_acc) = if accs.is_empty() {
                (None, None)
            } else {
                let mu = accs.iter().sum::<f64>() / accs.len() as f64;
                let sd = if accs.len() < 2 {
                    0.0
                } else {
                    (accs.iter().map(|a| (a - mu).powi(2)).sum::<f64>() / (accs.len() - 1) as f64)
                        .sqrt()
                };
                (Some(mu), Some(sd))
            };
            let sample = members[0];
            SummaryRow {
                task: sample.task,
                method: sample.method,
                homotopy: sample.homotopy.clone(),
                runs: members.len(),
                failures,
                mean_train_loss: mean(&|r| r.train_loss),
                mean_test_loss: mean_test,
                std_test_loss: std(&|r| r.test_loss, mean_test),
                mean_test_accuracy: mean_acc,
                std_test_accuracy: std_acc,
            }
        })
        .collect()
}

/// Renders summaries as a text table in the paper's layout: one section per
/// method, rows ordered Standard, NPC, PARC.
pub fn format_table(summaries: &[SummaryRow]) -> String {
    let mut out = String::new();
    let mut tasks: Vec<Task> = Vec::new();
    for s in summaries {
        if !tasks.contains(&s.task) {
            tasks.push(s.task);
        }
    }
    for task in tasks {
        out.push_str(&format!("== {:?} ==\n", task));
        out.push_str(&format!(
            "{:<10} {:<14} {:>12} {:>12} {:>12} {:>8}\n",
            "Method", "Homotopy", "Train Loss", "Test Loss", "Test Acc", "Runs"
        ));
        for method in [Method::Standard, Method::Npc, Method::Parc] {
            for s in summaries
                .iter()
                .filter(|s| s.task == task && s.method == method)
            {
                let acc = s
                    .mean_test_accuracy
                    .map(|a| format!("{a:.3}"))
                    .unwrap_or_else(|| "-".into());
                let fail = if s.failures > 0 {
                    format!(" ({} failed)", s.failures)
                } else {
                    String::new()
                };
                out.push_str(&format!(
                    "{:<10} {:<14} {:>12.4} {:>12.4} {:>12} {:>8}{}\n",
                    format!("{:?}", s.method),
                    s.homotopy,
                    s.mean_train_loss,
                    s.mean_test_loss,
                    acc,
                    s.runs,
                    fail
                ));
            }
        }
        out.push('\n');
    }
    out
}

/// Markdown comparison: per task, the method ordering by mean test loss and
/// whether each continuation method beats the standard baseline (ties within
/// one stddev are inconclusive), with the overall win tally.
pub fn compare_report(summaries: &[SummaryRow]) -> String {
    let mut out = String::from("# Continuation vs standard training\n\n");
    let mut tasks: Vec<Task> = Vec::new();
    for s in summaries {
        if !tasks.contains(&s.task) {
            tasks.push(s.task);
        }
    }
    let mut wins = 0usize;
    let mut total = 0usize;
    for task in tasks {
        let cell: Vec<&SummaryRow> = summaries.iter().filter(|s| s.task == task).collect();
        let standard = cell.iter().find(|s| s.method == Method::Standard);
        out.push_str(&format!("## {:?}\n\n", task));

        let mut ordered = cell.clone();
        ordered.sort_by(|a, b| a.mean_test_loss.partial_cmp(&b.mean_test_loss).unwrap());
        out.push_str("Ordering by mean test loss (best first):\n\n");
        for (i, s) in ordered.iter().enumerate() {
            out.push_str(&format!(
                "{}. {:?} {} — test loss {:.4}",
                i + 1,
                s.method,
                s.homotopy,
                s.mean_test_loss
            ));
            if let Some(acc) = s.mean_test_accuracy {
                out.push_str(&format!(", accuracy {acc:.3}"));
            }
            out.push('\n');
        }
        out.push('\n');

        if let Some(std_row) = standard {
            for s in cell.iter().filter(|s| s.method != Method::Standard) {
                total += 1;
                // classification rows are judged on accuracy, reconstruction
                // rows on test loss
                let (margin, noise, unit) = match (s.mean_test_accuracy, std_row.mean_test_accuracy)
                {
                    (Some(a), Some(b)) => (
                        a - b,
                        s.std_test_accuracy
                            .unwrap_or(0.0)
                            .max(std_row.std_test_accuracy.unwrap_or(0.0)),
                        "accuracy",
                    ),
                    _ => (
                        std_row.mean_test_loss - s.mean_test_loss,
                        s.std_test_loss.max(std_row.std_test_loss),
                        "test loss",
                    ),
                };
                let verdict = if margin.abs() <= noise {
                    "inconclusive (within one stddev)"
                } else if margin > 0.0 {
                    wins += 1;
                    "beats standard"
                } else {
                    "worse than standard"
                };
                out.push_str(&format!(
                    "- {:?} {}: {} ({} margin {:+.4})\n",
                    s.method, s.homotopy, verdict, unit, margin
                ));
            }
            out.push('\n');
        }
    }
    out.push_str(&format!(
        "Continuation methods beat standard on {wins}/{total} comparisons in this run.\n"
    ));
    out
}

/// Parses the flat key-value config format: one `key = value` per line,
/// `#` comments. Unknown keys are rejected.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }

    let known = [
        "task", "method", "homotopy", "gamma", "ds", "n_steps", "budget", "seed", "data",
        "data_dir", "out_dir",
    ];
    for key in map.keys() {
        if !known.contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown config key '{key}'")));
        }
    }

    let task = match map.get("task").map(String::as_str) {
        Some("autoencoder") => Task::Autoencoder,
        Some("classifier") => Task::Classifier,
        Some(other) => return Err(Error::Config(format!("unknown task '{other}'"))),
        None => return Err(Error::Config("missing required key 'task'".into())),
    };
    let method = match map.get("method").map(String::as_str) {
        Some("standard") => Method::Standard,
        Some("npc") => Method::Npc,
        Some("parc") => Method::Parc,
        Some(other) => return Err(Error::Config(format!("unknown method '{other}'"))),
        None => return Err(Error::Config("missing required key 'method'".into())),
    };
    let homotopy = map
        .get("homotopy")
        .ok_or_else(|| Error::Config("missing required key 'homotopy'".into()))
        .and_then(|s| HomotopyChoice::parse(s))?;

    let mut config = ExperimentConfig::new(task, method, homotopy);
    let parse_f64 = |key: &str, v: &str| {
        v.parse::<f64>()
            .map_err(|_| Error::Config(format!("key '{key}': bad number '{v}'")))
    };
    let parse_usize = |key: &str, v: &str| {
        v.parse::<usize>()
            .map_err(|_| Error::Config(format!("key '{key}': bad integer '{v}'")))
    };
    if let Some(v) = map.get("gamma") {
        config.gamma = parse_f64("gamma", v)?;
    }
    if let Some(v) = map.get("ds") {
        config.ds = parse_f64("ds", v)?;
    }
    if let Some(v) = map.get("n_steps") {
        config.n_steps = parse_usize("n_steps", v)?;
    }
    if let Some(v) = map.get("budget") {
        config.budget = parse_usize("budget", v)?;
    }
    if let Some(v) = map.get("seed") {
        config.seed = v
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("key 'seed': bad integer '{v}'")))?;
    }
    if let Some(v) = map.get("data") {
        config.data = match v.as_str() {
            "mnist" => DataSource::Mnist,
            "synthetic" => DataSource::Synthetic,
            other => return Err(Error::Config(format!("unknown data source '{other}'"))),
        };
    }
    if let Some(v) = map.get("data_dir") {
        config.data_dir = PathBuf::from(v);
    }
    if let Some(v) = map.get("out_dir") {
        config.out_dir = Some(PathBuf::from(v));
    }
    config.validate()?;
    Ok(config)
}

pub fn parse_config_file(path: &Path) -> Result<ExperimentConfig> {
    parse_config_str(&std::fs::read_to_string(path)?)
}

/// The Table-1-style autoencoder comparison: standard relu/sigmoid, then
/// NPC and PARC over the three homotopies.
pub fn table1_autoencoder_suite(base: &ExperimentConfig) -> Vec<ExperimentConfig> {
    let mut configs = Vec::new();
    for (method, homotopy) in [
        (Method::Standard, HomotopyChoice::Relu),
        (Method::Standard, HomotopyChoice::Sigmoid),
        (Method::Npc, HomotopyChoice::HRelu),
        (Method::Npc, HomotopyChoice::HSigmoid),
        (Method::Npc, HomotopyChoice::HBrightness),
        (Method::Parc, HomotopyChoice::HRelu),
        (Method::Parc, HomotopyChoice::HSigmoid),
        (Method::Parc, HomotopyChoice::HBrightness),
    ] {
        let mut c = base.clone();
        c.task = Task::Autoencoder;
        c.method = method;
        c.homotopy = homotopy;
        configs.push(c);
    }
    configs
}

/// The Table-2-style classifier comparison.
pub fn table2_classifier_suite(base: &ExperimentConfig) -> Vec<ExperimentConfig> {
    let mut configs = Vec::new();
    for (method, homotopy) in [
        (Method::Standard, HomotopyChoice::Relu),
        (Method::Npc, HomotopyChoice::HRelu),
        (Method::Npc, HomotopyChoice::HBrightness),
        (Method::Parc, HomotopyChoice::HRelu),
        (Method::Parc, HomotopyChoice::HBrightness),
    ] {
        let mut c = base.clone();
        c.task = Task::Classifier;
        c.method = method;
        c.homotopy = homotopy;
        configs.push(c);
    }
    configs
}

/// Picks MNIST when the data directory has it, synthetic otherwise.
pub fn preferred_data_source(data_dir: &Path) -> DataSource {
    if mnist_available(data_dir) {
        DataSource::Mnist
    } else {
        DataSource::Synthetic
    }
}
