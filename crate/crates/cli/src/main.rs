//! Experiment CLI: single runs, suites with seeded repeats, the analytic
//! testbed checks, and report aggregation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use arctrain::continuation::ParcConfig;
use arctrain::harness::{
    self, compare_report, format_table, parse_config_file, run_experiment, run_suite, summarize,
    ExperimentConfig, HomotopyChoice, Method, ResultRow, Task,
};
use arctrain::param_space::ParamVector;
use arctrain::solvers::{AdamConfig, ConvergenceCriteria};
use arctrain::testbed::{
    fold_problem, npc_run_analytic, parc_run_analytic, AnalyticParcConfig, RootObjective,
};

#[derive(Parser)]
#[command(
    name = "arctrain",
    about = "Continuation-based neural network training",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment from a config file and/or flags.
    Run(RunArgs),
    /// Run every .cfg in a directory, with seeded repeats and aggregation.
    Suite(SuiteArgs),
    /// Run the analytic fold-problem oracle suite and print pass/fail lines.
    Testbed(TestbedArgs),
    /// Aggregate a results.jsonl into a table and comparison report.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat key-value config file (keys: task, method, homotopy, gamma, ds,
    /// n_steps, budget, seed, data, data_dir, out_dir).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    homotopy: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    ds: Option<f64>,
    #[arg(long)]
    n_steps: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// mnist | synthetic
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SuiteArgs {
    /// Directory of .cfg files.
    #[arg(long)]
    config_dir: PathBuf,
    /// Seeds seed+0..repeats-1 per config.
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Where results.jsonl, table.txt, and report.md go.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TestbedArgs {
    /// Where trace CSVs are written.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Path to a results.jsonl produced by run/suite.
    #[arg(long)]
    results: PathBuf,
    /// Output markdown path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(clean) => {
            if clean {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch() -> Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Suite(args) => cmd_suite(args),
        Command::Testbed(args) => cmd_testbed(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn build_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => parse_config_file(path).with_context(|| format!("reading {path:?}"))?,
        None => {
            let task = parse_task(
                args.task
                    .as_deref()
                    .context("--task required when no --config is given")?,
            )?;
            let method = parse_method(
                args.method
                    .as_deref()
                    .context("--method required when no --config is given")?,
            )?;
            let homotopy = HomotopyChoice::parse(
                args.homotopy
                    .as_deref()
                    .context("--homotopy required when no --config is given")?,
            )?;
            ExperimentConfig::new(task, method, homotopy)
        }
    };
    // flags override file values
    if let Some(t) = &args.task {
        config.task = parse_task(t)?;
    }
    if let Some(m) = &args.method {
        config.method = parse_method(m)?;
    }
    if let Some(h) = &args.homotopy {
        config.homotopy = HomotopyChoice::parse(h)?;
    }
    if let Some(v) = args.gamma {
        config.gamma = v;
    }
    if let Some(v) = args.ds {
        config.ds = v;
    }
    if let Some(v) = args.n_steps {
        config.n_steps = v;
    }
    if let Some(v) = args.budget {
        config.budget = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(d) = &args.data {
        config.data = match d.as_str() {
            "mnist" => harness::DataSource::Mnist,
            "synthetic" => harness::DataSource::Synthetic,
            other => bail!("unknown data source '{other}'"),
        };
    }
    if let Some(d) = &args.data_dir {
        config.data_dir = d.clone();
    }
    if let Some(d) = &args.out_dir {
        config.out_dir = Some(d.clone());
    }
    config.validate()?;
    Ok(config)
}

fn parse_task(s: &str) -> Result<Task> {
    match s {
        "autoencoder" => Ok(Task::Autoencoder),
        "classifier" => Ok(Task::Classifier),
        other => bail!("unknown task '{other}'"),
    }
}

fn parse_method(s: &str) -> Result<Method> {
    match s {
        "standard" => Ok(Method::Standard),
        "npc" => Ok(Method::Npc),
        "parc" => Ok(Method::Parc),
        other => bail!("unknown method '{other}'"),
    }
}

fn cmd_run(args: RunArgs) -> Result<bool> {
    let config = build_config(&args)?;
    let (row, _) = run_experiment(&config)?;
    println!("{}", serde_json::to_string_pretty(&row)?);
    Ok(row.error.is_none())
}

fn cmd_suite(args: SuiteArgs) -> Result<bool> {
    let mut configs = Vec::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&args.config_dir)
        .with_context(|| format!("reading {:?}", args.config_dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "cfg"))
        .collect();
    entries.sort();
    if entries.is_empty() {
        bail!("no .cfg files in {:?}", args.config_dir);
    }
    for path in &entries {
        let mut c = parse_config_file(path).with_context(|| format!("reading {path:?}"))?;
        if let Some(out) = &args.out_dir {
            c.out_dir = Some(out.clone());
        }
        configs.push(c);
    }

    let suite = run_suite(&configs, args.repeats)?;
    let table = format_table(&suite.summaries);
    let report = compare_report(&suite.summaries);
    println!("{table}");
    println!("{report}");

    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir)?;
        let mut jsonl = String::new();
        for row in &suite.rows {
            jsonl.push_str(&serde_json::to_string(row)?);
            jsonl.push('\n');
        }
        std::fs::write(dir.join("results.jsonl"), jsonl)?;
        std::fs::write(dir.join("table.txt"), &table)?;
        std::fs::write(dir.join("report.md"), &report)?;
    }
    Ok(suite.rows.iter().all(|r| r.error.is_none()))
}

fn cmd_testbed(args: TestbedArgs) -> Result<bool> {
    let mut all_ok = true;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        all_ok &= ok;
    };

    let problem = fold_problem();

    // PARC + Newton rounds the fold
    let config = AnalyticParcConfig {
        ds: 0.05,
        max_steps: 80,
        ..Default::default()
    };
    let trace = parc_run_analytic(&problem, &[1.0], &config)?;
    let worst_h = trace.points.iter().map(|p| p.grad_norm).fold(0.0, f64::max);
    check(
        "fold traversal residuals",
        worst_h <= 1e-8,
        format!(
            "worst |H| = {worst_h:.2e} over {} points",
            trace.points.len()
        ),
    );
    let lambda_max = trace.lambda_max();
    check(
        "fold approach",
        lambda_max > 0.999,
        format!("lambda_max = {lambda_max:.6}"),
    );
    let down_steps = trace
        .points
        .windows(2)
        .filter(|w| w[1].point.params[0] < 0.0 && w[1].point.lambda < w[0].point.lambda)
        .count();
    check(
        "fold traversal",
        down_steps >= 10,
        format!("{down_steps} decreasing-lambda steps on the negative branch"),
    );

    // NPC stalls at the fold
    match npc_run_analytic(&problem, &[1.0], 20, 1e-8, 10) {
        Err(arctrain::Error::ContinuationStalled { lambda_max, .. }) => check(
            "npc stall",
            lambda_max < 1.0,
            format!("stalled with lambda_max = {lambda_max}"),
        ),
        other => check("npc stall", false, format!("expected stall, got {other:?}")),
    }

    // penalty corrector cross-validation
    let mut obj = RootObjective { problem: &problem };
    let pconfig = ParcConfig {
        ds: 0.05,
        gamma: 10.0,
        bootstrap_dlambda: 0.02,
        max_steps: 40,
        stop_at_target: false,
        corrector: ConvergenceCriteria {
            max_steps: Some(30_000),
            grad_norm_tol: Some(1e-11),
            loss_delta_tol: None,
        },
        adam: AdamConfig::with_alpha(0.01),
        ..ParcConfig::default()
    };
    let penalty_trace =
        arctrain::continuation::parc_run(&mut obj, ParamVector::new(vec![1.0]), &pconfig)?;
    let mut worst_dev: f64 = 0.0;
    for (a, b) in trace.points.iter().zip(&penalty_trace.points) {
        if b.point.lambda > 0.9 {
            break;
        }
        worst_dev = worst_dev.max(a.point.joint_distance(&b.point));
    }
    check(
        "corrector cross-validation",
        worst_dev < 1e-3,
        format!("max pointwise deviation {worst_dev:.2e} for lambda in [0, 0.9]"),
    );

    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir)?;
        trace.write_csv(&dir.join("fold_parc_newton.csv"))?;
        penalty_trace.write_csv(&dir.join("fold_parc_penalty.csv"))?;
        trace.write_sidecar(
            &dir.join("fold_parc_newton.json"),
            &serde_json::json!({"ds": config.ds, "max_steps": config.max_steps}),
        )?;
    }
    Ok(all_ok)
}

fn cmd_report(args: ReportArgs) -> Result<bool> {
    let text = std::fs::read_to_string(&args.results)
        .with_context(|| format!("reading {:?}", args.results))?;
    let rows: Vec<ResultRow> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<std::result::Result<_, _>>()?;
    let summaries = summarize(&rows);
    let mut out = format_table(&summaries);
    out.push('\n');
    out.push_str(&compare_report(&summaries));
    match &args.out {
        Some(path) => {
            write_parent_dirs(path)?;
            std::fs::write(path, out)?;
        }
        None => println!("{out}"),
    }
    Ok(true)
}

fn write_parent_dirs(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}
