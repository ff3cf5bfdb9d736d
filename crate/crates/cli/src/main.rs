//! `confsel`: weighted conformal p-values and FDR-controlled selection
//! under covariate shift, from CSV in to CSV/JSON out.
//!
//! Exit codes: 0 success, 2 usage or input error, 1 internal error.

mod io;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use confsel::metrics::{fdp, power, selection_discrepancy, weighted_fdp};
use confsel::pvalues::{wcp_nonrandomized, wcp_randomized};
use confsel::selection::{select, SelectionResult};
use confsel::{Method, SelectionConfig, WeightedCalibration, WeightedTest};
use confsel_simlab::prds::prds_counterexample_mc;
use confsel_simlab::{run_trials, Coupling, Covariance, Scenario, ScoreChoice, SimulationSpec};

use io::{emit_json, internal, read_calibration, read_test, write_sidecar, Manifest};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or malformed input files; exit code 2.
    Usage(String),
    /// Everything else; exit code 1.
    Internal(String),
}

impl From<confsel::Error> for CliError {
    fn from(e: confsel::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "confsel", version, about = "FDR-controlled screening with weighted conformal p-values")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute weighted conformal p-values for test units.
    Pvalues(PvaluesArgs),
    /// Run a selection procedure and emit the selected set with diagnostics.
    Select(SelectArgs),
    /// Run a synthetic simulation study and emit per-trial and summary metrics.
    Simulate(SimulateArgs),
    /// Monte-Carlo check of the positive-dependence counterexample constants.
    PrdsCheck(PrdsArgs),
    /// Evaluate a saved selection against test units with null flags.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct PvaluesArgs {
    /// Calibration CSV with columns score,weight.
    #[arg(long)]
    calib: PathBuf,
    /// Test CSV with columns `score,weight[,null_flag]`.
    #[arg(long)]
    test: PathBuf,
    /// Use tie-broken randomized p-values (true) or the deterministic
    /// variant (false).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    randomized: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    tie_tolerance: f64,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CliMethod {
    Wbh,
    WcsHete,
    WcsHomo,
    WcsDtm,
    HcWcs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CliPruning {
    Hete,
    Homo,
    Dtm,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    calib: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Nominal FDR level in (0, 1).
    #[arg(long)]
    q: f64,
    #[arg(long, value_enum)]
    method: CliMethod,
    /// Pruning rule for --method hc-wcs.
    #[arg(long, value_enum, default_value_t = CliPruning::Homo)]
    pruning: CliPruning,
    /// Randomized p-values for --method wbh.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    randomized: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    tie_tolerance: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CliScenario {
    Ite1,
    Ite2,
    Ite3,
    Outlier,
    CovshiftBinary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CliCoupling {
    Independent,
    Positive,
    Negative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CliCorr {
    Ind,
    Corr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CliScore {
    OracleCdf,
    CqrMedian,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    scenario: CliScenario,
    #[arg(long, value_enum, default_value_t = CliCoupling::Independent)]
    coupling: CliCoupling,
    /// Covariate correlation: independent or AR(1) with coefficient 0.9.
    #[arg(long, value_enum, default_value_t = CliCorr::Ind)]
    corr: CliCorr,
    /// Calibration size.
    #[arg(long, default_value_t = 250)]
    n: usize,
    /// Test size.
    #[arg(long, default_value_t = 100)]
    m: usize,
    /// Training-fold size (scenarios that center predictions on it).
    #[arg(long, default_value_t = 750)]
    n_train: usize,
    #[arg(long, default_value_t = 0.1)]
    q: f64,
    #[arg(long, default_value_t = 500)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Outlier fraction (outlier scenario).
    #[arg(long, default_value_t = 0.3)]
    rho: f64,
    /// Outlier signal strength (outlier scenario).
    #[arg(long, default_value_t = 3.0)]
    signal: f64,
    #[arg(long, value_enum, default_value_t = CliScore::OracleCdf)]
    score: CliScore,
    /// Run with weights perturbed by a factor up to this gamma >= 1.
    #[arg(long)]
    gamma: Option<f64>,
    /// Output directory for summary.json and trials.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PrdsArgs {
    #[arg(long)]
    draws: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Selection JSON produced by `confsel select`.
    #[arg(long)]
    selection: PathBuf,
    /// Test CSV with a null_flag column.
    #[arg(long)]
    test: PathBuf,
    /// Optional reference selection JSON for the discrepancy metric.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("CONFSEL_THREADS") {
        if let Ok(k) = threads.trim().parse::<usize>() {
            if k > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
        }
    }
    let started = Instant::now();
    let result = match cli.command {
        Command::Pvalues(args) => cmd_pvalues(args, started),
        Command::Select(args) => cmd_select(args, started),
        Command::Simulate(args) => cmd_simulate(args, started),
        Command::PrdsCheck(args) => cmd_prds_check(args, started),
        Command::Evaluate(args) => cmd_evaluate(args, started),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load_units(
    calib_path: &Path,
    test_path: &Path,
) -> Result<(WeightedCalibration, WeightedTest), CliError> {
    let calib_file = read_calibration(calib_path)?;
    let test_file = read_test(test_path)?;
    let calib = WeightedCalibration::new(calib_file.scores, calib_file.weights)?;
    let test = WeightedTest::new(test_file.scores, test_file.weights, test_file.null_flags)?;
    Ok((calib, test))
}

fn cmd_pvalues(args: PvaluesArgs, started: Instant) -> Result<(), CliError> {
    if !args.tie_tolerance.is_finite() || args.tie_tolerance < 0.0 {
        return Err(CliError::Usage(format!(
            "--tie-tolerance must be finite and >= 0 (got {})",
            args.tie_tolerance
        )));
    }
    let (calib, test) = load_units(&args.calib, &args.test)?;
    let pvalues = if args.randomized {
        wcp_randomized(&calib, &test, args.seed, args.tie_tolerance)
    } else {
        wcp_nonrandomized(&calib, &test, args.tie_tolerance)
    };
    let kind = if args.randomized { "randomized" } else { "nonrandomized" };

    let mut body = String::from("index,pvalue,kind\n");
    for (j, p) in pvalues.values().iter().enumerate() {
        body.push_str(&format!("{j},{p},{kind}\n"));
    }

    let manifest = Manifest::new(
        "pvalues",
        args.randomized.then_some(args.seed),
        serde_json::json!({
            "randomized": args.randomized,
            "tie_tolerance": args.tie_tolerance,
        }),
        &[&args.calib, &args.test],
    )?;
    match &args.out {
        Some(path) => {
            fs::write(path, body)
                .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
            write_sidecar(path, &manifest, started.elapsed().as_secs_f64())?;
        }
        None => print!("{body}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct SelectOutput {
    q: f64,
    seed: u64,
    randomized_pvalues: bool,
    tie_tolerance: f64,
    result: SelectionResult,
    manifest: Manifest,
}

fn resolve_method(method: CliMethod, pruning: CliPruning) -> Method {
    match method {
        CliMethod::Wbh => Method::Wbh,
        CliMethod::WcsHete => Method::WcsHete,
        CliMethod::WcsHomo => Method::WcsHomo,
        CliMethod::WcsDtm => Method::WcsDtm,
        CliMethod::HcWcs => match pruning {
            CliPruning::Hete => Method::HcWcsHete,
            CliPruning::Homo => Method::HcWcsHomo,
            CliPruning::Dtm => Method::HcWcsDtm,
        },
    }
}

fn cmd_select(args: SelectArgs, started: Instant) -> Result<(), CliError> {
    let method = resolve_method(args.method, args.pruning);
    let config = SelectionConfig {
        q: args.q,
        method,
        randomized_pvalues: args.randomized,
        seed: args.seed,
        tie_tolerance: args.tie_tolerance,
    };
    config.validate()?;
    let (calib, test) = load_units(&args.calib, &args.test)?;
    let result = select(&calib, &test, &config)?;

    let manifest = Manifest::new(
        "select",
        Some(args.seed),
        serde_json::to_value(config).map_err(internal)?,
        &[&args.calib, &args.test],
    )?;
    let output = SelectOutput {
        q: args.q,
        seed: args.seed,
        randomized_pvalues: args.randomized,
        tie_tolerance: args.tie_tolerance,
        result,
        manifest: manifest.clone(),
    };
    emit_json(&output, args.out.as_deref(), &manifest, started.elapsed().as_secs_f64())
}

#[derive(Serialize)]
struct SimulateOutput {
    summary: confsel_simlab::RunSummary,
    manifest: Manifest,
}

fn cmd_simulate(args: SimulateArgs, started: Instant) -> Result<(), CliError> {
    let spec = SimulationSpec {
        scenario: match args.scenario {
            CliScenario::Ite1 => Scenario::Ite1,
            CliScenario::Ite2 => Scenario::Ite2,
            CliScenario::Ite3 => Scenario::Ite3,
            CliScenario::Outlier => Scenario::Outlier,
            CliScenario::CovshiftBinary => Scenario::CovshiftBinary,
        },
        coupling: match args.coupling {
            CliCoupling::Independent => Coupling::Independent,
            CliCoupling::Positive => Coupling::Positive,
            CliCoupling::Negative => Coupling::Negative,
        },
        covariance: match args.corr {
            CliCorr::Ind => Covariance::Identity,
            CliCorr::Corr => Covariance::Ar09,
        },
        n_train: args.n_train,
        n_calib: args.n,
        m: args.m,
        signal_a: args.signal,
        rho: args.rho,
        q: args.q,
        trials: args.trials,
        master_seed: args.seed,
        score: match args.score {
            CliScore::OracleCdf => ScoreChoice::OracleCdf,
            CliScore::CqrMedian => ScoreChoice::CqrMedian,
        },
        weight_gamma: args.gamma,
        fresh_centers_per_trial: false,
    };
    spec.validate()?;
    let output = run_trials(&spec)?;

    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", args.out.display())))?;

    let mut trials_csv =
        String::from("trial,method,n_selected,fdp,power,weighted_fdp,discrepancy_vs_wbh\n");
    for r in &output.records {
        let disc = r
            .discrepancy_vs_wbh
            .map(|d| d.to_string())
            .unwrap_or_default();
        trials_csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.trial, r.method, r.n_selected, r.fdp, r.power, r.weighted_fdp, disc
        ));
    }
    let trials_path = args.out.join("trials.csv");
    fs::write(&trials_path, trials_csv)
        .map_err(|e| CliError::Internal(format!("cannot write trials.csv: {e}")))?;

    let manifest = Manifest::new(
        "simulate",
        Some(args.seed),
        serde_json::to_value(spec).map_err(internal)?,
        &[],
    )?;
    let summary_path = args.out.join("summary.json");
    let body = SimulateOutput {
        summary: output.summary,
        manifest: manifest.clone(),
    };
    let text = serde_json::to_string_pretty(&body).map_err(internal)? + "\n";
    fs::write(&summary_path, text)
        .map_err(|e| CliError::Internal(format!("cannot write summary.json: {e}")))?;
    write_sidecar(&summary_path, &manifest, started.elapsed().as_secs_f64())?;
    write_sidecar(&trials_path, &manifest, started.elapsed().as_secs_f64())?;
    Ok(())
}

#[derive(Serialize)]
struct PrdsOutput {
    report: confsel_simlab::prds::PrdsReport,
    manifest: Manifest,
}

fn cmd_prds_check(args: PrdsArgs, started: Instant) -> Result<(), CliError> {
    let report = prds_counterexample_mc(args.draws, args.seed)?;
    let manifest = Manifest::new(
        "prds-check",
        Some(args.seed),
        serde_json::json!({ "draws": args.draws }),
        &[],
    )?;
    let output = PrdsOutput {
        report,
        manifest: manifest.clone(),
    };
    emit_json(&output, args.out.as_deref(), &manifest, started.elapsed().as_secs_f64())
}

#[derive(Serialize)]
struct EvaluateOutput {
    n_selected: usize,
    fdp: f64,
    power: f64,
    weighted_fdp: f64,
    discrepancy: Option<f64>,
    manifest: Manifest,
}

fn read_selected(path: &Path) -> Result<Vec<usize>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: cannot read: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: invalid JSON: {e}", path.display())))?;
    let selected = value
        .pointer("/result/selected")
        .or_else(|| value.pointer("/selected"))
        .and_then(|v| v.as_array())
        .ok_or_else(|| {
            CliError::Usage(format!("{}: no selected array found", path.display()))
        })?;
    selected
        .iter()
        .map(|v| {
            v.as_u64().map(|x| x as usize).ok_or_else(|| {
                CliError::Usage(format!("{}: selected indices must be integers", path.display()))
            })
        })
        .collect()
}

fn cmd_evaluate(args: EvaluateArgs, started: Instant) -> Result<(), CliError> {
    let selected = read_selected(&args.selection)?;
    let test_file = read_test(&args.test)?;
    let null_flags = test_file.null_flags.ok_or_else(|| {
        CliError::Usage(format!(
            "{}: evaluation needs a null_flag column",
            args.test.display()
        ))
    })?;
    let reference = match &args.reference {
        Some(path) => Some(read_selected(path)?),
        None => None,
    };

    let mut inputs: Vec<&Path> = vec![&args.selection, &args.test];
    if let Some(path) = &args.reference {
        inputs.push(path);
    }
    let manifest = Manifest::new("evaluate", None, serde_json::json!({}), &inputs)?;
    let output = EvaluateOutput {
        n_selected: selected.len(),
        fdp: fdp(&selected, &null_flags)?,
        power: power(&selected, &null_flags)?,
        weighted_fdp: weighted_fdp(&selected, &null_flags, &test_file.weights)?,
        discrepancy: reference
            .as_deref()
            .map(|r| selection_discrepancy(&selected, r)),
        manifest: manifest.clone(),
    };
    emit_json(&output, args.out.as_deref(), &manifest, started.elapsed().as_secs_f64())
}
