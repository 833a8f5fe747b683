use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use riskshift::acceptance;
use riskshift::config::{ExperimentConfig, ExperimentKind, KeyValues};
use riskshift::harness;
use riskshift::HarnessError;

/// Risk relations under covariate shift: experiment runner.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output_path`; CSV goes to stdout when neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Ridge regression risks on P and Q against the affine relation.
    RegressionSweep(RunArgs),
    /// Ridge and logistic misclassification risks against the sec² relation.
    ClassificationSweep(RunArgs),
    /// Theoretical misclassification relation curves.
    RelationCurves(RunArgs),
    /// Subspace denoising risks and relation residuals.
    Denoise(RunArgs),
    /// Logistic and hinge metrics along a one-parameter estimator family.
    Counterexample(RunArgs),
    /// Compressed-sensing residuals across measurement counts.
    CsValidate(RunArgs),
    /// Spectra and top-k subspace similarity of two sample matrices.
    SubspaceAnalyze(RunArgs),
    /// Runs the acceptance suite.
    Selftest,
}

fn run(kind: ExperimentKind, args: RunArgs) -> Result<(), HarnessError> {
    let keys = match &args.config {
        Some(path) => KeyValues::read(path)?,
        None => KeyValues::default(),
    };
    let mut cfg = ExperimentConfig::from_keys(kind, keys)?;
    let common = cfg.common_mut();
    if let Some(seed) = args.seed {
        common.master_seed = seed;
    }
    if args.out.is_some() {
        common.output_path = args.out;
    }
    let table = harness::run(&cfg)?;
    match &cfg.common().output_path {
        Some(path) => table.write_file(path),
        None => table
            .write_to(std::io::stdout().lock())
            .map_err(|e| HarnessError::io("<stdout>", std::io::Error::other(e.to_string()))),
    }
}

fn selftest() -> ExitCode {
    let mut failed = 0;
    for (id, _, _) in acceptance::CRITERIA {
        let r = acceptance::run_criterion(id).expect("criterion id comes from the table");
        println!("{}", r.line());
        failed += usize::from(!r.passed);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::RegressionSweep(a) => (ExperimentKind::RegressionSweep, a),
        Command::ClassificationSweep(a) => (ExperimentKind::ClassificationSweep, a),
        Command::RelationCurves(a) => (ExperimentKind::RelationCurves, a),
        Command::Denoise(a) => (ExperimentKind::Denoising, a),
        Command::Counterexample(a) => (ExperimentKind::Counterexample, a),
        Command::CsValidate(a) => (ExperimentKind::CsValidation, a),
        Command::SubspaceAnalyze(a) => (ExperimentKind::SubspaceAnalyze, a),
        Command::Selftest => return selftest(),
    };
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("riskshift: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
