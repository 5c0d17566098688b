use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hsic_planner::activation_store::{read_dump, Pooling};
use hsic_planner::hsic_kernel::Kernel;
use hsic_planner::importance_map::{build_independence_matrix, importance, ImportanceReport};
use hsic_planner::net_model::BudgetKind;
use hsic_planner::planner::{self, Budget, PlanConfig, PlanError, PruningPlan, ReportFormat, DEFAULT_SAMPLES};
use hsic_planner::verify::verify;

#[derive(Parser)]
#[command(name = "hsic-planner", version, about = "Plan per-layer channel widths from activation independence")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute importances, solve for keep ratios and write a pruning plan.
    Plan(PlanArgs),
    /// Emit the layer independence matrix.
    Hsic(HsicArgs),
    /// Run the invariance and monotonicity checks on a dump.
    Verify {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Render an existing plan.
    Report {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value = "text")]
        format: ReportFormat,
    },
}

#[derive(Args)]
struct Features {
    #[arg(long)]
    manifest: PathBuf,
    /// Number of samples to use; defaults to min(64, n).
    #[arg(long)]
    samples: Option<usize>,
    /// linear, rbf or rbf:<bandwidth>
    #[arg(long, default_value = "linear")]
    kernel: Kernel,
    #[arg(long, default_value = "flatten")]
    pooling: Pooling,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    features: Features,
    #[arg(long)]
    topology: PathBuf,
    #[arg(long, default_value = "flops")]
    budget_kind: BudgetKind,
    /// Budget as a fraction of the unpruned cost.
    #[arg(long, conflicts_with = "budget_abs")]
    budget_ratio: Option<f64>,
    /// Budget in absolute FLOPs or parameters.
    #[arg(long)]
    budget_abs: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    alpha_min: f64,
    #[arg(long, default_value_t = 1)]
    divisor: u64,
    /// Where to write the plan JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Format of the report printed to stdout.
    #[arg(long, default_value = "text")]
    format: ReportFormat,
}

#[derive(Args)]
struct HsicArgs {
    #[command(flatten)]
    features: Features,
    /// csv (matrix only) or json (matrix, importance and diagnostics).
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), PlanError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| PlanError::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_plan(args: PlanArgs) -> Result<(), PlanError> {
    let budget = match (args.budget_ratio, args.budget_abs) {
        (_, Some(v)) => Budget::Absolute(v),
        (Some(r), None) => Budget::Ratio(r),
        (None, None) => Budget::Ratio(0.5),
    };
    let config = PlanConfig {
        budget_kind: args.budget_kind,
        budget,
        beta: args.features.beta,
        kernel: args.features.kernel,
        pooling: args.features.pooling,
        alpha_min: args.alpha_min,
        divisor: args.divisor,
        samples: args.features.samples,
    };
    let outcome = planner::plan(&args.features.manifest, &args.topology, &config)?;
    if let Some(path) = &args.out {
        emit(&outcome.plan.to_json(), Some(path))?;
    }
    print!("{}", planner::report(&outcome.plan, args.format));
    for g in &outcome.group_importance.all_degenerate {
        eprintln!("warning: every layer in group {g} is degenerate; its importance is 0");
    }
    Ok(())
}

fn run_hsic(args: HsicArgs) -> Result<(), PlanError> {
    let f = &args.features;
    let dump = read_dump(&f.manifest)?;
    let samples = f.samples.unwrap_or(DEFAULT_SAMPLES.min(dump.n));
    let dump = dump.with_samples(samples)?;
    let h = build_independence_matrix(&dump, f.kernel, f.pooling)?;
    let text = match args.format.as_str() {
        "csv" => h.to_csv(),
        "json" => {
            let imp = importance(&h, f.beta);
            let report = ImportanceReport::new(&h, &imp, samples);
            serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
        }
        other => return Err(PlanError::Config(format!("unknown hsic format {other:?} (expected csv or json)"))),
    };
    for name in h.degenerate_layers() {
        eprintln!("warning: layer {name} has constant activations; nHSIC set to 0");
    }
    emit(&text, args.out.as_deref())
}

fn run() -> Result<ExitCode, PlanError> {
    match Cli::parse().command {
        Command::Plan(args) => run_plan(args).map(|_| ExitCode::SUCCESS),
        Command::Hsic(args) => run_hsic(args).map(|_| ExitCode::SUCCESS),
        Command::Verify { manifest } => {
            let report = verify(&manifest)?;
            print!("{}", report.render());
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Report { plan, format } => {
            let text = std::fs::read_to_string(&plan)
                .map_err(|e| PlanError::Config(format!("cannot read {}: {e}", plan.display())))?;
            let plan = PruningPlan::from_json(&text)
                .map_err(|e| PlanError::Config(format!("invalid plan {}: {e}", plan.display())))?;
            print!("{}", planner::report(&plan, format));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
