//! `rmst`: compare restricted mean survival times of two groups.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use rmst_core::io::load_sim_config;
use rmst_core::sim::run_study_with;
use rmst_core::{km_table, DatasetFile, Error, Estimand, Method, ReportDocument, ReportSettings};

#[derive(Parser)]
#[command(
    name = "rmst",
    version,
    about = "Two-sample RMST tests with studentized permutation inference"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test equality of RMSTs and report confidence intervals.
    Test(TestArgs),
    /// Print Kaplan-Meier, censoring-KM, at-risk and event counts per group.
    Km(KmArgs),
    /// Run a simulation grid described by a TOML config.
    Sim(SimArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    All,
    Asymptotic,
    StudentizedPerm,
    UnstudentizedPerm,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimandArg {
    Difference,
    Ratio,
    Both,
}

#[derive(clap::Args)]
struct TestArgs {
    /// CSV file with header `time,status,group`.
    dataset: PathBuf,
    /// End of the restriction window.
    #[arg(long)]
    tau: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "all")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "difference")]
    estimand: EstimandArg,
    /// Number of permutation replicates.
    #[arg(long = "B", visible_alias = "n-perm", default_value_t = 2000)]
    n_perm: usize,
    #[arg(long, env = "RMST_SEED", default_value_t = 1)]
    seed: u64,
    /// Round times to this many decimals before analysis.
    #[arg(long)]
    round: Option<u32>,
    /// Also write the report as JSON to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print JSON instead of the text table.
    #[arg(long)]
    json: bool,
    /// Worker threads for the permutation engine.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(clap::Args)]
struct KmArgs {
    dataset: PathBuf,
    /// Only list step points up to this time.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    round: Option<u32>,
    /// Write the TSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SimArgs {
    config: PathBuf,
    /// Output directory for results.tsv and results.json.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; overrides the config.
    #[arg(long)]
    workers: Option<usize>,
}

/// Exit codes; 2 is also what argument parsing errors use.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidInput(_)) => 2,
        Some(Error::Parse(_)) => 3,
        Some(Error::NotEstimable { .. }) => 4,
        Some(Error::Degenerate(_)) => 5,
        Some(Error::Config { .. }) => 6,
        Some(Error::Calibration(_) | Error::Pathological(_) | Error::Model(_)) => 7,
        None => 1,
    }
}

fn set_workers(workers: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::InvalidInput("--workers must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_test(args: TestArgs) -> anyhow::Result<()> {
    set_workers(args.workers)?;
    let data = DatasetFile::read(&args.dataset, args.round)?;
    let methods = match args.method {
        MethodArg::All => Method::ALL.to_vec(),
        MethodArg::Asymptotic => vec![Method::Asymptotic],
        MethodArg::StudentizedPerm => vec![Method::StudentizedPerm],
        MethodArg::UnstudentizedPerm => vec![Method::UnstudentizedPerm],
    };
    let estimands = match args.estimand {
        EstimandArg::Difference => vec![Estimand::Difference],
        EstimandArg::Ratio => vec![Estimand::Ratio],
        EstimandArg::Both => vec![Estimand::Difference, Estimand::Ratio],
    };
    if args.method == MethodArg::UnstudentizedPerm && args.estimand == EstimandArg::Ratio {
        return Err(Error::InvalidInput(
            "the unstudentized permutation test is defined for the difference only".into(),
        )
        .into());
    }
    eprintln!(
        "group 1 = `{}` ({} obs), group 2 = `{}` ({} obs)",
        data.labels[0],
        data.sample1.len(),
        data.labels[1],
        data.sample2.len()
    );
    let settings = ReportSettings {
        tau: args.tau,
        alpha: args.alpha,
        n_perm: args.n_perm,
        seed: args.seed,
        methods,
        estimands,
    };
    let mut report = ReportDocument::build(&data, settings)?;
    report.input = args
        .dataset
        .file_name()
        .map(|f| f.to_string_lossy().into_owned());
    if let Some(out) = &args.out {
        write_file(out, &report.to_json())?;
    }
    if args.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_text());
    }
    Ok(())
}

fn cmd_km(args: KmArgs) -> anyhow::Result<()> {
    if let Some(tau) = args.tau {
        if !(tau > 0.0) {
            return Err(Error::InvalidInput(format!("--tau must be positive, got {tau}")).into());
        }
    }
    let data = DatasetFile::read(&args.dataset, args.round)?;
    let table = km_table(&data, args.tau);
    match &args.out {
        Some(path) => write_file(path, &table),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

fn cmd_sim(args: SimArgs) -> anyhow::Result<()> {
    let mut config = load_sim_config(&args.config)?;
    if args.workers.is_some() {
        config.workers = args.workers;
    }
    set_workers(config.workers)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let start = Instant::now();
    let result = run_study_with(&config, |cell| {
        let status = cell
            .error
            .as_deref()
            .map_or("ok".to_string(), |e| format!("FAILED: {e}"));
        eprintln!(
            "{}  {:.1}s  {status}",
            cell.cell.spec.label(),
            cell.elapsed_secs
        );
    })?;
    write_file(&args.out.join("results.tsv"), &result.to_tsv())?;
    write_file(&args.out.join("results.json"), &result.to_json())?;
    print!("{}", result.summary_table());
    let failed = result.cells.iter().filter(|c| c.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} cell(s) failed; see the error column of results.tsv");
    }
    eprintln!(
        "finished {} cells in {:.1}s",
        result.cells.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Km(args) => cmd_km(args),
        Command::Sim(args) => cmd_sim(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
