use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use curvlab::verify::{emit_report, render_report, run_suite, ReportFormat, SuiteConfig, DEFAULT_TOLERANCES, REGISTRY};
use curvlab::Error;

#[derive(Parser)]
#[command(name = "curvlab", version, about = "Numerical checks of curvature identities on S3 principal bundles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one suite and write its report.
    Run(RunArgs),
    /// List the registered suites and tolerance names.
    List,
}

#[derive(clap::Args)]
struct RunArgs {
    suite: String,
    /// hopf, trivial3x2 or trivial3x4
    #[arg(long)]
    bundle: Option<String>,
    /// e.g. reference, cheeger(1), regularized(2), vscale(3), warped(2, 1)
    #[arg(long)]
    metric: Option<String>,
    /// Comma-separated deformation parameters.
    #[arg(long, value_delimiter = ',')]
    t: Option<Vec<f64>>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance override `name=value`; repeatable.
    #[arg(long = "tol")]
    tol: Vec<String>,
    /// Curve length for ODE suites.
    #[arg(long)]
    span: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: String,
    #[arg(long)]
    workers: Option<usize>,
    /// TOML file with the same keys; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn build_config(args: &RunArgs) -> Result<SuiteConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
            SuiteConfig::from_toml(&text)?
        }
        None => SuiteConfig::default(),
    };
    if let Some(b) = &args.bundle {
        cfg.bundle = b.clone();
    }
    if let Some(m) = &args.metric {
        cfg.metric = m.clone();
    }
    if let Some(t) = &args.t {
        cfg.t = t.clone();
    }
    if let Some(n) = args.samples {
        cfg.samples = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(s) = args.span {
        cfg.span = Some(s);
    }
    if let Some(tau) = args.tau {
        cfg.tau = tau;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    for assignment in &args.tol {
        cfg.set_tolerance(assignment)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_) | Error::UnknownSuite { .. } | Error::UnknownBundle(_) | Error::InvalidMetric(_) | Error::InvalidParameter(_)
    )
}

fn run(args: RunArgs) -> ExitCode {
    let result = build_config(&args).and_then(|cfg| {
        let format: ReportFormat = args.format.parse()?;
        let report = run_suite(&args.suite, &cfg)?;
        match &args.out {
            Some(path) => emit_report(&report, format, path)?,
            None => print!("{}", render_report(&report, format)?),
        }
        Ok(report)
    });
    match result {
        Ok(report) => {
            eprintln!("{}: {} ({}) in {:.1}s", report.suite, report.verdict, report.summary, report.wall_time_s);
            if report.verdict.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_config_error(&e) { 2 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match cli.command {
        Command::Run(args) => run(args),
        Command::List => {
            for s in REGISTRY {
                println!("{:<28}{}", s.name, s.description);
            }
            println!("\ntolerances:");
            for (name, value, what) in DEFAULT_TOLERANCES {
                println!("  {name:<18}{value:<8e}{what}");
            }
            ExitCode::SUCCESS
        }
    }
}
