use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fsanm::fs_toeplitz::RetrievalOptions;
use fsanm::solver::SolverOptions;
use fsanm_bench::tools::{evaluate_norm, retrieve, write_trace, NormRequest, RetrieveRequest};
use fsanm_bench::{emit_results, run_experiment, write_csv, write_json, BenchError, ExperimentConfig, Format};

#[derive(Parser)]
#[command(name = "fsanm", version, about = "FS-ANM channel estimation benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment from a TOML config.
    Run(RunArgs),
    /// Atomic norm of a vector given as JSON.
    Norm(NormArgs),
    /// Frequency retrieval from a Toeplitz generating sequence given as JSON.
    Retrieve(RetrieveArgs),
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct NormArgs {
    input: PathBuf,
    /// Write the per-iteration residuals as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-7)]
    eps_rel: f64,
    #[arg(long, default_value_t = 1e-9)]
    eps_abs: f64,
    #[arg(long, default_value_t = 50_000)]
    max_iter: usize,
}

#[derive(Args)]
struct RetrieveArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    rank_threshold: f64,
    #[arg(long, default_value_t = 1e-6)]
    residual_tolerance: f64,
}

fn run(args: RunArgs) -> Result<(), BenchError> {
    let mut cfg = ExperimentConfig::from_toml(&fs::read_to_string(&args.config)?)?;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.base_seed = s;
    }
    let out = run_experiment(&cfg, args.jobs)?;
    match &args.out {
        Some(path) => emit_results(&out, path, args.format)?,
        None => {
            let stdout = io::stdout().lock();
            match args.format {
                Format::Csv => write_csv(&out.rows, stdout)?,
                Format::Json => write_json(&out, stdout)?,
            }
        }
    }
    let mut err = io::stderr().lock();
    writeln!(err, "{:<14} {:>8} {:>7} {:>8} {:>12}", "method", "snr_db", "trials", "failed", "mean_nmse_db")?;
    for s in &out.summary {
        writeln!(err, "{:<14} {:>8} {:>7} {:>8} {:>12.3}", s.method, s.snr_db, s.trials, s.failures, s.mean_nmse_db)?;
    }
    Ok(())
}

fn norm(args: NormArgs) -> Result<(), BenchError> {
    let req: NormRequest = serde_json::from_str(&fs::read_to_string(&args.input)?)?;
    let opts = SolverOptions {
        eps_rel: args.eps_rel,
        eps_abs: args.eps_abs,
        max_iter: args.max_iter,
        record_trace: args.trace.is_some(),
        ..SolverOptions::default()
    };
    let report = evaluate_norm(&req, &opts)?;
    if let Some(path) = &args.trace {
        write_trace(&report.trace, fs::File::create(path)?)?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    if !report.converged {
        return Err(fsanm::Error::NotConverged {
            iterations: report.iterations,
            primal: report.primal_residual,
            dual: report.dual_residual,
        }
        .into());
    }
    Ok(())
}

fn retrieve_cmd(args: RetrieveArgs) -> Result<(), BenchError> {
    let req: RetrieveRequest = serde_json::from_str(&fs::read_to_string(&args.input)?)?;
    let opts = RetrievalOptions {
        rank_threshold: args.rank_threshold,
        residual_tolerance: args.residual_tolerance,
    };
    println!("{}", serde_json::to_string_pretty(&retrieve(&req, &opts)?)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Norm(a) => norm(a),
        Command::Retrieve(a) => retrieve_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
