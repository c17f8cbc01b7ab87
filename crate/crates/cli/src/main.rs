//! Command-line front end: run experiments, solve regularization factors,
//! and extract SINR histograms from result files.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical error,
//! 4 I/O error.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use satprecode::error::{Error, Result};
use satprecode::harness;
use satprecode::metrics;
use satprecode::regularization::{scaling_tm, solve_gamma, RegularizationInputs};

#[derive(Parser)]
#[command(name = "satprecode", version, about = "Distributed precoding simulator for multi-gateway multibeam satellites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment from a configuration file.
    Run(RunArgs),
    /// Solve the regularization root equation for explicit eigenvalue and
    /// leakage lists, printing gamma and the scaling t.
    GammaSolve(GammaArgs),
    /// Emit the SINR histogram of one scheme at one SNR point from a
    /// results CSV.
    Histogram(HistogramArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for the trial loop.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct GammaArgs {
    /// Comma-separated eigenvalues of B^H H^H H B.
    #[arg(long, value_delimiter = ',', required = true)]
    lambda: Vec<f64>,
    /// Comma-separated leakage diagonal entries (same length as lambda).
    #[arg(long, value_delimiter = ',', required = true)]
    sigma: Vec<f64>,
    /// Users per cluster.
    #[arg(long)]
    k: usize,
    /// Cluster power budget P_m.
    #[arg(long)]
    pm: f64,
}

#[derive(Args)]
struct HistogramArgs {
    /// Results CSV produced by `run`.
    #[arg(long)]
    input: PathBuf,
    /// Scheme name, e.g. obbf-adaptive.
    #[arg(long)]
    scheme: String,
    /// SNR point in dB.
    #[arg(long)]
    snr_db: f64,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::GammaSolve(args) => gamma_solve(args),
        Command::Histogram(args) => histogram(args),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = harness::load_config(&args.config)?;
    let table = harness::run_experiment(&cfg, args.workers)?;
    harness::write_results(&table, &cfg.output_path)?;
    println!(
        "wrote {} trial rows and {} aggregates to {} (summary: {})",
        table.rows.len(),
        table.aggregates.len(),
        cfg.output_path.display(),
        harness::summary_path(&cfg.output_path).display()
    );
    Ok(())
}

fn gamma_solve(args: GammaArgs) -> Result<()> {
    // Pair up and sort descending by eigenvalue; the root is order-free
    // but the inputs contract expects eigen order.
    let mut pairs: Vec<(f64, f64)> = args.lambda.iter().cloned().zip(args.sigma.clone()).collect();
    if pairs.len() != args.sigma.len() {
        return Err(Error::Config("lambda and sigma must have equal length".into()));
    }
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).ok_or(()).unwrap_or(std::cmp::Ordering::Equal));
    let (lambda, sigma): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let inputs = RegularizationInputs::new(lambda.clone(), sigma, args.k, args.pm)?;
    let gamma = solve_gamma(&inputs);
    let t = scaling_tm(&lambda, gamma, args.pm)?;
    println!("gamma = {gamma}");
    println!("t = {t}");
    Ok(())
}

fn histogram(args: HistogramArgs) -> Result<()> {
    let values = harness::read_sinr_values(&args.input, &args.scheme, args.snr_db)?;
    if values.is_empty() {
        return Err(Error::Config(format!(
            "no sinr_db rows for scheme {} at {} dB in {}",
            args.scheme,
            args.snr_db,
            args.input.display()
        )));
    }
    let bins = metrics::sinr_histogram(&values);
    let mut out = String::from("bin_low_db,bin_high_db,count\n");
    for bin in bins {
        out.push_str(&format!("{},{},{}\n", bin.low_db, bin.high_db, bin.count));
    }
    match args.output {
        Some(path) => std::fs::write(&path, out.as_bytes())
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?,
        None => std::io::stdout()
            .write_all(out.as_bytes())
            .map_err(|e| Error::Io(e.to_string()))?,
    }
    Ok(())
}
