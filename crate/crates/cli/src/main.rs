use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use corrspec::data::correlation;
use corrspec::finance::{self, FinanceError};
use corrspec::harness::{self, ExperimentConfig, OutputFormat};
use corrspec::theory::{self, clip_eigenvalues};
use corrspec::MpParams;

/// Spectral statistics of sample correlation matrices.
#[derive(Debug, Parser)]
#[command(name = "corrspec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Marčenko–Pastur density and distribution function as CSV `x,pdf,cdf`.
    MpCurve {
        /// Ratio T/N.
        #[arg(long)]
        q: f64,
        /// Scale parameter.
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        /// Number of evenly spaced points over [0.9·lower, 1.1·upper].
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment described by a TOML config.
    Simulate {
        /// Experiment config file.
        #[arg(long)]
        config: PathBuf,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output format.
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Worker threads; overrides the config.
        #[arg(long)]
        workers: Option<usize>,
        /// Master seed; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate the equi-correlation λ₁(C)/N of a returns table.
    EstimateRho {
        /// Wide CSV: `Date,TICK1,TICK2,...`, one row per date.
        #[arg(long)]
        input: PathBuf,
    },
    /// Replicate the normalized largest eigenvalue of S and compare with N(0,1).
    CltCheck {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: usize,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 2000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Sup distance between the correlation ESD and the fitted MP law.
    ScalingCheck {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: usize,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Evenly spaced points on (0, 3].
        #[arg(long, default_value_t = 200)]
        grid_points: usize,
    },
    /// Sweep ρ_N = c·N^(−γ) across sample sizes and test normality of λ₁(S).
    BbpSweep {
        /// Ratio T/N, greater than 1.
        #[arg(long)]
        q: f64,
        /// Comma-separated list of T values.
        #[arg(long, value_delimiter = ',', required = true)]
        t_list: Vec<usize>,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 500)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Clip the bulk eigenvalues of the correlation matrix of a returns table.
    Clip {
        /// Wide CSV: `Date,TICK1,TICK2,...`, one row per date.
        #[arg(long)]
        input: PathBuf,
        /// Labelled matrix CSV.
        #[arg(long)]
        output: PathBuf,
    },
    /// Sector analysis of daily returns.
    Finance {
        #[command(subcommand)]
        command: FinanceCommand,
    },
}

#[derive(Debug, Subcommand)]
enum FinanceCommand {
    /// Per-sector N, N/T and λ₁(C)/N plus a total row.
    Summarize {
        #[arg(long)]
        returns: PathBuf,
        /// CSV `ticker,sector`.
        #[arg(long)]
        sectors: PathBuf,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regress rho_bar on lambda1_over_n, joined by sector.
    Regress {
        /// CSV with `sector` and `lambda1_over_n` columns.
        #[arg(long)]
        summary: PathBuf,
        /// CSV with `sector` and `rho_bar` columns.
        #[arg(long)]
        rhobar: PathBuf,
    },
    /// Cluster-ordered correlation matrix of one sector.
    Heatmap {
        #[arg(long)]
        returns: PathBuf,
        #[arg(long)]
        sectors: PathBuf,
        #[arg(long)]
        sector: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("{}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("{}", path.display()))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct RhoEstimate {
    n: usize,
    t: usize,
    rho_hat: f64,
    mp_q: f64,
    mp_sigma2: f64,
}

#[derive(Serialize)]
struct Residual {
    residual: f64,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::MpCurve {
            q,
            sigma2,
            points,
            out,
        } => {
            let mp = MpParams::new(q, sigma2)?;
            let mut w = csv::Writer::from_writer(output(out.as_deref())?);
            w.write_record(["x", "pdf", "cdf"])?;
            for (x, pdf, cdf) in mp.curve(points) {
                w.serialize((x, pdf, cdf))?;
            }
            w.flush()?;
        }
        Command::Simulate {
            config,
            out,
            format,
            workers,
            seed,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(k) = workers {
                cfg.workers = k;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let result = harness::run_experiment(&cfg)?;
            for e in &result.errors {
                eprintln!(
                    "warning: grid point {} (n={}, t={}) rep {}: {}",
                    e.grid_index, e.n, e.t, e.rep, e.reason
                );
            }
            let format = match format {
                Format::Csv => OutputFormat::Csv,
                Format::Jsonl => OutputFormat::Jsonl,
            };
            harness::write_rows(output(out.as_deref())?, &result.rows, format)?;
        }
        Command::EstimateRho { input } => {
            let (_, _, x) = finance::parse_returns(open(&input)?)
                .with_context(|| format!("{}", input.display()))?;
            let mp = theory::fitted_mp(&x)?;
            print_json(&RhoEstimate {
                n: x.n(),
                t: x.t(),
                rho_hat: theory::estimate_rho(&x)?,
                mp_q: mp.q(),
                mp_sigma2: mp.sigma2(),
            })?;
        }
        Command::CltCheck {
            n,
            t,
            rho,
            reps,
            seed,
            workers,
        } => print_json(&harness::clt_check(n, t, rho, reps, seed, workers)?)?,
        Command::ScalingCheck {
            n,
            t,
            rho,
            seed,
            grid_points,
        } => print_json(&Residual {
            residual: harness::scaling_check(n, t, rho, seed, grid_points)?,
        })?,
        Command::BbpSweep {
            q,
            t_list,
            c,
            gamma,
            reps,
            seed,
            workers,
        } => {
            for row in harness::bbp_sweep(q, &t_list, c, gamma, reps, seed, workers)? {
                print_json(&row)?;
            }
        }
        Command::Clip { input, output } => {
            let (_, tickers, x) = finance::parse_returns(open(&input)?)
                .with_context(|| format!("{}", input.display()))?;
            let c = correlation(&x)?;
            let cleaned = clip_eigenvalues(&c, x.t())?;
            let order: Vec<usize> = (0..tickers.len()).collect();
            finance::export_heatmap(&cleaned, &order, &tickers, &output)?;
        }
        Command::Finance { command } => run_finance(command)?,
    }
    Ok(())
}

fn run_finance(command: FinanceCommand) -> Result<()> {
    match command {
        FinanceCommand::Summarize {
            returns,
            sectors,
            out,
        } => {
            let ds = finance::load_returns_csv(&returns, &sectors)?;
            let rows = finance::sector_summary(&ds)?;
            finance::write_summary(output(out.as_deref())?, &rows)?;
        }
        FinanceCommand::Regress { summary, rhobar } => {
            let s = finance::read_summary(open(&summary)?)
                .with_context(|| format!("{}", summary.display()))?;
            let r = finance::read_rho_bar(open(&rhobar)?)
                .with_context(|| format!("{}", rhobar.display()))?;
            print_json(&finance::regress_summary(&s, &r)?)?;
        }
        FinanceCommand::Heatmap {
            returns,
            sectors,
            sector,
            out,
        } => {
            let ds = finance::load_returns_csv(&returns, &sectors)?;
            let (tickers, x) = ds
                .sector(&sector)
                .ok_or_else(|| anyhow::anyhow!("unknown sector {sector}"))?;
            let c = correlation(&x).map_err(|e| match e {
                corrspec::SpectraError::ConstantRow(i) => {
                    FinanceError::ConstantTicker(tickers[i].clone())
                }
                other => other.into(),
            })?;
            let order = finance::cluster_order(&c);
            finance::export_heatmap(&c, &order, &tickers, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
