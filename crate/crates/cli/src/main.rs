use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod io;
mod record;
mod specs;

use commands::{CiBandArgs, CoverageArgs, Emit, PcfArgs, DEFAULT_SEED};
use config::{ExperimentConfig, IntegrationFile, VarianceComparisonFile};
use error::{CliError, CliResult};

/// Bootstrap audits for point process statistics.
#[derive(Debug, Parser)]
#[command(name = "ppboot", version)]
struct Cli {
    /// Root seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run the experiment described by a TOML file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Add wall-clock seconds to experiment records.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a Poisson pattern; writes the CSV and its window sidecar.
    Simulate {
        #[arg(long)]
        lambda: Option<f64>,
        /// Intensity on an interval: linear:a,b or const:c.
        #[arg(long)]
        lambda_spec: Option<String>,
        /// x_min,x_max[,y_min,y_max] or a sidecar JSON path.
        #[arg(long, default_value = "0,1,0,1")]
        window: String,
    },
    /// Product-density estimate on a radius grid.
    Pcf {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        window: Option<PathBuf>,
        #[arg(long)]
        rmin: f64,
        #[arg(long)]
        rmax: f64,
        #[arg(long, default_value_t = 50)]
        rsteps: usize,
        #[arg(long)]
        bandwidth: f64,
        #[arg(long, default_value = "epa")]
        kernel: String,
    },
    /// Variance coefficients for a range of n.
    AlphaTable {
        #[arg(long, default_value_t = 1)]
        nmin: u64,
        #[arg(long)]
        nmax: u64,
        #[arg(long, default_value = "multinomial")]
        scheme: String,
    },
    /// Monte Carlo bootstrap variance and its closed-form limit.
    BootVar {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        window: Option<PathBuf>,
        #[arg(long)]
        f_spec: String,
        #[arg(long = "N", default_value_t = 10_000)]
        resamples: usize,
        #[arg(long, default_value = "multinomial")]
        scheme: String,
    },
    /// Poisson moment integrals s2, s3, s4 and E theta.
    Moments {
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value = "0,1,0,1")]
        window: String,
        #[arg(long)]
        f_spec: String,
        #[arg(long, default_value = "quad")]
        method: String,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        nodes: Option<usize>,
    },
    /// Pointwise confidence band for a pattern on an interval.
    CiBand {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        window: Option<PathBuf>,
        #[arg(long)]
        h: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value = "closed")]
        method: String,
        #[arg(long, default_value_t = config::default_grid_steps())]
        grid_steps: usize,
        #[arg(long, default_value_t = config::default_resamples())]
        resamples: usize,
        /// True intensity, for the oracle method.
        #[arg(long)]
        lambda_spec: Option<String>,
    },
    /// Coverage of a band method under a known intensity.
    Coverage {
        #[arg(long)]
        lambda_spec: String,
        #[arg(long, default_value = "0,1")]
        interval: String,
        #[arg(long)]
        h: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value = "exact")]
        method: String,
        #[arg(long, default_value_t = 1_000)]
        reps: usize,
        #[arg(long, default_value_t = config::default_grid_steps())]
        grid_steps: usize,
        #[arg(long, default_value_t = config::default_resamples())]
        resamples: usize,
    },
    /// Simulated variance of theta against the bootstrap and the integrals.
    VarianceComparison {
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value = "0,1,0,1")]
        window: String,
        #[arg(long)]
        f_spec: String,
        #[arg(long, default_value_t = 1_000)]
        reps: usize,
        #[arg(long, default_value = "poissonized")]
        scheme: String,
        #[arg(long, default_value = "quad")]
        method: String,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        nodes: Option<usize>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot set up {threads} threads: {e}")))?;
    }
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let out = cli.out.as_deref();
    let start = Instant::now();

    let (emit, out) = match (cli.command, &cli.config) {
        (None, None) => return Err(CliError::Config("give a subcommand or --config".into())),
        (Some(_), Some(_)) => return Err(CliError::Config("--config runs on its own, without a subcommand".into())),
        (None, Some(path)) => {
            let (cfg, bytes) = config::load(path)?;
            let digest = io::digest_bytes(&[&bytes]);
            match cfg {
                ExperimentConfig::VarianceComparison(file) => {
                    let seed = cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
                    let target = commands::config_out(out, file.out.as_ref());
                    (commands::variance_comparison(&file, seed, Some(digest))?, target)
                }
                ExperimentConfig::CiSuite(file) => {
                    let seed = cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
                    let target = commands::config_out(out, file.out.as_ref());
                    (commands::ci_suite(&file, seed, digest)?, target)
                }
            }
        }
        (Some(command), None) => {
            let emit = match command {
                Command::Simulate { lambda, lambda_spec, window } => {
                    commands::simulate(lambda, lambda_spec.as_deref(), &window, seed, out)?
                }
                Command::Pcf { input, window, rmin, rmax, rsteps, bandwidth, kernel } => commands::pcf(&PcfArgs {
                    input: &input,
                    window: window.as_deref(),
                    rmin,
                    rmax,
                    rsteps,
                    bandwidth,
                    kernel: &kernel,
                })?,
                Command::AlphaTable { nmin, nmax, scheme } => commands::alpha_table(nmin, nmax, &scheme)?,
                Command::BootVar { input, window, f_spec, resamples, scheme } => {
                    commands::boot_var(&input, window.as_deref(), &f_spec, resamples, &scheme, seed)?
                }
                Command::Moments { lambda, window, f_spec, method, samples, nodes } => {
                    commands::moments(lambda, &window, &f_spec, &IntegrationFile { method, nodes, samples }, seed)?
                }
                Command::CiBand { input, window, h, alpha, method, grid_steps, resamples, lambda_spec } => {
                    commands::ci_band(
                        &CiBandArgs {
                            input: &input,
                            window: window.as_deref(),
                            h,
                            alpha,
                            method: &method,
                            grid_steps,
                            resamples,
                            lambda_spec: lambda_spec.as_deref(),
                        },
                        seed,
                    )?
                }
                Command::Coverage { lambda_spec, interval, h, alpha, method, reps, grid_steps, resamples } => {
                    commands::coverage(
                        &CoverageArgs {
                            lambda_spec: &lambda_spec,
                            interval: &interval,
                            h,
                            alpha,
                            method: &method,
                            reps,
                            grid_steps,
                            resamples,
                        },
                        seed,
                    )?
                }
                Command::VarianceComparison { lambda, window, f_spec, reps, scheme, method, samples, nodes } => {
                    let w = io::resolve_planar(&window)?;
                    let file = VarianceComparisonFile {
                        seed: Some(seed),
                        lambda,
                        window: [w.x_min, w.x_max, w.y_min, w.y_max],
                        f: f_spec,
                        reps,
                        scheme,
                        integration: IntegrationFile { method, nodes, samples },
                        out: None,
                    };
                    commands::variance_comparison(&file, seed, None)?
                }
            };
            (emit, out.map(PathBuf::from))
        }
    };

    let bytes = match emit {
        Emit::Bytes(b) => b,
        Emit::Record(mut record) => {
            if cli.timing {
                record.wall_clock_seconds = Some(start.elapsed().as_secs_f64());
            }
            io::to_json(&record.to_value())
        }
    };
    io::write_output(out.as_deref(), &bytes)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ppboot: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
