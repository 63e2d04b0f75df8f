//! `qbattery` command line: scenario runs, bound-verification campaigns,
//! kernel-singularity probes, and the QFI cross-check.
//!
//! Exit codes: 0 success, 1 usage/config/IO error, 2 verification
//! violation, 3 integrator failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qbattery::cli::{
    cmd_probe_singularity, cmd_qfi_check, cmd_replay, cmd_simulate, cmd_verify, CampaignKind,
    OutputFormat, VerifyOptions, EXIT_USAGE,
};
use qbattery::scenarios::NamedModelParams;

#[derive(Parser)]
#[command(
    name = "qbattery",
    version,
    about = "Charging-power bounds for quantum batteries: simulate, verify, probe"
)]
struct Cli {
    /// Base seed for all random instance generation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for campaign commands (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Eigenvalue cutoff for rank/support decisions.
    #[arg(long, global = true, default_value_t = 1e-10)]
    rank_tol: f64,
    /// Violation tolerance base (scale-aware).
    #[arg(
        long,
        global = true,
        default_value_t = 1e-9,
        allow_hyphen_values = true
    )]
    tol: f64,
    /// Output format for tables.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Closed,
    Open,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write the per-time quantifier table.
    Simulate {
        /// Scenario document (TOML).
        scenario: PathBuf,
        /// Output path (CSV or JSON per --format).
        #[arg(long)]
        output: PathBuf,
    },
    /// Fuzz a charging-power bound and write a JSON report.
    Verify {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Closed campaigns: number of random instances.
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        /// Closed campaigns: explicit subsystem dims "s,b,a,w".
        #[arg(long)]
        dims: Option<String>,
        /// Open campaigns: comma-separated named models (default: all open models).
        #[arg(long)]
        models: Option<String>,
        /// Open campaigns: random initial states per model.
        #[arg(long, default_value_t = 10)]
        states_per_model: usize,
        /// Open campaigns: samples per trajectory.
        #[arg(long, default_value_t = 100)]
        time_samples: usize,
        /// Report output path (JSON).
        #[arg(long, required_unless_present = "replay")]
        report: Option<PathBuf>,
        /// Re-evaluate the violating instances of an earlier report instead
        /// of running a new campaign.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Sweep the ε-regularized power near a pure eigenstate and fit
    /// P(ε) = a + b·log ε.
    ProbeSingularity {
        /// Open named model to probe.
        #[arg(long)]
        model: String,
        /// Descending geometric ε grid, comma separated.
        #[arg(long, default_value = "1e-2,1e-3,1e-4,1e-5,1e-6")]
        eps_grid: String,
        /// Index of the Hamiltonian eigenstate (descending order; 0 = highest).
        #[arg(long, default_value_t = 0)]
        state_index: usize,
        /// Output path for the (ε, P) table and fit.
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        omega: Option<f64>,
    },
    /// Cross-validate the two QFI formulations on random instances.
    QfiCheck {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 4)]
        dim: usize,
        /// Optional JSON report path (default: stdout).
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn parse_dims(text: &str) -> Result<[usize; 4], String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 4 {
        return Err(format!(
            "--dims expects 4 comma-separated integers, got `{text}`"
        ));
    }
    let mut dims = [0usize; 4];
    for (i, p) in parts.iter().enumerate() {
        dims[i] = p
            .trim()
            .parse()
            .map_err(|_| format!("--dims component `{p}` is not an integer"))?;
    }
    Ok(dims)
}

fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("--eps-grid component `{p}` is not a number"))
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };

    let code = match cli.command {
        Command::Simulate { scenario, output } => {
            cmd_simulate(&scenario, &output, cli.format.into())
        }
        Command::Verify {
            kind,
            instances,
            dims,
            models,
            states_per_model,
            time_samples,
            report,
            replay,
        } => {
            if let Some(path) = replay {
                cmd_replay(&path, cli.tol)
            } else {
                let dims = match dims.as_deref().map(parse_dims).transpose() {
                    Ok(d) => d,
                    Err(msg) => {
                        eprintln!("error: {msg}");
                        return ExitCode::from(EXIT_USAGE as u8);
                    }
                };
                let models = models
                    .map(|m| m.split(',').map(|s| s.trim().to_string()).collect())
                    .unwrap_or_else(|| {
                        vec![
                            "qubit-amplitude-damping".to_string(),
                            "qubit-dephasing".to_string(),
                            "qubit-pumping".to_string(),
                        ]
                    });
                let opts = VerifyOptions {
                    kind: match kind {
                        KindArg::Closed => CampaignKind::Closed,
                        KindArg::Open => CampaignKind::Open,
                    },
                    instances,
                    dims,
                    models,
                    states_per_model,
                    time_samples,
                    seed: cli.seed,
                    jobs: cli.jobs,
                    tol: cli.tol,
                    rank_tol: cli.rank_tol,
                };
                let Some(report) = report else {
                    eprintln!("error: --report is required");
                    return ExitCode::from(EXIT_USAGE as u8);
                };
                cmd_verify(&opts, &report)
            }
        }
        Command::ProbeSingularity {
            model,
            eps_grid,
            state_index,
            output,
            beta,
            gamma,
            omega,
        } => {
            let grid = match parse_grid(&eps_grid) {
                Ok(g) => g,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return ExitCode::from(EXIT_USAGE as u8);
                }
            };
            let params = NamedModelParams {
                beta,
                gamma,
                omega,
                seed: Some(cli.seed),
                ..NamedModelParams::default()
            };
            cmd_probe_singularity(
                &model,
                &params,
                state_index,
                &grid,
                &output,
                cli.format.into(),
            )
        }
        Command::QfiCheck {
            instances,
            dim,
            report,
        } => cmd_qfi_check(
            instances,
            dim,
            cli.seed,
            cli.rank_tol,
            cli.jobs,
            report.as_deref(),
        ),
    };
    ExitCode::from(code as u8)
}
