use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use desslab_cli::config::{
    parse_delay_range, parse_format, parse_grid_spec, parse_loop_mode, parse_sensor_mode,
    Experiment, ExperimentConfig, OutputConfig, SolverConfig,
};
use desslab_cli::run::{run, RunError};

/// Controller-synthesis lab for diversely sensed ring networks.
#[derive(Parser)]
#[command(name = "desslab", disable_version_flag = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Output directory (default: $DESSLAB_OUT, then ./desslab-out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of csv,json,svg (default: all)
    #[arg(long, value_delimiter = ',')]
    formats: Option<Vec<String>>,
    /// Solver: relative fixed-point tolerance
    #[arg(long)]
    tol_rel: Option<f64>,
    /// Solver: iteration cap
    #[arg(long)]
    max_iter: Option<usize>,
    /// Solver: divergence threshold on the iterate norm
    #[arg(long)]
    divergence_norm: Option<f64>,
    /// Solver: relative singular-value cutoff for pseudo-inversion
    #[arg(long)]
    pinv_rel_tol: Option<f64>,
}

impl CommonArgs {
    fn into_parts(self) -> Result<(OutputConfig, SolverConfig), String> {
        let formats = match self.formats {
            None => OutputConfig::default().formats,
            Some(names) => names
                .iter()
                .map(|name| parse_format(name))
                .collect::<Result<Vec<_>, _>>()?,
        };
        let output = OutputConfig {
            dir: self.out.unwrap_or_else(OutputConfig::default_dir),
            formats,
        };
        let solver = SolverConfig {
            tol_rel: self.tol_rel,
            max_iter: self.max_iter,
            divergence_norm: self.divergence_norm,
            pinv_rel_tol: self.pinv_rel_tol,
        };
        Ok((output, solver))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Impulse response of the open loop or an optimal closed loop
    Impulse {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        a: f64,
        /// open, fast, slow, or diverse
        #[arg(long)]
        mode: String,
        #[arg(long)]
        q: Option<usize>,
        #[arg(long)]
        d: usize,
        /// Horizon in steps
        #[arg(long = "T", alias = "horizon", default_value_t = 20)]
        horizon: usize,
        /// Disturbed ring node (1-based)
        #[arg(long, default_value_t = 1)]
        node: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Optimal gain synthesis at one parameter point
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        a: f64,
        /// fast, slow, or diverse
        #[arg(long)]
        mode: String,
        #[arg(long)]
        q: Option<usize>,
        #[arg(long)]
        d: usize,
        /// Synthesize the state-feedback dual instead of full control
        #[arg(long)]
        dual: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Cost as a function of instability
    SweepA {
        /// Comma-separated ring sizes
        #[arg(long = "n-list", value_delimiter = ',')]
        n_list: Vec<usize>,
        /// Instability grid as start:stop:step
        #[arg(long = "a-grid")]
        a_grid: String,
        #[arg(long)]
        mode: String,
        #[arg(long)]
        q: Option<usize>,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Cost versus delay for all three sensing architectures
    SweepDelay {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        q: usize,
        /// Delay range, inclusive: lo..hi or a single value
        #[arg(long)]
        d: String,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Fast-only stability breaking point
    Breakpoint {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: usize,
        /// Bisection tolerance on a
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Knockout experiment: intact versus ablated internal feedback
    Ablate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        a: f64,
        /// slow or diverse
        #[arg(long)]
        mode: String,
        #[arg(long)]
        q: Option<usize>,
        #[arg(long)]
        d: usize,
        #[arg(long = "T", alias = "horizon", default_value_t = 120)]
        horizon: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Output-feedback synthesis with actuation and sensing delays
    Ofsynth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        a: f64,
        #[arg(long, default_value_t = 1)]
        d: usize,
        /// Input and sensor-noise weight approximating the noise-free limit
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Re-run an experiment from a saved config.json
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn build_config(command: Command) -> Result<ExperimentConfig, String> {
    let (experiment, common) = match command {
        Command::Impulse { n, a, mode, q, d, horizon, node, common } => (
            Experiment::Impulse { n, a, mode: parse_loop_mode(&mode)?, q, d, horizon, node },
            common,
        ),
        Command::Synth { n, a, mode, q, d, dual, common } => (
            Experiment::Synth { n, a, mode: parse_sensor_mode(&mode)?, q, d, dual },
            common,
        ),
        Command::SweepA { n_list, a_grid, mode, q, d, workers, common } => {
            let (a_start, a_stop, a_step) = parse_grid_spec(&a_grid)?;
            (
                Experiment::SweepA {
                    n_list,
                    a_start,
                    a_stop,
                    a_step,
                    mode: parse_sensor_mode(&mode)?,
                    q,
                    d,
                    workers,
                },
                common,
            )
        }
        Command::SweepDelay { n, a, q, d, workers, common } => {
            let (d_min, d_max) = parse_delay_range(&d)?;
            (Experiment::SweepDelay { n, a, q, d_min, d_max, workers }, common)
        }
        Command::Breakpoint { n, q, tol, common } => {
            (Experiment::Breakpoint { n, q, tol }, common)
        }
        Command::Ablate { n, a, mode, q, d, horizon, common } => (
            Experiment::Ablate { n, a, mode: parse_sensor_mode(&mode)?, q, d, horizon },
            common,
        ),
        Command::Ofsynth { n, a, d, epsilon, common } => {
            (Experiment::Ofsynth { n, a, d, epsilon }, common)
        }
        Command::Run { .. } => unreachable!("handled by the caller"),
    };
    let (output, solver) = common.into_parts()?;
    Ok(ExperimentConfig { experiment, output, solver })
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let config = match cli.command {
        Command::Run { config } => match std::fs::read_to_string(&config) {
            Ok(text) => match ExperimentConfig::from_json(&text) {
                Ok(config) => config,
                Err(e) => {
                    eprintln!("desslab: {e}");
                    return ExitCode::from(2);
                }
            },
            Err(e) => {
                eprintln!("desslab: cannot read {}: {e}", config.display());
                return ExitCode::from(2);
            }
        },
        other => match build_config(other) {
            Ok(config) => config,
            Err(e) => {
                eprintln!("desslab: {e}");
                return ExitCode::from(2);
            }
        },
    };

    match run(&config) {
        Ok(outcome) => {
            for file in &outcome.files {
                println!("{}", file.display());
            }
            if outcome.max_iter_exceeded {
                eprintln!("desslab: solver hit its iteration cap; results may be unconverged");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e @ RunError::Config(_)) | Err(e @ RunError::Io(_)) => {
            eprintln!("desslab: {e}");
            ExitCode::from(2)
        }
    }
}
