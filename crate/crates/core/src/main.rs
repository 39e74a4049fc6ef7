use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mmc_mpc::io::commands::{compare_command, metrics_command, run_command, MetricsOptions};

#[derive(Parser)]
#[command(name = "mmc", version, about = "MMC predictive switching simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration and write the time series and metrics.
    Run { config: PathBuf },
    /// Run two configurations that differ only in their policy schedule.
    Compare { a: PathBuf, b: PathBuf },
    /// Recompute metrics from a time-series CSV.
    Metrics {
        csv: PathBuf,
        /// Analysis window (t0, t1] in seconds.
        #[arg(long, num_args = 2, value_names = ["T0", "T1"])]
        window: Option<Vec<f64>>,
        /// Nominal DC voltage in volts.
        #[arg(long, default_value_t = 60e3)]
        v_dc: f64,
        /// Start of the default window when --window is absent.
        #[arg(long, default_value_t = 0.2)]
        settle: f64,
        /// Segment length in seconds.
        #[arg(long, default_value_t = 0.1)]
        segment: f64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => run_command(&config).map(|out| {
            print!("{}", out.report);
            eprintln!("wrote {}", out.dir.display());
        }),
        Command::Compare { a, b } => compare_command(&a, &b).map(|cmp| print!("{}", cmp.report)),
        Command::Metrics { csv, window, v_dc, settle, segment } => {
            let opts = MetricsOptions {
                window: window.map(|w| (w[0], w[1])),
                v_dc,
                settle,
                segment,
            };
            metrics_command(&csv, opts).map(|(_, report)| print!("{report}"))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
