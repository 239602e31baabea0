use clap::{Parser, Subcommand};
use gsr_cli::commands::{check_report, design, parse_floats, parse_prior, DesignMethod};
use gsr_cli::{emit_csv, run, CliError, ExperimentConfig};
use gsr_core::design::{parse_record, SdpSolverConfig};
use gsr_core::graph::{laplacian, Graph};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gsr", version, about = "Node-adaptive Tikhonov regularization for graph signal reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment and write the result table as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Station CSV, required by dataset experiments.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Design node-adaptive weights for one graph and prior.
    Design {
        /// Edge list: `n_nodes=<n>` then `i j w` lines.
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        prior: PathBuf,
        /// prony | sdr | minmax-prony | minmax-sdr
        #[arg(long)]
        method: DesignMethod,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1e-7)]
        tolerance: f64,
    },
    /// Report which sufficient conditions for beating the node-invariant weight hold.
    Check {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        w0: f64,
        /// Weights as a design record, a file of numbers, or an inline comma-separated list.
        #[arg(long)]
        omega: String,
        /// True signal (file or inline list); enables the theorem and corollary checks.
        #[arg(long)]
        signal: Option<String>,
        /// White-noise standard deviation.
        #[arg(long)]
        sigma: Option<f64>,
    },
}

/// A file or an inline list; files written by `gsr design` are read as records.
fn floats_arg(arg: &str) -> Result<Vec<f64>, CliError> {
    if !Path::new(arg).is_file() {
        return parse_floats(arg);
    }
    let text = std::fs::read_to_string(arg)?;
    if text.trim_start().starts_with("omega=") {
        Ok(parse_record(&text)?.omega)
    } else {
        parse_floats(&text)
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, data, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let table = run(&cfg, data.as_deref())?;
            emit_csv(&table, &out)?;
        }
        Command::Design { graph, prior, method, out, tolerance } => {
            let lap = laplacian(&Graph::read_edge_list(&graph)?);
            let spec = parse_prior(&std::fs::read_to_string(&prior)?, &lap)?;
            let cfg = SdpSolverConfig { tolerance, ..SdpSolverConfig::default() };
            let result = design(&lap, &spec, method, &cfg)?;
            std::fs::write(&out, result.to_record() + "\n")?;
        }
        Command::Check { graph, w0, omega, signal, sigma } => {
            let lap = laplacian(&Graph::read_edge_list(&graph)?);
            let omega = floats_arg(&omega)?;
            let signal = signal.as_deref().map(floats_arg).transpose()?;
            print!("{}", check_report(&lap, w0, &omega, signal.as_deref(), sigma)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
