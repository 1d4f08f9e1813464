use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sppt::states::SKind;
use sppt_cli::commands::{cmd_classify, cmd_decompose, cmd_generate};
use sppt_cli::registry::{Params, REGISTRY};
use sppt_cli::report::Settings;
use sppt_cli::Failure;

/// SPPT/SSPPT classification of multipartite density matrices.
#[derive(Parser)]
#[command(name = "sppt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Tolerance on normalised residuals.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Seed for the randomised joint diagonalisation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Run the classification pipeline on a state file.
    Classify {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Also run the legacy tripartite tests.
        #[arg(long)]
        legacy: bool,
        /// Write the machine-readable report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write a named state and its metadata sidecar.
    Generate {
        /// Generator name (see --list).
        #[arg(required_unless_present = "list")]
        name: Option<String>,
        #[arg(short, long, required_unless_present = "list")]
        output: Option<PathBuf>,
        #[arg(long)]
        list: bool,
        #[arg(long)]
        b: Option<f64>,
        /// Comma-separated dimensions, carrier last.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        /// contractive or normal.
        #[arg(long)]
        kind: Option<SKind>,
        #[arg(long)]
        rank: Option<usize>,
    },
    /// Write an explicit separable decomposition of an SSPPT state.
    Decompose {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Classify {
            input,
            common,
            legacy,
            json,
        } => {
            let settings = Settings {
                tolerance: common.tol,
                legacy,
                seed: common.seed,
            };
            let report = cmd_classify(&input, settings, json.as_deref())?;
            print!("{}", report.render());
        }
        Command::Generate { list: true, .. } => {
            for e in REGISTRY {
                let params = format!("[{}]", e.params.join(", "));
                println!("{:<24} {params:<22} {}", e.name, e.summary);
            }
        }
        Command::Generate {
            name,
            output,
            b,
            dims,
            seed,
            n,
            d,
            kind,
            rank,
            ..
        } => {
            let (Some(name), Some(output)) = (name, output) else {
                return Err(Failure::Other("generate needs a name and --output".into()));
            };
            let params = Params {
                b,
                dims,
                seed,
                n,
                d,
                kind,
                rank,
            };
            let sidecar = cmd_generate(&name, &params, &output)?;
            println!("wrote {} (sha256 {})", output.display(), sidecar.sha256);
        }
        Command::Decompose {
            input,
            output,
            common,
        } => {
            let settings = Settings {
                tolerance: common.tol,
                legacy: false,
                seed: common.seed,
            };
            let file = cmd_decompose(&input, &output, settings)?;
            println!(
                "wrote {} terms to {} (reconstruction residual {:.3e})",
                file.terms.len(),
                output.display(),
                file.reconstruction_residual
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sppt: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
