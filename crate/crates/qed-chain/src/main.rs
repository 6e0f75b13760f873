use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qed_chain::cli::{self, CliError, RunOverrides, SpectrumFormat};
use qed_chain::propagator::Engine;

#[derive(Parser)]
#[command(
    name = "qedchain",
    version,
    about = "Simulate exchange-coupled qubit chains coupled to quantized photon and phonon fields"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    EigenExact,
    Krylov,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::EigenExact => Engine::EigenExact,
            EngineArg::Krylov => Engine::Krylov,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    TwoColumnCsv,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and write its artifacts.
    Run {
        config: PathBuf,
        /// Override the propagation engine from the config.
        #[arg(long)]
        engine: Option<EngineArg>,
        /// Seed for synthetic-data generators (noise only).
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every config matching a glob, concurrently, with isolated outputs.
    Sweep {
        pattern: String,
        #[arg(long)]
        engine: Option<EngineArg>,
        #[arg(long)]
        seed: Option<u64>,
        /// Base directory; each config writes to <out>/<config-stem>/.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate an external spectrum file and optionally fit the line model.
    Ingest {
        file: PathBuf,
        #[arg(long)]
        format: FormatArg,
        /// Skip the first line of the file.
        #[arg(long)]
        has_header: bool,
        /// Fit the Gaussian line model and print the report.
        #[arg(long)]
        fit: bool,
        /// Also write the fit report to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    match dispatch(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(args: Args) -> Result<(), CliError> {
    match args.command {
        Command::Run { config, engine, seed, out } => {
            let overrides = RunOverrides {
                engine: engine.map(Engine::from),
                seed,
                output_dir: out,
            };
            let artifacts = cli::run_experiment(&config, &overrides)?;
            println!("ok {}", artifacts.output_dir.display());
            for r in &artifacts.reports {
                println!("report {}", r.display());
            }
            Ok(())
        }
        Command::Sweep { pattern, engine, seed, out } => {
            let overrides = RunOverrides {
                engine: engine.map(Engine::from),
                seed,
                output_dir: out,
            };
            let results = cli::sweep(&pattern, &overrides);
            let mut first_err: Option<CliError> = None;
            for (path, res) in results {
                match res {
                    Ok(a) => println!("ok {} -> {}", path.display(), a.output_dir.display()),
                    Err(e) => {
                        println!("failed {} ({})", path.display(), e.kind());
                        if first_err.is_none() {
                            first_err = Some(e);
                        }
                    }
                }
            }
            match first_err {
                Some(e) => Err(e),
                None => Ok(()),
            }
        }
        Command::Ingest { file, format, has_header, fit, out } => {
            let format = match format {
                FormatArg::TwoColumnCsv => SpectrumFormat::TwoColumnCsv,
            };
            let trace = cli::ingest_spectrum(&file, format, has_header)?;
            let (lo, hi) = (
                trace.abscissa.iter().cloned().fold(f64::INFINITY, f64::min),
                trace.abscissa.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            );
            println!("rows={} abscissa_min={lo} abscissa_max={hi}", trace.len());
            if fit {
                let result = qed_chain::analytics::fit_gaussian_envelope(&trace, None)
                    .map_err(CliError::from)?;
                let report = result.to_report();
                print!("{report}");
                if let Some(path) = out {
                    std::fs::write(&path, &report).map_err(|e| {
                        CliError::Config(format!("cannot write {}: {e}", path.display()))
                    })?;
                }
            }
            Ok(())
        }
    }
}
