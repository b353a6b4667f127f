use std::path::{Path, PathBuf};
use std::process::ExitCode;

use afcmem::analysis::{extract_rabi, fit_exponential_decay, fit_gaussian_decay, Polarity, RabiOptions};
use afcmem::spectro::csv::{points_from_csv, trace_from_csv};
use afcmem_cli::run::{verify_manifest, Report};
use afcmem_cli::{load, Artifacts, CliError};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "afcmem", version, about = "Atomic frequency comb memory simulations")]
struct Cli {
    /// Worker threads for the ensemble integrator (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Recorded in the report; the simulations themselves are deterministic.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or built-in scenario.
    Run {
        scenario: String,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Check a scenario and print its effective parameters.
    Validate { scenario: String },
    /// Write only the absorption profiles a scenario uses.
    Prepare {
        scenario: String,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Fit a model to a CSV file.
    Fit {
        csv: PathBuf,
        #[arg(long, value_enum)]
        model: Model,
        /// Beat frequency removed before the Rabi fit (MHz).
        #[arg(long)]
        notch_mhz: Option<f64>,
    },
    /// Verify an output directory against its manifest and print the report.
    Report { out_dir: PathBuf },
    /// List the built-in scenarios.
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Exponential,
    Gaussian,
    Rabi,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn finish(a: Artifacts, dir: &Path) -> Result<(), CliError> {
    a.write(dir)?;
    if let Some(r) = a.get("report.txt") {
        print!("{}", String::from_utf8_lossy(r));
    }
    println!("wrote {} files to {}", a.names().count() + 1, dir.display());
    a.failure.map_or(Ok(()), Err)
}

fn fit(csv: &Path, model: Model, notch_mhz: Option<f64>) -> Result<(), CliError> {
    let text = read(csv)?;
    let mut r = Report::default();
    let converged = match model {
        Model::Exponential | Model::Gaussian => {
            let pts = points_from_csv(&text)?;
            let f = match model {
                Model::Exponential => fit_exponential_decay(&pts)?,
                _ => fit_gaussian_decay(&pts)?,
            };
            r.fit("", &f);
            f.converged
        }
        Model::Rabi => {
            let tr = trace_from_csv(&text)?;
            let est = extract_rabi(&tr, &RabiOptions { polarity: Polarity::Transmission, notch_mhz, ..Default::default() })?;
            r.fit("t_pi.", &est.t_pi);
            r.fit("full_curve.", &est.full_curve);
            est.t_pi.converged
        }
    };
    print!("{}", r.into_string());
    if converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(csv.display().to_string()))
    }
}

fn report(dir: &Path) -> Result<(), CliError> {
    let files = verify_manifest(dir)?;
    println!("manifest ok: {} files", files.len());
    for name in files.iter().filter(|n| n.ends_with("report.txt")) {
        print!("{}", read(&dir.join(name))?);
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Run { scenario, out_dir } => finish(afcmem_cli::run(&load(&scenario)?, cli.seed)?, &out_dir),
        Command::Validate { scenario } => {
            print!("{}", afcmem_cli::validate(&load(&scenario)?)?);
            Ok(())
        }
        Command::Prepare { scenario, out_dir } => finish(afcmem_cli::prepare(&load(&scenario)?)?, &out_dir),
        Command::Fit { csv, model, notch_mhz } => fit(&csv, model, notch_mhz),
        Command::Report { out_dir } => report(&out_dir),
        Command::List => {
            for (name, _) in afcmem_cli::BUILTIN {
                println!("{name}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
