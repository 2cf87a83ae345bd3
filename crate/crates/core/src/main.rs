use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tdho::io::{cmd_compare, cmd_element, cmd_reconstruct, cmd_sinogram, cmd_validate, read_sinogram, RunConfig};
use tdho::Error;

#[derive(Parser)]
#[command(name = "tdho", version, about = "Inverse scattering for the time-decaying harmonic oscillator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a run configuration and print the admissibility report.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print |v| times one scattering matrix element.
    Element {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        angle: f64,
        #[arg(long, allow_hyphen_values = true)]
        offset: f64,
        #[arg(long)]
        speed: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scan all directions and offsets and write the sinogram.
    Sinogram {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Keep completed samples from an earlier run in the same directory.
        #[arg(long)]
        resume: bool,
    },
    /// Invert a stored sinogram by filtered backprojection.
    Reconstruct {
        /// Directory holding sinogram.json and sinogram.bin.
        #[arg(long)]
        sinogram: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scan two configurations and decide whether their potentials differ.
    Compare {
        #[arg(long, num_args = 2, required = true)]
        config: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = RunConfig::load(&config)?;
            let report = cmd_validate(&cfg);
            print!("{}", report.render());
            if !report.passed() {
                return Err(Error::Config("configuration failed validation".into()));
            }
        }
        Command::Element {
            config,
            angle,
            offset,
            speed,
            out,
        } => {
            let cfg = RunConfig::load(&config)?;
            let r = cmd_element(&cfg, angle, offset, speed, out.as_deref())?;
            println!(
                "|v|*element = {:.12e} {:+.12e}i  (error ~ {:.2e}, t* = {:.4})",
                r.value.re, r.value.im, r.error, r.t_star
            );
        }
        Command::Sinogram {
            config,
            out,
            workers,
            resume,
        } => {
            let cfg = RunConfig::load(&config)?;
            let sino = cmd_sinogram(&cfg, out.as_deref(), workers, resume)?;
            let (k, m) = sino.shape();
            println!("sinogram {k} x {m} written, {} holes", sino.holes.len());
        }
        Command::Reconstruct { sinogram, config, out } => {
            let cfg = RunConfig::load(&config)?;
            let sino = read_sinogram(&sinogram)?;
            let r = cmd_reconstruct(&sino, &cfg, out.as_deref())?;
            println!(
                "relative L2 = {:.4e}, Linf = {:.4e}, sinogram RMS = {:.4e}",
                r.metrics.relative_l2,
                r.metrics.linf,
                r.metrics.sinogram_rms.unwrap_or(f64::NAN)
            );
        }
        Command::Compare { config, out, workers } => {
            let a = RunConfig::load(&config[0])?;
            let b = RunConfig::load(&config[1])?;
            let r = cmd_compare(&a, &b, out.as_deref(), workers)?;
            println!(
                "{}: sinogram distance {:.3e}, threshold {:.3e} ({}x noise floor {:.3e})",
                r.verdict,
                r.sinogram_distance,
                r.threshold,
                tdho::io::DISTINGUISH_FACTOR,
                r.noise_floor
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
