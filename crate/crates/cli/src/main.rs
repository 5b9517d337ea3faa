//! `vortex`: design fork masks, simulate far-field patterns, draw detector
//! events and fit line cuts, all from one experiment config.
//!
//! Exit status: 0 success, 1 user error, 2 physics-validity failure,
//! 3 fit not converged.

mod commands;
mod config;
mod error;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{DesignFormat, PlotOptions};
use error::CliError;
use plot::Scale;

#[derive(Parser)]
#[command(name = "vortex", version, about = "Matter-wave vortex beams from binary fork holograms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rasterize the hologram and export it as PBM and/or SVG
    Design {
        config: PathBuf,
        /// output path; the extension is replaced per format
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        format: DesignFormat,
        /// export the mask as drawn, without the erosion margin
        #[arg(long)]
        no_erosion: bool,
    },
    /// Write the mixed, blurred far-field intensity map (VWI1)
    Simulate {
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        plot: PlotArgs,
    },
    /// Draw detection events and accumulate them into a detector image
    Events {
        config: PathBuf,
        #[arg(short, long)]
        count: usize,
        #[arg(short, long, default_value_t = 0)]
        seed: u64,
        /// event list (CSV)
        #[arg(short, long)]
        output: PathBuf,
        /// detector image (VWI1); defaults to the event path with extension .vwi
        #[arg(long)]
        image: Option<PathBuf>,
        #[command(flatten)]
        plot: PlotArgs,
    },
    /// Fit the forward model to a line cut (CSV) or a VWI1 image
    Fit {
        config: PathBuf,
        data: PathBuf,
        /// fit report
        #[arg(short, long)]
        output: PathBuf,
        /// data and best-fit curve (CSV); defaults to the report path with extension .curve.csv
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Print derived beam and geometry quantities
    Check { config: PathBuf },
    /// Print the config in canonical form
    Normalize { config: PathBuf },
}

#[derive(Args)]
struct PlotArgs {
    /// also write a PGM rendering next to the output
    #[arg(long)]
    plot: bool,
    #[arg(long, value_enum, default_value = "linear", requires = "plot")]
    scale: Scale,
    /// render everything above this fraction of the maximum as white (e.g. 0.3)
    #[arg(long, requires = "plot")]
    saturate: Option<f64>,
}

impl PlotArgs {
    fn options(&self) -> Result<Option<PlotOptions>, CliError> {
        if let Some(s) = self.saturate {
            if !(s > 0.0 && s <= 1.0) {
                return Err(CliError::User(format!("--saturate must lie in (0, 1], got {s}")));
            }
        }
        Ok(self.plot.then_some(PlotOptions {
            scale: self.scale,
            saturate: self.saturate,
        }))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Design {
            config,
            output,
            format,
            no_erosion,
        } => commands::design(&commands::load(&config)?, &output, format, !no_erosion),
        Command::Simulate { config, output, plot } => {
            let opts = plot.options()?;
            commands::simulate_map(&commands::load(&config)?, &output, opts)
        }
        Command::Events {
            config,
            count,
            seed,
            output,
            image,
            plot,
        } => {
            let opts = plot.options()?;
            let image = image.unwrap_or_else(|| output.with_extension("vwi"));
            if image == output {
                return Err(CliError::User("event list and image paths must differ".into()));
            }
            commands::events(&commands::load(&config)?, count, seed, &output, &image, opts)
        }
        Command::Fit {
            config,
            data,
            output,
            curve,
        } => {
            let curve = curve.unwrap_or_else(|| output.with_extension("curve.csv"));
            commands::fit(&commands::load(&config)?, &data, &output, &curve)
        }
        Command::Check { config } => commands::check(&commands::load(&config)?),
        Command::Normalize { config } => {
            print!("{}", commands::load(&config)?.config.to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // help and version are not failures; every usage error is a user error
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
