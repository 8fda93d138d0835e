use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use rhlab::scenario::{self, Scenario};
use rhlab::{plots, run, verify};

#[derive(Parser)]
#[command(name = "rhlab", version, about = "Coupled Ricci-harmonic flow audits on periodic lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a scenario and write its artifact directory.
    Run {
        /// Scenario file, or the name of a bundled preset.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
        /// Override the monitored exponent.
        #[arg(long)]
        p: Option<f64>,
        /// Override the resolution of the first axis.
        #[arg(long)]
        resolution: Option<usize>,
        /// Override the time horizon.
        #[arg(long)]
        tmax: Option<f64>,
    },
    /// Re-check every verdict of an artifact from its files.
    Verify {
        #[arg(long)]
        artifact: PathBuf,
    },
    /// Write TSV series and SVG charts into `<artifact>/plots`.
    Plots {
        #[arg(long)]
        artifact: PathBuf,
    },
    /// List the bundled scenarios.
    Presets,
}

fn load_scenario(arg: &str) -> Result<Scenario> {
    let path = Path::new(arg);
    if path.is_file() {
        Ok(Scenario::load(path)?)
    } else {
        Ok(scenario::preset(arg)?)
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run { scenario, out, p, resolution, tmax } => {
            let mut scn = load_scenario(&scenario)?;
            if let Some(p) = p {
                scn.p = p;
            }
            if let Some(n) = resolution {
                scn.resolution[0] = n;
            }
            if let Some(t) = tmax {
                scn.horizon = t;
            }
            scn.validate()?;
            let output = run::execute(&scn)?;
            run::write_artifact(&output, &out)?;
            print!("{}", run::verdict_table(&output.report));
            Ok(if output.report.status == "complete" { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Verify { artifact } => {
            let outcome = verify::verify_dir(&artifact)?;
            print!("{}", outcome.render());
            Ok(if outcome.pass() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Plots { artifact } => {
            for path in plots::write_plots(&artifact)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Presets => {
            for (name, _) in scenario::PRESETS {
                let s = scenario::preset(name)?;
                println!("{name:<18} dim {} resolution {:?} horizon {}", s.dim, s.resolution, s.horizon);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
