use std::path::PathBuf;
use std::process::ExitCode;

use bloch_fem::config::{ConfigFile, Overrides, RunConfig};
use bloch_fem::experiment::run_experiment;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bloch-fem", version, about = "Scattering by locally perturbed periodic surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep of a configuration and write errors.csv and slope.txt.
    Solve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        example: Option<u8>,
        #[arg(long)]
        k: Option<f64>,
        #[arg(long = "N")]
        n_nodes: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let Command::Solve { config, example, k, n_nodes, out } = Cli::parse().command;
    let result = (|| {
        let file = match &config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let cfg = RunConfig::resolve(file, &Overrides { example, k, n_nodes, out })?;
        let outcome = run_experiment(&cfg)?;
        for row in &outcome.rows {
            println!(
                "{} k={} N={} L={} error={:.3e} iterations={}",
                row.example, row.k, row.n_nodes, row.half_width, row.rel_l2_error, row.iterations
            );
        }
        println!("wrote {}", cfg.out.display());
        Ok::<_, bloch_fem::Error>(())
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
