use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use epom::cli::{run, Command, Overrides, Units};

#[derive(Parser)]
#[command(name = "epom", version, about = "Coupled optomechanical cavity simulator")]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Unit of the configured η values.
    #[arg(long, value_enum)]
    units: Option<Units>,
    /// Worker threads for parameter sweeps.
    #[arg(long, env = "EPOM_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let overrides = Overrides { out: args.out, units: args.units, threads: args.threads };
    match run(args.command, &args.config, &overrides) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", outcome.out_dir.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("epom: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
