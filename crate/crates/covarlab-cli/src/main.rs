use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use covarlab_cli::{exit_code, run, Command, Options};

#[derive(Parser)]
#[command(name = "covarlab", version, about = "Locally covariant Klein-Gordon checks on lattice spacetimes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON file whose top-level keys replace the command defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root; reports go to <out>/<command>/.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Multiplies every lattice resolution.
    #[arg(long, global = true, default_value_t = 1)]
    resolution_scale: usize,
    #[arg(long, global = true)]
    no_cache: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = Options {
        config: cli.config,
        out: cli.out,
        resolution_scale: cli.resolution_scale,
        no_cache: cli.no_cache,
        seed: cli.seed,
    };
    let r = run(cli.command, &opts);
    match &r {
        Ok(rep) => {
            for c in rep.checks.iter().filter(|c| !c.pass) {
                eprintln!("FAIL {}: {}", c.name, c.witness.as_deref().unwrap_or(""));
            }
            let failed = rep.checks.iter().filter(|c| !c.pass).count();
            println!("{}: {} checks, {} failed", rep.command, rep.checks.len(), failed);
        }
        Err(e) => eprintln!("covarlab: {e}"),
    }
    ExitCode::from(exit_code(&r) as u8)
}
