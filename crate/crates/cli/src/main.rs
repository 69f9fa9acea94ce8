use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ddae_cli::{run, Command, SessionConfig};

/// Stability analysis and fixed-order stabilization of delay
/// differential-algebraic systems.
#[derive(Debug, Parser)]
#[command(name = "ddae", version)]
struct Args {
    /// System document (JSON, see data/system.schema.json).
    #[arg(long)]
    input: PathBuf,

    /// roots, abscissa, gamma0, strong-stability, stabilize-max,
    /// stabilize-barrier or closed-loop-roots.
    #[arg(long)]
    command: Command,

    /// Controller order for the stabilize commands.
    #[arg(long, default_value_t = 0)]
    order: usize,

    /// Report only roots with at least this real part.
    #[arg(long = "min-real-part", allow_hyphen_values = true)]
    min_real_part: Option<f64>,

    /// Upper bound on the number of discretization points.
    #[arg(long = "Nmax")]
    n_max: Option<usize>,

    /// Seed for the random initial controllers.
    #[arg(long)]
    seed: Option<u64>,

    /// Number of optimizer starts.
    #[arg(long)]
    starts: Option<usize>,

    /// Barrier weight of the first round.
    #[arg(long)]
    r: Option<f64>,

    /// Bound on gamma0 for stabilize-barrier.
    #[arg(long)]
    gamma: Option<f64>,

    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let config = SessionConfig {
        input: args.input,
        command: args.command,
        minimal_real_part: args.min_real_part,
        n_max: args.n_max,
        seed: args.seed,
        starts: args.starts,
        r: args.r,
        gamma: args.gamma,
        order: args.order,
        out: args.out,
    };
    match run(&config) {
        Ok(outcome) => {
            println!("{}", outcome.record);
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::from(outcome.exit_code)
        }
        Err(e) => {
            eprintln!("ddae: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
