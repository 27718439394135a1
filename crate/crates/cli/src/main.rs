use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crowbar_cli::{cmd_analyze, cmd_compare_rr, cmd_design, cmd_sweep, cmd_verify, Options};
use crowbar_core::Snap;

/// Balancing-network design for series thyristors in a crowbar.
#[derive(Parser)]
#[command(name = "crowbar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if needed.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form stresses and waveforms for the configured design.
    Analyze(Io),
    /// Stress metrics over the configured grid.
    Sweep(Io),
    /// Select C_d, R_d and R_s for the configured constraints.
    Design {
        #[command(flatten)]
        io: Io,
        /// Snap components to a preferred-value series (none, e12, e24).
        #[arg(long)]
        snap: Option<Snap>,
    },
    /// Compare with a recovery-charge sized capacitor.
    CompareRr(Io),
    /// Check the closed forms against numerical integration.
    Verify {
        #[command(flatten)]
        io: Io,
        /// Integration step override (s).
        #[arg(long)]
        dt: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exit = match cli.command {
        Command::Analyze(io) => cmd_analyze(&io.config, &io.out),
        Command::Sweep(io) => cmd_sweep(&io.config, &io.out),
        Command::Design { io, snap } => cmd_design(
            &io.config,
            &io.out,
            &Options {
                snap,
                ..Options::default()
            },
        ),
        Command::CompareRr(io) => cmd_compare_rr(&io.config, &io.out),
        Command::Verify { io, dt } => cmd_verify(
            &io.config,
            &io.out,
            &Options {
                dt,
                ..Options::default()
            },
        ),
    };
    ExitCode::from(exit.code())
}
