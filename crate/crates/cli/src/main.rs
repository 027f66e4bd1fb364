use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use splatdyn_cli as cli;

#[derive(Parser)]
#[command(name = "splatdyn", version, about = "Deformable Gaussian splat simulation")]
struct Args {
    /// Worker threads (overrides SPLATDYN_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic splat asset as PLY.
    Synth {
        /// bar, blob, ground or critter.
        kind: String,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build a tetrahedral cage around a splat asset.
    Meshgen {
        /// PLY path or synth:<kind>.
        input: String,
        #[arg(short, long)]
        out: PathBuf,
        /// Fixed cell size; otherwise searched to land in the vertex band.
        #[arg(long)]
        cell: Option<f64>,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [10_000, 30_000])]
        band: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        dilation: usize,
        /// Also write the occupancy surface as OBJ.
        #[arg(long)]
        surface: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Embed a splat asset in a cage and write the EMB1 table.
    Embed {
        input: String,
        #[arg(long)]
        cage: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(short, default_value_t = 2.0)]
        k: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Parse and validate a script.
    Check { script: PathBuf },
    /// Print a script in canonical form.
    Fmt { script: PathBuf },
    /// Run a script headless, writing frames and CSVs.
    Simulate {
        script: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        frames: Option<usize>,
        /// Write deformed kernels per frame as PLY.
        #[arg(long)]
        ply: bool,
        #[arg(long)]
        ppm: bool,
        #[arg(long)]
        no_images: bool,
        /// Also write per-stage wall-clock times to timing.csv.
        #[arg(long)]
        timing: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render frame 0 of a script.
    Render {
        script: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write an apply-frame JSON fixture for viewer tests.
    Fixture {
        script: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve a script to viewers over TCP.
    Serve {
        script: PathBuf,
        #[arg(long, default_value = "127.0.0.1:7878")]
        addr: String,
        #[arg(long)]
        max_frames: Option<u64>,
        /// Step as fast as possible instead of at the script frame rate.
        #[arg(long)]
        fast: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    cli::configure_threads(args.threads);
    let result = match args.command {
        Command::Synth { kind, out, seed } => cli::synth(&kind, seed, &out),
        Command::Meshgen {
            input,
            out,
            cell,
            band,
            dilation,
            surface,
            seed,
        } => cli::meshgen(&cli::MeshgenArgs {
            input,
            out,
            cell,
            band: (band[0], band[1]),
            dilation,
            surface,
            seed,
        }),
        Command::Embed {
            input,
            cage,
            out,
            k,
            seed,
        } => cli::embed(&input, &cage, k, &out, seed),
        Command::Check { script } => cli::check(&script),
        Command::Fmt { script } => cli::fmt(&script),
        Command::Simulate {
            script,
            out,
            frames,
            ply,
            ppm,
            no_images,
            timing,
            seed,
        } => cli::simulate(&cli::SimulateArgs {
            script,
            out,
            frames,
            ply,
            ppm,
            no_images,
            timing,
            seed,
        }),
        Command::Render { script, out, seed } => cli::render(&script, &out, seed),
        Command::Fixture {
            script,
            out,
            frames,
            seed,
        } => cli::fixture(&script, &out, frames, seed),
        Command::Serve {
            script,
            addr,
            max_frames,
            fast,
            seed,
        } => cli::serve(&cli::ServeArgs {
            script,
            addr,
            seed,
            max_frames,
            realtime: !fast,
        }),
    };
    match result {
        Ok(()) => ExitCode::from(cli::EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
