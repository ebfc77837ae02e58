//! `wforge`: synthesize surfaces from spinor data, deform them, verify the
//! numerics and export meshes.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "wforge", version, about = "Spinor Weierstrass surfaces: synthesis, flows and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Dirac system, build the chart and analyse its geometry.
    Synth {
        config: PathBuf,
        /// Exit with status 2 on degenerate-surface warnings.
        #[arg(long)]
        strict: bool,
        /// Output directory (overrides `outputs.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the mVN flow described by the config's `flow` block.
    Deform {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in property suites.
    Verify {
        #[arg(long, default_value = "quick", value_parser = ["quick", "full"])]
        level: String,
        /// Also write the results as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Convert a chart CSV into an OBJ mesh.
    Export {
        chart: PathBuf,
        #[arg(long)]
        obj: PathBuf,
        /// 1-based coordinate triple to show.
        #[arg(long, default_value = "1,2,3")]
        project: String,
    },
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("WFORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| format!("WFORGE_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("WFORGE_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    let result = match &cli.command {
        Command::Synth { config, strict, out } => commands::synth(config, *strict, out.as_deref()),
        Command::Deform { config, out } => commands::deform(config, out.as_deref()),
        Command::Verify { level, json } => commands::verify(level, json.as_deref()),
        Command::Export { chart, obj, project } => commands::export(chart, obj, project),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
