use std::path::PathBuf;

use clap::Parser;

/// Runs one experiment of the ILW/KdV laboratory.
#[derive(Debug, Parser)]
#[command(name = "lab", version)]
struct Cli {
    /// converge-shallow, tail-track, alpha-conserve, nf-verify, symbol-table, or
    /// `verify` to check the checksums of a finished run in --out.
    experiment: String,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's outputDir.
    #[arg(long, env = "ILWLAB_OUTPUT_DIR")]
    out: Option<PathBuf>,
    #[arg(long, env = "ILWLAB_THREADS")]
    threads: Option<usize>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    std::process::exit(ilwlab::main_with(&cli.experiment, cli.config, cli.out, cli.threads));
}
