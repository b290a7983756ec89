use std::process::ExitCode;

use clap::Parser;
use iaclahe_cli::Cli;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    ExitCode::from(iaclahe_cli::run(cli, &mut stdout))
}
