use std::process::ExitCode;

use activeslam_cli::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("activeslam: cannot size the worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    let mut stdout = std::io::stdout().lock();
    match run(&cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("activeslam: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
