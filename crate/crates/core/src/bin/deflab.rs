use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use deflab::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    let status = run(cli, &mut lock);
    let _ = lock.flush();
    match status {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("deflab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
