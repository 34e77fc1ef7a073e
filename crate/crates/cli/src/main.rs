use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use ng_incentives_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let to_stdout = cli.options.out.is_none();
    match run(cli) {
        Ok(text) => {
            if to_stdout {
                let _ = std::io::stdout().write_all(text.as_bytes());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
