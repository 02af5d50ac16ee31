use std::process::ExitCode;

use clap::Parser;

use batchforge::cli::{errors_json, is_config_error, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let as_json = cli.errors_json;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if as_json {
                eprintln!("{}", errors_json(&e));
            } else {
                eprintln!("error[{}]: {e}", e.code());
            }
            if is_config_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
