use std::process::ExitCode;

use clap::Parser;
use transit_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = serde_json::json!({"error": "usage", "message": e.to_string().trim_end()});
            eprintln!("{err}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            let err = serde_json::json!({"error": "failed", "message": chain.join(": "), "causes": chain});
            eprintln!("{err}");
            ExitCode::FAILURE
        }
    }
}
