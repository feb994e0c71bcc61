use std::io::Write;
use std::process::ExitCode;

use bnm_cli::{run, Cli, EXIT_INTERNAL};
use clap::Parser;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INTERNAL } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let result = run(cli);
    // a closed pipe on either stream is not an error worth reporting
    if let Some(payload) = &result.payload {
        let _ = writeln!(std::io::stdout().lock(), "{payload}");
    }
    let mut err = std::io::stderr().lock();
    for line in &result.diagnostics {
        let _ = writeln!(err, "{line}");
    }
    ExitCode::from(result.exit_code as u8)
}
