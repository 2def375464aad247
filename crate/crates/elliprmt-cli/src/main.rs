use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use elliprmt_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli.command) {
        Ok(out) => {
            print!("{}", out.stdout);
            let _ = std::io::stdout().flush();
            if !out.warnings.is_empty() {
                for w in &out.warnings {
                    eprintln!("warning: {w}");
                }
                eprintln!("{} warning(s)", out.warnings.len());
            }
            match out.numerical_failure {
                Some(msg) => {
                    eprintln!("error: {msg}");
                    ExitCode::from(2)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
