use std::process::ExitCode;

use clap::Parser;
use mixedwave::cli::Cli;
use mixedwave::run::relative_to;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string();
            eprintln!("config:Usage: {}", first.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    let result = cli.resolve().and_then(|config| {
        let outcome = mixedwave::execute(&config)?;
        Ok((config, outcome))
    });
    match result {
        Ok((config, outcome)) => {
            for c in &outcome.checks {
                println!("{} {} {:e} <= {:e}", if c.passed() { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
            }
            for f in &outcome.files {
                println!("wrote {}", relative_to(&config.out, f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.report_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
