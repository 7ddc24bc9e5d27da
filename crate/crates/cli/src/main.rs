use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use ccf_cli::{configure_threads, run, Cli, CliError};

fn fail(err: &CliError) -> ExitCode {
    let msg = err.to_string().replace('\n', " ");
    eprintln!("ccf: error[{}]: {msg}", err.kind());
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let mut lines = rendered.lines();
            let first = lines.next().unwrap_or("invalid arguments");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("ccf: error[usage]: {first}");
            for line in lines {
                eprintln!("{line}");
            }
            return ExitCode::from(1);
        }
    };
    if let Err(e) = configure_threads() {
        return fail(&e);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
