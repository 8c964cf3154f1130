use clap::error::ErrorKind;
use clap::Parser;
use pgso_cli::cli::Cli;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                eprintln!("pgso: usage error: missing subcommand (see pgso --help)");
                return ExitCode::from(2);
            }
            _ => {
                let msg = e.to_string();
                let line = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
                eprintln!("pgso: usage error: {}", line.trim_start_matches("error: ").trim());
                return ExitCode::from(2);
            }
        },
    };
    match pgso_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg: Vec<String> = e.chain().map(|c| c.to_string().replace('\n', " ")).collect();
            eprintln!("pgso: error: {}", msg.join(": "));
            ExitCode::from(1)
        }
    }
}
