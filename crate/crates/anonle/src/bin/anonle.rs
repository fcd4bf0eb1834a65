use std::process::ExitCode;

use anonle::cli::{self, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli::execute(&cli) {
        Ok(report) => {
            let mut json =
                serde_json::to_string_pretty(&report).expect("reports always serialize");
            json.push('\n');
            if let Some(path) = &cli.out {
                if let Err(e) = std::fs::write(path, &json) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            } else {
                print!("{json}");
            }
            if report.all_ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
