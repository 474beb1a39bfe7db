use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(istakit::cli::main_entry(std::env::args_os()))
}
