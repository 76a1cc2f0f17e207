use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(deglab::cli::main_with(std::env::args_os()))
}
