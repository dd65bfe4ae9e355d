use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(v2x::cli::main_with(std::env::args_os()))
}
