use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(recurlab_cli::run(std::env::args_os()) as u8)
}
