use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(slelab_cli::run(std::env::args_os()))
}
