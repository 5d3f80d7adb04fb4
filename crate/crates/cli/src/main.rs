use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(qlidar_cli::app::run(std::env::args_os()))
}
