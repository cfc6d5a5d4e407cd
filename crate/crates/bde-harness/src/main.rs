use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(bde_harness::cli::main_with_args(std::env::args_os()))
}
