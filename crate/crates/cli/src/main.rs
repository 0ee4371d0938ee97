use std::process::ExitCode;

fn main() -> ExitCode {
    prefixsched_cli::main_with(std::env::args_os())
}
