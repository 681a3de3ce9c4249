use std::process::ExitCode;

fn main() -> ExitCode {
    kpfuse::cli::main_with_args(std::env::args_os())
}
