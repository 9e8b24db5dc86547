use std::process::ExitCode;

fn main() -> ExitCode {
    let code = heatdp::cli::run_from_args(std::env::args_os());
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}
