use std::process::ExitCode;

fn main() -> ExitCode {
    let code = glauber_lab_cli::run(std::env::args().skip(1));
    ExitCode::from(code)
}
