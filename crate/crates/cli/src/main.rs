use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(seqr_cli::run(std::env::args()) as u8)
}
