use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let seed = std::env::var("QPROB_SEED").ok();
    let outcome = qprob_cli::run_cli(std::env::args_os(), seed.as_deref());
    print!("{}", outcome.stdout);
    eprint!("{}", outcome.stderr);
    let _ = std::io::stdout().flush();
    ExitCode::from(outcome.code as u8)
}
