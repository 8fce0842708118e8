use std::process::ExitCode;

fn main() -> ExitCode {
    sqldistill::commands::run()
}
