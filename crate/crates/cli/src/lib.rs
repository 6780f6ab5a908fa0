//! Library half of the `ssmlab` binary, split out so the HTTP router and
//! argument definitions can be tested in-process.

pub mod args;
pub mod commands;
pub mod serve;

use clap::{CommandFactory, FromArgMatches};

/// Parse `argv`, run the command and return the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match args::Cli::command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cli = match args::Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 1;
        }
    };
    match commands::run(cli, &matches) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.json_line());
            e.exit_code()
        }
    }
}
