//! `fairvote`: fit, apply and diagnose fairness-constrained majority-vote ensembles.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};
use fairvote::{Error, ErrorClass};

use args::Cli;

fn exit_code_help() -> String {
    let mut s = String::from("Exit codes:\n  0   success\n  2   invalid command line\n");
    for class in ErrorClass::ALL {
        s.push_str(&format!("  {:<3} {}\n", class.exit_code(), class.name()));
    }
    s
}

fn parse(raw: &[String]) -> std::result::Result<Cli, clap::Error> {
    let matches = Cli::command().after_help(exit_code_help()).try_get_matches_from(raw)?;
    Cli::from_arg_matches(&matches)
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let cli = match parse(&raw) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let argv = manifest::strip_workers(&raw[1..]);
    match run(&cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let class = e.class();
            eprintln!("error[{}]: {e}", class.name());
            ExitCode::from(class.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli, argv: &[String]) -> fairvote::Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {} workers: {e}", cli.workers)))?;
    pool.install(|| commands::dispatch(&cli.command, argv))
}

/// Re-parses a recorded argument list, as done by `replay`.
pub(crate) fn reparse(argv: &[String]) -> fairvote::Result<Cli> {
    let mut raw = vec!["fairvote".to_string()];
    raw.extend_from_slice(argv);
    parse(&raw).map_err(|e| Error::MalformedFile(format!("manifest arguments do not parse: {e}")))
}
