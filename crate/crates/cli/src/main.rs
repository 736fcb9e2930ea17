//! `emsound`: forward modelling, inversion and experiment presets for
//! multi-height ground conductivity meter soundings.

mod commands;

use std::process::ExitCode;

use clap::Parser;

use commands::Cli;

/// Malformed input, numerical failure.
const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // reader went away, e.g. `| head`
        Err(err) if closed_pipe(&err) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn closed_pipe(err: &anyhow::Error) -> bool {
    err.chain()
        .filter_map(|e| e.downcast_ref::<std::io::Error>())
        .any(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
}

/// Only a library error outside the input class counts as numerical; file
/// and argument problems raised by the front end are input errors.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<emsound::Error>()) {
        Some(e) if !e.is_input_error() => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

#[cfg(test)]
mod tests {
    use anyhow::Context;

    use super::*;

    #[test]
    fn exit_codes_follow_the_error_chain() {
        let numerical: anyhow::Error = emsound::Error::Factorization("x".into()).into();
        assert_eq!(exit_code(&numerical), EXIT_NUMERICAL);
        let wrapped = Err::<(), _>(emsound::Error::Factorization("x".into())).context("while inverting").unwrap_err();
        assert_eq!(exit_code(&wrapped), EXIT_NUMERICAL);
        let input: anyhow::Error = emsound::Error::InvalidInput("x".into()).into();
        assert_eq!(exit_code(&input), EXIT_INPUT);
        assert_eq!(exit_code(&anyhow::anyhow!("unknown preset")), EXIT_INPUT);
    }
}
