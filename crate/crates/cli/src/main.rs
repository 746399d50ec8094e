//! `btkit`: corpus filtering, noising, tagging, mixing and the reports that go
//! with them. Exit codes: 0 success, 1 data error, 2 usage error.

mod args;
mod io;
mod lines;
mod reports;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Cmd};

/// Errors detected after argument parsing that are still the caller's fault.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if cli.version {
        println!("{}", btkit_core::bleu::SIGNATURE);
        return ExitCode::SUCCESS;
    }
    let Some(cmd) = cli.command else {
        eprintln!("error: no command given (try --help)");
        return ExitCode::from(2);
    };
    match dispatch(cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<Usage>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            // A closed downstream pipe is not worth a diagnostic.
            if let Some(io) = e.downcast_ref::<std::io::Error>() {
                if io.kind() == std::io::ErrorKind::BrokenPipe {
                    return ExitCode::from(1);
                }
            }
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Cmd) -> anyhow::Result<()> {
    match cmd {
        Cmd::FilterBitext(a) => lines::filter_bitext(a),
        Cmd::FilterMono(a) => lines::filter_mono(a),
        Cmd::FilterBt(a) => lines::filter_bt(a),
        Cmd::Noise(a) => lines::noise(a),
        Cmd::Tag(a) => lines::tag(a),
        Cmd::Validate(a) => lines::validate(a),
        Cmd::Mix(a) => reports::mix(a),
        Cmd::Bleu(a) => reports::bleu(a),
        Cmd::AttnReport(a) => reports::attn_report(a),
        Cmd::CopyRate(a) => reports::copy_rate(a),
        Cmd::Synthlab(a) => reports::synthlab(a),
    }
}
