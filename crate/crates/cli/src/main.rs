//! `minimax`: simulate, certify, bifurcate, classify and sweep from the command line.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 run flagged as diverged.

mod args;
mod config;
mod run;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("MINIMAX_THREADS") {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).with_context(|| {
            format!("MINIMAX_THREADS must be a positive integer, got '{v}'")
        })?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn real_main(cli: Cli) -> Result<bool> {
    init_threads()?;
    let config = match cli.command {
        Command::Replay(r) => {
            let mut c = run::load_config(&r.config)?;
            if r.out.is_some() {
                c.set_out(r.out);
            }
            c
        }
        other => other.into_config()?.expect("non-replay commands yield a config"),
    };
    run::execute_and_write(&config)
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let rendered = e.render().to_string();
            let first = rendered.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("{}", one_line(first));
            return ExitCode::from(1);
        }
    };
    match real_main(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("warning: run flagged as diverged");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {}", one_line(&format!("{e:#}")));
            ExitCode::from(1)
        }
    }
}
