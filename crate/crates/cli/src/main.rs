use std::process::ExitCode;

use clap::Parser as _;

mod args;
mod config;
mod error;
mod model;
mod run;

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FGG_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => run::fit(a),
        Command::Tree(a) => run::tree(a),
        Command::Profile(a) => run::profile(a),
        Command::Bench(a) => run::bench(a),
        Command::Verify(a) => run::verify(a),
        Command::Model(m) => model::run(m),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
