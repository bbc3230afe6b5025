mod args;
mod commands;
mod io;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

use args::{Cli, Command};
use io::Run;

fn parameters(cmd: &Command) -> serde_json::Result<serde_json::Value> {
    match cmd {
        Command::Autocorr(a) => serde_json::to_value(a),
        Command::Fft(a) => serde_json::to_value(a),
        Command::Recover(a) => serde_json::to_value(a),
        Command::Model(a) => serde_json::to_value(a),
        Command::Kernel(a) => serde_json::to_value(a),
        Command::Propagate(a) => serde_json::to_value(a),
        Command::Synth(a) => serde_json::to_value(a),
        Command::Compare(a) => serde_json::to_value(a),
    }
}

fn execute(cli: &Cli, run: &mut Run) -> Result<()> {
    match &cli.command {
        Command::Autocorr(a) => commands::autocorr(run, a),
        Command::Fft(a) => commands::fft(run, a),
        Command::Recover(a) => commands::recover(run, a),
        Command::Model(a) => commands::model(run, a),
        Command::Kernel(a) => commands::kernel(run, a),
        Command::Propagate(a) => commands::propagate_cmd(run, a),
        Command::Synth(a) => commands::synth(run, a, cli.global.seed),
        Command::Compare(a) => commands::compare(run, a),
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    rayon::ThreadPoolBuilder::new()
        .num_threads(g.threads)
        .build_global()?;
    let mut out = Run::new(&g.out_dir)?;
    match execute(&cli, &mut out) {
        Ok(()) => {
            let params = parameters(&cli.command)?;
            let threads = rayon::current_num_threads();
            let name = cli.command.name();
            out.finish(name, g.seed, threads, params)
        }
        Err(e) => {
            out.abandon();
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.global.log_level)
        .parse_env("BATHSPEC_LOG")
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
