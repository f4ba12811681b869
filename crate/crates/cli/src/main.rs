mod args;
mod commands;
mod error;
mod games;
mod output;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::Parser;

use args::{merge, Cli, Command, ConfigFile, GlobalArgs, LubaCommand};
use commands::Context;
use error::{CliError, CliResult};

fn run(cli: Cli) -> CliResult<()> {
    let file = ConfigFile::load(cli.global.config.as_ref())?;
    let global: GlobalArgs = merge(&cli.global, &file.global, "global")?;
    let ctx = Context::resolve(&global);
    let c = &file.command;
    match cli.command {
        Command::Simulate(a) => commands::simulate::run(&ctx, merge(&a, c, "simulate")?),
        Command::Micro(a) => commands::micro::run(&ctx, merge(&a, c, "micro")?),
        Command::Equilibria(a) => commands::equilibria::run(&ctx, merge(&a, c, "equilibria")?),
        Command::Bifurcate(a) => commands::bifurcate::run(&ctx, merge(&a, c, "bifurcate")?),
        Command::Luba { action } => {
            let action = match action {
                LubaCommand::Equilibrium(a) => LubaCommand::Equilibrium(merge(&a, c, "luba equilibrium")?),
                LubaCommand::Nash(a) => LubaCommand::Nash(merge(&a, c, "luba nash")?),
                LubaCommand::Fit(a) => LubaCommand::Fit(merge(&a, c, "luba fit")?),
                LubaCommand::Generate(a) => LubaCommand::Generate(merge(&a, c, "luba generate")?),
                LubaCommand::Trend(a) => LubaCommand::Trend(merge(&a, c, "luba trend")?),
            };
            commands::luba::run(&ctx, action)
        }
    }
}

/// Parses `args` (program name first) and runs the command.
fn execute<I, T>(args: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            Ok(())
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            Err(CliError::Validation(first.trim_start_matches("error: ").to_string()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::debug!("{e}");
            eprintln!("{}", e.to_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
