mod args;
mod commands;

use clap::{CommandFactory, FromArgMatches};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let matches = args::Cli::command().get_matches();
    let cli = match args::Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    if let Err(e) = run(&cli, &matches) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: &args::Cli, matches: &clap::ArgMatches) -> anyhow::Result<()> {
    let config = args::resolve(cli, matches)?;
    if config.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(config.threads).build_global()?;
    }
    commands::dispatch(&cli.command, &cli.out, &config)
}
