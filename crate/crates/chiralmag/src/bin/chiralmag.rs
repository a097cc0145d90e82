use chiralmag::cli::{run, Cli};
use clap::Parser;

fn main() {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("CHIRALMAG_LOG", "error"),
    )
    .init();
    std::process::exit(run(Cli::parse()));
}
