use clap::Parser;
use kv_retention::cli;

fn main() {
    let args = cli::Cli::parse();
    if let Err(err) = cli::run(args) {
        eprintln!("{}", cli::error_record(&err));
        std::process::exit(cli::exit_code(&err));
    }
}
