use clap::Parser;
use streamnet::cli::{exit_code, run, Cli};

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error[{}]: {e}", e.category());
        std::process::exit(exit_code(&e));
    }
}
