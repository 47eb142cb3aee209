use clap::Parser;
use gibbs_cert::cli::{run, RunConfig};

fn main() {
    let config = RunConfig::parse();
    if let Err(err) = run(&config) {
        eprintln!("gibbs-cert: {err}");
        std::process::exit(err.exit_code());
    }
}
