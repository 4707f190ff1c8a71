use clap::Parser;

fn main() {
    std::process::exit(wacc::run(wacc::cli::Cli::parse()));
}
