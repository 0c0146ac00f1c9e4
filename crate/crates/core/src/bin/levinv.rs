use clap::Parser;

fn main() {
    let cli = levinv::cli::Cli::parse();
    std::process::exit(levinv::cli::run(cli));
}
