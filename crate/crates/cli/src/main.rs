use clap::Parser;

fn main() {
    let cli = variogram_cli::Cli::parse();
    std::process::exit(variogram_cli::run(cli));
}
