use clap::Parser;

fn main() {
    let cli = rast::cli::Cli::parse();
    std::process::exit(rast::cli::main_with(cli));
}
