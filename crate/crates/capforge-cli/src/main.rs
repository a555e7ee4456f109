use clap::Parser;

fn main() {
    // Usage errors exit with code 2 via clap; operational failures with 1.
    let cli = capforge_cli::Cli::parse();
    if let Err(error) = capforge_cli::run(cli) {
        eprintln!("error: {error:#}");
        std::process::exit(1);
    }
}
