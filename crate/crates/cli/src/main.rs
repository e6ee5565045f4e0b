use clap::Parser;

fn main() {
    let cli = linhlc_cli::Cli::parse();
    let result = linhlc_cli::configure_threads().and_then(|_| linhlc_cli::run(cli));
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
