use clap::Parser;

fn main() {
    let cli = blmol_cli::Cli::parse();
    if let Err(e) = blmol_cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
