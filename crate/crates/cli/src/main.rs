use clap::Parser;

fn main() {
    let cli = nonlocal_cli::Cli::parse();
    let mut stdout = std::io::stdout();
    match nonlocal_cli::run(cli, &mut stdout) {
        Ok(()) => {}
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            std::process::exit(failure.code);
        }
    }
}
