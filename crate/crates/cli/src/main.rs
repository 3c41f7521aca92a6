use clap::Parser;

fn main() {
    let code = hpl_cli::run(hpl_cli::Cli::parse());
    std::process::exit(code);
}
