use clap::Parser;

fn main() {
    let code = inpaint::cli::run(inpaint::cli::Cli::parse());
    std::process::exit(code);
}
